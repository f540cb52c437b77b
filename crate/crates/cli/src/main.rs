//! `kplane`: reproducible experiments on the k-plane transform, its
//! wavelet inversions and Banach lattice norms.
//!
//! Exit codes: 0 success, 1 a checked property failed, 2 usage or
//! configuration error, 3 numeric divergence.

// `!(x > 0.0)` is the NaN-rejecting form used for every range check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod norms_cmd;
mod radon_cmd;
mod recon_cmd;
mod run;
mod wavelet_cmds;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use run::{CliError, Run};

#[derive(Parser, Debug)]
#[command(
    name = "kplane",
    version,
    about = "k-plane transform and wavelet inversion experiments"
)]
struct Cli {
    /// Master seed for every Monte Carlo stream; overrides config files.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory receiving the artifacts and manifest.json.
    #[arg(long, global = true, default_value = "kplane-out")]
    out_dir: PathBuf,
    /// JSON configuration for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the moment, local and decay conditions of a wavelet.
    Admissibility(wavelet_cmds::DimArgs),
    /// Tabulate psi, lambda and tilde psi and summarise the constants.
    Kernels(wavelet_cmds::KernelArgs),
    /// Compare the reconstruction constant across its evaluation routes.
    Constant(wavelet_cmds::DimArgs),
    /// k-plane transform tables of a phantom.
    Radon(radon_cmd::RadonArgs),
    /// A lattice norm of a grid function.
    Norms(norms_cmd::NormsArgs),
    /// Run a reconstruction experiment from a ReconConfig.
    Reconstruct(recon_cmd::ReconstructArgs),
    /// Summarise a reconstruction and check that its errors decrease.
    Report(recon_cmd::ReportArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Admissibility(_) => "admissibility",
            Command::Kernels(_) => "kernels",
            Command::Constant(_) => "constant",
            Command::Radon(_) => "radon",
            Command::Norms(_) => "norms",
            Command::Reconstruct(_) => "reconstruct",
            Command::Report(_) => "report",
        }
    }
}

fn dispatch(cli: &Cli, run: &mut Run) -> run::CliResult<run::Outcome> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return run::usage("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
    }
    let config = cli.config.as_deref();
    match &cli.command {
        Command::Admissibility(a) => wavelet_cmds::admissibility(run, a, config),
        Command::Kernels(a) => wavelet_cmds::kernels(run, a, config),
        Command::Constant(a) => wavelet_cmds::constant(run, a, config),
        Command::Radon(a) => radon_cmd::radon(run, a, config, cli.seed),
        Command::Norms(a) => norms_cmd::norms(run, a, config),
        Command::Reconstruct(a) => recon_cmd::reconstruct(run, a, config, cli.seed),
        Command::Report(a) => recon_cmd::report(run, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut run = Run::new(cli.command.name(), cli.out_dir.clone());
    run.seed = cli.seed;
    run.config = serde_json::json!({ "config_path": cli.config });

    let (code, error) = match dispatch(&cli, &mut run) {
        Ok(outcome) => {
            let text =
                serde_json::to_string_pretty(&outcome.summary).expect("serializable summary");
            // a closed pipe downstream is not an error of this run
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            (u8::from(!outcome.passed), None)
        }
        Err(e) => {
            eprintln!("kplane {}: {e}", cli.command.name());
            (e.exit_code(), Some(e.to_string()))
        }
    };
    if let Err(e) = run.finish(code, error) {
        eprintln!("kplane: cannot write manifest: {e}");
        return ExitCode::from(2);
    }
    ExitCode::from(code)
}
