//! `reconstruct` runs a ReconConfig; `report` judges a finished run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use kplane::radon::AffineRule;
use kplane::recon::{
    convergence_report_csv, csv_number, csv_text, probe_csv, reconstruct as run_reconstruction,
    report_metadata, ConvergenceReport, PhantomSpec, ReconConfig,
};
use serde_json::json;

use crate::run::{read_json, usage, CliResult, Outcome, Run, Table};

pub const REPORT_JSON: &str = "report.json";

#[derive(Args, Debug)]
pub struct ReconstructArgs {
    /// ReconConfig JSON; the global --config is used when this is absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

pub fn reconstruct(
    run: &mut Run,
    args: &ReconstructArgs,
    config: Option<&Path>,
    seed: Option<u64>,
) -> CliResult<Outcome> {
    let Some(path) = args.input.as_deref().or(config) else {
        return usage("reconstruct needs --config <recon.json>");
    };
    let mut cfg: ReconConfig = read_json(path)?;
    if let Some(s) = seed {
        cfg.mc.seed = s;
        if let Some(AffineRule::MonteCarlo(mc)) = &mut cfg.rule {
            mc.seed = s;
        }
    }
    // grid phantoms are found relative to the config file
    if let PhantomSpec::Grid { file } = &mut cfg.phantom {
        if file.is_relative() {
            if let Some(dir) = path.parent() {
                *file = dir.join(&*file);
            }
        }
    }
    run.config = serde_json::to_value(&cfg).expect("serializable config");
    run.seed = Some(cfg.mc.seed);

    let report = run_reconstruction(&cfg)?;
    run.write("report.csv", &convergence_report_csv(&report))?;
    run.write("probes.csv", &probe_csv(&report))?;
    if !report.factorization.is_empty() {
        let mut t = Table::new(&["t", "lhs", "rhs", "combined_std", "sigmas"]);
        for f in &report.factorization {
            t.row(&[f.t, f.lhs, f.rhs, f.combined_std, f.sigmas]);
        }
        run.write("factorization.csv", &t.finish())?;
    }
    run.write_json("metadata.json", &report_metadata(&report))?;
    run.write_json(REPORT_JSON, &report)?;
    Ok(Outcome {
        passed: true,
        summary: summarize(&report),
    })
}

/// Per-space error sequences ordered from the coarsest scale down.
fn sequences(report: &ConvergenceReport) -> BTreeMap<String, Vec<(f64, f64)>> {
    let mut by_space: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in &report.rows {
        by_space
            .entry(r.space.clone())
            .or_default()
            .push((r.scale, r.relative));
    }
    for seq in by_space.values_mut() {
        seq.sort_by(|a, b| b.0.total_cmp(&a.0));
    }
    by_space
}

fn strictly_decreasing(seq: &[(f64, f64)]) -> bool {
    seq.windows(2).all(|w| w[1].1 < w[0].1)
}

fn summarize(report: &ConvergenceReport) -> serde_json::Value {
    let spaces: BTreeMap<String, serde_json::Value> = sequences(report)
        .into_iter()
        .map(|(space, seq)| {
            let v = json!({
                "scales": seq.iter().map(|p| p.0).collect::<Vec<_>>(),
                "relative_errors": seq.iter().map(|p| p.1).collect::<Vec<_>>(),
                "strictly_decreasing": strictly_decreasing(&seq),
                "final_relative_error": seq.last().map(|p| p.1),
            });
            (space, v)
        })
        .collect();
    let max_sigmas = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0_f64, f64::max);
    json!({
        "method": report.method,
        "n": report.n,
        "k": report.k,
        "seed": report.seed,
        "constant_used": report.constant_used,
        "spaces": spaces,
        "pointwise_relative": report
            .pointwise
            .iter()
            .map(|p| json!({"scale": p.scale, "relative_max_error": p.relative_max_error}))
            .collect::<Vec<_>>(),
        "max_probe_sigmas": max_sigmas(&mut report.probes.iter().map(|p| p.sigmas)),
        "max_factorization_sigmas": max_sigmas(&mut report.factorization.iter().map(|f| f.sigmas)),
    })
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Output directory of a previous `reconstruct` run, or its report.json.
    #[arg(long)]
    pub input: PathBuf,
}

pub fn report(run: &mut Run, args: &ReportArgs) -> CliResult<Outcome> {
    let path = if args.input.is_dir() {
        args.input.join(REPORT_JSON)
    } else {
        args.input.clone()
    };
    run.config = json!({ "input": path });
    let report: ConvergenceReport = read_json(&path)?;
    run.seed = Some(report.seed);

    let mut csv = String::from("space,scale,relative_error\n");
    let mut passed = true;
    for (space, seq) in sequences(&report) {
        passed &= strictly_decreasing(&seq);
        for (scale, rel) in &seq {
            csv.push_str(&format!(
                "{},{},{}\n",
                csv_text(&space),
                csv_number(*scale),
                csv_number(*rel)
            ));
        }
    }
    run.write("summary.csv", &csv)?;
    let mut summary = summarize(&report);
    summary["all_strictly_decreasing"] = json!(passed);
    run.write_json("summary.json", &summary)?;
    Ok(Outcome { passed, summary })
}
