//! `admissibility`, `kernels` and `constant`.

use std::path::Path;

use clap::Args;
use kplane::kernels::{
    constant_route_a, constant_route_b, constant_route_c, lambda_from_w, majorant_check,
    psi_from_w, psi_from_w_unchecked, recon_constant, tilde_psi, CONSTANT_TOL,
};
use kplane::special::sampled::log_grid;
use kplane::special::QuadratureSpec;
use kplane::wavelet::{check_admissibility, default_beta, RadialProfile, WaveletSpec};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::run::{read_json, usage, CliResult, Outcome, Run, Table};

/// The wavelet a command works on, as read from `--config`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaveletConfig {
    pub n: usize,
    pub k: usize,
    /// Defaults to the Laplacian-of-Gaussian pair that is admissible for k.
    #[serde(default)]
    pub wavelet: Option<WaveletSpec>,
    #[serde(default)]
    pub beta: Option<f64>,
}

#[derive(Args, Debug)]
pub struct DimArgs {
    /// Ambient dimension; overrides the config file.
    #[arg(long)]
    pub n: Option<usize>,
    /// Plane dimension; overrides the config file.
    #[arg(long)]
    pub k: Option<usize>,
}

impl DimArgs {
    pub fn resolve(&self, config: Option<&Path>) -> CliResult<WaveletConfig> {
        let mut cfg = match config {
            Some(p) => read_json::<WaveletConfig>(p)?,
            None => match (self.n, self.k) {
                (Some(n), Some(k)) => WaveletConfig {
                    n,
                    k,
                    wavelet: None,
                    beta: None,
                },
                _ => return usage("give --config <wavelet.json> or both --n and --k"),
            },
        };
        if let Some(n) = self.n {
            cfg.n = n;
        }
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if cfg.k == 0 || cfg.k >= cfg.n {
            return usage(format!("need 1 <= k < n, got n = {}, k = {}", cfg.n, cfg.k));
        }
        cfg.wavelet
            .get_or_insert_with(|| WaveletSpec::example(cfg.k));
        Ok(cfg)
    }
}

fn build(cfg: &WaveletConfig) -> CliResult<RadialProfile> {
    let spec = cfg.wavelet.as_ref().expect("resolved config has a wavelet");
    Ok(spec.build(cfg.n - cfg.k)?)
}

pub fn admissibility(run: &mut Run, args: &DimArgs, config: Option<&Path>) -> CliResult<Outcome> {
    let cfg = args.resolve(config)?;
    run.config = serde_json::to_value(&cfg).expect("serializable config");
    let w = build(&cfg)?;
    let beta = cfg.beta.unwrap_or_else(|| default_beta(cfg.k));
    let report = check_admissibility(&w, cfg.n, cfg.k, beta)?;
    run.write_json("admissibility.json", &report)?;
    Ok(Outcome {
        passed: report.passed,
        summary: serde_json::to_value(&report).expect("serializable report"),
    })
}

#[derive(Args, Debug)]
pub struct KernelArgs {
    #[command(flatten)]
    pub dims: DimArgs,
    /// Number of log-spaced radii in the table.
    #[arg(long, default_value_t = 121)]
    pub points: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub r_min: f64,
    #[arg(long, default_value_t = 10.0)]
    pub r_max: f64,
}

pub fn kernels(run: &mut Run, args: &KernelArgs, config: Option<&Path>) -> CliResult<Outcome> {
    let cfg = args.dims.resolve(config)?;
    run.config = json!({
        "wavelet": cfg,
        "points": args.points,
        "r_min": args.r_min,
        "r_max": args.r_max,
    });
    if args.points < 2 || !(args.r_min > 0.0) || !(args.r_max > args.r_min) {
        return usage("need --points >= 2 and 0 < --r-min < --r-max");
    }
    let q = QuadratureSpec::kernel();
    let w = build(&cfg)?;
    let psi = psi_from_w(&w, cfg.n, cfg.k, &q)?;
    let lam = lambda_from_w(&w, cfg.k, &q)?;
    let tp = tilde_psi(&psi, lam)?;
    let constants = recon_constant(&w, cfg.n, cfg.k, &q)?;
    let majorant = majorant_check(psi.table(), cfg.n);

    let mut table = Table::new(&["r", "psi", "lambda", "tilde_psi"]);
    for r in log_grid(args.r_min, args.r_max, args.points) {
        table.row(&[r, psi.eval(r), tp.lambda.eval(r), tp.eval(r)]);
    }
    run.write("kernels.csv", &table.finish())?;

    let summary = json!({
        "c_routeA": constants.c_route_a,
        "c_routeB": constants.c_route_b,
        "c_routeC": constants.c_route_c,
        "majorant_l1": majorant.majorant_l1,
        "majorizable": majorant.is_majorizable,
        "tilde_psi_route_gap": tp.route_discrepancy,
    });
    run.write_json("kernels.json", &summary)?;
    Ok(Outcome {
        passed: majorant.is_majorizable,
        summary,
    })
}

pub fn constant(run: &mut Run, args: &DimArgs, config: Option<&Path>) -> CliResult<Outcome> {
    let cfg = args.resolve(config)?;
    run.config = serde_json::to_value(&cfg).expect("serializable config");
    let (n, k) = (cfg.n, cfg.k);
    let branch = if k % 2 == 1 {
        "k_odd_moment"
    } else {
        "k_even_log_moment"
    };
    let w = build(&cfg)?;
    let summary = if w.is_zero() {
        json!({
            "c_routeA": 0.0,
            "c_routeB": 0.0,
            "c_routeC": 0.0,
            "relative_gap": 0.0,
            "branch": branch,
            "degenerate": true,
        })
    } else {
        let beta = cfg.beta.unwrap_or_else(|| default_beta(k));
        let report = check_admissibility(&w, n, k, beta)?;
        if !report.passed {
            let summary = json!({
                "admissible": false,
                "branch": branch,
                "admissibility": report,
            });
            run.write_json("constant.json", &summary)?;
            return Ok(Outcome {
                passed: false,
                summary,
            });
        }
        let q = QuadratureSpec::kernel();
        let (a, tail) = constant_route_a(&w, n, k, &q)?;
        let b = constant_route_b(&w, n, k)?;
        let c = constant_route_c(&psi_from_w_unchecked(&w, n, k, &q)?)?;
        json!({
            "c_routeA": a,
            "c_routeB": b,
            "c_routeC": c,
            "relative_gap": (a - b).abs() / b.abs(),
            "route_a_tail": tail,
            "branch": branch,
            "degenerate": false,
        })
    };
    run.write_json("constant.json", &summary)?;
    let gap = summary["relative_gap"].as_f64().unwrap_or(f64::NAN);
    Ok(Outcome {
        passed: gap <= CONSTANT_TOL,
        summary,
    })
}
