//! `radon`: sinogram tables of f̂ against the plane distance, optionally
//! with the smoothed backprojection W_t*f̂ along the same ray.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use kplane::grassmann::{AffinePlane, LinearSubspace, McSpec};
use kplane::radon::{w_star, AffineRule, Phantom, SolmonPhantom};
use kplane::recon::{LoadedPhantom, PhantomSpec};
use kplane::wavelet::WaveletSpec;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::run::{read_json, usage, CliResult, Outcome, Run, Table};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadonPhantom {
    Gaussian {
        width: f64,
    },
    Ball {
        radius: f64,
    },
    /// (2 + |x|)^{−n/p}/log(2 + |x|).
    Solmon {
        p: f64,
    },
    /// A JSON grid function.
    Grid {
        file: PathBuf,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadonConfig {
    pub n: usize,
    pub k: usize,
    pub phantom: RadonPhantom,
    #[serde(default = "default_s_max")]
    pub s_max: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    /// Scale of the W_t* column; omitted when absent.
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default = "default_mc")]
    pub mc: McSpec,
}

fn default_s_max() -> f64 {
    3.0
}

fn default_points() -> usize {
    31
}

fn default_mc() -> McSpec {
    McSpec {
        sample_count: 4000,
        seed: 0,
        stream_count: 8,
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomKind {
    Gaussian,
    Ball,
    Solmon,
    CustomJson,
}

#[derive(Args, Debug)]
pub struct RadonArgs {
    #[arg(long, value_enum)]
    pub phantom: Option<PhantomKind>,
    /// Ambient dimension.
    #[arg(long)]
    pub n: Option<usize>,
    /// Plane dimension.
    #[arg(long)]
    pub k: Option<usize>,
    /// Gaussian width.
    #[arg(long, default_value_t = 1.0)]
    pub width: f64,
    /// Ball radius.
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    /// Integrability exponent of the Solmon phantom.
    #[arg(long)]
    pub p: Option<f64>,
    /// Grid function JSON for `--phantom custom-json`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Adds W_t*f̂ at x = s·e_n with the Example wavelet at this scale.
    #[arg(long)]
    pub t: Option<f64>,
    /// Largest plane distance in the table [default: 3].
    #[arg(long)]
    pub s_max: Option<f64>,
    /// Number of plane distances [default: 31].
    #[arg(long)]
    pub points: Option<usize>,
    /// Monte Carlo samples for `--t` [default: 4000].
    #[arg(long)]
    pub samples: Option<usize>,
    /// Independent RNG streams for `--t` [default: 8].
    #[arg(long)]
    pub streams: Option<usize>,
}

impl RadonArgs {
    fn phantom(&self) -> CliResult<Option<RadonPhantom>> {
        Ok(match self.phantom {
            None => None,
            Some(PhantomKind::Gaussian) => Some(RadonPhantom::Gaussian { width: self.width }),
            Some(PhantomKind::Ball) => Some(RadonPhantom::Ball {
                radius: self.radius,
            }),
            Some(PhantomKind::Solmon) => match self.p {
                Some(p) => Some(RadonPhantom::Solmon { p }),
                None => return usage("--phantom solmon needs --p"),
            },
            Some(PhantomKind::CustomJson) => match &self.input {
                Some(f) => Some(RadonPhantom::Grid { file: f.clone() }),
                None => return usage("--phantom custom-json needs --input <grid.json>"),
            },
        })
    }

    fn resolve(&self, config: Option<&Path>, seed: Option<u64>) -> CliResult<RadonConfig> {
        let phantom = self.phantom()?;
        let mut cfg = match config {
            Some(p) => read_json::<RadonConfig>(p)?,
            None => match (self.n, self.k, phantom.clone()) {
                (Some(n), Some(k), Some(phantom)) => RadonConfig {
                    n,
                    k,
                    phantom,
                    s_max: default_s_max(),
                    points: default_points(),
                    t: None,
                    mc: default_mc(),
                },
                _ => return usage("give --config <radon.json> or --phantom, --n and --k"),
            },
        };
        if let Some(p) = phantom {
            cfg.phantom = p;
        }
        cfg.n = self.n.unwrap_or(cfg.n);
        cfg.k = self.k.unwrap_or(cfg.k);
        cfg.t = self.t.or(cfg.t);
        cfg.s_max = self.s_max.unwrap_or(cfg.s_max);
        cfg.points = self.points.unwrap_or(cfg.points);
        cfg.mc.sample_count = self.samples.unwrap_or(cfg.mc.sample_count);
        cfg.mc.stream_count = self.streams.unwrap_or(cfg.mc.stream_count);
        cfg.mc.seed = seed.unwrap_or(cfg.mc.seed);
        if cfg.k == 0 || cfg.k >= cfg.n {
            return usage(format!("need 1 <= k < n, got n = {}, k = {}", cfg.n, cfg.k));
        }
        if cfg.points < 2 || !(cfg.s_max > 0.0) {
            return usage("need --points >= 2 and --s-max > 0");
        }
        if let Some(t) = cfg.t {
            if !(t > 0.0) {
                return usage(format!("--t must be positive, got {t}"));
            }
        }
        Ok(cfg)
    }
}

enum Source {
    Loaded(LoadedPhantom),
    Solmon(SolmonPhantom),
}

impl Source {
    fn transform(&self, tau: &AffinePlane) -> kplane::Result<f64> {
        match self {
            Source::Loaded(p) => p.transform(tau),
            Source::Solmon(p) => p.radon(tau),
        }
    }
}

pub fn radon(
    run: &mut Run,
    args: &RadonArgs,
    config: Option<&Path>,
    seed: Option<u64>,
) -> CliResult<Outcome> {
    let cfg = args.resolve(config, seed)?;
    run.config = serde_json::to_value(&cfg).expect("serializable config");
    run.seed = Some(cfg.mc.seed);
    let (n, k) = (cfg.n, cfg.k);
    let source = match &cfg.phantom {
        RadonPhantom::Gaussian { width } => Source::Loaded(LoadedPhantom::load(
            &PhantomSpec::Gaussian {
                width: *width,
                center: None,
                amplitude: 1.0,
            },
            n,
        )?),
        RadonPhantom::Ball { radius } => Source::Loaded(LoadedPhantom::load(
            &PhantomSpec::Ball {
                radius: *radius,
                center: None,
                amplitude: 1.0,
            },
            n,
        )?),
        RadonPhantom::Solmon { p } => {
            if !(*p >= 1.0) {
                return usage(format!("Solmon phantom needs p >= 1, got {p}"));
            }
            Source::Solmon(SolmonPhantom { n, p: *p })
        }
        RadonPhantom::Grid { file } => Source::Loaded(LoadedPhantom::load(
            &PhantomSpec::Grid { file: file.clone() },
            n,
        )?),
    };
    let sub = LinearSubspace::coordinate(n, k)?;
    // planes span(e_1..e_k) + s·e_n, so the distance to the origin is s
    let plane = |s: f64| {
        AffinePlane::new(
            sub.clone(),
            DVector::from_fn(n, |i, _| if i == n - 1 { s } else { 0.0 }),
        )
    };
    let rule = AffineRule::MonteCarlo(cfg.mc);
    let wavelet = match cfg.t {
        Some(_) => Some(WaveletSpec::example(k).build(n - k)?),
        None => None,
    };

    let mut header = vec!["s", "fhat"];
    if wavelet.is_some() {
        header.extend(["wt_backprojection", "wt_stderr"]);
    }
    let mut table = Table::new(&header);
    let mut peak: f64 = 0.0;
    for i in 0..cfg.points {
        let s = cfg.s_max * i as f64 / (cfg.points - 1) as f64;
        let fhat = source.transform(&plane(s)?)?;
        peak = peak.max(fhat.abs());
        let mut row = vec![s, fhat];
        if let (Some(w), Some(t)) = (&wavelet, cfg.t) {
            let mut x = vec![0.0; n];
            x[n - 1] = s;
            let est = w_star(
                |tau: &AffinePlane| source.transform(tau).unwrap_or(f64::NAN),
                w,
                t,
                &x,
                n,
                k,
                &rule,
            )?;
            row.extend([est.estimate, est.std_error]);
        }
        table.row(&row);
    }
    run.write("sinogram.csv", &table.finish())?;
    let summary = json!({
        "n": n,
        "k": k,
        "phantom": cfg.phantom,
        "points": cfg.points,
        "s_max": cfg.s_max,
        "max_abs_fhat": peak,
        "backprojection_scale": cfg.t,
        "divergent": false,
    });
    run.write_json("radon.json", &summary)?;
    Ok(Outcome {
        passed: true,
        summary,
    })
}
