//! Reconstruction pipelines: the limit W_t*f̂ → c·f, the scale integral
//! ∫W_t*f̂ dt/t = c·f and its ridgelet form ∫V_t*U_t f dt/t^{1+k} = c·f,
//! with errors measured in lattice norms.
//!
//! The field-level computation uses W_t*f̂ = f∗ψ_t and
//! ∫_ε^∞W_t*f̂ dt/t = f∗ψ̃_ε. Probe points re-derive the same numbers by
//! backprojecting f̂ directly, so both routes are exercised.

use std::fmt::Write as _;
use std::path::PathBuf;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grassmann::{stream_rng, AffinePlane, McEstimate, McSpec};
use crate::grid::GridFunction;
use crate::kernels::{
    lambda_from_w, majorant_check, psi_from_w, recon_constant, tilde_psi, PsiKernel,
    ReconConstants, TildePsi,
};
use crate::lattice::{norm, LatticeSpace};
use crate::radon::{
    kplane_numeric, random_point, u_t, u_t_grid, v_t_star, w_star, AffineRule, BallPhantom,
    GaussianPhantom, Phantom,
};
use crate::special::bessel::bessel_i_scaled;
use crate::special::gamma::{ln_gamma, sphere_area};
use crate::special::quad::{adaptive_gk, gauss_legendre, QuadratureSpec};
use crate::special::sampled::{Extrapolation, SampledFunction1D};
use crate::wavelet::{RadialProfile, Representation, WaveletSpec};

/// Factorization residuals beyond this many combined standard errors abort a
/// ridgelet run.
pub const FACTORIZATION_SIGMAS: f64 = 5.0;
const RADIAL_POINTS: usize = 1025;
const GL_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub half_width: f64,
    pub cells: usize,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhantomSpec {
    Gaussian {
        width: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Ball {
        radius: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// A JSON-serialised [`GridFunction`]; its geometry replaces `grid`.
    Grid { file: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReconMethod {
    /// W_t*f̂ at each t of a decreasing schedule.
    Limit { t: Vec<f64> },
    /// ∫_ε^T W_t*f̂ dt/t for each ε; `log_points` nodes in log t overall.
    ScaleIntegral {
        eps: Vec<f64>,
        t_max: f64,
        log_points: usize,
    },
    /// ∫_ε^T V_t*U_t f dt/t^{1+k} with w = u∗v from the wavelet's factors.
    Ridgelet {
        eps: Vec<f64>,
        t_max: f64,
        log_points: usize,
    },
}

fn default_crop() -> f64 {
    0.9
}

fn default_probe_count() -> usize {
    5
}

fn default_probe_radius() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconConfig {
    pub n: usize,
    pub k: usize,
    pub wavelet: WaveletSpec,
    pub phantom: PhantomSpec,
    pub method: ReconMethod,
    pub spaces: Vec<LatticeSpace>,
    pub mc: McSpec,
    pub grid: GridGeometry,
    /// Explicit probe points; when empty, `probe_count` points are drawn
    /// uniformly from the ball of radius `probe_radius` about the origin.
    #[serde(default)]
    pub probes: Vec<Vec<f64>>,
    #[serde(default = "default_probe_count")]
    pub probe_count: usize,
    #[serde(default = "default_probe_radius")]
    pub probe_radius: f64,
    /// Linear fraction of the box kept when measuring norm errors.
    #[serde(default = "default_crop")]
    pub crop: f64,
    /// Rule for the backprojection integrals at probes; Monte Carlo with
    /// `mc` when absent.
    #[serde(default)]
    pub rule: Option<AffineRule>,
}

impl ReconConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k >= self.n {
            return domain(format!(
                "need 1 <= k < n, got n = {}, k = {}",
                self.n, self.k
            ));
        }
        self.mc.validate()?;
        for s in &self.spaces {
            s.validate()?;
        }
        if !(self.grid.half_width > 0.0) || self.grid.cells == 0 {
            return domain("grid needs a positive half width and at least one cell");
        }
        if !(self.crop > 0.0 && self.crop <= 1.0) {
            return domain(format!(
                "crop fraction must lie in (0, 1], got {}",
                self.crop
            ));
        }
        if self.probes.iter().any(|p| p.len() != self.n) {
            return domain(format!("probe points must have {} coordinates", self.n));
        }
        match &self.method {
            ReconMethod::Limit { t } => {
                if t.iter().any(|&v| !(v > 0.0)) {
                    return domain("t values must be positive");
                }
                if t.windows(2).any(|w| w[1] >= w[0]) {
                    return domain("t schedule must be strictly decreasing");
                }
            }
            ReconMethod::ScaleIntegral {
                eps,
                t_max,
                log_points,
            }
            | ReconMethod::Ridgelet {
                eps,
                t_max,
                log_points,
            } => {
                if eps.iter().any(|&e| !(e > 0.0) || e >= *t_max) {
                    return domain("every eps must satisfy 0 < eps < t_max");
                }
                if *log_points == 0 {
                    return domain("log_points must be positive");
                }
            }
        }
        Ok(())
    }

    fn rule_for(&self, salt: u64) -> AffineRule {
        match self.rule {
            Some(AffineRule::MonteCarlo(mc)) => AffineRule::MonteCarlo(mc.reseeded(salt)),
            Some(r) => r,
            None => AffineRule::MonteCarlo(self.mc.reseeded(salt)),
        }
    }

    fn probe_points(&self) -> Vec<Vec<f64>> {
        if !self.probes.is_empty() {
            return self.probes.clone();
        }
        let mut rng = stream_rng(self.mc.seed, u64::MAX);
        (0..self.probe_count)
            .map(|_| random_point(self.n, self.probe_radius, &mut rng))
            .collect()
    }
}

/// A phantom ready for evaluation.
#[derive(Debug, Clone)]
pub enum LoadedPhantom {
    Gaussian(GaussianPhantom),
    Ball(BallPhantom),
    Grid(GridFunction),
}

impl LoadedPhantom {
    pub fn load(spec: &PhantomSpec, n: usize) -> Result<Self> {
        let centre = |c: &Option<Vec<f64>>| -> Result<Vec<f64>> {
            let c = c.clone().unwrap_or_else(|| vec![0.0; n]);
            if c.len() != n {
                return domain(format!("phantom centre must have {n} coordinates"));
            }
            Ok(c)
        };
        Ok(match spec {
            PhantomSpec::Gaussian {
                width,
                center,
                amplitude,
            } => Self::Gaussian(GaussianPhantom::new(centre(center)?, *width, *amplitude)?),
            PhantomSpec::Ball {
                radius,
                center,
                amplitude,
            } => {
                if !(*radius > 0.0) {
                    return domain("ball radius must be positive");
                }
                Self::Ball(BallPhantom {
                    center: centre(center)?,
                    radius: *radius,
                    amplitude: *amplitude,
                })
            }
            PhantomSpec::Grid { file } => {
                let text = std::fs::read_to_string(file)
                    .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", file.display())))?;
                let g: GridFunction = serde_json::from_str(&text)
                    .map_err(|e| Error::Invalid(format!("{}: {e}", file.display())))?;
                g.validate()?;
                if g.dim() != n {
                    return domain(format!("grid phantom lives in R^{} but n = {n}", g.dim()));
                }
                Self::Grid(g)
            }
        })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Self::Gaussian(g) => g.eval(x),
            Self::Ball(b) => b.eval(x),
            Self::Grid(g) => g.interpolate(x),
        }
    }

    pub fn transform(&self, tau: &AffinePlane) -> Result<f64> {
        match self {
            Self::Gaussian(g) => g.radon(tau),
            Self::Ball(b) => b.radon(tau),
            Self::Grid(g) => kplane_numeric(g, tau, 1),
        }
    }

    pub fn grid(&self, geometry: &GridGeometry, n: usize) -> Result<GridFunction> {
        match self {
            Self::Grid(g) => Ok(g.clone()),
            _ => GridFunction::from_fn(
                vec![0.0; n],
                vec![geometry.half_width; n],
                vec![geometry.cells; n],
                |x| self.eval(x),
            ),
        }
    }

    /// U_t f(τ).
    pub fn u_t(&self, u: &RadialProfile, t: f64, tau: &AffinePlane) -> Result<f64> {
        let q = QuadratureSpec::transform();
        match self {
            Self::Gaussian(g) => u_t(g, u, t, tau, &q),
            Self::Ball(b) => u_t(b, u, t, tau, &q),
            Self::Grid(g) => u_t_grid(g, u, t, tau),
        }
    }
}

/// Mean of e^{−|x − ρθ|²/w²} over θ ∈ S^{n−1}, with |x| = r:
/// e^{−(r−ρ)²/w²}·Γ(n/2)(z/2)^{−ν}e^{−z}I_ν(z), ν = n/2 − 1, z = 2rρ/w².
fn gaussian_sphere_mean(n: usize, w: f64, r: f64, rho: f64) -> Result<f64> {
    let w2 = w * w;
    let z = 2.0 * r * rho / w2;
    if z == 0.0 {
        return Ok((-(r * r + rho * rho) / w2).exp());
    }
    let base = (-(r - rho) * (r - rho) / w2).exp();
    if n == 3 {
        return Ok(base * -(-2.0 * z).exp_m1() / (2.0 * z));
    }
    let nu = n as f64 / 2.0 - 1.0;
    let pref = (ln_gamma(n as f64 / 2.0)? - nu * (z / 2.0).ln()).exp();
    Ok(base * pref * bessel_i_scaled(nu, z)?)
}

/// (f∗K)(x) for f = A e^{−|x − c|²/w²} and radial K, at |x − c| = r.
fn gaussian_radial_convolution<K: Fn(f64) -> f64>(
    g: &GaussianPhantom,
    kernel: &K,
    n: usize,
    r: f64,
) -> Result<f64> {
    if g.amplitude == 0.0 {
        return Ok(0.0);
    }
    let w = g.width;
    let lo = (r - 9.0 * w).max(0.0);
    let hi = r + 9.0 * w;
    let mut cuts = vec![lo];
    let mut x = lo + w;
    while x < hi {
        cuts.push(x);
        x += w;
    }
    if r > lo && r < hi {
        cuts.push(r);
    }
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let sigma = sphere_area(n)?;
    let err = std::cell::RefCell::new(None);
    let integrand = |rho: f64| {
        let kv = kernel(rho);
        if kv == 0.0 || rho == 0.0 {
            return 0.0;
        }
        match gaussian_sphere_mean(n, w, r, rho) {
            Ok(m) => kv * rho.powi(n as i32 - 1) * m,
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    };
    let mut total = 0.0;
    for pair in cuts.windows(2) {
        total += adaptive_gk(integrand, pair[0], pair[1], 1e-10, 1e-15 * w.powi(n as i32))?.value;
    }
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    Ok(g.amplitude * sigma * total)
}

/// Discrete convolution of a grid with a radial kernel. The centre cell gets
/// the kernel's integral over the ball of one cell's volume, which keeps
/// integrable singularities at the origin finite.
fn grid_radial_convolution<K: Fn(f64) -> f64 + Sync>(
    f: &GridFunction,
    kernel: &K,
    reach: f64,
) -> Result<GridFunction> {
    let n = f.dim();
    let vol = f.cell_volume();
    let rho0 = (vol / crate::special::gamma::ball_volume(n)?).powf(1.0 / n as f64);
    let sigma = sphere_area(n)?;
    let centre_weight = sigma
        * adaptive_gk(
            |r| kernel(r) * r.powi(n as i32 - 1),
            0.0,
            rho0,
            1e-10,
            1e-300,
        )?
        .value;
    let cells = f.cells().to_vec();
    let span: Vec<isize> = (0..n)
        .map(|a| ((reach / f.spacing(a)).ceil() as isize).min(cells[a] as isize))
        .collect();
    let mut taps: Vec<(Vec<isize>, f64)> = Vec::new();
    let mut off: Vec<isize> = span.iter().map(|s| -s).collect();
    'outer: loop {
        let d = (0..n)
            .map(|a| (off[a] as f64 * f.spacing(a)).powi(2))
            .sum::<f64>()
            .sqrt();
        if d == 0.0 {
            taps.push((off.clone(), centre_weight));
        } else if d <= reach {
            let kv = kernel(d);
            if kv != 0.0 {
                taps.push((off.clone(), kv * vol));
            }
        }
        let mut a = 0;
        loop {
            if a == n {
                break 'outer;
            }
            off[a] += 1;
            if off[a] <= span[a] {
                break;
            }
            off[a] = -span[a];
            a += 1;
        }
    }
    let vals = f.values();
    let out: Vec<f64> = (0..f.len())
        .into_par_iter()
        .map(|i| {
            let mut idx = vec![0usize; n];
            let mut tgt = vec![0usize; n];
            f.multi_index(i, &mut idx);
            let mut acc = 0.0;
            'tap: for (o, wt) in &taps {
                for a in 0..n {
                    let j = idx[a] as isize - o[a];
                    if j < 0 || j >= cells[a] as isize {
                        continue 'tap;
                    }
                    tgt[a] = j as usize;
                }
                acc += wt * vals[f.linear_index(&tgt)];
            }
            acc
        })
        .collect();
    f.with_values(out)
}

/// f∗K on the grid and at the probes.
struct Convolver<'a> {
    phantom: &'a LoadedPhantom,
    template: &'a GridFunction,
    n: usize,
}

impl Convolver<'_> {
    fn field<K: Fn(f64) -> f64 + Sync>(&self, kernel: &K, reach: f64) -> Result<GridFunction> {
        match self.phantom {
            LoadedPhantom::Gaussian(g) => {
                let c = DVector::from_column_slice(&g.center);
                let mut r_max: f64 = 0.0;
                let hw = self.template.half_width();
                let ctr = self.template.center();
                for corner in 0..(1usize << self.n) {
                    let d2: f64 = (0..self.n)
                        .map(|a| {
                            let s = if corner >> a & 1 == 1 { 1.0 } else { -1.0 };
                            (ctr[a] + s * hw[a] - c[a]).powi(2)
                        })
                        .sum();
                    r_max = r_max.max(d2.sqrt());
                }
                let xs: Vec<f64> = (0..RADIAL_POINTS)
                    .map(|i| r_max * i as f64 / (RADIAL_POINTS - 1) as f64)
                    .collect();
                let ys: Result<Vec<f64>> = xs
                    .par_iter()
                    .map(|&r| gaussian_radial_convolution(g, kernel, self.n, r))
                    .collect();
                let table =
                    SampledFunction1D::new(xs, ys?, Extrapolation::Zero, Extrapolation::Zero)?;
                Ok(self.template.map_centers(|x| {
                    let r = x
                        .iter()
                        .zip(&g.center)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    table.eval(r.min(r_max))
                }))
            }
            _ => grid_radial_convolution(self.template, kernel, reach),
        }
    }

    fn at<K: Fn(f64) -> f64 + Sync>(
        &self,
        kernel: &K,
        reach: f64,
        x: &[f64],
        field: &GridFunction,
    ) -> Result<f64> {
        match self.phantom {
            LoadedPhantom::Gaussian(g) => {
                let r = x
                    .iter()
                    .zip(&g.center)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                gaussian_radial_convolution(g, kernel, self.n, r)
            }
            _ => {
                let _ = (kernel, reach);
                Ok(field.interpolate(x))
            }
        }
    }
}

/// Radius beyond which a tabulated kernel is negligible, capped at `cap`.
fn kernel_reach(p: &RadialProfile, cap: f64) -> f64 {
    let r = p.support_radius(1e-10);
    if r.is_finite() {
        r.min(cap)
    } else {
        cap
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub scale: f64,
    pub space: String,
    pub error: f64,
    /// error / ‖f‖_X.
    pub relative: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointwiseRow {
    pub scale: f64,
    pub max_error: f64,
    /// max_error / max|f|.
    pub relative_max_error: f64,
    /// Field value at the origin divided by f(0), to compare with c.
    pub calibration: f64,
}

/// One probe point at one scale: the fast convolution value against the
/// direct backprojection value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub scale: f64,
    pub point: Vec<f64>,
    pub fast: f64,
    pub direct: f64,
    pub std_error: f64,
    /// |fast − direct| in units of std_error.
    pub sigmas: f64,
    /// The neglected part ∫_T^∞ (scale-integral methods only).
    pub tail: f64,
    /// c·f at the point.
    pub target: f64,
}

/// V_t*U_t f(x) against t^k W_t*f̂(x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorRow {
    pub t: f64,
    pub point: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub combined_std: f64,
    pub sigmas: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub method: String,
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub constant_used: f64,
    pub routes: ReconConstants,
    pub crop: f64,
    /// Sup-relative gap between the two ψ̃ routes (scale-integral methods).
    pub tilde_psi_route_gap: Option<f64>,
    pub rows: Vec<ErrorRow>,
    pub pointwise: Vec<PointwiseRow>,
    pub probes: Vec<ProbeRow>,
    pub factorization: Vec<FactorRow>,
}

struct Prepared {
    phantom: LoadedPhantom,
    truth: GridFunction,
    truth_crop: GridFunction,
    truth_norms: Vec<f64>,
    w: RadialProfile,
    psi: PsiKernel,
    routes: ReconConstants,
    probes: Vec<Vec<f64>>,
}

fn prepare(cfg: &ReconConfig, w: RadialProfile) -> Result<Prepared> {
    cfg.validate()?;
    let q = QuadratureSpec::kernel();
    let phantom = LoadedPhantom::load(&cfg.phantom, cfg.n)?;
    let truth = phantom.grid(&cfg.grid, cfg.n)?;
    let truth_crop = truth.crop(cfg.crop)?;
    let truth_norms: Result<Vec<f64>> = cfg.spaces.iter().map(|s| norm(&truth_crop, s)).collect();
    let psi = psi_from_w(&w, cfg.n, cfg.k, &q)?;
    let routes = recon_constant(&w, cfg.n, cfg.k, &q)?;
    Ok(Prepared {
        phantom,
        truth,
        truth_crop,
        truth_norms: truth_norms?,
        w,
        psi,
        routes,
        probes: cfg.probe_points(),
    })
}

fn error_rows(
    cfg: &ReconConfig,
    p: &Prepared,
    scale: f64,
    field: &GridFunction,
    c: f64,
) -> Result<(Vec<ErrorRow>, PointwiseRow)> {
    let recon = if c != 0.0 {
        field.map(|v| v / c)
    } else {
        field.map(|_| 0.0)
    };
    let diff = recon.combine(1.0, &p.truth, -1.0)?.crop(cfg.crop)?;
    let mut rows = Vec::with_capacity(cfg.spaces.len());
    for (s, &fx) in cfg.spaces.iter().zip(&p.truth_norms) {
        let e = norm(&diff, s)?;
        rows.push(ErrorRow {
            scale,
            space: s.to_string(),
            error: e,
            relative: if fx > 0.0 { e / fx } else { e },
            std_error: 0.0,
        });
    }
    let fmax = p.truth_crop.max_abs();
    let max_error = diff.max_abs();
    let origin = vec![0.0; cfg.n];
    let f0 = p.phantom.eval(&origin);
    let calibration = if f0 != 0.0 {
        field.interpolate(&origin) / f0
    } else {
        0.0
    };
    Ok((
        rows,
        PointwiseRow {
            scale,
            max_error,
            relative_max_error: if fmax > 0.0 {
                max_error / fmax
            } else {
                max_error
            },
            calibration,
        },
    ))
}

fn sigmas(a: f64, b: f64, s: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        0.0
    } else if s > 0.0 {
        d / s
    } else {
        f64::INFINITY
    }
}

/// Theorem-1 style reconstruction: W_t*f̂/c at each t of the schedule.
pub fn reconstruct_limit(cfg: &ReconConfig) -> Result<ConvergenceReport> {
    let ts = match &cfg.method {
        ReconMethod::Limit { t } => t.clone(),
        _ => return domain("reconstruct_limit needs a limit schedule"),
    };
    let w = cfg.wavelet.build(cfg.n - cfg.k)?;
    let p = prepare(cfg, w)?;
    let maj = majorant_check(p.psi.table(), cfg.n);
    if !maj.is_majorizable {
        return Err(Error::Precondition(format!(
            "psi has no integrable radial majorant (head exponent {}, tail exponent {})",
            maj.head_exponent, maj.tail_exponent
        )));
    }
    let c = p.routes.c_route_a;
    let conv = Convolver {
        phantom: &p.phantom,
        template: &p.truth,
        n: cfg.n,
    };
    let diam = 2.0 * cfg.grid.half_width * (cfg.n as f64).sqrt();
    let mut rows = Vec::new();
    let mut pointwise = Vec::new();
    let mut probes = Vec::new();
    for (ti, &t) in ts.iter().enumerate() {
        let nf = cfg.n as i32;
        let kernel = |r: f64| t.powi(-nf) * p.psi.eval(r / t);
        let reach = t * kernel_reach(&p.psi.profile, diam / t);
        let field = conv.field(&kernel, reach)?;
        let (r, pw) = error_rows(cfg, &p, t, &field, c)?;
        rows.extend(r);
        pointwise.push(pw);
        let found: Result<Vec<ProbeRow>> = p
            .probes
            .iter()
            .enumerate()
            .map(|(pi, x)| {
                let fast = conv.at(&kernel, reach, x, &field)?;
                let rule = cfg.rule_for(((ti as u64) << 20) | pi as u64);
                let d = w_star(
                    |tau| p.phantom.transform(tau).unwrap_or(f64::NAN),
                    &p.w,
                    t,
                    x,
                    cfg.n,
                    cfg.k,
                    &rule,
                )?;
                Ok(ProbeRow {
                    scale: t,
                    point: x.clone(),
                    fast,
                    direct: d.estimate,
                    std_error: d.std_error,
                    sigmas: sigmas(fast, d.estimate, d.std_error),
                    tail: 0.0,
                    target: c * p.phantom.eval(x),
                })
            })
            .collect();
        probes.extend(found?);
    }
    Ok(ConvergenceReport {
        method: "limit".into(),
        n: cfg.n,
        k: cfg.k,
        seed: cfg.mc.seed,
        constant_used: c,
        routes: p.routes,
        crop: cfg.crop,
        tilde_psi_route_gap: None,
        rows,
        pointwise,
        probes,
        factorization: Vec::new(),
    })
}

/// Nodes and weights in log t for ∫_a^b g(t) dt/t, split at every ε so each
/// ∫_ε^T is a suffix sum. Returns (nodes, weights, index of the first node
/// of each ε).
fn log_nodes(eps: &[f64], t_max: f64, log_points: usize) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let mut cuts: Vec<f64> = eps.to_vec();
    cuts.push(t_max);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let span = (t_max / cuts[0]).ln();
    let (gx, gw) = gauss_legendre(GL_POINTS);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut starts = Vec::new();
    for pair in cuts.windows(2) {
        starts.push((pair[0], nodes.len()));
        let (a, b) = (pair[0].ln(), pair[1].ln());
        let panels =
            (((b - a) / span * log_points as f64 / GL_POINTS as f64).round() as usize).max(1);
        let h = (b - a) / panels as f64;
        for j in 0..panels {
            let lo = a + j as f64 * h;
            for (x, wt) in gx.iter().zip(&gw) {
                nodes.push((lo + 0.5 * h * (x + 1.0)).exp());
                weights.push(0.5 * h * wt);
            }
        }
    }
    let first = eps
        .iter()
        .map(|e| {
            starts
                .iter()
                .find(|(c, _)| c == e)
                .map(|(_, i)| *i)
                .unwrap_or(nodes.len())
        })
        .collect();
    (nodes, weights, first)
}

fn tilde_table(t: &TildePsi) -> Result<SampledFunction1D> {
    match t.profile()?.repr {
        Representation::Tabulated(tab) => Ok(tab),
        Representation::GaussianPoly(_) => unreachable!("tilde psi is tabulated"),
    }
}

fn scale_integral_impl(cfg: &ReconConfig, ridgelet: bool) -> Result<ConvergenceReport> {
    let (eps, t_max, log_points) = match &cfg.method {
        ReconMethod::ScaleIntegral {
            eps,
            t_max,
            log_points,
        } if !ridgelet => (eps.clone(), *t_max, *log_points),
        ReconMethod::Ridgelet {
            eps,
            t_max,
            log_points,
        } if ridgelet => (eps.clone(), *t_max, *log_points),
        _ => return domain("method does not match the requested reconstruction"),
    };
    let m = cfg.n - cfg.k;
    let factors = if ridgelet {
        Some(cfg.wavelet.factors(m)?.ok_or_else(|| {
            Error::Invalid("ridgelet reconstruction needs a wavelet given as a pair u, v".into())
        })?)
    } else {
        None
    };
    let w = cfg.wavelet.build(m)?;
    let p = prepare(cfg, w)?;
    let q = QuadratureSpec::kernel();
    let tilde = tilde_psi(&p.psi, lambda_from_w(&p.w, cfg.k, &q)?)?;
    let maj = majorant_check(&tilde_table(&tilde)?, cfg.n);
    if !maj.is_majorizable {
        return Err(Error::Precondition(format!(
            "tilde psi has no integrable radial majorant (head exponent {}, tail exponent {})",
            maj.head_exponent, maj.tail_exponent
        )));
    }
    let c = p.routes.c_route_a;
    let conv = Convolver {
        phantom: &p.phantom,
        template: &p.truth,
        n: cfg.n,
    };
    let diam = 2.0 * cfg.grid.half_width * (cfg.n as f64).sqrt();
    let tilde_profile = tilde.profile()?;
    let reach_of = |e: f64| e * kernel_reach(&tilde_profile, diam / e);
    let nf = cfg.n as i32;

    // direct route: W_t*f̂ (and V_t*U_t f) at every node and probe
    let (nodes, weights, first) = log_nodes(&eps, t_max, log_points);
    let jobs: Vec<(usize, usize)> = (0..p.probes.len())
        .flat_map(|pi| (0..nodes.len()).map(move |ni| (pi, ni)))
        .collect();
    let evals: Result<Vec<(McEstimate, Option<FactorRow>)>> = jobs
        .par_iter()
        .map(|&(pi, ni)| {
            let x = &p.probes[pi];
            let t = nodes[ni];
            let rule = cfg.rule_for(((ni as u64) << 20) | pi as u64);
            let wf = w_star(
                |tau| p.phantom.transform(tau).unwrap_or(f64::NAN),
                &p.w,
                t,
                x,
                cfg.n,
                cfg.k,
                &rule,
            )?;
            let Some((u, v)) = &factors else {
                return Ok((wf, None));
            };
            let vu = v_t_star(
                |tau| p.phantom.u_t(u, t, tau).unwrap_or(f64::NAN),
                v,
                t,
                x,
                cfg.n,
                cfg.k,
                &rule,
            )?;
            let tk = t.powi(cfg.k as i32);
            let (lhs, rhs) = (vu.estimate, tk * wf.estimate);
            let combined = (vu.std_error.powi(2) + (tk * wf.std_error).powi(2)).sqrt();
            let row = FactorRow {
                t,
                point: x.clone(),
                lhs,
                rhs,
                combined_std: combined,
                sigmas: sigmas(lhs, rhs, combined),
            };
            // the ridgelet integral runs over V_t*U_t f / t^k
            Ok((
                McEstimate {
                    estimate: lhs / tk,
                    std_error: vu.std_error / tk,
                },
                Some(row),
            ))
        })
        .collect();
    let evals = evals?;
    let factorization: Vec<FactorRow> = evals.iter().filter_map(|(_, r)| r.clone()).collect();
    if let Some(bad) = factorization
        .iter()
        .find(|r| r.sigmas > FACTORIZATION_SIGMAS)
    {
        return Err(Error::Consistency {
            what: format!(
                "V_t*U_t f = t^k W_t*f^ at t = {:.4}, x = {:?}",
                bad.t, bad.point
            ),
            observed: bad.sigmas,
            allowed: FACTORIZATION_SIGMAS,
        });
    }

    let tail_kernel = |r: f64| tilde.eval_scaled(t_max, r);
    let tail_field = conv.field(&tail_kernel, reach_of(t_max))?;
    let mut rows = Vec::new();
    let mut pointwise = Vec::new();
    let mut probes = Vec::new();
    for (ei, &e) in eps.iter().enumerate() {
        let kernel = |r: f64| e.powi(-nf) * tilde.eval(r / e);
        let reach = reach_of(e);
        let field = conv.field(&kernel, reach)?;
        let (r, pw) = error_rows(cfg, &p, e, &field, c)?;
        rows.extend(r);
        pointwise.push(pw);
        for (pi, x) in p.probes.iter().enumerate() {
            let full = conv.at(&kernel, reach, x, &field)?;
            let tail = conv.at(&tail_kernel, reach_of(t_max), x, &tail_field)?;
            let mut est = 0.0;
            let mut var = 0.0;
            for ni in first[ei]..nodes.len() {
                let ev = &evals[pi * nodes.len() + ni].0;
                est += weights[ni] * ev.estimate;
                var += (weights[ni] * ev.std_error).powi(2);
            }
            let fast = full - tail;
            // fast-path quadrature tolerance enters as a floor
            let sd = (var + (1e-8 * full.abs().max(tail.abs())).powi(2)).sqrt();
            probes.push(ProbeRow {
                scale: e,
                point: x.clone(),
                fast,
                direct: est,
                std_error: sd,
                sigmas: sigmas(fast, est, sd),
                tail,
                target: c * p.phantom.eval(x),
            });
        }
    }
    Ok(ConvergenceReport {
        method: if ridgelet {
            "ridgelet"
        } else {
            "scale_integral"
        }
        .into(),
        n: cfg.n,
        k: cfg.k,
        seed: cfg.mc.seed,
        constant_used: c,
        routes: p.routes,
        crop: cfg.crop,
        tilde_psi_route_gap: Some(tilde.route_discrepancy),
        rows,
        pointwise,
        probes,
        factorization,
    })
}

/// Theorem-2 style reconstruction: f∗ψ̃_ε/c for each ε, cross-checked at the
/// probes against log-t quadrature of W_t*f̂ over [ε, T].
pub fn reconstruct_scale_integral(cfg: &ReconConfig) -> Result<ConvergenceReport> {
    scale_integral_impl(cfg, false)
}

/// The ridgelet form: V_t*U_t f is checked against t^k W_t*f̂ at every node
/// and probe, then integrated like the scale integral.
pub fn reconstruct_ridgelet(cfg: &ReconConfig) -> Result<ConvergenceReport> {
    scale_integral_impl(cfg, true)
}

pub fn reconstruct(cfg: &ReconConfig) -> Result<ConvergenceReport> {
    match cfg.method {
        ReconMethod::Limit { .. } => reconstruct_limit(cfg),
        ReconMethod::ScaleIntegral { .. } => reconstruct_scale_integral(cfg),
        ReconMethod::Ridgelet { .. } => reconstruct_ridgelet(cfg),
    }
}

/// Number formatting shared by every CSV this crate writes.
pub fn csv_number(v: f64) -> String {
    format!("{v:.12e}")
}

/// A text cell, quoted when it holds a comma or a quote.
pub fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// `scale,space,error,stderr`, one row per scale and space, LF endings.
pub fn convergence_report_csv(report: &ConvergenceReport) -> String {
    let mut out = String::from("scale,space,error,stderr\n");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            csv_number(r.scale),
            csv_text(&r.space),
            csv_number(r.error),
            csv_number(r.std_error)
        );
    }
    out
}

/// Probe comparisons as CSV.
pub fn probe_csv(report: &ConvergenceReport) -> String {
    let mut out = String::from("scale,point,fast,direct,stderr,sigmas,tail,target\n");
    for r in &report.probes {
        let point = r
            .point
            .iter()
            .map(|v| csv_number(*v))
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            csv_number(r.scale),
            point,
            csv_number(r.fast),
            csv_number(r.direct),
            csv_number(r.std_error),
            csv_number(r.sigmas),
            csv_number(r.tail),
            csv_number(r.target)
        );
    }
    out
}

/// Seed, constants and tolerances accompanying the CSV.
pub fn report_metadata(report: &ConvergenceReport) -> serde_json::Value {
    serde_json::json!({
        "method": report.method,
        "n": report.n,
        "k": report.k,
        "seed": report.seed,
        "constant_used": report.constant_used,
        "c_route_a": report.routes.c_route_a,
        "c_route_b": report.routes.c_route_b,
        "c_route_c": report.routes.c_route_c,
        "crop": report.crop,
        "tilde_psi_route_gap": report.tilde_psi_route_gap,
        "tolerances": {
            "constant_routes": crate::kernels::CONSTANT_TOL,
            "tilde_psi_routes": crate::kernels::ROUTE_TOL,
            "factorization_sigmas": FACTORIZATION_SIGMAS,
        },
    })
}
