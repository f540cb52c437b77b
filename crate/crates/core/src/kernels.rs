//! The kernel chain built from an admissible profile w on ℝ^{n−k}.
//!
//! * ψ(r) = c_{k,n} r^{2−n} ∫₀^r s^{n−k−1} w(s)(r² − s²)^{k/2−1} ds on ℝⁿ,
//! * w̃(s) = s^{(n−k)/2−1} w(√s),
//! * λ(s) = s⁻¹ I₊^{k/2+1}[w̃](s²),
//! * ψ̃(x) = ∫₁^∞ ψ(|x|/t) t^{−1−n} dt = c₁|x|^{1−n} λ(|x|),
//!
//! together with three evaluations of the reconstruction constant.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::abel::abel_quadrature_supported;
use crate::special::fractional::rl_fractional_integral_split;
use crate::special::gamma::{gamma, sphere_area};
use crate::special::quad::{adaptive_gk, tanh_sinh, QuadratureSpec};
use crate::special::sampled::{fit_power_law, log_grid, Extrapolation, SampledFunction1D};
use crate::wavelet::{check_admissibility, default_beta, RadialProfile, Representation};

/// Left end of every kernel table.
pub const TABLE_R_MIN: f64 = 1e-4;
/// Right end of every kernel table (kernel units).
pub const TABLE_R_MAX: f64 = 50.0;
const TABLE_POINTS: usize = 1200;
/// Largest relative disagreement tolerated between the two ψ̃ routes.
pub const ROUTE_TOL: f64 = 1e-5;

/// c_{k,n} = σ_{k−1}σ_{n−k−1}/σ_{n−1}.
pub fn c_kn(n: usize, k: usize) -> Result<f64> {
    check_dims(n, k)?;
    Ok(sphere_area(k)? * sphere_area(n - k)? / sphere_area(n)?)
}

/// c₁ = π^{k/2}σ_{n−k−1}/(2σ_{n−1}).
pub fn c1(n: usize, k: usize) -> Result<f64> {
    check_dims(n, k)?;
    Ok(PI.powf(k as f64 / 2.0) * sphere_area(n - k)? / (2.0 * sphere_area(n)?))
}

fn check_dims(n: usize, k: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(Error::Domain(format!(
            "kernels need 1 <= k < n, got n = {n}, k = {k}"
        )));
    }
    Ok(())
}

/// Radius beyond which the profile is treated as zero inside quadratures.
fn effective_support(w: &RadialProfile) -> f64 {
    w.support_radius(1e-17)
}

/// Fits power laws over the first and last half decade of a table and
/// installs them as extrapolation rules.
fn attach_power_tails(mut t: SampledFunction1D) -> SampledFunction1D {
    let xs = t.abscissae().to_vec();
    let ys = t.values().to_vec();
    let (x0, xn) = (t.first_x(), t.last_x());
    let tail = |lo: f64, hi: f64| match fit_power_law(&xs, &ys, lo, hi) {
        Some(p) if p.is_finite() => Extrapolation::PowerLaw(p),
        _ => Extrapolation::Zero,
    };
    t.left = if ys[0] == 0.0 {
        Extrapolation::Zero
    } else {
        tail(x0, x0 * 10f64.powf(0.5))
    };
    // values at the right end that sit at round-off level carry no tail information
    let peak = ys.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    t.right = if ys.last().unwrap().abs() <= 1e-12 * peak {
        Extrapolation::Zero
    } else {
        tail(xn / 10f64.powf(0.5), xn)
    };
    t
}

/// ψ tabulated on a log grid, with the profile it came from.
#[derive(Debug, Clone)]
pub struct PsiKernel {
    pub profile: RadialProfile,
    pub n: usize,
    pub k: usize,
    pub c_kn: f64,
    /// Exponent of the O(r^{k−n}) bound near the origin (k ≥ 2 only).
    pub bound_exponent: Option<f64>,
    w: RadialProfile,
    q: QuadratureSpec,
}

impl PsiKernel {
    pub fn eval(&self, r: f64) -> f64 {
        self.profile.eval(r)
    }

    /// ψ(r) by fresh quadrature instead of the table.
    pub fn eval_direct(&self, r: f64) -> Result<f64> {
        psi_value(&self.w, self.n, self.k, self.c_kn, r, &self.q)
    }

    pub fn table(&self) -> &SampledFunction1D {
        match &self.profile.repr {
            Representation::Tabulated(t) => t,
            Representation::GaussianPoly(_) => unreachable!("psi is always tabulated"),
        }
    }

    pub fn wavelet(&self) -> &RadialProfile {
        &self.w
    }

    pub fn quadrature(&self) -> &QuadratureSpec {
        &self.q
    }
}

fn psi_value(
    w: &RadialProfile,
    n: usize,
    k: usize,
    ckn: f64,
    r: f64,
    q: &QuadratureSpec,
) -> Result<f64> {
    if w.is_zero() {
        return Ok(0.0);
    }
    let support = effective_support(w);
    let abel = abel_quadrature_supported(|s| w.eval(s), r, n, k, support, q)?;
    Ok(ckn * r.powf(2.0 - n as f64) * abel)
}

/// ψ from an admissible w; fails when w is not admissible.
pub fn psi_from_w(w: &RadialProfile, n: usize, k: usize, q: &QuadratureSpec) -> Result<PsiKernel> {
    let report = check_admissibility(w, n, k, default_beta(k))?;
    if !report.passed {
        return Err(Error::Precondition(format!(
            "wavelet is not admissible for (n, k) = ({n}, {k}): signed moments {:?}",
            report.moments.iter().map(|m| m.signed).collect::<Vec<_>>()
        )));
    }
    psi_from_w_unchecked(w, n, k, q)
}

/// ψ from any integrable radial w, without the admissibility gate.
pub fn psi_from_w_unchecked(
    w: &RadialProfile,
    n: usize,
    k: usize,
    q: &QuadratureSpec,
) -> Result<PsiKernel> {
    check_dims(n, k)?;
    if w.dim != n - k {
        return Err(Error::Domain(format!(
            "wavelet lives on R^{} but n - k = {}",
            w.dim,
            n - k
        )));
    }
    let ckn = c_kn(n, k)?;
    let xs = log_grid(TABLE_R_MIN, TABLE_R_MAX, TABLE_POINTS);
    let ys: Result<Vec<f64>> = xs
        .par_iter()
        .map(|&r| psi_value(w, n, k, ckn, r, q))
        .collect();
    let table = attach_power_tails(SampledFunction1D::new(
        xs,
        ys?,
        Extrapolation::Zero,
        Extrapolation::Zero,
    )?);
    Ok(PsiKernel {
        profile: RadialProfile::tabulated(table, n),
        n,
        k,
        c_kn: ckn,
        bound_exponent: (k >= 2).then_some(k as f64 - n as f64),
        w: w.clone(),
        q: *q,
    })
}

/// w̃(s) = s^{(m)/2−1} w(√s) for a profile on ℝ^m.
pub fn tilde_w_value(w: &RadialProfile, s: f64) -> f64 {
    let v = w.eval(s.sqrt());
    if v == 0.0 {
        return 0.0;
    }
    s.powf(w.dim as f64 / 2.0 - 1.0) * v
}

/// w̃ tabulated on a log grid covering the support of w.
pub fn tilde_w(w: &RadialProfile, n: usize, k: usize) -> Result<SampledFunction1D> {
    check_dims(n, k)?;
    if w.dim != n - k {
        return Err(Error::Domain(format!(
            "wavelet lives on R^{} but n - k = {}",
            w.dim,
            n - k
        )));
    }
    let hi = {
        let r = effective_support(w);
        if r.is_finite() && r > 0.0 {
            r * r
        } else {
            TABLE_R_MAX * TABLE_R_MAX
        }
    };
    let left = Extrapolation::PowerLaw(w.dim as f64 / 2.0 - 1.0);
    let t = SampledFunction1D::log_spaced(
        1e-8,
        hi,
        2400,
        |s| tilde_w_value(w, s),
        left,
        Extrapolation::Zero,
    )?;
    Ok(t)
}

/// λ(s) = s⁻¹ I₊^{k/2+1}[w̃](s²) for w̃ given as a callable.
pub fn lambda_value<G: Fn(f64) -> f64>(wt: G, k: usize, s: f64, q: &QuadratureSpec) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!(
            "lambda evaluated at non-positive s = {s}"
        )));
    }
    Ok(rl_fractional_integral_split(wt, k as f64 / 2.0 + 1.0, s * s, q)? / s)
}

/// λ on the kernel log grid, from a tabulated w̃.
pub fn lambda_profile(
    wt: &SampledFunction1D,
    k: usize,
    q: &QuadratureSpec,
) -> Result<SampledFunction1D> {
    if k == 0 {
        return Err(Error::Domain("lambda needs k >= 1".into()));
    }
    lambda_table(|s| wt.eval(s), wt.is_zero(), k, q)
}

/// λ on the kernel log grid, evaluating w̃ from w directly.
pub fn lambda_from_w(w: &RadialProfile, k: usize, q: &QuadratureSpec) -> Result<SampledFunction1D> {
    lambda_table(|s| tilde_w_value(w, s), w.is_zero(), k, q)
}

fn lambda_table<G: Fn(f64) -> f64 + Sync>(
    wt: G,
    zero: bool,
    k: usize,
    q: &QuadratureSpec,
) -> Result<SampledFunction1D> {
    let xs = log_grid(TABLE_R_MIN, TABLE_R_MAX, TABLE_POINTS);
    if zero {
        let n = xs.len();
        return SampledFunction1D::new(xs, vec![0.0; n], Extrapolation::Zero, Extrapolation::Zero);
    }
    let ys: Result<Vec<f64>> = xs.par_iter().map(|&s| lambda_value(&wt, k, s, q)).collect();
    Ok(attach_power_tails(SampledFunction1D::new(
        xs,
        ys?,
        Extrapolation::Zero,
        Extrapolation::Zero,
    )?))
}

/// ψ̃ through its λ representation, plus the measured route disagreement.
#[derive(Debug, Clone)]
pub struct TildePsi {
    pub lambda: SampledFunction1D,
    pub c1: f64,
    pub n: usize,
    pub k: usize,
    /// Largest sup-relative gap between the two routes on the check radii.
    pub route_discrepancy: f64,
}

impl TildePsi {
    /// ψ̃(x) as a function of r = |x|.
    pub fn eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let l = self.lambda.eval(r);
        if l == 0.0 {
            return 0.0;
        }
        self.c1 * r.powf(1.0 - self.n as f64) * l
    }

    /// ψ̃_ε(x) = ε^{−n} ψ̃(x/ε).
    pub fn eval_scaled(&self, eps: f64, r: f64) -> f64 {
        eps.powi(-(self.n as i32)) * self.eval(r / eps)
    }

    /// ∫_{ℝⁿ} ψ̃ = c₁σ_{n−1}∫₀^∞ λ over the table and its tails.
    pub fn integral(&self) -> Result<f64> {
        Ok(self.c1 * sphere_area(self.n)? * table_integral(&self.lambda, 0.0)?)
    }

    /// ψ̃ as a tabulated radial profile on ℝⁿ.
    pub fn profile(&self) -> Result<RadialProfile> {
        let xs = self.lambda.abscissae().to_vec();
        let ys = xs.iter().map(|&r| self.eval(r)).collect();
        let shift = 1.0 - self.n as f64;
        let shifted = |e: Extrapolation| match e {
            Extrapolation::PowerLaw(p) => Extrapolation::PowerLaw(p + shift),
            Extrapolation::Zero => Extrapolation::Zero,
        };
        let t = SampledFunction1D::new(
            xs,
            ys,
            shifted(self.lambda.left),
            shifted(self.lambda.right),
        )?;
        Ok(RadialProfile::tabulated(t, self.n))
    }
}

/// ∫₀^∞ f(r) r^{power} dr for a table with power-law tails, by cubic
/// Hermite panels between abscissae.
fn table_integral(t: &SampledFunction1D, power: f64) -> Result<f64> {
    let xs = t.abscissae();
    let mut total = 0.0;
    let stride = 16;
    let mut breaks: Vec<f64> = xs.iter().step_by(stride).copied().collect();
    if *breaks.last().unwrap() != t.last_x() {
        breaks.push(t.last_x());
    }
    for seg in breaks.windows(2) {
        total += adaptive_gk(|r| t.eval(r) * r.powf(power), seg[0], seg[1], 1e-11, 1e-300)?.value;
    }
    let (x0, xn) = (t.first_x(), t.last_x());
    let y0 = t.values()[0];
    let yn = *t.values().last().unwrap();
    if let Extrapolation::PowerLaw(p) = t.left {
        if y0 != 0.0 {
            let e = p + power + 1.0;
            if e <= 0.0 {
                return Err(Error::Divergence {
                    condition: format!(
                        "table integral diverges at the origin (exponent {})",
                        p + power
                    ),
                });
            }
            total += y0 * x0.powf(power + 1.0) / e;
        }
    }
    if let Extrapolation::PowerLaw(p) = t.right {
        if yn != 0.0 {
            let e = p + power + 1.0;
            if e >= 0.0 {
                return Err(Error::Divergence {
                    condition: format!(
                        "table integral diverges at infinity (exponent {})",
                        p + power
                    ),
                });
            }
            total += yn * xn.powf(power + 1.0) / (-e);
        }
    }
    Ok(total)
}

/// ψ̃(r) = ∫₀¹ ψ(rv) v^{n−1} dv, with ψ evaluated by fresh quadrature.
pub fn tilde_psi_direct(psi: &PsiKernel, r: f64) -> Result<f64> {
    if psi.wavelet().is_zero() {
        return Ok(0.0);
    }
    let n = psi.n as i32;
    let mut err = None;
    let f = |v: f64| {
        if v <= 0.0 {
            return 0.0;
        }
        match psi.eval_direct(r * v) {
            Ok(p) => p * v.powi(n - 1),
            Err(_) => f64::NAN,
        }
    };
    let mut total = 0.0;
    let mut lo = 0.0;
    for hi in [1e-3, 1e-2, 0.1, 0.3, 1.0] {
        match adaptive_gk(f, lo, hi, psi.q.rel_tol, 1e-300) {
            Ok(e) => total += e.value,
            Err(e) => {
                err = Some(e);
                break;
            }
        }
        lo = hi;
    }
    match err {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// Radii at which the two ψ̃ routes are compared.
pub const ROUTE_CHECK_RADII: [f64; 8] = [0.1, 0.25, 0.5, 0.9, 1.4, 2.0, 3.2, 5.0];

/// Builds ψ̃ from λ and checks it against the direct route.
pub fn tilde_psi(psi: &PsiKernel, lam: SampledFunction1D) -> Result<TildePsi> {
    let mut t = TildePsi {
        lambda: lam,
        c1: c1(psi.n, psi.k)?,
        n: psi.n,
        k: psi.k,
        route_discrepancy: 0.0,
    };
    let direct: Result<Vec<f64>> = ROUTE_CHECK_RADII
        .par_iter()
        .map(|&r| tilde_psi_direct(psi, r))
        .collect();
    let direct = direct?;
    let table: Vec<f64> = ROUTE_CHECK_RADII.iter().map(|&r| t.eval(r)).collect();
    t.route_discrepancy = sup_relative(&table, &direct);
    if t.route_discrepancy > ROUTE_TOL {
        return Err(Error::Consistency {
            what: "tilde-psi routes".into(),
            observed: t.route_discrepancy,
            allowed: ROUTE_TOL,
        });
    }
    Ok(t)
}

/// max|a − b| / max|b|, or max|a − b| when b vanishes.
pub fn sup_relative(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let diff = a
        .iter()
        .zip(b)
        .fold(0.0, |m: f64, (x, y)| m.max((x - y).abs()));
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// The reconstruction constant by three routes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconConstants {
    /// π^{n/2}/Γ((n−k)/2)·∫₀^∞ λ.
    pub c_route_a: f64,
    /// Closed form in terms of ∫ s^{n−1}w (k odd) or ∫ s^{n−1}w log s (k even).
    pub c_route_b: f64,
    /// σ_{n−1}∫₀^∞ ψ(r) r^{n−1} dr.
    pub c_route_c: f64,
    /// Estimated error of the λ tail beyond the last piece.
    pub route_a_tail: f64,
}

/// Relative agreement required between routes A and B.
pub const CONSTANT_TOL: f64 = 1e-5;

pub fn recon_constant(
    w: &RadialProfile,
    n: usize,
    k: usize,
    q: &QuadratureSpec,
) -> Result<ReconConstants> {
    check_dims(n, k)?;
    if w.is_zero() {
        return Ok(ReconConstants {
            c_route_a: 0.0,
            c_route_b: 0.0,
            c_route_c: 0.0,
            route_a_tail: 0.0,
        });
    }
    let report = check_admissibility(w, n, k, default_beta(k))?;
    if !report.passed {
        return Err(Error::Precondition(format!(
            "wavelet is not admissible for (n, k) = ({n}, {k})"
        )));
    }
    let (a, tail) = constant_route_a(w, n, k, q)?;
    let b = constant_route_b(w, n, k)?;
    let psi = psi_from_w_unchecked(w, n, k, q)?;
    let c = constant_route_c(&psi)?;
    let gap = (a - b).abs() / b.abs();
    if !(gap <= CONSTANT_TOL) {
        return Err(Error::Consistency {
            what: "reconstruction constant routes A and B".into(),
            observed: gap,
            allowed: CONSTANT_TOL,
        });
    }
    Ok(ReconConstants {
        c_route_a: a,
        c_route_b: b,
        c_route_c: c,
        route_a_tail: tail,
    })
}

/// Route A; returns the constant and the size of the extrapolated tail.
pub fn constant_route_a(
    w: &RadialProfile,
    n: usize,
    k: usize,
    q: &QuadratureSpec,
) -> Result<(f64, f64)> {
    check_dims(n, k)?;
    let pref = PI.powf(n as f64 / 2.0) / gamma((n - k) as f64 / 2.0)?;
    let lam = |s: f64| lambda_value(|x| tilde_w_value(w, x), k, s, q);
    let lam_ok = |s: f64| lam(s).unwrap_or(f64::NAN);

    // head: λ(s) ~ s^{p} below the first piece
    let s0 = 1e-6;
    let p0 = (lam(2.0 * s0)?.abs() / lam(s0)?.abs()).log2();
    let head = if lam(s0)? == 0.0 || !p0.is_finite() {
        0.0
    } else {
        lam(s0)? * s0 / (p0 + 1.0)
    };

    let mut total = head;
    let mut scale = head.abs();
    let mut a = s0;
    let s_max = 1e3;
    while a < s_max {
        let b = (2.0 * a).min(s_max);
        let mut breaks = vec![a];
        if a < 1.0 && b > 1.0 {
            breaks.push(1.0);
        }
        breaks.push(b);
        for seg in breaks.windows(2) {
            // the absolute floor keeps the rule from chasing round-off once λ is negligible
            let piece = adaptive_gk(lam_ok, seg[0], seg[1], q.rel_tol, 1e-3 * q.rel_tol * scale)?;
            total += piece.value;
            scale = scale.max(total.abs()).max(piece.value.abs());
        }
        a = b;
        // λ decays exponentially for k even; stop once it is negligible
        if lam(a)?.abs() * a < 1e-13 * scale {
            return Ok((pref * total, 0.0));
        }
    }
    let (l1, l2) = (lam(s_max / 2.0)?, lam(s_max)?);
    let mut tail = 0.0;
    if l2.abs() * s_max > 1e-12 * scale && l1 != 0.0 {
        let p = (l2.abs() / l1.abs()).log2();
        if p >= -1.0 {
            return Err(Error::Divergence {
                condition: format!("lambda decays like s^{p:.3}; its integral diverges"),
            });
        }
        tail = l2 * s_max / (-p - 1.0);
        total += tail;
    }
    Ok((pref * total, pref * tail))
}

/// Route B from moments of w.
pub fn constant_route_b(w: &RadialProfile, n: usize, k: usize) -> Result<f64> {
    check_dims(n, k)?;
    let pref = PI.powf(n as f64 / 2.0) / gamma((n - k) as f64 / 2.0)?;
    if k % 2 == 1 {
        let mom = radial_power_integral(w, n as f64 - 1.0, false)?;
        Ok(pref * gamma(-(k as f64) / 2.0)? * mom)
    } else {
        let half = k / 2;
        let fact: f64 = (1..=half).map(|i| i as f64).product();
        let sign = if (1 + half).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        let mom = radial_power_integral(w, n as f64 - 1.0, true)?;
        Ok(pref * 2.0 * sign / fact * mom)
    }
}

/// ∫₀^∞ s^{power} w(s) ds, optionally with a log s factor.
fn radial_power_integral(w: &RadialProfile, power: f64, with_log: bool) -> Result<f64> {
    if let (Some(p), false) = (w.as_gaussian_poly(), with_log) {
        // signed_moment carries σ_{m−1} and the r^{m−1} weight
        let j = power - (w.dim as f64 - 1.0);
        return Ok(p.signed_moment(j)? / sphere_area(w.dim)?);
    }
    let f = |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        let v = w.eval(s);
        if v == 0.0 {
            return 0.0;
        }
        let base = s.powf(power) * v;
        if with_log {
            base * s.ln()
        } else {
            base
        }
    };
    let support = effective_support(w);
    if !support.is_finite() {
        return Err(Error::Unsupported(
            "route B needs a wavelet with finite effective support".into(),
        ));
    }
    let mut total = tanh_sinh(
        |s, dl, _| f(if s < 0.5 { dl } else { s }),
        0.0,
        1.0f64.min(support),
        1e-13,
        1e-300,
    )?
    .value;
    let mut a = 1.0;
    while a < support {
        let b = (a + 0.5).min(support);
        total += adaptive_gk(f, a, b, 1e-13, 1e-300)?.value;
        a = b;
    }
    Ok(total)
}

/// Route C: σ_{n−1}∫ψ(r)r^{n−1}dr over the table and its tails.
pub fn constant_route_c(psi: &PsiKernel) -> Result<f64> {
    Ok(sphere_area(psi.n)? * table_integral(psi.table(), psi.n as f64 - 1.0)?)
}

/// Result of [`majorant_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MajorantReport {
    pub is_majorizable: bool,
    pub majorant_l1: f64,
    pub head_exponent: f64,
    pub tail_exponent: f64,
}

/// Least decreasing radial majorant of a tabulated profile on ℝⁿ and its L¹
/// norm, including the power-law tails.
pub fn majorant_check(table: &SampledFunction1D, n: usize) -> MajorantReport {
    let ys = table.values();
    let xs = table.abscissae();
    if ys.iter().all(|&v| v == 0.0) {
        return MajorantReport {
            is_majorizable: true,
            majorant_l1: 0.0,
            head_exponent: 0.0,
            tail_exponent: f64::NEG_INFINITY,
        };
    }
    let mut env = vec![0.0; ys.len()];
    let mut run: f64 = 0.0;
    for i in (0..ys.len()).rev() {
        run = run.max(ys[i].abs());
        env[i] = run;
    }
    let nf = n as f64;
    let head = match table.left {
        Extrapolation::PowerLaw(p) if ys[0] != 0.0 => p.min(0.0),
        _ => 0.0,
    };
    let tail = match table.right {
        Extrapolation::PowerLaw(p) if *ys.last().unwrap() != 0.0 => p,
        _ => f64::NEG_INFINITY,
    };
    let sigma = sphere_area(n).unwrap_or(f64::NAN);
    // ∫ e(r) r^{n−1} dr = ∫ e r^n d(ln r); trapezoid in ln r
    let mut body = 0.0;
    for i in 0..xs.len() - 1 {
        let (a, b) = (xs[i], xs[i + 1]);
        let fa = env[i] * a.powf(nf);
        let fb = env[i + 1] * b.powf(nf);
        body += 0.5 * (fa + fb) * (b / a).ln();
    }
    let x0 = xs[0];
    let xn = *xs.last().unwrap();
    let head_part = if head + nf > 0.0 {
        env[0] * x0.powf(nf) / (head + nf)
    } else {
        f64::INFINITY
    };
    let tail_part = if tail == f64::NEG_INFINITY {
        0.0
    } else if tail + nf < 0.0 {
        env[env.len() - 1] * xn.powf(nf) / (-(tail + nf))
    } else {
        f64::INFINITY
    };
    let l1 = sigma * (head_part + body + tail_part);
    MajorantReport {
        is_majorizable: l1.is_finite() && head > -nf,
        majorant_l1: l1,
        head_exponent: head,
        tail_exponent: tail,
    }
}
