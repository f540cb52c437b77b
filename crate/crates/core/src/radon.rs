//! The k-plane transform f̂, its dual φ̌, and the smoothed operators W_t*,
//! U_t and V_t*.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grassmann::{
    haar_special_orthogonal, integrate_affine_around, integrate_lines, mc_mean, AffinePlane,
    LinearSubspace, McEstimate, McSpec,
};
use crate::grid::GridFunction;
use crate::kernels::c_kn;
use crate::special::abel::abel_quadrature_supported;
use crate::special::gamma::{ball_volume, gamma, sphere_area};
use crate::special::quad::{adaptive_gk, QuadratureSpec};
use crate::special::sampled::{log_grid, Extrapolation, SampledFunction1D};
use crate::wavelet::RadialProfile;

/// Consecutive non-shrinking doublings after which a tail is declared divergent.
const DIVERGENCE_RUN: usize = 5;
/// Fitted decay (halvings per doubling) below which growth counts as divergent.
const DIVERGENCE_DECAY: f64 = 0.05;
/// Enough for tails shrinking by 2^{−0.1} per doubling to reach 1e-9.
const MAX_DOUBLINGS: usize = 400;

/// σ_{k−1}∫_s^∞ f₀(t)(t² − s²)^{k/2−1} t dt, the transform of a radial
/// function at a plane with |τ| = s.
///
/// With t² = s² + v² the integral is σ_{k−1}∫₀^∞ f₀(√(s²+v²)) v^{k−1} dv,
/// which is summed over doubling pieces [2^j, 2^{j+1}]. Each piece's share is
/// watched: the sum converges once the geometric tail bound falls below the
/// tolerance and diverges when pieces stop shrinking.
pub fn kplane_radial<F: Fn(f64) -> f64>(
    f0: F,
    k: usize,
    s: f64,
    q: &QuadratureSpec,
) -> Result<f64> {
    if k == 0 {
        return domain("k-plane transform needs k >= 1");
    }
    if !(s >= 0.0) || !s.is_finite() {
        return domain(format!(
            "plane distance must be a finite non-negative number, got {s}"
        ));
    }
    let sigma = sphere_area(k)?;
    let pk = k as i32 - 1;
    let g = |v: f64| {
        let val = f0((s * s + v * v).sqrt());
        if val == 0.0 {
            0.0
        } else {
            val * v.powi(pk)
        }
    };
    let rel = q.rel_tol;
    let mut total = adaptive_gk(g, 0.0, 1.0, rel, q.abs_tol)?.value;
    let mut prev_inc: Option<f64> = None;
    let mut growing = 0usize;
    let mut a = 1.0;
    for _ in 0..MAX_DOUBLINGS {
        let inc = adaptive_gk(g, a, 2.0 * a, rel, q.abs_tol)?.value;
        total += inc;
        a *= 2.0;
        let scale = total.abs().max(q.abs_tol);
        if let Some(p) = prev_inc {
            let ratio = if p != 0.0 {
                (inc / p).abs()
            } else {
                f64::INFINITY
            };
            if inc.abs() <= q.abs_tol {
                return Ok(sigma * total);
            }
            if ratio < 1.0 {
                let tail = inc.abs() * ratio / (1.0 - ratio);
                if tail <= rel * scale {
                    return Ok(sigma * total);
                }
            }
            if inc.abs() > rel * scale {
                let decay = -ratio.log2();
                if decay < DIVERGENCE_DECAY {
                    growing += 1;
                } else {
                    growing = 0;
                }
                if growing >= DIVERGENCE_RUN {
                    return Err(Error::Divergence {
                        condition: format!(
                            "k-plane integral does not converge: contributions from [{:.3e}, {:.3e}] stop decaying (decay {decay:.3})",
                            a / 2.0,
                            a
                        ),
                    });
                }
            } else {
                growing = 0;
            }
        }
        prev_inc = Some(inc);
    }
    Err(Error::Divergence {
        condition: format!("k-plane integral not converged after {MAX_DOUBLINGS} doublings"),
    })
}

/// A function on ℝⁿ whose k-plane transform is known exactly (or by a 1-D
/// radial integral).
pub trait Phantom: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> f64;
    fn radon(&self, tau: &AffinePlane) -> Result<f64>;

    fn to_grid(&self, half_width: f64, cells: usize) -> Result<GridFunction> {
        let n = self.dim();
        GridFunction::from_fn(vec![0.0; n], vec![half_width; n], vec![cells; n], |x| {
            self.eval(x)
        })
    }
}

/// A·exp(−|x − c|²/w²).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPhantom {
    pub center: Vec<f64>,
    pub width: f64,
    pub amplitude: f64,
}

impl GaussianPhantom {
    pub fn new(center: Vec<f64>, width: f64, amplitude: f64) -> Result<Self> {
        if center.is_empty() || !(width > 0.0) {
            return domain("gaussian phantom needs a centre and positive width");
        }
        Ok(Self {
            center,
            width,
            amplitude,
        })
    }

    pub fn standard(n: usize) -> Self {
        Self {
            center: vec![0.0; n],
            width: 1.0,
            amplitude: 1.0,
        }
    }
}

impl Phantom for GaussianPhantom {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let d2: f64 = x
            .iter()
            .zip(&self.center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        self.amplitude * (-d2 / (self.width * self.width)).exp()
    }

    fn radon(&self, tau: &AffinePlane) -> Result<f64> {
        let d = tau.distance(&DVector::from_column_slice(&self.center));
        let k = tau.k() as f64;
        let w2 = self.width * self.width;
        Ok(self.amplitude * (PI * w2).powf(k / 2.0) * (-d * d / w2).exp())
    }
}

/// A·χ_{|x − c| ≤ ρ}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallPhantom {
    pub center: Vec<f64>,
    pub radius: f64,
    pub amplitude: f64,
}

impl Phantom for BallPhantom {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let d2: f64 = x
            .iter()
            .zip(&self.center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if d2 <= self.radius * self.radius {
            self.amplitude
        } else {
            0.0
        }
    }

    fn radon(&self, tau: &AffinePlane) -> Result<f64> {
        let d = tau.distance(&DVector::from_column_slice(&self.center));
        if d >= self.radius {
            return Ok(0.0);
        }
        let k = tau.k();
        Ok(self.amplitude
            * ball_volume(k)?
            * (self.radius * self.radius - d * d).powf(k as f64 / 2.0))
    }
}

/// f(x) = (2 + |x|)^{−n/p} / log(2 + |x|): in Lᵖ(ℝⁿ), yet f̂ ≡ ∞ when p ≥ n/k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolmonPhantom {
    pub n: usize,
    pub p: f64,
}

impl SolmonPhantom {
    pub fn profile(&self, r: f64) -> f64 {
        (2.0 + r).powf(-(self.n as f64) / self.p) / (2.0 + r).ln()
    }
}

impl Phantom for SolmonPhantom {
    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.profile(x.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    fn radon(&self, tau: &AffinePlane) -> Result<f64> {
        kplane_radial(
            |r| self.profile(r),
            tau.k(),
            tau.norm(),
            &QuadratureSpec::kernel(),
        )
    }
}

/// ∫_τ f over the part of τ inside the grid's box, by the midpoint rule on a
/// k-dimensional lattice with spacing (grid spacing)/`refine`, using
/// multilinear interpolation of `f`.
pub fn kplane_numeric(f: &GridFunction, tau: &AffinePlane, refine: usize) -> Result<f64> {
    let n = f.dim();
    if tau.n() != n {
        return domain(format!("plane lives in R^{} but grid in R^{n}", tau.n()));
    }
    if refine == 0 {
        return domain("lattice refinement must be at least 1");
    }
    let k = tau.k();
    let h = f.min_spacing() / refine as f64;
    let centre = DVector::from_column_slice(f.center());
    let half_diag = f.half_width().iter().map(|w| w * w).sum::<f64>().sqrt();
    let dist = tau.distance(&centre);
    if dist > half_diag {
        return Ok(0.0);
    }
    // lattice centred at the foot of the perpendicular from the box centre
    let basis = tau.subspace.basis();
    let foot: DVector<f64> = tau.offset() + basis * (basis.transpose() * &centre);
    let reach = (half_diag * half_diag - dist * dist).max(0.0).sqrt();
    let m = (reach / h).ceil() as i64;
    let side = (2 * m) as usize;
    let count = side.pow(k as u32);
    let mut total = 0.0;
    let mut idx = vec![0usize; k];
    let mut point = vec![0.0; n];
    for lin in 0..count {
        let mut rem = lin;
        for slot in idx.iter_mut() {
            *slot = rem % side;
            rem /= side;
        }
        for (a, p) in point.iter_mut().enumerate() {
            let mut v = foot[a];
            for (j, &i) in idx.iter().enumerate() {
                let c = (i as f64 - m as f64 + 0.5) * h;
                v += basis[(a, j)] * c;
            }
            *p = v;
        }
        let val = f.interpolate(&point);
        if val != 0.0 {
            total += val;
        }
    }
    Ok(total * h.powi(k as i32))
}

/// φ̌(x) for φ(τ) = φ₀(|τ|):
/// c_{k,n} r^{2−n} ∫₀^r φ₀(t)(r² − t²)^{k/2−1} t^{n−k−1} dt.
pub fn dual_radial<F: Fn(f64) -> f64>(
    phi0: F,
    n: usize,
    k: usize,
    r: f64,
    q: &QuadratureSpec,
) -> Result<f64> {
    if !(r > 0.0) {
        return domain(format!(
            "dual transform of a radial function needs r > 0, got {r}"
        ));
    }
    let c = c_kn(n, k)?;
    let a = abel_quadrature_supported(phi0, r, n, k, f64::INFINITY, q)?;
    Ok(c * r.powf(2.0 - n as f64) * a)
}

/// φ̌(x) = ∫_{SO(n)} φ(x + γτ₀) dγ by Monte Carlo, τ₀ = span(e₁, …, e_k).
pub fn dual_numeric<F>(phi: F, x: &[f64], n: usize, k: usize, mc: &McSpec) -> Result<McEstimate>
where
    F: Fn(&AffinePlane) -> f64 + Sync,
{
    if x.len() != n || k == 0 || k >= n {
        return domain(format!(
            "dual transform needs x in R^{n} and 1 <= k < n (k = {k})"
        ));
    }
    let xv = DVector::from_column_slice(x);
    let e = DMatrix::<f64>::identity(n, k);
    mc_mean(mc, |rng| {
        let g = haar_special_orthogonal(n, rng);
        let sub = LinearSubspace::new(&g * &e)?;
        let tau = AffinePlane::through(sub, &xv)?;
        Ok(phi(&tau))
    })
}

/// How integrals over 𝒢_{n,k} are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AffineRule {
    MonteCarlo(McSpec),
    /// Deterministic (θ, p) product rule, lines in the plane only.
    Lines {
        angles: usize,
        offset_panels: usize,
    },
}

/// t^{power} ∫ φ(τ) a(|x − τ|/t) dμ(τ), sampling planes within t·R_a of x.
#[allow(clippy::too_many_arguments)]
fn smoothed_backprojection<F>(
    phi: F,
    a: &RadialProfile,
    t: f64,
    x: &[f64],
    n: usize,
    k: usize,
    power: f64,
    rule: &AffineRule,
) -> Result<McEstimate>
where
    F: Fn(&AffinePlane) -> f64 + Sync,
{
    if !(t > 0.0) {
        return domain(format!("scale t must be positive, got {t}"));
    }
    if x.len() != n || k == 0 || k >= n {
        return domain(format!(
            "backprojection needs x in R^{n} and 1 <= k < n (k = {k})"
        ));
    }
    if a.is_zero() {
        return Ok(McEstimate::ZERO);
    }
    let reach = a.support_radius(1e-13);
    if !reach.is_finite() {
        return Err(Error::Unsupported(
            "backprojection needs a profile with finite effective support".into(),
        ));
    }
    let radius = t * reach;
    let xv = DVector::from_column_slice(x);
    let integrand = |tau: &AffinePlane| {
        let d = tau.distance(&xv) / t;
        let av = a.eval(d);
        if av == 0.0 {
            0.0
        } else {
            phi(tau) * av
        }
    };
    let est = match rule {
        AffineRule::MonteCarlo(mc) => integrate_affine_around(integrand, n, k, &xv, radius, mc)?,
        AffineRule::Lines {
            angles,
            offset_panels,
        } => {
            if n != 2 || k != 1 {
                return Err(Error::Unsupported(
                    "the line rule only covers (n, k) = (2, 1)".into(),
                ));
            }
            integrate_lines(integrand, &[x[0], x[1]], radius, *angles, *offset_panels)?
        }
    };
    let s = t.powf(power);
    Ok(McEstimate {
        estimate: s * est.estimate,
        std_error: s * est.std_error,
    })
}

/// W_t*φ(x) = t^{−n} ∫ φ(τ) w(|x − τ|/t) dμ(τ).
pub fn w_star<F>(
    phi: F,
    w: &RadialProfile,
    t: f64,
    x: &[f64],
    n: usize,
    k: usize,
    rule: &AffineRule,
) -> Result<McEstimate>
where
    F: Fn(&AffinePlane) -> f64 + Sync,
{
    smoothed_backprojection(phi, w, t, x, n, k, -(n as f64), rule)
}

/// V_t*φ(x) = t^{k−n} ∫ φ(τ) v(|x − τ|/t) dμ(τ).
pub fn v_t_star<F>(
    phi: F,
    v: &RadialProfile,
    t: f64,
    x: &[f64],
    n: usize,
    k: usize,
    rule: &AffineRule,
) -> Result<McEstimate>
where
    F: Fn(&AffinePlane) -> f64 + Sync,
{
    smoothed_backprojection(phi, v, t, x, n, k, k as f64 - n as f64, rule)
}

/// U_t f(τ) = t^{k−n} ∫ f(x) u(|x − τ|/t) dx for a phantom, computed as
/// t^{k−n} ∫_{V⊥} f̂(V + y) u(|y − x″|/t) dy in polar coordinates around x″.
pub fn u_t<P: Phantom + ?Sized>(
    f: &P,
    u: &RadialProfile,
    t: f64,
    tau: &AffinePlane,
    q: &QuadratureSpec,
) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("scale t must be positive, got {t}"));
    }
    let n = tau.n();
    let k = tau.k();
    let m = n - k;
    if u.is_zero() {
        return Ok(0.0);
    }
    let reach = t * u.support_radius(1e-13);
    let perp = tau.subspace.complement();
    let centre = tau.offset().clone();
    let sub = tau.subspace.clone();
    let sphere_mean = |rho: f64| -> Result<f64> {
        let at = |dir: &DVector<f64>| -> Result<f64> {
            let off = &centre + &perp * dir * rho;
            f.radon(&AffinePlane::new(sub.clone(), off)?)
        };
        match m {
            1 => Ok(
                0.5 * (at(&DVector::from_vec(vec![1.0]))? + at(&DVector::from_vec(vec![-1.0]))?)
            ),
            2 => {
                let count = 64;
                let mut acc = 0.0;
                for i in 0..count {
                    let a = 2.0 * PI * i as f64 / count as f64;
                    acc += at(&DVector::from_vec(vec![a.cos(), a.sin()]))?;
                }
                Ok(acc / count as f64)
            }
            3 => {
                let (gx, gw) = crate::special::quad::gauss_legendre(24);
                let count = 48;
                let mut acc = 0.0;
                for (z, wz) in gx.iter().zip(&gw) {
                    let ring = (1.0 - z * z).sqrt();
                    for i in 0..count {
                        let a = 2.0 * PI * i as f64 / count as f64;
                        acc +=
                            wz * at(&DVector::from_vec(vec![ring * a.cos(), ring * a.sin(), *z]))?;
                    }
                }
                Ok(acc / (2.0 * count as f64))
            }
            _ => Err(Error::Unsupported(format!(
                "U_t for phantoms is implemented for n - k <= 3, got {m}"
            ))),
        }
    };
    let sigma = sphere_area(m)?;
    let err = std::cell::RefCell::new(None);
    let radial = |rho: f64| {
        let uv = u.eval(rho / t);
        if uv == 0.0 {
            return 0.0;
        }
        match sphere_mean(rho) {
            Ok(v) => v * uv * rho.powi(m as i32 - 1),
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    };
    let mut total = 0.0;
    let pieces = 8;
    for i in 0..pieces {
        let a = reach * i as f64 / pieces as f64;
        let b = reach * (i + 1) as f64 / pieces as f64;
        total += adaptive_gk(radial, a, b, q.rel_tol, q.abs_tol)?.value;
    }
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    Ok(t.powf(k as f64 - n as f64) * sigma * total)
}

/// U_t f(τ) for a grid function by direct summation over cells.
pub fn u_t_grid(f: &GridFunction, u: &RadialProfile, t: f64, tau: &AffinePlane) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("scale t must be positive, got {t}"));
    }
    if tau.n() != f.dim() {
        return domain("plane and grid dimensions differ");
    }
    let vol = f.cell_volume();
    let mut buf = vec![0.0; f.dim()];
    let mut total = 0.0;
    for (i, &v) in f.values().iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        f.cell_center_into(i, &mut buf);
        let d = tau.distance(&DVector::from_column_slice(&buf));
        total += v * u.eval(d / t);
    }
    let (n, k) = (tau.n() as f64, tau.k() as f64);
    Ok(t.powf(k - n) * total * vol)
}

/// Which Abel-type integral [`abel_pair`] tabulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbelMode {
    /// ψ(r) = c_{k,n} r^{2−n}∫₀^r s^{n−k−1}g(s)(r² − s²)^{k/2−1} ds, on ℝⁿ.
    Psi,
    /// h(s) = σ_{k−1}∫_s^∞ g(r)(r² − s²)^{k/2−1} r dr, on ℝ^{n−k}.
    H,
}

/// Tabulates one of the two Abel transforms of `g` on a log grid.
pub fn abel_pair(
    g: &RadialProfile,
    n: usize,
    k: usize,
    mode: AbelMode,
    q: &QuadratureSpec,
) -> Result<RadialProfile> {
    if k == 0 || k >= n {
        return domain(format!("abel pair needs 1 <= k < n, got n = {n}, k = {k}"));
    }
    let xs = log_grid(1e-4, 50.0, 800);
    let dim = match mode {
        AbelMode::Psi => n,
        AbelMode::H => n - k,
    };
    if g.is_zero() {
        let len = xs.len();
        return Ok(RadialProfile::tabulated(
            SampledFunction1D::new(xs, vec![0.0; len], Extrapolation::Zero, Extrapolation::Zero)?,
            dim,
        ));
    }
    let support = g.support_radius(1e-17);
    let ys: Result<Vec<f64>> = xs
        .iter()
        .map(|&r| match mode {
            AbelMode::Psi => {
                let c = c_kn(n, k)?;
                Ok(c * r.powf(2.0 - n as f64)
                    * abel_quadrature_supported(|s| g.eval(s), r, n, k, support, q)?)
            }
            AbelMode::H => {
                if r >= support {
                    Ok(0.0)
                } else {
                    kplane_radial(|t| g.eval(t), k, r, q)
                }
            }
        })
        .collect();
    let table = SampledFunction1D::new(xs, ys?, Extrapolation::Zero, Extrapolation::Zero)?;
    Ok(RadialProfile::tabulated(table, dim))
}

/// U_t f(τ) for f = e^{−|x|²} and u = e^{−r²} in closed form:
/// t^{k−n}π^{k/2}(πt²/(1+t²))^{(n−k)/2} e^{−|τ|²/(1+t²)}.
pub fn u_t_gaussian_closed_form(n: usize, k: usize, t: f64, tau_norm: f64) -> f64 {
    let m = (n - k) as f64;
    let t2 = t * t;
    t.powf(k as f64 - n as f64)
        * PI.powf(k as f64 / 2.0)
        * (PI * t2 / (1.0 + t2)).powf(m / 2.0)
        * (-tau_norm * tau_norm / (1.0 + t2)).exp()
}

/// Draws a uniformly distributed point in the ball of radius `r` in ℝⁿ.
pub fn random_point<R: Rng + ?Sized>(n: usize, r: f64, rng: &mut R) -> Vec<f64> {
    loop {
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(-r..r)).collect();
        if p.iter().map(|x| x * x).sum::<f64>() <= r * r {
            return p;
        }
    }
}

/// Gaussian moments used when checking k-plane transforms: ∫_{ℝ^k} e^{−|y|²} = π^{k/2}.
pub fn gaussian_plane_mass(k: usize) -> f64 {
    PI.powf(k as f64 / 2.0)
}

/// Volume of the k-dimensional section of the unit ball at distance s.
pub fn ball_section(k: usize, s: f64) -> Result<f64> {
    if s >= 1.0 {
        return Ok(0.0);
    }
    Ok(PI.powf(k as f64 / 2.0) * (1.0 - s * s).powf(k as f64 / 2.0) / gamma(k as f64 / 2.0 + 1.0)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grassmann::{sample_plane, stream_rng};
    use crate::wavelet::laplacian_gaussian;
    use approx::assert_relative_eq;

    fn q() -> QuadratureSpec {
        QuadratureSpec::kernel()
    }

    #[test]
    fn radial_gaussian() {
        for k in 1..4 {
            for s in [0.0, 0.5, 1.0, 2.5] {
                let v = kplane_radial(|t: f64| (-t * t).exp(), k, s, &q()).unwrap();
                assert_relative_eq!(
                    v,
                    PI.powf(k as f64 / 2.0) * (-s * s).exp(),
                    max_relative = 1e-8
                );
            }
        }
    }

    #[test]
    fn radial_ball_section() {
        for k in 1..4 {
            for s in [0.0, 0.3, 0.8, 1.2] {
                let v =
                    kplane_radial(|t: f64| if t <= 1.0 { 1.0 } else { 0.0 }, k, s, &q()).unwrap();
                assert_relative_eq!(
                    v,
                    ball_section(k, s).unwrap(),
                    max_relative = 1e-7,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn solmon_divergence() {
        for (n, k) in [(2, 1), (3, 1), (3, 2), (4, 2)] {
            let nk = n as f64 / k as f64;
            for p in [nk, 2.0 * nk] {
                let f = SolmonPhantom { n, p };
                let r = kplane_radial(|t| f.profile(t), k, 0.5, &q());
                assert!(
                    matches!(r, Err(Error::Divergence { .. })),
                    "(n, k, p) = ({n}, {k}, {p}): {r:?}"
                );
            }
            for p in [1.0, nk / 2.0, 0.75 * nk] {
                if p >= nk {
                    continue;
                }
                let f = SolmonPhantom { n, p };
                let r = kplane_radial(|t| f.profile(t), k, 0.5, &q());
                assert!(r.is_ok(), "(n, k, p) = ({n}, {k}, {p}): {r:?}");
            }
        }
    }

    #[test]
    fn numeric_matches_radial() {
        let f = GaussianPhantom::standard(2).to_grid(6.0, 256).unwrap();
        let v = LinearSubspace::coordinate(2, 1).unwrap();
        for s in [0.0, 0.5, 1.0] {
            let tau = AffinePlane::new(v.clone(), DVector::from_vec(vec![0.0, s])).unwrap();
            let num = kplane_numeric(&f, &tau, 1).unwrap();
            let exact = PI.sqrt() * (-s * s).exp();
            assert!(
                (num - exact).abs() / exact < 1e-3,
                "s = {s}: {num} vs {exact}"
            );
        }
        // a tilted line
        let mut rng = stream_rng(4, 0);
        let tau = sample_plane(2, 1, 1.0, &mut rng).unwrap();
        let num = kplane_numeric(&f, &tau, 2).unwrap();
        let exact = GaussianPhantom::standard(2).radon(&tau).unwrap();
        assert!((num - exact).abs() / exact < 1e-3);
    }

    #[test]
    fn numeric_disjoint_and_linear() {
        let ball = BallPhantom {
            center: vec![2.0, 2.0],
            radius: 0.5,
            amplitude: 1.0,
        };
        let g = ball.to_grid(4.0, 64).unwrap();
        let v = LinearSubspace::coordinate(2, 1).unwrap();
        let tau = AffinePlane::new(v, DVector::zeros(2)).unwrap();
        assert_eq!(kplane_numeric(&g, &tau, 1).unwrap(), 0.0);

        let a = GaussianPhantom::standard(2).to_grid(4.0, 64).unwrap();
        let b = GaussianPhantom::new(vec![0.5, -0.3], 0.7, 2.0)
            .unwrap()
            .to_grid(4.0, 64)
            .unwrap();
        let mix = a.combine(1.5, &b, -0.25).unwrap();
        let mut rng = stream_rng(8, 0);
        let t = sample_plane(2, 1, 1.0, &mut rng).unwrap();
        let lhs = kplane_numeric(&mix, &t, 1).unwrap();
        let rhs =
            1.5 * kplane_numeric(&a, &t, 1).unwrap() - 0.25 * kplane_numeric(&b, &t, 1).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn shift_equivariance() {
        let f = GaussianPhantom::new(vec![0.3, 0.1, -0.2], 0.8, 1.0).unwrap();
        let g = f.to_grid(4.0, 48).unwrap();
        let shift = [4isize, -2, 3];
        let h = g.spacing(0);
        let z = DVector::from_vec(shift.iter().map(|&s| s as f64 * h).collect());
        let shifted = g.shift_cells(&shift);
        let mut rng = stream_rng(12, 0);
        for _ in 0..3 {
            let t = sample_plane(3, 2, 0.5, &mut rng).unwrap();
            let lhs = kplane_numeric(&shifted, &t, 1).unwrap();
            let rhs = kplane_numeric(&g, &t.translated(&(-&z)), 1).unwrap();
            assert!(
                (lhs - rhs).abs() < 1e-2 * rhs.abs().max(1e-3),
                "{lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn radial_scaling() {
        // f(·/a) has transform a^k f̂(τ/a)
        let a = 1.7;
        for k in [1, 2] {
            for s in [0.2, 1.1] {
                let lhs = kplane_radial(|t: f64| (-(t / a).powi(2)).exp(), k, s, &q()).unwrap();
                let rhs = a.powi(k as i32)
                    * kplane_radial(|t: f64| (-t * t).exp(), k, s / a, &q()).unwrap();
                assert_relative_eq!(lhs, rhs, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn dual_of_constant_and_zero() {
        for (n, k) in [(2, 1), (3, 1), (3, 2), (5, 2)] {
            for r in [0.3, 1.0, 4.0] {
                assert_relative_eq!(
                    dual_radial(|_| 1.0, n, k, r, &q()).unwrap(),
                    1.0,
                    max_relative = 1e-10
                );
                assert_eq!(dual_radial(|_| 0.0, n, k, r, &q()).unwrap(), 0.0);
            }
        }
        let mc = McSpec::new(100, 1, 2).unwrap();
        let e = dual_numeric(|_| 1.0, &[0.1, 0.2, 0.3], 3, 1, &mc).unwrap();
        assert_eq!((e.estimate, e.std_error), (1.0, 0.0));
        assert!(dual_radial(|_| 1.0, 3, 1, 0.0, &q()).is_err());
    }

    #[test]
    fn dual_radial_matches_monte_carlo() {
        let mc = McSpec::new(20_000, 5, 8).unwrap();
        let phi = |tau: &AffinePlane| (-tau.norm().powi(2)).exp();
        let e = dual_numeric(phi, &[1.0, 0.0, 0.0], 3, 1, &mc).unwrap();
        let exact = dual_radial(|s: f64| (-s * s).exp(), 3, 1, 1.0, &q()).unwrap();
        assert!(
            (e.estimate - exact).abs() < 3.0 * e.std_error,
            "{e:?} vs {exact}"
        );
    }

    #[test]
    fn abel_pair_modes() {
        let g = RadialProfile::gaussian(1.0, 2).unwrap();
        let h = abel_pair(&g, 3, 1, AbelMode::H, &q()).unwrap();
        for s in [0.1, 0.7, 2.0] {
            let direct = kplane_radial(|t: f64| (-t * t).exp(), 1, s, &q()).unwrap();
            assert_relative_eq!(h.eval(s), direct, max_relative = 1e-6);
            assert_relative_eq!(h.eval(s), PI.sqrt() * (-s * s).exp(), max_relative = 1e-6);
        }
        let z = abel_pair(&RadialProfile::zero(2), 3, 1, AbelMode::Psi, &q()).unwrap();
        assert!(z.is_zero());
        // compact support: h vanishes beyond the support
        let xs: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let ys = xs.iter().map(|x| 1.0 - x * x).collect();
        let bump = RadialProfile::tabulated(
            SampledFunction1D::new(xs, ys, Extrapolation::Zero, Extrapolation::Zero).unwrap(),
            2,
        );
        let hb = abel_pair(&bump, 3, 1, AbelMode::H, &q()).unwrap();
        assert_eq!(hb.eval(1.5), 0.0);
        assert!(hb.eval(0.5) > 0.0);
    }

    #[test]
    fn u_t_closed_form_and_zero() {
        let f = GaussianPhantom::standard(2);
        let u = RadialProfile::gaussian(1.0, 1).unwrap();
        let mut rng = stream_rng(2, 0);
        for t in [0.5, 1.0, 2.0] {
            let tau = sample_plane(2, 1, 1.5, &mut rng).unwrap();
            let v = u_t(&f, &u, t, &tau, &q()).unwrap();
            let exact = u_t_gaussian_closed_form(2, 1, t, tau.norm());
            assert!(
                (v - exact).abs() < 1e-4 * exact.abs().max(1e-3),
                "t = {t}: {v} vs {exact}"
            );
        }
        let f3 = GaussianPhantom::standard(3);
        let u2 = RadialProfile::gaussian(1.0, 2).unwrap();
        let tau = sample_plane(3, 1, 1.0, &mut rng).unwrap();
        let v = u_t(&f3, &u2, 0.7, &tau, &q()).unwrap();
        assert!((v - u_t_gaussian_closed_form(3, 1, 0.7, tau.norm())).abs() < 1e-4);
        assert_eq!(
            u_t(&f, &RadialProfile::zero(1), 1.0, &tau_2d(), &q()).unwrap(),
            0.0
        );
    }

    fn tau_2d() -> AffinePlane {
        AffinePlane::new(LinearSubspace::coordinate(2, 1).unwrap(), DVector::zeros(2)).unwrap()
    }

    #[test]
    fn u_t_narrow_profile_approaches_transform() {
        // u_t f → ‖u‖₁ t^{k−n}·t^{n−k} f̂ as the profile narrows
        let f = GaussianPhantom::new(vec![0.2, -0.1], 1.0, 1.0).unwrap();
        let tau = tau_2d();
        let exact = f.radon(&tau).unwrap();
        let mut errs = Vec::new();
        for width in [0.4, 0.1] {
            let u = RadialProfile::gaussian(1.0 / (width * width), 1).unwrap();
            let mass = width * PI.sqrt();
            let v = u_t(&f, &u, 1.0, &tau, &q()).unwrap();
            errs.push((v / mass - exact).abs() / exact);
        }
        assert!(errs[1] < 0.02, "{errs:?}");
        assert!(errs[1] < errs[0]);
    }

    #[test]
    fn u_t_grid_matches_phantom_path() {
        let f = GaussianPhantom::standard(2);
        let g = f.to_grid(6.0, 200).unwrap();
        let u = RadialProfile::gaussian(1.0, 1).unwrap();
        let tau = AffinePlane::new(
            LinearSubspace::coordinate(2, 1).unwrap(),
            DVector::from_vec(vec![0.0, 0.4]),
        )
        .unwrap();
        let a = u_t_grid(&g, &u, 0.8, &tau).unwrap();
        let b = u_t(&f, &u, 0.8, &tau, &q()).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-6);
    }

    #[test]
    fn smoothed_operators_vanish() {
        let w = RadialProfile::gaussian_poly(laplacian_gaussian(1, 1, 1.0).unwrap());
        let rule = AffineRule::MonteCarlo(McSpec::new(200, 1, 2).unwrap());
        let e = w_star(|_| 0.0, &w, 0.5, &[0.0, 0.0], 2, 1, &rule).unwrap();
        assert_eq!(e.estimate, 0.0);
        let v = v_t_star(
            |_| 1.0,
            &RadialProfile::zero(1),
            0.5,
            &[0.0, 0.0],
            2,
            1,
            &rule,
        )
        .unwrap();
        assert_eq!(v.estimate, 0.0);
        assert!(w_star(|_| 1.0, &w, 0.0, &[0.0, 0.0], 2, 1, &rule).is_err());
    }

    #[test]
    fn w_star_of_radial_transform_is_radial() {
        let f = GaussianPhantom::standard(2);
        let w = RadialProfile::gaussian(1.0, 1).unwrap();
        let rule = AffineRule::Lines {
            angles: 64,
            offset_panels: 32,
        };
        let vals: Vec<McEstimate> = (0..8)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / 8.0;
                w_star(
                    |t| f.radon(t).unwrap(),
                    &w,
                    0.5,
                    &[a.cos(), a.sin()],
                    2,
                    1,
                    &rule,
                )
                .unwrap()
            })
            .collect();
        for v in &vals[1..] {
            assert!(v.sigmas_from(&vals[0]) < 3.0 || (v.estimate - vals[0].estimate).abs() < 1e-10);
        }
    }
}
