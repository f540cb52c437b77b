//! Radial wavelet profiles, their convolutions and admissibility checks.
//!
//! Profiles live on ℝ^m with m = n − k. The closed-form family is
//! P(r²)e^{−a r²}; Laplacians of Gaussians and their convolutions stay inside
//! it, which gives exact moments and an exact convolution path.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::special::gamma::{gamma, sphere_area};
use crate::special::quad::{adaptive_gk, semi_infinite};
use crate::special::sampled::{Extrapolation, SampledFunction1D};

/// Cancellation threshold for signed moments.
pub const MOMENT_TOL: f64 = 1e-9;

/// P(r²)·e^{−a r²} on ℝ^m, with P given by its coefficients in s = r².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolyProfile {
    pub coeffs: Vec<f64>,
    pub scale: f64,
    pub dim: usize,
}

impl GaussianPolyProfile {
    pub fn new(coeffs: Vec<f64>, scale: f64, dim: usize) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return domain(format!("gaussian scale must be positive, got {scale}"));
        }
        if dim == 0 {
            return domain("profile dimension must be at least 1");
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Invalid(
                "polynomial coefficients must be finite".into(),
            ));
        }
        Ok(Self { coeffs, scale, dim })
    }

    pub fn poly(&self, s: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c)
    }

    pub fn eval(&self, r: f64) -> f64 {
        let s = r * r;
        let g = (-self.scale * s).exp();
        if g == 0.0 {
            return 0.0;
        }
        let p = self.poly(s);
        if p == 0.0 {
            0.0
        } else {
            p * g
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Δ applied once, via P ← 4s(P″ − 2aP′ + a²P) + 2m(P′ − aP).
    pub fn laplacian(&self) -> Self {
        let a = self.scale;
        let m = self.dim as f64;
        let p = &self.coeffs;
        let deg = p.len();
        let mut out = vec![0.0; deg + 1];
        for (i, &c) in p.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let fi = i as f64;
            // 4s·P″: i(i−1)c s^{i−2} → 4 i(i−1) c s^{i−1}
            if i >= 2 {
                out[i - 1] += 4.0 * fi * (fi - 1.0) * c;
            }
            // −8a s P′ → −8a i c s^i
            out[i] -= 8.0 * a * fi * c;
            // 4a² s P
            out[i + 1] += 4.0 * a * a * c;
            // 2m P′
            if i >= 1 {
                out[i - 1] += 2.0 * m * fi * c;
            }
            // −2ma P
            out[i] -= 2.0 * m * a * c;
        }
        while out.len() > 1 && *out.last().unwrap() == 0.0 {
            out.pop();
        }
        Self {
            coeffs: out,
            scale: a,
            dim: self.dim,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
            scale: self.scale,
            dim: self.dim,
        }
    }

    /// The profile r ↦ w(r/t).
    pub fn dilate(&self, t: f64) -> Self {
        let t2 = t * t;
        Self {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| c / t2.powi(i as i32))
                .collect(),
            scale: self.scale / t2,
            dim: self.dim,
        }
    }

    /// σ_{m−1}∫₀^∞ r^{j+m−1} P(r²)e^{−ar²} dr in closed form.
    pub fn signed_moment(&self, j: f64) -> Result<f64> {
        let sigma = sphere_area(self.dim)?;
        let mut total = 0.0;
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let e = (j + self.dim as f64 + 2.0 * i as f64) / 2.0;
            total += c * gamma(e)? / (2.0 * self.scale.powf(e));
        }
        Ok(sigma * total)
    }
}

/// Δ^N e^{−a|y|²} on ℝ^m.
pub fn laplacian_gaussian(order: usize, m: usize, a: f64) -> Result<GaussianPolyProfile> {
    let mut p = GaussianPolyProfile::new(vec![1.0], a, m)?;
    for _ in 0..order {
        p = p.laplacian();
    }
    Ok(p)
}

#[derive(Debug, Clone)]
pub enum Representation {
    GaussianPoly(GaussianPolyProfile),
    Tabulated(SampledFunction1D),
}

/// A radial function on ℝ^m given by its profile on [0, ∞).
#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub repr: Representation,
    pub dim: usize,
}

impl RadialProfile {
    pub fn gaussian_poly(p: GaussianPolyProfile) -> Self {
        let dim = p.dim;
        Self {
            repr: Representation::GaussianPoly(p),
            dim,
        }
    }

    pub fn tabulated(table: SampledFunction1D, dim: usize) -> Self {
        Self {
            repr: Representation::Tabulated(table),
            dim,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::gaussian_poly(GaussianPolyProfile {
            coeffs: vec![0.0],
            scale: 1.0,
            dim,
        })
    }

    /// e^{−a r²} on ℝ^m.
    pub fn gaussian(a: f64, dim: usize) -> Result<Self> {
        Ok(Self::gaussian_poly(GaussianPolyProfile::new(
            vec![1.0],
            a,
            dim,
        )?))
    }

    pub fn eval(&self, r: f64) -> f64 {
        match &self.repr {
            Representation::GaussianPoly(p) => p.eval(r),
            Representation::Tabulated(t) => t.eval(r),
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.repr {
            Representation::GaussianPoly(p) => p.is_zero(),
            Representation::Tabulated(t) => t.is_zero(),
        }
    }

    pub fn as_gaussian_poly(&self) -> Option<&GaussianPolyProfile> {
        match &self.repr {
            Representation::GaussianPoly(p) => Some(p),
            Representation::Tabulated(_) => None,
        }
    }

    /// r ↦ w(r/t).
    pub fn dilate(&self, t: f64) -> Result<Self> {
        if !(t > 0.0) {
            return domain(format!("dilation factor must be positive, got {t}"));
        }
        Ok(match &self.repr {
            Representation::GaussianPoly(p) => Self::gaussian_poly(p.dilate(t)),
            Representation::Tabulated(tab) => {
                let xs = tab.abscissae().iter().map(|x| x * t).collect();
                let table = SampledFunction1D::new(xs, tab.values().to_vec(), tab.left, tab.right)?;
                Self::tabulated(table, self.dim)
            }
        })
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Ok(match &self.repr {
            Representation::GaussianPoly(p) => Self::gaussian_poly(p.scaled(factor)),
            Representation::Tabulated(tab) => {
                let ys = tab.values().iter().map(|v| v * factor).collect();
                let table =
                    SampledFunction1D::new(tab.abscissae().to_vec(), ys, tab.left, tab.right)?;
                Self::tabulated(table, self.dim)
            }
        })
    }

    /// Radius beyond which |w| stays below `tol`·sup|w|.
    pub fn support_radius(&self, tol: f64) -> f64 {
        match &self.repr {
            Representation::GaussianPoly(p) => {
                if p.is_zero() {
                    return 0.0;
                }
                let r_max = ((1.0 / tol).ln() + 4.0 * p.coeffs.len() as f64 + 10.0).sqrt() * 3.0
                    / p.scale.sqrt();
                let steps = 4000;
                let dr = r_max / steps as f64;
                let peak = (0..=steps)
                    .map(|i| p.eval(i as f64 * dr).abs())
                    .fold(0.0, f64::max);
                let last = (0..=steps)
                    .rev()
                    .find(|&i| p.eval(i as f64 * dr).abs() > tol * peak)
                    .unwrap_or(0);
                (last + 1) as f64 * dr
            }
            Representation::Tabulated(t) => {
                let peak = t.values().iter().fold(0.0, |m: f64, v| m.max(v.abs()));
                if peak == 0.0 {
                    return 0.0;
                }
                match t.right {
                    Extrapolation::PowerLaw(e) if e < 0.0 => {
                        let y_end = t.values().last().unwrap().abs();
                        if y_end <= tol * peak {
                            last_above(t, tol * peak)
                        } else {
                            t.last_x() * (tol * peak / y_end).powf(1.0 / e)
                        }
                    }
                    Extrapolation::PowerLaw(_) => f64::INFINITY,
                    Extrapolation::Zero => last_above(t, tol * peak),
                }
            }
        }
    }
}

fn last_above(t: &SampledFunction1D, level: f64) -> f64 {
    let xs = t.abscissae();
    let i = t
        .values()
        .iter()
        .rposition(|v| v.abs() > level)
        .unwrap_or(0);
    xs[(i + 1).min(xs.len() - 1)]
}

/// JSON form of a profile: `{kind, coeffs, scale, dim}` or a table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileJson {
    GaussianPoly {
        coeffs: Vec<f64>,
        scale: f64,
        dim: usize,
    },
    Tabulated {
        abscissae: Vec<f64>,
        values: Vec<f64>,
        left: Extrapolation,
        right: Extrapolation,
        dim: usize,
    },
}

impl From<&RadialProfile> for ProfileJson {
    fn from(p: &RadialProfile) -> Self {
        match &p.repr {
            Representation::GaussianPoly(g) => ProfileJson::GaussianPoly {
                coeffs: g.coeffs.clone(),
                scale: g.scale,
                dim: g.dim,
            },
            Representation::Tabulated(t) => ProfileJson::Tabulated {
                abscissae: t.abscissae().to_vec(),
                values: t.values().to_vec(),
                left: t.left,
                right: t.right,
                dim: p.dim,
            },
        }
    }
}

impl TryFrom<ProfileJson> for RadialProfile {
    type Error = Error;

    fn try_from(j: ProfileJson) -> Result<Self> {
        match j {
            ProfileJson::GaussianPoly { coeffs, scale, dim } => Ok(RadialProfile::gaussian_poly(
                GaussianPolyProfile::new(coeffs, scale, dim)?,
            )),
            ProfileJson::Tabulated {
                abscissae,
                values,
                left,
                right,
                dim,
            } => {
                if dim == 0 {
                    return domain("profile dimension must be at least 1");
                }
                let table = SampledFunction1D::new(abscissae, values, left, right)?;
                Ok(RadialProfile::tabulated(table, dim))
            }
        }
    }
}

/// How a wavelet is specified in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WaveletSpec {
    /// w = u∗v with u = Δ^{n1}e^{−a|y|²}, v = Δ^{n2}e^{−a|y|²}.
    LaplacianPair {
        n1: usize,
        n2: usize,
        #[serde(default = "default_scale")]
        scale: f64,
    },
    /// An explicit profile; its `dim` must equal n − k.
    Profile { profile: ProfileJson },
}

fn default_scale() -> f64 {
    1.0
}

impl WaveletSpec {
    /// The pair whose convolution is admissible for the given k.
    pub fn example(k: usize) -> Self {
        let total = admissible_laplacian_order(k);
        WaveletSpec::LaplacianPair {
            n1: total - total / 2,
            n2: total / 2,
            scale: 1.0,
        }
    }

    /// The factors u, v when the wavelet is given as a pair.
    pub fn factors(&self, m: usize) -> Result<Option<(RadialProfile, RadialProfile)>> {
        match self {
            WaveletSpec::LaplacianPair { n1, n2, scale } => Ok(Some((
                RadialProfile::gaussian_poly(laplacian_gaussian(*n1, m, *scale)?),
                RadialProfile::gaussian_poly(laplacian_gaussian(*n2, m, *scale)?),
            ))),
            WaveletSpec::Profile { .. } => Ok(None),
        }
    }

    pub fn build(&self, m: usize) -> Result<RadialProfile> {
        match self {
            WaveletSpec::LaplacianPair { .. } => {
                let (u, v) = self.factors(m)?.expect("pair has factors");
                radial_convolve(&u, &v, m)
            }
            WaveletSpec::Profile { profile } => {
                let p = RadialProfile::try_from(profile.clone())?;
                if p.dim != m {
                    return domain(format!("wavelet profile has dim {} but n - k = {m}", p.dim));
                }
                Ok(p)
            }
        }
    }
}

/// Smallest N for which Δ^N of a Gaussian has vanishing moments of orders
/// 0, 2, …, 2[k/2].
pub fn admissible_laplacian_order(k: usize) -> usize {
    k / 2 + 1
}

/// Writes P·e^{−as} as Σ c_j Δ^j e^{−as}; exact because Δ^j e^{−as} has
/// degree j with leading coefficient (4a²)^j.
fn laplacian_basis_coeffs(p: &GaussianPolyProfile) -> Vec<f64> {
    let deg = p.coeffs.len();
    let mut basis = Vec::with_capacity(deg);
    let mut cur = GaussianPolyProfile {
        coeffs: vec![1.0],
        scale: p.scale,
        dim: p.dim,
    };
    for _ in 0..deg {
        basis.push(cur.coeffs.clone());
        cur = cur.laplacian();
    }
    let mut rest = p.coeffs.clone();
    let mut c = vec![0.0; deg];
    for j in (0..deg).rev() {
        let lead = basis[j][j];
        c[j] = rest[j] / lead;
        for (i, b) in basis[j].iter().enumerate() {
            rest[i] -= c[j] * b;
        }
    }
    c
}

/// (u∗v)(|y|) on ℝ^m.
///
/// Equal-scale Gaussian profiles are convolved exactly through
/// Δ^i g_a ∗ Δ^j g_a = Δ^{i+j}(g_a∗g_a), g_a∗g_a = (π/2a)^{m/2}e^{−a|y|²/2}.
/// Everything else is tabulated by bipolar quadrature.
pub fn radial_convolve(u: &RadialProfile, v: &RadialProfile, m: usize) -> Result<RadialProfile> {
    if u.dim != m || v.dim != m {
        return domain(format!(
            "convolution in dimension {m} of profiles with dims {} and {}",
            u.dim, v.dim
        ));
    }
    if u.is_zero() || v.is_zero() {
        return Ok(RadialProfile::zero(m));
    }
    for (name, p) in [("u", u), ("v", v)] {
        match moment(p, 0.0, false) {
            Ok(x) if x.is_finite() => {}
            _ => {
                return Err(Error::Precondition(format!(
                    "{name} is not integrable on R^{m}"
                )))
            }
        }
    }
    if let (Some(pu), Some(pv)) = (u.as_gaussian_poly(), v.as_gaussian_poly()) {
        if pu.scale == pv.scale {
            return Ok(RadialProfile::gaussian_poly(convolve_exact(pu, pv, m)?));
        }
    }
    convolve_bipolar(u, v, m)
}

fn convolve_exact(
    pu: &GaussianPolyProfile,
    pv: &GaussianPolyProfile,
    m: usize,
) -> Result<GaussianPolyProfile> {
    let a = pu.scale;
    let cu = laplacian_basis_coeffs(pu);
    let cv = laplacian_basis_coeffs(pv);
    let mut mixed = vec![0.0; cu.len() + cv.len() - 1];
    for (i, x) in cu.iter().enumerate() {
        for (j, y) in cv.iter().enumerate() {
            mixed[i + j] += x * y;
        }
    }
    let pref = (PI / (2.0 * a)).powf(m as f64 / 2.0);
    let mut coeffs = vec![0.0; mixed.len()];
    let mut term = GaussianPolyProfile::new(vec![1.0], a / 2.0, m)?;
    for c in mixed.iter() {
        for (i, t) in term.coeffs.iter().enumerate() {
            coeffs[i] += pref * c * t;
        }
        term = term.laplacian();
    }
    GaussianPolyProfile::new(coeffs, a / 2.0, m)
}

const BIPOLAR_POINTS: usize = 2001;
const BIPOLAR_TOL: f64 = 1e-11;

fn convolve_bipolar(u: &RadialProfile, v: &RadialProfile, m: usize) -> Result<RadialProfile> {
    // the angular integral runs over v; keep the smooth factor there
    let (u, v) = if v.as_gaussian_poly().is_none() && u.as_gaussian_poly().is_some() {
        (v, u)
    } else {
        (u, v)
    };
    let ru = u.support_radius(1e-14);
    let rv = v.support_radius(1e-14);
    if !ru.is_finite() || !rv.is_finite() {
        return Err(Error::Unsupported(
            "bipolar convolution needs profiles with finite support radius".into(),
        ));
    }
    let r_out = ru + rv;
    let xs: Vec<f64> = (0..BIPOLAR_POINTS)
        .map(|i| r_out * i as f64 / (BIPOLAR_POINTS - 1) as f64)
        .collect();
    let ys: Result<Vec<f64>> = xs
        .par_iter()
        .map(|&r| bipolar_value(u, v, m, r, ru))
        .collect();
    let table = SampledFunction1D::new(xs, ys?, Extrapolation::Zero, Extrapolation::Zero)?;
    Ok(RadialProfile::tabulated(table, m))
}

/// (u∗v)(r) by integrating u over spheres |z| = ρ around the origin.
pub(crate) fn bipolar_value(
    u: &RadialProfile,
    v: &RadialProfile,
    m: usize,
    r: f64,
    ru: f64,
) -> Result<f64> {
    let floor = BIPOLAR_TOL
        * 1e-3
        * peak_abs(u, ru)
        * peak_abs(v, ru).max(1e-300)
        * ru.max(1.0).powi(m as i32);
    if m == 1 {
        let f = |rho: f64| u.eval(rho) * (v.eval((r - rho).abs()) + v.eval(r + rho));
        let mut total = 0.0;
        let split = r.min(ru);
        total += adaptive_gk(f, 0.0, split, BIPOLAR_TOL, floor)?.value;
        total += adaptive_gk(f, split, ru, BIPOLAR_TOL, floor)?.value;
        return Ok(total);
    }
    let sigma = sphere_area(m - 1)?;
    let pow = (m - 2) as i32;
    let shell = |rho: f64| -> f64 {
        let ur = u.eval(rho);
        if ur == 0.0 {
            return 0.0;
        }
        let inner = adaptive_gk(
            |phi: f64| {
                let d2 = (r * r + rho * rho - 2.0 * r * rho * phi.cos()).max(0.0);
                v.eval(d2.sqrt()) * phi.sin().powi(pow)
            },
            0.0,
            PI,
            BIPOLAR_TOL,
            floor * 1e-3,
        )
        .map(|e| e.value)
        .unwrap_or(f64::NAN);
        rho.powi(m as i32 - 1) * ur * inner
    };
    let split = r.min(ru);
    let mut total = adaptive_gk(shell, 0.0, split, BIPOLAR_TOL, floor)?.value;
    total += adaptive_gk(shell, split, ru, BIPOLAR_TOL, floor)?.value;
    Ok(sigma * total)
}

fn peak_abs(p: &RadialProfile, r_max: f64) -> f64 {
    (0..=400)
        .map(|i| p.eval(r_max * i as f64 / 400.0).abs())
        .fold(0.0, f64::max)
}

/// σ_{m−1}∫₀^∞ r^{j+m−1} w(r) dr, or the same with |w| when `signed` is false.
pub fn moment(w: &RadialProfile, j: f64, signed: bool) -> Result<f64> {
    if w.is_zero() {
        return Ok(0.0);
    }
    let m = w.dim;
    let power = j + m as f64 - 1.0;
    match &w.repr {
        Representation::GaussianPoly(p) if signed => p.signed_moment(j),
        Representation::GaussianPoly(p) => {
            let sigma = sphere_area(m)?;
            let f = |r: f64| nz_mul(r.powf(power), p.eval(r).abs());
            let r_end = w.support_radius(1e-16);
            let mut breaks = sign_change_points(|r| p.eval(r), r_end, 4000);
            breaks.insert(0, 0.0);
            breaks.push(r_end);
            let mut total = 0.0;
            for seg in breaks.windows(2) {
                total += adaptive_gk(f, seg[0], seg[1], 1e-12, 1e-20)?.value;
            }
            total += semi_infinite(f, r_end, 1.0 / p.scale.sqrt(), 1e-10, 1e-20)?.value;
            Ok(sigma * total)
        }
        Representation::Tabulated(t) => {
            let sigma = sphere_area(m)?;
            let value = |r: f64| {
                let y = t.eval(r);
                if signed {
                    y
                } else {
                    y.abs()
                }
            };
            let x0 = t.first_x();
            let xn = t.last_x();
            let mut total = 0.0;
            // head: below the first abscissa
            if x0 > 0.0 {
                match t.left {
                    Extrapolation::Zero => {}
                    Extrapolation::PowerLaw(p) => {
                        let e = power + 1.0 + p;
                        if e <= 0.0 {
                            return Err(Error::Divergence {
                                condition: format!(
                                    "moment of order {j} diverges at the origin (exponent {p})"
                                ),
                            });
                        }
                        total += value(x0) * x0.powf(power + 1.0) / e;
                    }
                }
            }
            let xs = t.abscissae();
            let stride = (xs.len() / 64).max(1);
            let mut breaks: Vec<f64> = xs.iter().step_by(stride).copied().collect();
            if *breaks.last().unwrap() != xn {
                breaks.push(xn);
            }
            for seg in breaks.windows(2) {
                total +=
                    adaptive_gk(|r| r.powf(power) * value(r), seg[0], seg[1], 1e-10, 1e-20)?.value;
            }
            match t.right {
                Extrapolation::Zero => {}
                Extrapolation::PowerLaw(p) => {
                    let e = power + 1.0 + p;
                    if e >= 0.0 {
                        return Err(Error::Divergence {
                            condition: format!(
                                "moment of order {j} diverges at infinity (tail exponent {p})"
                            ),
                        });
                    }
                    total += value(xn) * xn.powf(power + 1.0) / (-e);
                }
            }
            Ok(sigma * total)
        }
    }
}

/// Product that treats an exact zero factor as absorbing.
fn nz_mul(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

fn sign_change_points<F: Fn(f64) -> f64>(f: F, r_end: f64, steps: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let dr = r_end / steps as f64;
    let mut prev = f(0.0);
    for i in 1..=steps {
        let r = i as f64 * dr;
        let cur = f(r);
        if prev != 0.0 && cur != 0.0 && prev.signum() != cur.signum() {
            let (mut lo, mut hi) = (r - dr, r);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if f(mid).signum() == f(lo).signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        prev = cur;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEntry {
    pub order: usize,
    pub signed: f64,
    pub absolute: f64,
}

/// Outcome of [`check_admissibility`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub n: usize,
    pub k: usize,
    pub moments: Vec<MomentEntry>,
    /// σ_{m−1}∫₁^∞ r^{β+m−1}|w| dr
    pub decay_integral: f64,
    pub beta: f64,
    /// ∫₀¹ r^{m−1}|w| dr
    pub local_integral: f64,
    /// σ_{m−1}∫₀^∞ r^{m−1}|w| dr
    pub abs_mass: f64,
    pub moment_tol: f64,
    pub degenerate: bool,
    pub passed: bool,
}

/// The β used when none is given: the smallest integer above k.
pub fn default_beta(k: usize) -> f64 {
    k as f64 + 1.0
}

/// Evaluates the local, decay and cancellation conditions for `w` on ℝ^{n−k}.
pub fn check_admissibility(
    w: &RadialProfile,
    n: usize,
    k: usize,
    beta: f64,
) -> Result<AdmissibilityReport> {
    if k == 0 || k >= n {
        return domain(format!(
            "admissibility needs 1 <= k < n, got n = {n}, k = {k}"
        ));
    }
    let m = n - k;
    if w.dim != m {
        return domain(format!("wavelet lives on R^{} but n - k = {m}", w.dim));
    }
    if !(beta > k as f64) {
        return domain(format!(
            "decay exponent beta must exceed k = {k}, got {beta}"
        ));
    }
    let mut moments = Vec::new();
    for half in 0..=(k / 2) {
        let j = 2 * half;
        let signed = moment(w, j as f64, true)?;
        let absolute = moment(w, j as f64, false)?;
        moments.push(MomentEntry {
            order: j,
            signed,
            absolute,
        });
    }
    let abs_mass = moments[0].absolute;
    let (local_integral, decay_integral) = split_abs_integrals(w, beta)?;
    let degenerate = w.is_zero();
    let passed = moments.iter().all(|e| e.signed.abs() <= MOMENT_TOL)
        && decay_integral.is_finite()
        && local_integral.is_finite();
    Ok(AdmissibilityReport {
        n,
        k,
        moments,
        decay_integral,
        beta,
        local_integral,
        abs_mass,
        moment_tol: MOMENT_TOL,
        degenerate,
        passed,
    })
}

fn split_abs_integrals(w: &RadialProfile, beta: f64) -> Result<(f64, f64)> {
    if w.is_zero() {
        return Ok((0.0, 0.0));
    }
    let m = w.dim as f64;
    let sigma = sphere_area(w.dim)?;
    let local = adaptive_gk(
        |r| r.powf(m - 1.0) * w.eval(r).abs(),
        0.0,
        1.0,
        1e-10,
        1e-20,
    )?
    .value;
    let decay = match &w.repr {
        Representation::Tabulated(t) => match t.right {
            Extrapolation::PowerLaw(p) if beta + m + p >= 0.0 => f64::INFINITY,
            _ => tail_abs(w, beta)?,
        },
        Representation::GaussianPoly(_) => tail_abs(w, beta)?,
    };
    Ok((local, sigma * decay))
}

fn tail_abs(w: &RadialProfile, beta: f64) -> Result<f64> {
    let m = w.dim as f64;
    let f = |r: f64| nz_mul(r.powf(beta + m - 1.0), w.eval(r).abs());
    let r_end = w.support_radius(1e-16).max(2.0);
    if !r_end.is_finite() {
        return Ok(semi_infinite(f, 1.0, 1.0, 1e-8, 1e-20)?.value);
    }
    let mut breaks = vec![1.0];
    let mut x = 1.0;
    while x < r_end {
        x = (x + 0.5).min(r_end);
        breaks.push(x);
    }
    let mut total = 0.0;
    for seg in breaks.windows(2) {
        total += adaptive_gk(f, seg[0], seg[1], 1e-10, 1e-20)?.value;
    }
    total += semi_infinite(f, r_end, 1.0, 1e-8, 1e-20)?.value;
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn laplacian_of_gaussian_first_order() {
        for m in 1..5 {
            for a in [0.5, 1.0, 2.0] {
                let p = laplacian_gaussian(1, m, a).unwrap();
                assert_relative_eq!(p.coeffs[0], -2.0 * m as f64 * a, max_relative = 1e-15);
                assert_relative_eq!(p.coeffs[1], 4.0 * a * a, max_relative = 1e-15);
            }
        }
        assert_eq!(laplacian_gaussian(0, 3, 1.0).unwrap().coeffs, vec![1.0]);
    }

    #[test]
    fn laplacian_second_order_matches_finite_differences() {
        // Δ of the N=1 profile, by central differences of f'' + (m−1)/r f'
        let p1 = laplacian_gaussian(1, 2, 1.0).unwrap();
        let p2 = laplacian_gaussian(2, 2, 1.0).unwrap();
        let h = 1e-4;
        for r in [0.3, 0.8, 1.5] {
            let f = |x: f64| p1.eval(x);
            let d2 = (f(r + h) - 2.0 * f(r) + f(r - h)) / (h * h);
            let d1 = (f(r + h) - f(r - h)) / (2.0 * h);
            assert_relative_eq!(p2.eval(r), d2 + d1 / r, max_relative = 1e-6, epsilon = 1e-6);
        }
    }

    #[test]
    fn gaussian_moments() {
        for m in 1..5 {
            let g = RadialProfile::gaussian(1.0, m).unwrap();
            assert_relative_eq!(
                moment(&g, 0.0, true).unwrap(),
                PI.powf(m as f64 / 2.0),
                max_relative = 1e-13
            );
            assert_relative_eq!(
                moment(&g, 0.0, false).unwrap(),
                PI.powf(m as f64 / 2.0),
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn gaussian_self_convolution() {
        for m in 1..4 {
            let g = RadialProfile::gaussian(1.0, m).unwrap();
            let w = radial_convolve(&g, &g, m).unwrap();
            let p = w.as_gaussian_poly().unwrap();
            assert_relative_eq!(p.scale, 0.5);
            assert_relative_eq!(
                p.coeffs[0],
                (PI / 2.0).powf(m as f64 / 2.0),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn laplacians_integrate_to_zero() {
        for m in 1..5 {
            for order in 1..4 {
                let p = RadialProfile::gaussian_poly(laplacian_gaussian(order, m, 1.0).unwrap());
                assert!(moment(&p, 0.0, true).unwrap().abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_profile() {
        let z = RadialProfile::zero(2);
        let g = RadialProfile::gaussian(1.0, 2).unwrap();
        assert!(radial_convolve(&z, &g, 2).unwrap().is_zero());
        let r = check_admissibility(&z, 3, 1, 2.0).unwrap();
        assert!(r.degenerate);
        assert!(r.moments.iter().all(|e| e.signed == 0.0));
    }

    #[test]
    fn plain_gaussian_is_not_admissible() {
        let g = RadialProfile::gaussian(1.0, 2).unwrap();
        let r = check_admissibility(&g, 3, 1, 2.0).unwrap();
        assert!(!r.passed);
        assert!(!r.degenerate);
    }

    #[test]
    fn dimension_mismatch() {
        let g = RadialProfile::gaussian(1.0, 2).unwrap();
        assert!(matches!(
            check_admissibility(&g, 4, 1, 2.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn basis_decomposition_roundtrip() {
        let p = GaussianPolyProfile::new(vec![0.3, -1.2, 0.7, 0.25], 0.8, 3).unwrap();
        let c = laplacian_basis_coeffs(&p);
        let mut rebuilt = [0.0; 4];
        let mut cur = GaussianPolyProfile::new(vec![1.0], 0.8, 3).unwrap();
        for cj in &c {
            for (i, t) in cur.coeffs.iter().enumerate() {
                rebuilt[i] += cj * t;
            }
            cur = cur.laplacian();
        }
        for (a, b) in rebuilt.iter().zip(&p.coeffs) {
            assert_relative_eq!(a, b, epsilon = 1e-13);
        }
    }

    #[test]
    fn json_roundtrip() {
        let p = RadialProfile::gaussian_poly(laplacian_gaussian(2, 3, 0.5).unwrap());
        let text = serde_json::to_string(&ProfileJson::from(&p)).unwrap();
        assert!(text.contains("\"kind\":\"gaussian_poly\""));
        let back: ProfileJson = serde_json::from_str(&text).unwrap();
        let q = RadialProfile::try_from(back).unwrap();
        assert_eq!(q.as_gaussian_poly(), p.as_gaussian_poly());
    }

    #[test]
    fn dilation() {
        let p = RadialProfile::gaussian_poly(laplacian_gaussian(1, 2, 1.0).unwrap());
        let d = p.dilate(2.0).unwrap();
        for r in [0.1, 0.7, 2.3] {
            assert_relative_eq!(d.eval(r), p.eval(r / 2.0), max_relative = 1e-14);
        }
    }

    fn tabulate(p: &RadialProfile, r_max: f64) -> RadialProfile {
        let xs: Vec<f64> = (0..=1200).map(|i| r_max * i as f64 / 1200.0).collect();
        let ys = xs.iter().map(|&r| p.eval(r)).collect();
        let t = SampledFunction1D::new(xs, ys, Extrapolation::Zero, Extrapolation::Zero).unwrap();
        RadialProfile::tabulated(t, p.dim)
    }

    fn sup_rel(a: &RadialProfile, b: &RadialProfile, r_max: f64) -> f64 {
        let rs: Vec<f64> = (0..=200).map(|i| r_max * i as f64 / 200.0).collect();
        let peak = rs.iter().map(|&r| a.eval(r).abs()).fold(0.0, f64::max);
        rs.iter()
            .map(|&r| (a.eval(r) - b.eval(r)).abs())
            .fold(0.0, f64::max)
            / peak
    }

    #[test]
    fn exact_and_bipolar_paths_agree() {
        for m in [1, 2, 3] {
            let u = RadialProfile::gaussian_poly(laplacian_gaussian(1, m, 1.0).unwrap());
            let v = RadialProfile::gaussian(1.0, m).unwrap();
            let exact = radial_convolve(&u, &v, m).unwrap();
            let generic = convolve_bipolar(&u, &v, m).unwrap();
            let err = sup_rel(&exact, &generic, 5.0);
            assert!(err < 1e-7, "m = {m}: {err}");
        }
    }

    #[test]
    fn convolution_is_symmetric() {
        let u = tabulate(
            &RadialProfile::gaussian_poly(laplacian_gaussian(1, 2, 1.0).unwrap()),
            8.0,
        );
        let v = RadialProfile::gaussian(2.0, 2).unwrap();
        let (ru, rv) = (u.support_radius(1e-14), v.support_radius(1e-14));
        for r in [0.0, 0.4, 1.3, 2.5] {
            let uv = bipolar_value(&u, &v, 2, r, ru).unwrap();
            let vu = bipolar_value(&v, &u, 2, r, rv).unwrap();
            assert!((uv - vu).abs() < 1e-8, "r = {r}: {uv} vs {vu}");
        }
    }

    #[test]
    fn example_wavelets_are_admissible() {
        for (n, k) in [(2, 1), (3, 1), (3, 2), (4, 2), (4, 3), (5, 2)] {
            let w = WaveletSpec::example(k).build(n - k).unwrap();
            let rep = check_admissibility(&w, n, k, default_beta(k)).unwrap();
            assert!(rep.passed, "n = {n}, k = {k}: {rep:?}");
            assert!(rep.moments.iter().all(|e| e.signed.abs() < 1e-9));
            assert!(rep.abs_mass > 0.0);
        }
    }

    #[test]
    fn tabulated_power_tail_diverges() {
        let xs: Vec<f64> = (1..=100).map(|i| i as f64 * 0.1).collect();
        let ys = xs.iter().map(|x: &f64| x.powf(-0.5)).collect();
        let t = SampledFunction1D::new(xs, ys, Extrapolation::Zero, Extrapolation::PowerLaw(-0.5))
            .unwrap();
        let w = RadialProfile::tabulated(t, 1);
        assert!(matches!(
            moment(&w, 0.0, false),
            Err(Error::Divergence { .. })
        ));
        assert!(moment(&w, 0.0, true).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn laplacian_moment_vanishes(order in 1usize..4, m in 1usize..5, a in 0.3f64..3.0) {
                let p = laplacian_gaussian(order, m, a).unwrap();
                let scale = p.signed_moment(2.0 * order as f64).unwrap().abs().max(1.0);
                for j in 0..order {
                    prop_assert!(p.signed_moment(2.0 * j as f64).unwrap().abs() < 1e-10 * scale);
                }
            }

            #[test]
            fn exact_convolution_preserves_mass(n1 in 0usize..3, n2 in 0usize..3, m in 1usize..4, a in 0.5f64..2.0) {
                let u = RadialProfile::gaussian_poly(laplacian_gaussian(n1, m, a).unwrap());
                let v = RadialProfile::gaussian_poly(laplacian_gaussian(n2, m, a).unwrap());
                let w = radial_convolve(&u, &v, m).unwrap();
                let mw = moment(&w, 0.0, true).unwrap();
                let expect = moment(&u, 0.0, true).unwrap() * moment(&v, 0.0, true).unwrap();
                prop_assert!((mw - expect).abs() < 1e-9 * expect.abs().max(1.0));
            }
        }
    }
}
