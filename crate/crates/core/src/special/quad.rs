//! Quadrature primitives.
//!
//! Three rules cover every integral in the crate:
//!
//! * adaptive Gauss–Kronrod (7/15 points, global bisection) for smooth
//!   integrands on finite intervals,
//! * tanh–sinh (double exponential) for integrands with algebraic endpoint
//!   singularities; the integrand receives the distances to both endpoints so
//!   that factors such as `(t − r)^{α−1}` can be formed without cancellation,
//! * a rational map of `[a, ∞)` onto `[0, 1)` followed by tanh–sinh for
//!   semi-infinite ranges.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances and panel layout shared by the quadrature routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub panel_count: usize,
    pub points_per_panel: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Radius beyond which integrands known to decay fast are treated as zero.
    pub truncation_radius: f64,
}

impl QuadratureSpec {
    /// Tolerances used when building kernels (errors here propagate into the
    /// reconstruction constant).
    pub const fn kernel() -> Self {
        Self {
            panel_count: 16,
            points_per_panel: 16,
            rel_tol: 1e-9,
            abs_tol: 1e-15,
            truncation_radius: 12.0,
        }
    }

    /// Tolerances used for transform-level integrals.
    pub const fn transform() -> Self {
        Self {
            panel_count: 8,
            points_per_panel: 12,
            rel_tol: 1e-6,
            abs_tol: 1e-13,
            truncation_radius: 12.0,
        }
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.panel_count == 0 || self.points_per_panel == 0 {
            return Err(Error::Domain(
                "quadrature needs at least one panel and one point".into(),
            ));
        }
        if !(self.rel_tol > 0.0) || !(self.abs_tol >= 0.0) {
            return Err(Error::Domain(
                "quadrature tolerances must be positive".into(),
            ));
        }
        if !(self.truncation_radius > 0.0) {
            return Err(Error::Domain("truncation radius must be positive".into()));
        }
        Ok(())
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self::kernel()
    }
}

/// Integral value with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub const ZERO: Estimate = Estimate {
        value: 0.0,
        error: 0.0,
    };

    fn add(self, other: Estimate) -> Estimate {
        Estimate {
            value: self.value + other.value,
            error: self.error + other.error,
        }
    }
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Composite Gauss–Legendre rule with `panels` equal panels.
pub fn composite_gauss<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    panels: usize,
    points: usize,
) -> f64 {
    let (x, w) = gauss_legendre(points);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        let mut acc = 0.0;
        for (xi, wi) in x.iter().zip(&w) {
            acc += wi * f(mid + 0.5 * h * xi);
        }
        total += 0.5 * h * acc;
    }
    total
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Estimate {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Estimate {
        value: kronrod * h,
        error: ((kronrod - gauss) * h).abs(),
    }
}

/// Globally adaptive Gauss–Kronrod integration on a finite interval.
pub fn adaptive_gk<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate::ZERO);
    }
    const MAX_INTERVALS: usize = 4000;
    let first = gk15(&f, a, b);
    let mut pieces: Vec<(f64, f64, Estimate)> = vec![(a, b, first)];
    let mut total = first;
    while total.error > abs_tol.max(rel_tol * total.value.abs()) && pieces.len() < MAX_INTERVALS {
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2.error.total_cmp(&y.1 .2.error))
            .expect("non-empty");
        let (lo, hi, old) = pieces.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            pieces.push((lo, hi, old));
            break;
        }
        let left = gk15(&f, lo, mid);
        let right = gk15(&f, mid, hi);
        total.value += left.value + right.value - old.value;
        pieces.push((lo, mid, left));
        pieces.push((mid, hi, right));
        total.error = pieces.iter().map(|p| p.2.error).sum();
    }
    total.value = pieces.iter().map(|p| p.2.value).sum();
    if !total.value.is_finite() {
        return Err(Error::Quadrature(format!(
            "non-finite integral on [{a}, {b}]"
        )));
    }
    Ok(total)
}

const TANH_SINH_TMAX: f64 = 6.5;
const TANH_SINH_MAX_LEVEL: usize = 10;

/// Tanh–sinh quadrature of `f(x, x − a, b − x)` over [a, b].
///
/// The endpoint distances are computed from the transformed abscissa directly,
/// so they stay accurate down to ~1e-300 even where `x` itself rounds to an
/// endpoint.
pub fn tanh_sinh<F: Fn(f64, f64, f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate::ZERO);
    }
    if b < a {
        let e = tanh_sinh_ordered(&|x, dl, dr| f(x, dr, dl), b, a, rel_tol, abs_tol)?;
        return Ok(Estimate {
            value: -e.value,
            error: e.error,
        });
    }
    tanh_sinh_ordered(&f, a, b, rel_tol, abs_tol)
}

fn tanh_sinh_ordered(
    f: &dyn Fn(f64, f64, f64) -> f64,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Estimate> {
    let c = 0.5 * (a + b);
    let d = 0.5 * (b - a);
    let half_pi = std::f64::consts::FRAC_PI_2;

    // Sum over nodes t = j·h for j in the given parity class.
    let node_sum = |h: f64, odd_only: bool| -> f64 {
        let mut acc = 0.0;
        let step = if odd_only { 2 } else { 1 };
        let start = if odd_only { 1 } else { 0 };
        let mut j: i64 = start;
        loop {
            let t = j as f64 * h;
            if t > TANH_SINH_TMAX {
                break;
            }
            let u = half_pi * t.sinh();
            let e = (-2.0 * u).exp();
            // 1 − tanh(u) = 2e^{−2u}/(1 + e^{−2u})
            let comp = 2.0 * e / (1.0 + e);
            let weight = half_pi * t.cosh() * 4.0 * e / ((1.0 + e) * (1.0 + e));
            let dist = d * comp;
            if dist <= 0.0 || weight == 0.0 {
                break;
            }
            let inner = d - dist;
            if j == 0 {
                acc += weight * f(c, d, d);
            } else {
                // right node: x = c + (d − dist), left node symmetric
                let xr = c + inner;
                let xl = c - inner;
                let fr = f(xr, 2.0 * d - dist, dist);
                let fl = f(xl, dist, 2.0 * d - dist);
                acc += weight * (fr + fl);
            }
            j += step;
        }
        acc
    };

    let mut h = 1.0;
    let mut sum = node_sum(h, false);
    let mut estimate = d * h * sum;
    let mut last_diff = f64::INFINITY;
    for level in 1..=TANH_SINH_MAX_LEVEL {
        h *= 0.5;
        sum += node_sum(h, true);
        let next = d * h * sum;
        let diff = (next - estimate).abs();
        estimate = next;
        last_diff = diff;
        if !estimate.is_finite() {
            return Err(Error::Quadrature(format!(
                "non-finite tanh-sinh sum on [{a}, {b}]"
            )));
        }
        if level >= 3 && diff <= abs_tol.max(rel_tol * estimate.abs()) {
            break;
        }
    }
    Ok(Estimate {
        value: estimate,
        error: last_diff,
    })
}

/// ∫_a^∞ f via x = a + s·u/(1 − u) with tanh–sinh in u.
pub fn semi_infinite<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    scale: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Estimate> {
    tanh_sinh(
        |u, _, one_minus_u| {
            let x = a + scale * u / one_minus_u;
            let jac = scale / (one_minus_u * one_minus_u);
            if !x.is_finite() || !jac.is_finite() {
                return 0.0;
            }
            let v = f(x);
            if v == 0.0 {
                0.0
            } else {
                v * jac
            }
        },
        0.0,
        1.0,
        rel_tol,
        abs_tol,
    )
}

/// Adaptive Gauss–Kronrod over consecutive pieces `[p_i, p_{i+1}]`.
pub fn integrate_pieces<F: Fn(f64) -> f64>(
    f: F,
    breakpoints: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Estimate> {
    let mut total = Estimate::ZERO;
    for w in breakpoints.windows(2) {
        total = total.add(adaptive_gk(&f, w[0], w[1], rel_tol, abs_tol)?);
    }
    Ok(total)
}

/// Geometric breakpoints `lo, lo·ratio, …, hi` (both ends included).
pub fn geometric_breakpoints(lo: f64, hi: f64, ratio: f64) -> Vec<f64> {
    let mut pts = vec![lo];
    let mut x = lo * ratio;
    while x < hi {
        pts.push(x);
        x *= ratio;
    }
    pts.push(hi);
    pts
}
