//! Abel-type integrals with the weight (r² − s²)^{k/2−1}.

use super::quad::{adaptive_gk, QuadratureSpec};
use std::f64::consts::FRAC_PI_2;

use crate::error::{domain, Result};

/// ∫₀^r s^{n−k−1} h(s) (r² − s²)^{k/2−1} ds.
///
/// With s = r sin θ the integral becomes
/// r^{n−2} ∫₀^{π/2} sin^{n−k−1}θ cos^{k−1}θ h(r sin θ) dθ, whose integrand is
/// bounded for every 1 ≤ k < n.
pub fn abel_quadrature<H: Fn(f64) -> f64>(
    h: H,
    r: f64,
    n: usize,
    k: usize,
    q: &QuadratureSpec,
) -> Result<f64> {
    abel_quadrature_supported(h, r, n, k, f64::INFINITY, q)
}

/// [`abel_quadrature`] for `h` that is negligible beyond `support`; the angle
/// range is split where r sin θ = support so the quadrature sees the bump.
pub fn abel_quadrature_supported<H: Fn(f64) -> f64>(
    h: H,
    r: f64,
    n: usize,
    k: usize,
    support: f64,
    q: &QuadratureSpec,
) -> Result<f64> {
    if k == 0 || k >= n {
        return domain(format!(
            "abel quadrature needs 1 <= k < n, got n = {n}, k = {k}"
        ));
    }
    if !(r > 0.0) || !r.is_finite() {
        return domain(format!("abel quadrature needs r > 0, got {r}"));
    }
    let ps = (n - k - 1) as i32;
    let pc = (k - 1) as i32;
    let f = |theta: f64| {
        let (s, c) = theta.sin_cos();
        let v = h(r * s);
        if v == 0.0 {
            0.0
        } else {
            s.powi(ps) * c.powi(pc) * v
        }
    };
    let mut total = 0.0;
    let mut lo = 0.0;
    if support < r {
        // resolve the region r sin θ < support on a graded set of pieces
        let cut = (support / r).asin();
        for piece in [0.125, 0.25, 0.5, 1.0] {
            let hi = cut * piece;
            total += adaptive_gk(f, lo, hi, q.rel_tol, q.abs_tol)?.value;
            lo = hi;
        }
    }
    total += adaptive_gk(f, lo, FRAC_PI_2, q.rel_tol, q.abs_tol)?.value;
    Ok(r.powi(n as i32 - 2) * total)
}
