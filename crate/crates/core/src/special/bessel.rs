//! Exponentially scaled modified Bessel function e^{−z}I_ν(z) for real ν ≥ 0.

use crate::error::{domain, Result};
use crate::special::gamma::ln_gamma;

/// Switch from the power series to the asymptotic expansion.
const ASYMPTOTIC_FROM: f64 = 30.0;

/// e^{−z} I_ν(z) for z ≥ 0.
pub fn bessel_i_scaled(nu: f64, z: f64) -> Result<f64> {
    if !(nu >= 0.0) || !(z >= 0.0) || !z.is_finite() {
        return domain(format!(
            "scaled Bessel I needs nu >= 0 and finite z >= 0, got ({nu}, {z})"
        ));
    }
    if z == 0.0 {
        return Ok(if nu == 0.0 { 1.0 } else { 0.0 });
    }
    if z < ASYMPTOTIC_FROM {
        // Σ (z/2)^{2j+ν}/(j! Γ(j+ν+1)), every term positive
        let half = z / 2.0;
        let mut term = (nu * half.ln() - ln_gamma(nu + 1.0)? - z).exp();
        let mut sum = term;
        let mut j = 0.0;
        loop {
            j += 1.0;
            term *= half * half / (j * (j + nu));
            sum += term;
            if term < 1e-17 * sum {
                return Ok(sum);
            }
        }
    }
    // e^{−z}I_ν(z) ~ (2πz)^{−1/2} Σ (−1)^j a_j(ν)/z^j, cut at the smallest term
    let mu = 4.0 * nu * nu;
    let mut term: f64 = 1.0;
    let mut sum = 1.0;
    for j in 1..60 {
        let jf = j as f64;
        let next = -term * (mu - (2.0 * jf - 1.0).powi(2)) / (8.0 * jf * z);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    Ok(sum / (2.0 * std::f64::consts::PI * z).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::quad::adaptive_gk;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    /// (1/π)∫₀^π e^{z(cos φ − 1)} cos(νφ) dφ, valid for integer ν.
    fn integral_form(nu: f64, z: f64) -> f64 {
        adaptive_gk(
            |p: f64| (z * (p.cos() - 1.0)).exp() * (nu * p).cos(),
            0.0,
            PI,
            1e-14,
            1e-300,
        )
        .unwrap()
        .value
            / PI
    }

    #[test]
    fn integer_orders_match_integral() {
        for nu in [0.0, 1.0, 2.0] {
            for z in [0.01, 0.7, 5.0, 29.9, 30.1, 80.0, 500.0] {
                assert_relative_eq!(
                    bessel_i_scaled(nu, z).unwrap(),
                    integral_form(nu, z),
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn half_order_closed_form() {
        // I_{1/2}(z) = √(2/(πz)) sinh z
        for z in [0.05, 1.0, 10.0, 40.0, 300.0] {
            let exact = (2.0 / (PI * z)).sqrt() * 0.5 * (1.0 - (-2.0 * z).exp());
            assert_relative_eq!(
                bessel_i_scaled(0.5, z).unwrap(),
                exact,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn edge_cases() {
        assert_eq!(bessel_i_scaled(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_i_scaled(1.5, 0.0).unwrap(), 0.0);
        assert!(bessel_i_scaled(-1.0, 1.0).is_err());
    }
}
