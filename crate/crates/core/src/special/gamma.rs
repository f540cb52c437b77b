//! Gamma function and sphere areas.

use std::f64::consts::PI;

use crate::error::{domain, Result};

// Lanczos approximation, g = 7, nine coefficients.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.floor()
}

fn lanczos_sum(x: f64) -> f64 {
    // x is the shifted argument (Γ(x + 1) form).
    let mut acc = LANCZOS_COEFFS[0];
    for (i, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    acc
}

/// Γ(x) for real `x` that is not a pole.
///
/// Uses the Lanczos series for `x >= 0.5` and the reflection formula
/// Γ(x)Γ(1 − x) = π / sin(πx) below that.
pub fn gamma(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return domain(format!("gamma of non-finite argument {x}"));
    }
    if is_nonpositive_integer(x) {
        return domain(format!("gamma has a pole at {x}"));
    }
    Ok(gamma_unchecked(x))
}

fn gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        // sin(πx) evaluated on the reduced argument keeps precision near integers.
        let s = sin_pi(x);
        PI / (s * gamma_unchecked(1.0 - x))
    } else {
        let z = x - 1.0;
        let t = z + LANCZOS_G + 0.5;
        (2.0 * PI).sqrt() * ((z + 0.5) * t.ln() - t).exp() * lanczos_sum(z)
    }
}

/// ln Γ(x) for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return domain(format!(
            "ln_gamma requires a positive finite argument, got {x}"
        ));
    }
    if x < 0.5 {
        return Ok((PI / sin_pi(x)).ln() - ln_gamma(1.0 - x)?);
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    Ok(0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + lanczos_sum(z).ln())
}

/// sin(πx) with argument reduction to [-1/2, 1/2].
fn sin_pi(x: f64) -> f64 {
    let n = x.round();
    let r = x - n;
    let s = (PI * r).sin();
    if (n as i64) % 2 == 0 {
        s
    } else {
        -s
    }
}

/// Surface area σ_{m−1} = 2π^{m/2}/Γ(m/2) of the unit sphere in ℝ^m.
pub fn sphere_area(m: usize) -> Result<f64> {
    if m == 0 {
        return domain("sphere_area requires m >= 1");
    }
    let half = m as f64 / 2.0;
    Ok(2.0 * PI.powf(half) / gamma(half)?)
}

/// Volume of the unit ball in ℝ^m.
pub fn ball_volume(m: usize) -> Result<f64> {
    if m == 0 {
        return Ok(1.0);
    }
    Ok(sphere_area(m)? / m as f64)
}

/// Binomial coefficient C(a, j) for real `a`.
pub fn binomial(a: f64, j: usize) -> f64 {
    let mut c = 1.0;
    for i in 0..j {
        c *= (a - i as f64) / (i as f64 + 1.0);
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn classical_values() {
        assert_relative_eq!(gamma(0.5).unwrap(), PI.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(gamma(5.0).unwrap(), 24.0, max_relative = 1e-14);
        assert_relative_eq!(gamma(-0.5).unwrap(), -2.0 * PI.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(gamma(1.0).unwrap(), 1.0, max_relative = 1e-15);
        // Γ(−3/2) = 4√π/3, Γ(−5/2) = −8√π/15
        assert_relative_eq!(
            gamma(-1.5).unwrap(),
            4.0 * PI.sqrt() / 3.0,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            gamma(-2.5).unwrap(),
            -8.0 * PI.sqrt() / 15.0,
            max_relative = 1e-13
        );
    }

    #[test]
    fn large_argument_matches_factorial() {
        let mut f = 1.0_f64;
        for n in 1..30 {
            f *= n as f64;
            assert_relative_eq!(gamma(n as f64 + 1.0).unwrap(), f, max_relative = 1e-13);
        }
    }

    #[test]
    fn poles_are_domain_errors() {
        for x in [0.0, -1.0, -2.0, -7.0] {
            assert!(matches!(gamma(x), Err(crate::Error::Domain(_))));
        }
    }

    #[test]
    fn ln_gamma_agrees_with_gamma() {
        for x in [0.1, 0.7, 1.5, 3.2, 12.5, 29.0] {
            assert_relative_eq!(
                ln_gamma(x).unwrap(),
                gamma(x).unwrap().ln(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(sphere_area(1).unwrap(), 2.0, max_relative = 1e-15);
        assert_relative_eq!(sphere_area(2).unwrap(), 2.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(sphere_area(3).unwrap(), 4.0 * PI, max_relative = 1e-15);
        assert!(sphere_area(0).is_err());
        assert_relative_eq!(
            ball_volume(3).unwrap(),
            4.0 * PI / 3.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn recurrence_on_random_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let x: f64 = rng.random_range(0.1..20.0);
            let lhs = gamma(x + 1.0).unwrap();
            let rhs = x * gamma(x).unwrap();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        }
    }
}
