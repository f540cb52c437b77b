//! Tabulated one-dimensional functions.
//!
//! Values are interpolated by a cubic Hermite scheme with five-point
//! derivative estimates, fourth-order accurate for smooth data. When every abscissa is positive the interpolation
//! runs in `ln x`, which suits the log-spaced tables used for kernels that
//! behave like powers near 0 and ∞. Outside the table the function is
//! continued by an explicit extrapolation rule on each side.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Continuation rule outside the tabulated range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "exponent", rename_all = "snake_case")]
pub enum Extrapolation {
    Zero,
    /// `y_end · (x / x_end)^exponent`
    PowerLaw(f64),
}

impl Extrapolation {
    pub fn exponent(&self) -> Option<f64> {
        match self {
            Extrapolation::Zero => None,
            Extrapolation::PowerLaw(p) => Some(*p),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SampledFunction1D {
    abscissae: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    log_axis: bool,
    pub left: Extrapolation,
    pub right: Extrapolation,
}

impl SampledFunction1D {
    pub fn new(
        abscissae: Vec<f64>,
        values: Vec<f64>,
        left: Extrapolation,
        right: Extrapolation,
    ) -> Result<Self> {
        if abscissae.len() != values.len() {
            return Err(Error::Invalid(format!(
                "abscissae ({}) and values ({}) differ in length",
                abscissae.len(),
                values.len()
            )));
        }
        if abscissae.len() < 2 {
            return Err(Error::Invalid(
                "a sampled function needs at least two points".into(),
            ));
        }
        if abscissae.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Invalid(
                "abscissae must be strictly increasing".into(),
            ));
        }
        if abscissae.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("sampled data must be finite".into()));
        }
        for e in [left, right] {
            if let Extrapolation::PowerLaw(p) = e {
                if !p.is_finite() {
                    return Err(Error::Invalid("power-law exponent must be finite".into()));
                }
            }
        }
        let log_axis = abscissae[0] > 0.0;
        let slopes = lagrange_slopes(&axis(&abscissae, log_axis), &values);
        Ok(Self {
            abscissae,
            values,
            slopes,
            log_axis,
            left,
            right,
        })
    }

    /// Samples `f` on `count` log-spaced points in [lo, hi].
    pub fn log_spaced(
        lo: f64,
        hi: f64,
        count: usize,
        f: impl Fn(f64) -> f64,
        left: Extrapolation,
        right: Extrapolation,
    ) -> Result<Self> {
        let xs = log_grid(lo, hi, count);
        let ys = xs.iter().map(|&x| f(x)).collect();
        Self::new(xs, ys, left, right)
    }

    /// Same as [`log_spaced`](Self::log_spaced) but evaluates `f` in parallel.
    pub fn log_spaced_par(
        lo: f64,
        hi: f64,
        count: usize,
        f: impl Fn(f64) -> f64 + Sync,
        left: Extrapolation,
        right: Extrapolation,
    ) -> Result<Self> {
        use rayon::prelude::*;
        let xs = log_grid(lo, hi, count);
        let ys = xs.par_iter().map(|&x| f(x)).collect();
        Self::new(xs, ys, left, right)
    }

    pub fn abscissae(&self) -> &[f64] {
        &self.abscissae
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.abscissae.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abscissae.is_empty()
    }

    pub fn first_x(&self) -> f64 {
        self.abscissae[0]
    }

    pub fn last_x(&self) -> f64 {
        *self.abscissae.last().expect("non-empty")
    }

    /// True when every tabulated value is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.abscissae.len();
        let x0 = self.abscissae[0];
        let xn = self.abscissae[n - 1];
        if x < x0 {
            return extrapolate(self.left, x0, self.values[0], x);
        }
        if x > xn {
            return extrapolate(self.right, xn, self.values[n - 1], x);
        }
        let i = match self.abscissae.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => return self.values[i],
            Err(i) => i - 1,
        };
        let (u0, u1, u) = if self.log_axis {
            (self.abscissae[i].ln(), self.abscissae[i + 1].ln(), x.ln())
        } else {
            (self.abscissae[i], self.abscissae[i + 1], x)
        };
        let h = u1 - u0;
        let s = (u - u0) / h;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.slopes[i], self.slopes[i + 1]);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
    }

    /// Log–log slope through the two points closest to the right end of the
    /// table that are `decades` apart (or the first point if the table is shorter).
    pub fn tail_exponent(&self, decades: f64) -> Option<f64> {
        fit_power_law(
            &self.abscissae,
            &self.values,
            self.last_x() / 10f64.powf(decades),
            self.last_x(),
        )
    }

    pub fn head_exponent(&self, decades: f64) -> Option<f64> {
        fit_power_law(
            &self.abscissae,
            &self.values,
            self.first_x(),
            self.first_x() * 10f64.powf(decades),
        )
    }
}

fn extrapolate(rule: Extrapolation, x_end: f64, y_end: f64, x: f64) -> f64 {
    match rule {
        Extrapolation::Zero => 0.0,
        Extrapolation::PowerLaw(p) => {
            if y_end == 0.0 {
                0.0
            } else {
                y_end * (x / x_end).powf(p)
            }
        }
    }
}

fn axis(xs: &[f64], log_axis: bool) -> Vec<f64> {
    if log_axis {
        xs.iter().map(|x| x.ln()).collect()
    } else {
        xs.to_vec()
    }
}

/// Derivative estimates from the Lagrange polynomial through the five
/// nearest abscissae (fewer for short tables); fourth-order accurate.
fn lagrange_slopes(u: &[f64], y: &[f64]) -> Vec<f64> {
    let n = u.len();
    let width = n.min(5);
    (0..n)
        .map(|i| {
            let start = i.saturating_sub(width / 2).min(n - width);
            let idx = start..start + width;
            let mut d = 0.0;
            for j in idx.clone() {
                if j == i {
                    d += y[i]
                        * idx
                            .clone()
                            .filter(|&l| l != i)
                            .map(|l| 1.0 / (u[i] - u[l]))
                            .sum::<f64>();
                } else {
                    let mut w = 1.0 / (u[j] - u[i]);
                    for l in idx.clone() {
                        if l != i && l != j {
                            w *= (u[i] - u[l]) / (u[j] - u[l]);
                        }
                    }
                    d += y[j] * w;
                }
            }
            d
        })
        .collect()
}

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && count >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| {
            if i == count - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

/// Least-squares slope of ln|y| against ln x over samples with x in [lo, hi].
pub fn fit_power_law(xs: &[f64], ys: &[f64], lo: f64, hi: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| {
            **x >= lo * (1.0 - 1e-12) && **x <= hi * (1.0 + 1e-12) && **x > 0.0 && **y != 0.0
        })
        .map(|(x, y)| (x.ln(), y.abs().ln()))
        .collect();
    least_squares_slope(&pts)
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    slope.is_finite().then_some(slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_bad_tables() {
        assert!(SampledFunction1D::new(
            vec![0.0, 1.0],
            vec![1.0],
            Extrapolation::Zero,
            Extrapolation::Zero
        )
        .is_err());
        assert!(SampledFunction1D::new(
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            Extrapolation::Zero,
            Extrapolation::Zero
        )
        .is_err());
        assert!(SampledFunction1D::new(
            vec![0.0, 1.0],
            vec![1.0, 1.0],
            Extrapolation::Zero,
            Extrapolation::PowerLaw(f64::NAN)
        )
        .is_err());
    }

    #[test]
    fn reproduces_nodes_and_power_law_tails() {
        let f = SampledFunction1D::log_spaced(
            1e-3,
            10.0,
            200,
            |x| x.powf(-2.0),
            Extrapolation::PowerLaw(-2.0),
            Extrapolation::PowerLaw(-2.0),
        )
        .unwrap();
        for &x in f.abscissae() {
            assert_relative_eq!(f.eval(x), x.powf(-2.0), max_relative = 1e-14);
        }
        // a pure power is linear-exponential in ln x; the cubic in ln x is very close
        assert_relative_eq!(f.eval(0.37), 0.37f64.powf(-2.0), max_relative = 5e-5);
        assert_relative_eq!(f.eval(100.0), 1e-4, max_relative = 1e-12);
        assert_relative_eq!(f.eval(1e-5), 1e10, max_relative = 1e-12);
        assert_relative_eq!(f.tail_exponent(1.0).unwrap(), -2.0, max_relative = 1e-10);
    }

    #[test]
    fn smooth_function_is_interpolated_to_high_order() {
        let f = SampledFunction1D::log_spaced(
            1e-2,
            10.0,
            800,
            |x| (-x).exp(),
            Extrapolation::Zero,
            Extrapolation::Zero,
        )
        .unwrap();
        let max_err = (1..500)
            .map(|i| 1e-2 * (1000f64).powf(i as f64 / 500.0))
            .map(|x| (f.eval(x) - (-x).exp()).abs())
            .fold(0.0, f64::max);
        assert!(max_err < 1e-7, "max err {max_err}");
    }

    #[test]
    fn cubic_order_interpolation() {
        let err = |count: usize| {
            let xs: Vec<f64> = (0..count)
                .map(|i| 4.0 * i as f64 / (count - 1) as f64)
                .collect();
            let ys = xs.iter().map(|x: &f64| x.sin()).collect();
            let f =
                SampledFunction1D::new(xs, ys, Extrapolation::Zero, Extrapolation::Zero).unwrap();
            (0..997)
                .map(|i| 0.004 * i as f64 + 0.001)
                .map(|x| (f.eval(x) - x.sin()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(101) / err(201);
        assert!(ratio > 12.0, "ratio {ratio}");
    }
}
