//! Riesz potentials of grid functions.

use rayon::prelude::*;

use super::gamma::sphere_area;
use crate::error::{domain, Result};
use crate::grid::GridFunction;

/// I_α f(x) = ∫ f(y)|x − y|^{α−n} dy for a piecewise-constant `f`.
///
/// Every cell contributes f(y)|x − y|^{α−n}·vol from its centre, except the
/// cell containing `x`, which is replaced by the exact integral of |·|^{α−n}
/// over the ball with the cell's volume.
pub fn riesz_potential(f: &GridFunction, alpha: f64, x: &[f64]) -> Result<f64> {
    let n = f.dim();
    if !(alpha > 0.0 && alpha < n as f64) {
        return domain(format!(
            "riesz potential needs 0 < alpha < {n}, got {alpha}"
        ));
    }
    if x.len() != n {
        return domain(format!("point has dimension {} but grid has {n}", x.len()));
    }
    let vol = f.cell_volume();
    let own = owning_cell(f, x);
    let power = alpha - n as f64;
    let sum: f64 = f
        .values()
        .par_iter()
        .enumerate()
        .map_init(
            || vec![0.0; n],
            |buf, (i, &v)| {
                if v == 0.0 || Some(i) == own {
                    return 0.0;
                }
                f.cell_center_into(i, buf);
                let d2: f64 = buf.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                v * d2.sqrt().powf(power) * vol
            },
        )
        .sum();
    let self_term = match own {
        Some(i) => {
            let sigma = sphere_area(n)?;
            let rho = (vol * n as f64 / sigma).powf(1.0 / n as f64);
            f.values()[i] * sigma * rho.powf(alpha) / alpha
        }
        None => 0.0,
    };
    Ok(sum + self_term)
}

fn owning_cell(f: &GridFunction, x: &[f64]) -> Option<usize> {
    if !f.contains(x) {
        return None;
    }
    let idx: Vec<usize> = (0..f.dim())
        .map(|a| {
            let lo = f.center()[a] - f.half_width()[a];
            let i = ((x[a] - lo) / f.spacing(a)).floor() as usize;
            i.min(f.cells()[a] - 1)
        })
        .collect();
    Some(f.linear_index(&idx))
}
