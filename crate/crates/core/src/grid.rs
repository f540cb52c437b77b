//! Scalar fields sampled on uniform cell-centred Cartesian grids.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A function on a box in ℝⁿ, constant on each cell.
///
/// Cells are stored in row-major order: the last axis varies fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    center: Vec<f64>,
    half_width: Vec<f64>,
    cells: Vec<usize>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(
        center: Vec<f64>,
        half_width: Vec<f64>,
        cells: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let g = Self {
            center,
            half_width,
            cells,
            values,
        };
        g.validate()?;
        Ok(g)
    }

    /// Checks shape consistency; used after deserialization as well.
    pub fn validate(&self) -> Result<()> {
        let n = self.center.len();
        if n == 0 {
            return Err(Error::Invalid("grid must have at least one axis".into()));
        }
        if self.half_width.len() != n || self.cells.len() != n {
            return Err(Error::Invalid(format!(
                "grid axes disagree: center {n}, half_width {}, cells {}",
                self.half_width.len(),
                self.cells.len()
            )));
        }
        if self
            .half_width
            .iter()
            .any(|h| !(*h > 0.0) || !h.is_finite())
        {
            return Err(Error::Invalid("grid half-widths must be positive".into()));
        }
        if self.cells.contains(&0) {
            return Err(Error::Invalid(
                "grid needs at least one cell per axis".into(),
            ));
        }
        let count: usize = self.cells.iter().product();
        if count != self.values.len() {
            return Err(Error::Invalid(format!(
                "grid has {count} cells but {} values",
                self.values.len()
            )));
        }
        Ok(())
    }

    /// Samples `f` at the cell centres.
    pub fn from_fn<F>(
        center: Vec<f64>,
        half_width: Vec<f64>,
        cells: Vec<usize>,
        f: F,
    ) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let count: usize = cells.iter().product();
        let mut g = Self::new(center, half_width, cells, vec![0.0; count])?;
        let values: Vec<f64> = (0..count)
            .into_par_iter()
            .map_init(
                || vec![0.0; g.dim()],
                |buf, i| {
                    g.cell_center_into(i, buf);
                    f(buf)
                },
            )
            .collect();
        g.values = values;
        Ok(g)
    }

    /// Cube [−half, half]ⁿ with `cells` cells per axis.
    pub fn cube(n: usize, half: f64, cells: usize) -> Result<Self> {
        let count = cells.pow(n as u32);
        Self::new(
            vec![0.0; n],
            vec![half; n],
            vec![cells; n],
            vec![0.0; count],
        )
    }

    /// Same geometry, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(
            self.center.clone(),
            self.half_width.clone(),
            self.cells.clone(),
            values,
        )
    }

    /// Same geometry, values produced by `f` at every cell centre.
    pub fn map_centers<F>(&self, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        Self::from_fn(
            self.center.clone(),
            self.half_width.clone(),
            self.cells.clone(),
            f,
        )
        .expect("geometry already validated")
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        let mut g = self.clone();
        g.values.iter_mut().for_each(|v| *v = f(*v));
        g
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn half_width(&self) -> &[f64] {
        &self.half_width
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        2.0 * self.half_width[axis] / self.cells[axis] as f64
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dim())
            .map(|a| self.spacing(a))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    pub fn box_volume(&self) -> f64 {
        self.half_width.iter().map(|h| 2.0 * h).product()
    }

    /// Splits a linear index into per-axis indices.
    pub fn multi_index(&self, mut index: usize, out: &mut [usize]) {
        for a in (0..self.dim()).rev() {
            out[a] = index % self.cells[a];
            index /= self.cells[a];
        }
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.cells)
            .fold(0, |acc, (&i, &c)| acc * c + i)
    }

    pub fn cell_center_into(&self, index: usize, out: &mut [f64]) {
        let mut rest = index;
        for a in (0..self.dim()).rev() {
            let i = rest % self.cells[a];
            rest /= self.cells[a];
            out[a] = self.axis_coordinate(a, i);
        }
    }

    pub fn cell_center(&self, index: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.cell_center_into(index, &mut out);
        out
    }

    pub fn axis_coordinate(&self, axis: usize, i: usize) -> f64 {
        self.center[axis] - self.half_width[axis] + (i as f64 + 0.5) * self.spacing(axis)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.center.iter().zip(&self.half_width))
            .all(|(xi, (c, h))| (xi - c).abs() <= *h)
    }

    /// Multilinear interpolation between cell centres; zero outside the box
    /// and constant between the outermost centres and the box faces.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        if !self.contains(x) {
            return 0.0;
        }
        let n = self.dim();
        let mut base = [0usize; 8];
        let mut frac = [0.0f64; 8];
        let mut upper = [0usize; 8];
        assert!(n <= 8, "interpolation supports at most 8 axes");
        for a in 0..n {
            let h = self.spacing(a);
            let u = (x[a] - (self.center[a] - self.half_width[a])) / h - 0.5;
            let last = self.cells[a] - 1;
            if u <= 0.0 {
                base[a] = 0;
                upper[a] = 0;
                frac[a] = 0.0;
            } else if u >= last as f64 {
                base[a] = last;
                upper[a] = last;
                frac[a] = 0.0;
            } else {
                let i = u.floor() as usize;
                base[a] = i;
                upper[a] = i + 1;
                frac[a] = u - i as f64;
            }
        }
        let mut total = 0.0;
        let mut idx = [0usize; 8];
        for corner in 0..(1usize << n) {
            let mut weight = 1.0;
            for a in 0..n {
                if corner >> a & 1 == 1 {
                    idx[a] = upper[a];
                    weight *= frac[a];
                } else {
                    idx[a] = base[a];
                    weight *= 1.0 - frac[a];
                }
            }
            if weight != 0.0 {
                total += weight * self.values[self.linear_index(&idx[..n])];
            }
        }
        total
    }

    /// ∫ f (cells treated as constant pieces).
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_volume()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Translation by whole cells with zero fill: result(i) = f(i − shift).
    pub fn shift_cells(&self, shift: &[isize]) -> Self {
        let n = self.dim();
        let mut out = vec![0.0; self.len()];
        let mut idx = vec![0usize; n];
        let mut src = vec![0usize; n];
        'cells: for (i, slot) in out.iter_mut().enumerate() {
            self.multi_index(i, &mut idx);
            for a in 0..n {
                let s = idx[a] as isize - shift[a];
                if s < 0 || s >= self.cells[a] as isize {
                    continue 'cells;
                }
                src[a] = s as usize;
            }
            *slot = self.values[self.linear_index(&src)];
        }
        self.with_values(out).expect("same geometry")
    }

    /// The sub-grid of cells whose centres lie in the box shrunk about its
    /// centre by `fraction` (linear size).
    pub fn crop(&self, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::Domain(format!(
                "crop fraction must lie in (0, 1], got {fraction}"
            )));
        }
        let n = self.dim();
        let mut lo = vec![0usize; n];
        let mut hi = vec![0usize; n];
        for a in 0..n {
            let limit = fraction * self.half_width[a] * (1.0 + 1e-12);
            let inside: Vec<usize> = (0..self.cells[a])
                .filter(|&i| (self.axis_coordinate(a, i) - self.center[a]).abs() <= limit)
                .collect();
            if inside.is_empty() {
                return Err(Error::Domain("crop removes every cell".into()));
            }
            lo[a] = inside[0];
            hi[a] = *inside.last().unwrap();
        }
        let cells: Vec<usize> = (0..n).map(|a| hi[a] - lo[a] + 1).collect();
        let mut half = vec![0.0; n];
        let mut center = vec![0.0; n];
        for a in 0..n {
            let h = self.spacing(a);
            let left = self.axis_coordinate(a, lo[a]) - 0.5 * h;
            let right = self.axis_coordinate(a, hi[a]) + 0.5 * h;
            center[a] = 0.5 * (left + right);
            half[a] = 0.5 * (right - left);
        }
        let count: usize = cells.iter().product();
        let mut values = Vec::with_capacity(count);
        let mut idx = vec![0usize; n];
        let mut src = vec![0usize; n];
        let sub = Self {
            center: center.clone(),
            half_width: half.clone(),
            cells: cells.clone(),
            values: vec![0.0; count],
        };
        for i in 0..count {
            sub.multi_index(i, &mut idx);
            for a in 0..n {
                src[a] = idx[a] + lo[a];
            }
            values.push(self.values[self.linear_index(&src)]);
        }
        Self::new(center, half, cells, values)
    }

    /// Pointwise a·self + b·other on identical geometry.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.cells != other.cells
            || self.center != other.center
            || self.half_width != other.half_width
        {
            return Err(Error::Invalid("grids have different geometry".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        self.with_values(values)
    }
}
