//! Linear and affine Grassmannians: subspaces, planes, Haar sampling and
//! integration against the invariant measure dμ(V)dx″.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::special::gamma::ball_volume;
use crate::special::quad::gauss_legendre;

const ORTHO_TOL: f64 = 1e-12;

/// V ∈ G_{n,k}, stored as an n×k matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSubspace {
    basis: DMatrix<f64>,
}

impl LinearSubspace {
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        let (n, k) = basis.shape();
        if k == 0 || k >= n {
            return domain(format!("subspace needs 1 <= k < n, got n = {n}, k = {k}"));
        }
        let gram = basis.transpose() * &basis;
        let err = (gram - DMatrix::identity(k, k)).abs().max();
        if err > ORTHO_TOL * 10.0 {
            return Err(Error::Invalid(format!(
                "basis columns are not orthonormal (error {err:e})"
            )));
        }
        Ok(Self { basis })
    }

    /// span(e₁, …, e_k).
    pub fn coordinate(n: usize, k: usize) -> Result<Self> {
        Self::new(DMatrix::identity(n, k))
    }

    pub fn n(&self) -> usize {
        self.basis.nrows()
    }

    pub fn k(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// x − BBᵀx.
    pub fn project_perp(&self, x: &DVector<f64>) -> DVector<f64> {
        x - &self.basis * (self.basis.transpose() * x)
    }

    /// Orthonormal basis of V⊥ (n×(n−k)).
    pub fn complement(&self) -> DMatrix<f64> {
        let (n, k) = self.basis.shape();
        // Gram–Schmidt the standard basis against V
        let mut cols: Vec<DVector<f64>> =
            (0..k).map(|j| self.basis.column(j).into_owned()).collect();
        let mut out = Vec::with_capacity(n - k);
        for e in 0..n {
            if out.len() == n - k {
                break;
            }
            let mut v = DVector::zeros(n);
            v[e] = 1.0;
            for _ in 0..2 {
                for c in &cols {
                    let d = c.dot(&v);
                    v -= c * d;
                }
            }
            let norm = v.norm();
            if norm > 1e-6 {
                v /= norm;
                cols.push(v.clone());
                out.push(v);
            }
        }
        DMatrix::from_columns(&out)
    }
}

/// τ = V + x″ with x″ ⊥ V.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePlane {
    pub subspace: LinearSubspace,
    offset: DVector<f64>,
}

impl AffinePlane {
    pub fn new(subspace: LinearSubspace, offset: DVector<f64>) -> Result<Self> {
        if offset.len() != subspace.n() {
            return domain(format!(
                "offset has dimension {} but n = {}",
                offset.len(),
                subspace.n()
            ));
        }
        let along = (subspace.basis().transpose() * &offset).abs().max();
        let scale = offset.norm().max(1.0);
        if along > ORTHO_TOL * scale * 10.0 {
            return Err(Error::Invalid(format!(
                "offset is not orthogonal to the subspace (component {along:e})"
            )));
        }
        Ok(Self { subspace, offset })
    }

    /// The plane V + P_{V⊥}p through an arbitrary point p.
    pub fn through(subspace: LinearSubspace, p: &DVector<f64>) -> Result<Self> {
        let offset = subspace.project_perp(p);
        Self::new(subspace, offset)
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    pub fn n(&self) -> usize {
        self.subspace.n()
    }

    pub fn k(&self) -> usize {
        self.subspace.k()
    }

    /// |τ| = dist(0, τ).
    pub fn norm(&self) -> f64 {
        self.offset.norm()
    }

    /// The point x″ + B·c on the plane.
    pub fn point(&self, coords: &[f64]) -> DVector<f64> {
        &self.offset + self.subspace.basis() * DVector::from_column_slice(coords)
    }

    /// dist(x, τ) = |P_{V⊥}x − x″|.
    pub fn distance(&self, x: &DVector<f64>) -> f64 {
        (self.subspace.project_perp(x) - &self.offset).norm()
    }

    /// The plane translated by z.
    pub fn translated(&self, z: &DVector<f64>) -> Self {
        let shift = self.subspace.project_perp(z);
        Self {
            subspace: self.subspace.clone(),
            offset: &self.offset + shift,
        }
    }

    /// The plane γτ for an orthogonal γ.
    pub fn rotated(&self, gamma: &DMatrix<f64>) -> Self {
        Self {
            subspace: LinearSubspace {
                basis: gamma * self.subspace.basis(),
            },
            offset: gamma * &self.offset,
        }
    }
}

pub fn plane_distance(x: &[f64], tau: &AffinePlane) -> Result<f64> {
    if x.len() != tau.n() {
        return domain(format!(
            "point has dimension {} but plane lives in R^{}",
            x.len(),
            tau.n()
        ));
    }
    Ok(tau.distance(&DVector::from_column_slice(x)))
}

/// Monte Carlo layout: total samples spread over independent RNG streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McSpec {
    pub sample_count: usize,
    pub seed: u64,
    pub stream_count: usize,
}

impl McSpec {
    pub fn new(sample_count: usize, seed: u64, stream_count: usize) -> Result<Self> {
        let s = Self {
            sample_count,
            seed,
            stream_count,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_count == 0 || self.stream_count == 0 {
            return domain("monte carlo needs at least one sample and one stream");
        }
        Ok(())
    }

    /// Samples drawn by stream `s`.
    pub fn stream_len(&self, s: usize) -> usize {
        let base = self.sample_count / self.stream_count;
        base + usize::from(s < self.sample_count % self.stream_count)
    }

    /// The same layout under a different seed.
    pub fn reseeded(&self, salt: u64) -> Self {
        Self {
            seed: self.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15),
            ..*self
        }
    }
}

/// Stream `stream` of the generator keyed by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Haar-distributed element of O(n): QR of a Gaussian matrix with the
/// diagonal of R made positive.
pub fn haar_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Haar-distributed element of SO(n).
pub fn haar_special_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let mut q = haar_orthogonal(n, rng);
    if n > 0 && q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    q
}

/// A uniformly distributed point in the unit ball of ℝ^d.
fn unit_ball_point<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    let mut v: Vec<f64> = (0..d)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let radius: f64 = rng.random::<f64>().powf(1.0 / d as f64);
    for x in &mut v {
        *x *= radius / norm;
    }
    v
}

/// Haar-random V with offset uniform in the radius-`radius` ball of V⊥
/// centred at P_{V⊥}c. Returns the plane and its importance weight (the
/// ball volume).
pub fn sample_plane_around<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    center: &DVector<f64>,
    radius: f64,
    rng: &mut R,
) -> Result<(AffinePlane, f64)> {
    if k == 0 || k >= n {
        return domain(format!("planes need 1 <= k < n, got n = {n}, k = {k}"));
    }
    if !(radius > 0.0) {
        return domain(format!("offset radius must be positive, got {radius}"));
    }
    let q = haar_orthogonal(n, rng);
    let basis = q.columns(0, k).into_owned();
    let perp = q.columns(k, n - k).into_owned();
    let u = unit_ball_point(n - k, rng);
    let shift = &perp * DVector::from_vec(u) * radius;
    let subspace = LinearSubspace { basis };
    let offset = subspace.project_perp(center) + shift;
    let weight = ball_volume(n - k)? * radius.powi((n - k) as i32);
    Ok((AffinePlane { subspace, offset }, weight))
}

/// Haar-random V with offset uniform in the radius-`radius` ball of V⊥.
pub fn sample_plane<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    radius: f64,
    rng: &mut R,
) -> Result<AffinePlane> {
    Ok(sample_plane_around(n, k, &DVector::zeros(n), radius, rng)?.0)
}

/// Value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

impl McEstimate {
    pub const ZERO: McEstimate = McEstimate {
        estimate: 0.0,
        std_error: 0.0,
    };

    /// |a − b| in units of the combined standard error.
    pub fn sigmas_from(&self, other: &McEstimate) -> f64 {
        let se = (self.std_error.powi(2) + other.std_error.powi(2)).sqrt();
        let d = (self.estimate - other.estimate).abs();
        if se == 0.0 {
            if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            d / se
        }
    }
}

/// Mean and standard error of `sample(rng)` over the streams of `mc`; the
/// reduction runs in stream order, so results do not depend on threading.
pub fn mc_mean<F>(mc: &McSpec, sample: F) -> Result<McEstimate>
where
    F: Fn(&mut ChaCha8Rng) -> Result<f64> + Sync,
{
    mc.validate()?;
    let partial: Result<Vec<(f64, f64, usize)>> = (0..mc.stream_count)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream_rng(mc.seed, s as u64);
            let len = mc.stream_len(s);
            let (mut sum, mut sq) = (0.0, 0.0);
            for _ in 0..len {
                let v = sample(&mut rng)?;
                sum += v;
                sq += v * v;
            }
            Ok((sum, sq, len))
        })
        .collect();
    let (mut sum, mut sq, mut count) = (0.0, 0.0, 0usize);
    for (s, q, c) in partial? {
        sum += s;
        sq += q;
        count += c;
    }
    let nf = count as f64;
    let mean = sum / nf;
    let var = if count > 1 {
        ((sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    if !mean.is_finite() {
        return Err(Error::Quadrature("monte carlo mean is not finite".into()));
    }
    Ok(McEstimate {
        estimate: mean,
        std_error: (var / nf).sqrt(),
    })
}

/// Monte Carlo ∫_{𝒢_{n,k}} φ dμ over planes with |τ| ≤ radius.
pub fn integrate_affine<F>(
    phi: F,
    n: usize,
    k: usize,
    radius: f64,
    mc: &McSpec,
) -> Result<McEstimate>
where
    F: Fn(&AffinePlane) -> f64 + Sync,
{
    integrate_affine_around(phi, n, k, &DVector::zeros(n), radius, mc)
}

/// Monte Carlo ∫ φ dμ over planes within `radius` of `center` in V⊥.
pub fn integrate_affine_around<F>(
    phi: F,
    n: usize,
    k: usize,
    center: &DVector<f64>,
    radius: f64,
    mc: &McSpec,
) -> Result<McEstimate>
where
    F: Fn(&AffinePlane) -> f64 + Sync,
{
    if k == 0 || k >= n {
        return domain(format!("planes need 1 <= k < n, got n = {n}, k = {k}"));
    }
    mc_mean(mc, |rng| {
        let (tau, weight) = sample_plane_around(n, k, center, radius, rng)?;
        Ok(weight * phi(&tau))
    })
}

/// Deterministic ∫_{𝒢_{2,1}} φ dμ for lines in the plane: θ uniform on
/// [0, π) with weight 1/π, signed offset p ∈ [c − R, c + R] along the normal
/// (centred at the normal component c of `center`), Gauss–Legendre panels in p.
///
/// The error estimate is the change against a rule with half the nodes.
pub fn integrate_lines<F>(
    phi: F,
    center: &[f64; 2],
    radius: f64,
    angles: usize,
    offset_panels: usize,
) -> Result<McEstimate>
where
    F: Fn(&AffinePlane) -> f64 + Sync,
{
    if !(radius > 0.0) || angles < 2 || offset_panels == 0 {
        return domain("line rule needs radius > 0, at least two angles and one offset panel");
    }
    let fine = line_rule(&phi, center, radius, angles, offset_panels)?;
    let coarse = line_rule(&phi, center, radius, angles / 2, offset_panels.div_ceil(2))?;
    Ok(McEstimate {
        estimate: fine,
        std_error: (fine - coarse).abs(),
    })
}

fn line_rule<F>(
    phi: &F,
    center: &[f64; 2],
    radius: f64,
    angles: usize,
    panels: usize,
) -> Result<f64>
where
    F: Fn(&AffinePlane) -> f64 + Sync,
{
    let (gx, gw) = gauss_legendre(8);
    let h = 2.0 * radius / panels as f64;
    let per_angle: Result<Vec<f64>> = (0..angles)
        .into_par_iter()
        .map(|i| {
            // midpoint in angle: exact for trigonometric polynomials of low degree
            let theta = std::f64::consts::PI * (i as f64 + 0.5) / angles as f64;
            let dir = DVector::from_vec(vec![theta.cos(), theta.sin()]);
            let normal = DVector::from_vec(vec![-theta.sin(), theta.cos()]);
            let c = normal[0] * center[0] + normal[1] * center[1];
            let subspace = LinearSubspace {
                basis: DMatrix::from_column_slice(2, 1, dir.as_slice()),
            };
            let mut acc = 0.0;
            for p in 0..panels {
                let mid = c - radius + (p as f64 + 0.5) * h;
                for (x, w) in gx.iter().zip(&gw) {
                    let off = mid + 0.5 * h * x;
                    let tau = AffinePlane {
                        subspace: subspace.clone(),
                        offset: &normal * off,
                    };
                    acc += w * 0.5 * h * phi(&tau);
                }
            }
            Ok(acc / angles as f64)
        })
        .collect();
    Ok(per_angle?.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    /// Kolmogorov–Smirnov statistic of samples against a CDF.
    fn ks(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn haar_is_orthogonal() {
        let mut rng = stream_rng(1, 0);
        for n in 1..6 {
            let q = haar_orthogonal(n, &mut rng);
            let err = (q.transpose() * &q - DMatrix::identity(n, n)).abs().max();
            assert!(err < 1e-12);
            let s = haar_special_orthogonal(n, &mut rng);
            assert!((s.determinant() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn first_column_has_centred_mean() {
        let n = 3;
        let count = 100_000;
        let mut rng = stream_rng(7, 0);
        let mut mean = DVector::<f64>::zeros(n);
        for _ in 0..count {
            mean += haar_orthogonal(n, &mut rng).column(0);
        }
        mean /= count as f64;
        assert!(mean.norm() <= 4.0 / (count as f64).sqrt());
    }

    #[test]
    fn so2_angle_is_uniform() {
        let mut rng = stream_rng(3, 0);
        let angles: Vec<f64> = (0..10_000)
            .map(|_| {
                let q = haar_special_orthogonal(2, &mut rng);
                q[(1, 0)].atan2(q[(0, 0)]).rem_euclid(2.0 * PI)
            })
            .collect();
        let d = ks(angles, |a| a / (2.0 * PI));
        assert!(d <= 1.63 / 100.0, "KS {d}");
    }

    #[test]
    fn sampled_planes() {
        let mut rng = stream_rng(5, 0);
        for (n, k) in [(2, 1), (3, 1), (3, 2), (4, 2)] {
            for _ in 0..50 {
                let tau = sample_plane(n, k, 2.0, &mut rng).unwrap();
                let along = (tau.subspace.basis().transpose() * tau.offset())
                    .abs()
                    .max();
                assert!(along < 1e-12);
                assert!(tau.norm() <= 2.0 + 1e-12);
            }
        }
        // in ℝ³ with k = 1, |τ| has density 2r/R² on [0, R]
        let rs: Vec<f64> = (0..10_000)
            .map(|_| sample_plane(3, 1, 1.5, &mut rng).unwrap().norm())
            .collect();
        let d = ks(rs, |r| (r / 1.5).powi(2));
        assert!(d <= 1.63 / 100.0, "KS {d}");
        // n = 2, k = 1: uniform on [0, R]
        let rs: Vec<f64> = (0..10_000)
            .map(|_| sample_plane(2, 1, 1.5, &mut rng).unwrap().norm())
            .collect();
        assert!(ks(rs, |r| r / 1.5) <= 1.63 / 100.0);
    }

    #[test]
    fn projector_properties() {
        let mut rng = stream_rng(9, 0);
        for (n, k) in [(3, 1), (4, 2), (5, 3)] {
            let tau = sample_plane(n, k, 1.0, &mut rng).unwrap();
            let p = tau.subspace.projector();
            assert!((&p * &p - &p).abs().max() < 1e-10);
            assert!((p.trace() - k as f64).abs() < 1e-10);
            let c = tau.subspace.complement();
            assert_eq!(c.shape(), (n, n - k));
            assert!((tau.subspace.basis().transpose() * &c).abs().max() < 1e-12);
        }
    }

    #[test]
    fn distances() {
        let v = LinearSubspace::coordinate(2, 1).unwrap();
        let tau = AffinePlane::new(v, DVector::zeros(2)).unwrap();
        assert_relative_eq!(plane_distance(&[3.0, 4.0], &tau).unwrap(), 4.0);
        assert_eq!(plane_distance(&[2.5, 0.0], &tau).unwrap(), 0.0);
        assert!(plane_distance(&[1.0, 2.0, 3.0], &tau).is_err());

        // brute force over a patch of the plane
        let mut rng = stream_rng(11, 0);
        for _ in 0..10 {
            let tau = sample_plane(3, 2, 1.0, &mut rng).unwrap();
            let x = DVector::from_vec(vec![0.3, -0.8, 0.5]);
            let h = 0.01;
            let mut best = f64::INFINITY;
            for i in -300..=300 {
                for j in -300..=300 {
                    let p = tau.point(&[i as f64 * h, j as f64 * h]);
                    best = best.min((p - &x).norm());
                }
            }
            assert!((tau.distance(&x) - best).abs() < h);
        }
    }

    #[test]
    fn affine_integrals() {
        let mc = McSpec::new(40_000, 17, 8).unwrap();
        let ind =
            integrate_affine(|t| if t.norm() <= 1.0 { 1.0 } else { 0.0 }, 3, 2, 1.5, &mc).unwrap();
        assert!((ind.estimate - 2.0).abs() < 3.0 * ind.std_error + 1e-12);
        let g = integrate_affine(|t| (-t.norm().powi(2)).exp(), 3, 1, 6.0, &mc).unwrap();
        assert!((g.estimate - PI).abs() < 3.0 * g.std_error, "{g:?}");
        let z = integrate_affine(|_| 0.0, 3, 1, 1.0, &mc).unwrap();
        assert_eq!((z.estimate, z.std_error), (0.0, 0.0));
    }

    #[test]
    fn line_rule_matches_closed_form() {
        // ∫ e^{−|τ|²} over lines in ℝ²: ∫ e^{−p²} dp = √π
        let e = integrate_lines(|t| (-t.norm().powi(2)).exp(), &[0.0, 0.0], 7.0, 16, 32).unwrap();
        assert_relative_eq!(e.estimate, PI.sqrt(), max_relative = 1e-12);
        let shifted = integrate_lines(
            |t| (-t.distance(&DVector::from_vec(vec![1.0, 2.0])).powi(2)).exp(),
            &[1.0, 2.0],
            7.0,
            16,
            32,
        )
        .unwrap();
        assert_relative_eq!(shifted.estimate, PI.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let mc = McSpec::new(5_000, 99, 7).unwrap();
        let f = |t: &AffinePlane| (-t.norm()).exp();
        let a = integrate_affine(f, 3, 1, 4.0, &mc).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| integrate_affine(f, 3, 1, 4.0, &mc).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn std_error_scaling() {
        let f = |t: &AffinePlane| (-t.norm().powi(2)).exp();
        let small = integrate_affine(f, 3, 1, 4.0, &McSpec::new(4_000, 5, 4).unwrap()).unwrap();
        let large = integrate_affine(f, 3, 1, 4.0, &McSpec::new(40_000, 5, 4).unwrap()).unwrap();
        let ratio = small.std_error / large.std_error;
        let expect = 10f64.sqrt();
        assert!(ratio > expect / 2.0 && ratio < expect * 2.0, "{ratio}");
    }

    #[test]
    fn rotation_invariance_of_lines() {
        // angle histogram of the direction of V in ℝ² before and after a fixed rotation
        let mut rng = stream_rng(21, 0);
        let rot = haar_special_orthogonal(2, &mut rng);
        let bins = 12;
        let count = 24_000;
        let mut h0 = vec![0.0; bins];
        let mut h1 = vec![0.0; bins];
        let bin = |v: &DVector<f64>| {
            let a = v[1].atan2(v[0]).rem_euclid(PI);
            ((a / PI * bins as f64) as usize).min(bins - 1)
        };
        for _ in 0..count {
            let t = sample_plane(2, 1, 1.0, &mut rng).unwrap();
            let v = t.subspace.basis().column(0).into_owned();
            h0[bin(&v)] += 1.0;
            h1[bin(&(&rot * &v))] += 1.0;
        }
        let expect = count as f64 / bins as f64;
        for h in [&h0, &h1] {
            let chi2: f64 = h.iter().map(|o| (o - expect).powi(2) / expect).sum();
            // 11 degrees of freedom, 1% critical value 24.7
            assert!(chi2 < 24.7, "{chi2}");
        }
    }
}
