//! Norms of Banach function lattices evaluated on grid functions.
//!
//! A grid function is treated as exactly piecewise constant on its cells, so
//! every norm here is a finite sum with no quadrature. Lebesgue, Lorentz,
//! variable-exponent (Luxemburg), Morrey and L¹+Lᵖ norms are available, along
//! with associate norms, Muckenhoupt constants of cube families, the
//! layer-cake decomposition of a radial kernel, ball averages and mollifiers.

use std::collections::BTreeMap;
use std::f64::consts::E;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{domain, Error, Result};
use crate::grid::GridFunction;
use crate::special::gamma::sphere_area;
use crate::special::quad::adaptive_gk;

/// A variable exponent p(·) on ℝⁿ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ExponentDescriptor {
    Constant {
        p: f64,
    },
    /// p(x) = p∞ + (p(0) − p∞)/log(e + |x|).
    LogDecay {
        p_inf: f64,
        p0: f64,
    },
}

impl ExponentDescriptor {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Self::Constant { p } => p,
            Self::LogDecay { p_inf, p0 } => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                p_inf + (p0 - p_inf) / (E + r).ln()
            }
        }
    }

    /// (p₋, p₊).
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Self::Constant { p } => (p, p),
            Self::LogDecay { p_inf, p0 } => (p_inf.min(p0), p_inf.max(p0)),
        }
    }

    /// Smallest c with |p(x) − p∞| ≤ c/log(e + |x|).
    pub fn decay_constant(&self) -> f64 {
        match *self {
            Self::Constant { .. } => 0.0,
            Self::LogDecay { p_inf, p0 } => (p0 - p_inf).abs(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bounds();
        if !(lo >= 1.0) || !hi.is_finite() {
            return domain(format!(
                "variable exponent needs 1 <= p- <= p+ < inf, got [{lo}, {hi}]"
            ));
        }
        Ok(())
    }
}

/// A Banach function space on ℝⁿ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "space", rename_all = "snake_case")]
pub enum LatticeSpace {
    Lp {
        p: f64,
    },
    Lorentz {
        p: f64,
        #[serde(serialize_with = "ser_maybe_inf", deserialize_with = "de_maybe_inf")]
        q: f64,
    },
    VarExp {
        exponent: ExponentDescriptor,
    },
    Morrey {
        p: f64,
        p0: f64,
    },
    /// L¹ + Lᵖ.
    Sum {
        p: f64,
    },
}

fn ser_maybe_inf<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

fn de_maybe_inf<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(v) => Ok(v),
        Raw::Text(t) if t == "inf" => Ok(f64::INFINITY),
        Raw::Text(t) => Err(serde::de::Error::custom(format!(
            "expected a number or \"inf\", got {t:?}"
        ))),
    }
}

impl LatticeSpace {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Lp { p } | Self::Sum { p } if !(p >= 1.0) || !p.is_finite() => {
                domain(format!("exponent must satisfy 1 <= p < inf, got {p}"))
            }
            Self::Lorentz { p, q } if !(p > 1.0) || !p.is_finite() || !(q >= 1.0) => domain(
                format!("Lorentz space needs 1 < p < inf and q >= 1, got ({p}, {q})"),
            ),
            Self::Morrey { p, p0 } if !(p >= 1.0) || !(p0 >= p) || !p0.is_finite() => domain(
                format!("Morrey space needs 1 <= p <= p0 < inf, got ({p}, {p0})"),
            ),
            Self::VarExp { exponent } => exponent.validate(),
            _ => Ok(()),
        }
    }
}

fn fmt_num(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v}")
    }
}

impl fmt::Display for LatticeSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Lp { p } => write!(f, "lp:{}", fmt_num(p)),
            Self::Lorentz { p, q } => write!(f, "lorentz:{},{}", fmt_num(p), fmt_num(q)),
            Self::VarExp {
                exponent: ExponentDescriptor::Constant { p },
            } => write!(f, "varexp:const:{p}"),
            Self::VarExp {
                exponent: ExponentDescriptor::LogDecay { p_inf, p0 },
            } => write!(f, "varexp:log:{p0},{p_inf}"),
            Self::Morrey { p, p0 } => write!(f, "morrey:{p},{p0}"),
            Self::Sum { p } => write!(f, "sum:{p}"),
        }
    }
}

impl FromStr for LatticeSpace {
    type Err = Error;

    /// Parses `lp:2`, `lorentz:2,1`, `lorentz:2,inf`, `morrey:2,4`, `sum:3`,
    /// `varexp:const:2` and `varexp:log:P0,PINF`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("cannot parse space {s:?}"));
        let num = |t: &str| -> Result<f64> {
            match t.trim() {
                "inf" => Ok(f64::INFINITY),
                v => v.parse::<f64>().map_err(|_| bad()),
            }
        };
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        let args = |r: &str| -> Result<Vec<f64>> { r.split(',').map(num).collect() };
        let space = match kind.trim() {
            "lp" => match args(rest)?[..] {
                [p] => Self::Lp { p },
                _ => return Err(bad()),
            },
            "sum" => match args(rest)?[..] {
                [p] => Self::Sum { p },
                _ => return Err(bad()),
            },
            "lorentz" => match args(rest)?[..] {
                [p, q] => Self::Lorentz { p, q },
                _ => return Err(bad()),
            },
            "morrey" => match args(rest)?[..] {
                [p, p0] => Self::Morrey { p, p0 },
                _ => return Err(bad()),
            },
            "varexp" => {
                let (form, vals) = rest.split_once(':').ok_or_else(bad)?;
                let exponent = match (form, &args(vals)?[..]) {
                    ("const", [p]) => ExponentDescriptor::Constant { p: *p },
                    ("log", [p0, p_inf]) => ExponentDescriptor::LogDecay {
                        p_inf: *p_inf,
                        p0: *p0,
                    },
                    _ => return Err(bad()),
                };
                Self::VarExp { exponent }
            }
            _ => return Err(bad()),
        };
        space.validate()?;
        Ok(space)
    }
}

/// The non-increasing rearrangement f* of a grid function, piecewise
/// constant: f*(t) = levels[i] for breakpoints[i−1] ≤ t < breakpoints[i].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RearrangementTable {
    pub breakpoints: Vec<f64>,
    pub levels: Vec<f64>,
}

impl RearrangementTable {
    pub fn eval(&self, t: f64) -> f64 {
        let i = self.breakpoints.partition_point(|&b| b <= t);
        self.levels.get(i).copied().unwrap_or(0.0)
    }

    pub fn support_measure(&self) -> f64 {
        self.breakpoints.last().copied().unwrap_or(0.0)
    }

    fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let starts = std::iter::once(0.0).chain(self.breakpoints.iter().copied());
        starts
            .zip(&self.breakpoints)
            .zip(&self.levels)
            .map(|((a, &b), &v)| (a, b, v))
    }
}

pub fn rearrangement(f: &GridFunction) -> RearrangementTable {
    let mut vals: Vec<f64> = f
        .values()
        .iter()
        .map(|v| v.abs())
        .filter(|&v| v > 0.0)
        .collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    let w = f.cell_volume();
    let mut breakpoints = Vec::new();
    let mut levels: Vec<f64> = Vec::new();
    let mut count = 0usize;
    for v in vals {
        count += 1;
        if levels.last() == Some(&v) {
            *breakpoints.last_mut().unwrap() = count as f64 * w;
        } else {
            levels.push(v);
            breakpoints.push(count as f64 * w);
        }
    }
    RearrangementTable {
        breakpoints,
        levels,
    }
}

fn lp_sum(vals: &[f64], w: f64, p: f64) -> f64 {
    let m = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m == 0.0 {
        return 0.0;
    }
    let s: f64 = vals.iter().map(|v| (v.abs() / m).powf(p)).sum();
    m * (w * s).powf(1.0 / p)
}

fn lp_norm(f: &GridFunction, p: f64) -> f64 {
    lp_sum(f.values(), f.cell_volume(), p)
}

fn lorentz_norm(f: &GridFunction, p: f64, q: f64) -> f64 {
    let table = rearrangement(f);
    if q.is_infinite() {
        return table
            .pieces()
            .map(|(_, b, v)| v * b.powf(1.0 / p))
            .fold(0.0, f64::max);
    }
    let m = table.levels.first().copied().unwrap_or(0.0);
    if m == 0.0 {
        return 0.0;
    }
    let r = q / p;
    let s: f64 = table
        .pieces()
        .map(|(a, b, v)| (v / m).powf(q) * (b.powf(r) - a.powf(r)))
        .sum();
    m * (s * p / q).powf(1.0 / q)
}

/// Σ w |f_i/λ|^{p(x_i)}.
fn modular(vals: &[f64], exps: &[f64], w: f64, lambda: f64) -> f64 {
    vals.iter()
        .zip(exps)
        .map(|(v, p)| (v.abs() / lambda).powf(*p))
        .sum::<f64>()
        * w
}

/// The Luxemburg norm inf{λ > 0 : ρ(f/λ) ≤ 1} and the modular at that λ.
fn luxemburg(f: &GridFunction, exponent: &ExponentDescriptor) -> (f64, f64) {
    let (pm, pp) = exponent.bounds();
    let w = f.cell_volume();
    let mut vals = Vec::new();
    let mut exps = Vec::new();
    let mut x = vec![0.0; f.dim()];
    for (i, &v) in f.values().iter().enumerate() {
        if v != 0.0 {
            f.cell_center_into(i, &mut x);
            vals.push(v);
            exps.push(exponent.eval(&x));
        }
    }
    if vals.is_empty() {
        return (0.0, 0.0);
    }
    let a = lp_sum(&vals, w, pm);
    let b = lp_sum(&vals, w, pp);
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    while modular(&vals, &exps, w, hi) > 1.0 {
        hi *= 2.0;
    }
    while modular(&vals, &exps, w, lo) <= 1.0 {
        lo *= 0.5;
    }
    while hi / lo - 1.0 > 1e-14 {
        let mid = (lo * hi).sqrt();
        if modular(&vals, &exps, w, mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = (lo * hi).sqrt();
    (lambda, modular(&vals, &exps, w, lambda))
}

/// Radii diam·2^{−j/per_octave} down to half the smallest spacing.
fn morrey_radii(f: &GridFunction, per_octave: usize) -> Vec<f64> {
    let diam = 2.0 * f.half_width().iter().map(|h| h * h).sum::<f64>().sqrt();
    let floor = 0.5 * f.min_spacing();
    let mut out = Vec::new();
    let mut j = 0;
    loop {
        let r = diam * 2f64.powf(-(j as f64) / per_octave as f64);
        if r < floor {
            break;
        }
        out.push(r);
        j += 1;
    }
    out.reverse();
    out
}

/// max over cell centres x and the given radii of |B|^{1/p0 − 1/p}‖f‖_{Lᵖ(B)},
/// B = the cells whose centres lie within r of x. A lower bound for the
/// Morrey norm.
fn morrey_over(f: &GridFunction, p: f64, p0: f64, radii: &[f64]) -> f64 {
    let n = f.dim();
    let w = f.cell_volume();
    let m = f.max_abs();
    if m == 0.0 {
        return 0.0;
    }
    let centres: Vec<Vec<f64>> = (0..f.len()).map(|i| f.cell_center(i)).collect();
    let powered: Vec<f64> = f.values().iter().map(|v| (v.abs() / m).powf(p)).collect();
    let expo = 1.0 / p0 - 1.0 / p;
    let best = (0..f.len())
        .into_par_iter()
        .map(|c| {
            let mut mass = vec![0.0; radii.len()];
            let mut count = vec![0usize; radii.len()];
            let xc = &centres[c];
            for (y, &pw) in centres.iter().zip(&powered) {
                let d = (0..n).map(|a| (y[a] - xc[a]).powi(2)).sum::<f64>().sqrt();
                let j = radii.partition_point(|&r| r < d);
                if j < radii.len() {
                    mass[j] += pw;
                    count[j] += 1;
                }
            }
            let (mut acc, mut cnt) = (0.0, 0usize);
            let mut best = 0.0f64;
            for j in 0..radii.len() {
                acc += mass[j];
                cnt += count[j];
                if cnt > 0 {
                    let vol = cnt as f64 * w;
                    best = best.max(vol.powf(expo) * (acc * w).powf(1.0 / p));
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    m * best
}

/// ‖f·χ_{|f|>τ}‖-style split cost for L¹+Lᵖ: f₁ = sgn f (|f| − τ)₊ and
/// f_p = sgn f min(|f|, τ).
fn sum_split_cost(vals: &[f64], w: f64, p: f64, tau: f64) -> f64 {
    let l1: f64 = vals.iter().map(|v| (v.abs() - tau).max(0.0)).sum::<f64>() * w;
    let capped: Vec<f64> = vals.iter().map(|v| v.abs().min(tau)).collect();
    l1 + lp_sum(&capped, w, p)
}

/// The L¹+Lᵖ norm and the optimal truncation level.
fn sum_norm(f: &GridFunction, p: f64) -> (f64, f64) {
    let vals = f.values();
    let w = f.cell_volume();
    let m = f.max_abs();
    if m == 0.0 {
        return (0.0, 0.0);
    }
    // the cost is unimodal in τ: it falls while τ < ‖min(|f|, τ)‖_p and rises after
    let cost = |t: f64| sum_split_cost(vals, w, p, t);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, m);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (cost(c), cost(d));
    for _ in 0..200 {
        if b - a <= 1e-15 * m {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = cost(d);
        }
    }
    let mut best = (fc.min(fd), if fc <= fd { c } else { d });
    for t in [0.0, m] {
        let v = cost(t);
        if v < best.0 {
            best = (v, t);
        }
    }
    best
}

pub fn norm(f: &GridFunction, space: &LatticeSpace) -> Result<f64> {
    space.validate()?;
    Ok(match *space {
        LatticeSpace::Lp { p } => lp_norm(f, p),
        LatticeSpace::Lorentz { p, q } => lorentz_norm(f, p, q),
        LatticeSpace::VarExp { exponent } => luxemburg(f, &exponent).0,
        LatticeSpace::Morrey { p, p0 } => morrey_over(f, p, p0, &morrey_radii(f, 1)),
        LatticeSpace::Sum { p } => sum_norm(f, p).0,
    })
}

/// A norm together with method-specific diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub space: String,
    pub norm: f64,
    pub diagnostics: BTreeMap<String, f64>,
}

pub fn norm_report(f: &GridFunction, space: &LatticeSpace) -> Result<NormReport> {
    space.validate()?;
    let mut diagnostics = BTreeMap::new();
    let value = match *space {
        LatticeSpace::VarExp { exponent } => {
            let (lambda, rho) = luxemburg(f, &exponent);
            let (lo, hi) = exponent.bounds();
            diagnostics.insert("modular_at_norm".into(), rho);
            diagnostics.insert("p_minus".into(), lo);
            diagnostics.insert("p_plus".into(), hi);
            diagnostics.insert("decay_constant".into(), exponent.decay_constant());
            lambda
        }
        LatticeSpace::Morrey { p, p0 } => {
            let coarse = morrey_over(f, p, p0, &morrey_radii(f, 1));
            let fine = morrey_over(f, p, p0, &morrey_radii(f, 2));
            diagnostics.insert("lower_bound".into(), 1.0);
            diagnostics.insert("half_octave_value".into(), fine);
            diagnostics.insert(
                "refinement_gap".into(),
                if fine > 0.0 {
                    (fine - coarse).abs() / fine
                } else {
                    0.0
                },
            );
            coarse
        }
        LatticeSpace::Sum { p } => {
            let (v, tau) = sum_norm(f, p);
            diagnostics.insert("threshold".into(), tau);
            diagnostics.insert("l1".into(), lp_norm(f, 1.0));
            diagnostics.insert("lp".into(), lp_norm(f, p));
            v
        }
        _ => norm(f, space)?,
    };
    Ok(NormReport {
        space: space.to_string(),
        norm: value,
        diagnostics,
    })
}

fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

/// The norm of `f` in the associate space X′ (Lᵖ′ or L^{p′,q′}).
pub fn associate_norm(f: &GridFunction, space: &LatticeSpace) -> Result<f64> {
    space.validate()?;
    match *space {
        LatticeSpace::Lp { p: 1.0 } => Ok(f.max_abs()),
        LatticeSpace::Lp { p } => Ok(lp_norm(f, conjugate(p))),
        LatticeSpace::Lorentz { p, q } => {
            let qq = conjugate(q);
            if qq == 1.0 && conjugate(p) <= 1.0 {
                return domain("associate exponent out of range");
            }
            Ok(lorentz_norm(f, conjugate(p), qq))
        }
        _ => Err(Error::Unsupported(format!(
            "associate norm of {space} is not implemented"
        ))),
    }
}

/// Muckenhoupt-type constant sup_Q ‖χ_Q‖_X‖χ_Q‖_{X′}/|Q| over dyadic cubes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuckenhouptReport {
    pub constant: f64,
    /// Largest ratio at each dyadic level, coarsest first.
    pub per_scale: Vec<f64>,
}

/// Cubes at level j split every axis of the grid's box into 2^j equal parts;
/// levels run from 0 to `scales − 1`.
pub fn muckenhoupt_constant(
    template: &GridFunction,
    space: &LatticeSpace,
    scales: usize,
) -> Result<MuckenhouptReport> {
    space.validate()?;
    let n = template.dim();
    let cells = template.cells().to_vec();
    if scales == 0 || cells.iter().any(|&c| c < 1 << (scales - 1)) {
        return domain(format!("grid too coarse for {scales} dyadic levels"));
    }
    let mut per_scale = Vec::with_capacity(scales);
    let mut idx = vec![0usize; n];
    for j in 0..scales {
        let parts = 1usize << j;
        let cubes = parts.pow(n as u32);
        let mut labels = vec![0usize; template.len()];
        for (i, label) in labels.iter_mut().enumerate() {
            template.multi_index(i, &mut idx);
            let mut l = 0;
            for a in (0..n).rev() {
                l = l * parts + idx[a] * parts / cells[a];
            }
            *label = l;
        }
        let ratios: Result<Vec<f64>> = (0..cubes)
            .into_par_iter()
            .map(|q| {
                let values = labels
                    .iter()
                    .map(|&l| if l == q { 1.0 } else { 0.0 })
                    .collect();
                let chi = template.with_values(values)?;
                let measure = chi.integral();
                Ok(norm(&chi, space)? * associate_norm(&chi, space)? / measure)
            })
            .collect();
        per_scale.push(ratios?.into_iter().fold(0.0, f64::max));
    }
    Ok(MuckenhouptReport {
        constant: per_scale.iter().copied().fold(0.0, f64::max),
        per_scale,
    })
}

/// One ball indicator a·χ_{B(0,r)} of a layer-cake sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerTerm {
    pub weight: f64,
    pub radius: f64,
}

/// K_N = 2^{−N}Σ_l χ_{B(0, r(2^{−N}l))} with r(t) = sup{r : K(r) ≥ t},
/// terms with equal radii merged, radii decreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCake {
    pub terms: Vec<LayerTerm>,
}

impl LayerCake {
    pub fn eval(&self, r: f64) -> f64 {
        self.terms
            .iter()
            .filter(|t| r <= t.radius)
            .map(|t| t.weight)
            .sum()
    }

    pub fn max_radius(&self) -> f64 {
        self.terms.first().map_or(0.0, |t| t.radius)
    }

    /// ‖K − K_N‖_{L¹(ℝⁿ)} for a radial K.
    pub fn l1_distance<F: Fn(f64) -> f64>(&self, kernel: F, n: usize, reach: f64) -> Result<f64> {
        let sigma = sphere_area(n)?;
        let mut cuts: Vec<f64> = self
            .terms
            .iter()
            .map(|t| t.radius)
            .filter(|&r| r < reach)
            .collect();
        cuts.push(0.0);
        cuts.push(reach);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let g = |r: f64| (kernel(r) - self.eval(r)).abs() * r.powi(n as i32 - 1);
        let mut total = 0.0;
        for pair in cuts.windows(2) {
            total += adaptive_gk(g, pair[0], pair[1], 1e-10, 1e-15)?.value;
        }
        Ok(sigma * total)
    }
}

/// The N-th layer-cake approximation of a radial, non-increasing kernel.
/// `reach` bounds the search for level radii; K must vanish beyond it or be
/// below 2^{−N} there.
pub fn layer_cake<F: Fn(f64) -> f64>(kernel: F, levels: u32, reach: f64) -> Result<LayerCake> {
    if !(reach > 0.0) {
        return domain("layer cake needs a positive search radius");
    }
    let probes = 4096;
    let mut prev = kernel(0.0);
    for i in 1..=probes {
        let v = kernel(reach * i as f64 / probes as f64);
        if v > prev + 1e-12 * prev.abs().max(1e-300) || v < 0.0 {
            return Err(Error::Precondition(
                "layer cake needs a non-negative, non-increasing kernel".into(),
            ));
        }
        prev = v;
    }
    let step = 0.5f64.powi(levels as i32);
    let top = (kernel(0.0) / step).floor() as usize;
    let mut terms: Vec<LayerTerm> = Vec::new();
    for l in (1..=top).rev() {
        let t = l as f64 * step;
        let (mut lo, mut hi) = (0.0, reach);
        if kernel(hi) >= t {
            return Err(Error::Precondition(format!(
                "kernel still above {t:.3e} at the search radius {reach}"
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if kernel(mid) >= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        match terms.last_mut() {
            Some(last) if last.radius == lo => last.weight += step,
            _ => terms.push(LayerTerm {
                weight: step,
                radius: lo,
            }),
        }
    }
    terms.reverse();
    Ok(LayerCake { terms })
}

/// Offsets (in cells) whose physical length is at most `r`, with that length.
fn stencil(f: &GridFunction, r: f64) -> Vec<(Vec<isize>, f64)> {
    let n = f.dim();
    let reach: Vec<isize> = (0..n)
        .map(|a| (r / f.spacing(a)).floor() as isize)
        .collect();
    let mut out = Vec::new();
    let mut off = reach.iter().map(|&m| -m).collect::<Vec<_>>();
    loop {
        let d = (0..n)
            .map(|a| (off[a] as f64 * f.spacing(a)).powi(2))
            .sum::<f64>()
            .sqrt();
        if d <= r * (1.0 + 1e-12) {
            out.push((off.clone(), d));
        }
        let mut a = 0;
        loop {
            if a == n {
                return out;
            }
            off[a] += 1;
            if off[a] <= reach[a] {
                break;
            }
            off[a] = -reach[a];
            a += 1;
        }
    }
}

/// Σ_offsets weight·f(x + offset), f extended by zero outside the box.
fn stencil_apply(f: &GridFunction, taps: &[(Vec<isize>, f64)]) -> GridFunction {
    let n = f.dim();
    let cells = f.cells().to_vec();
    let vals = f.values();
    let out: Vec<f64> = (0..f.len())
        .into_par_iter()
        .map(|i| {
            let mut idx = vec![0usize; n];
            f.multi_index(i, &mut idx);
            let mut tgt = vec![0usize; n];
            let mut acc = 0.0;
            'tap: for (off, w) in taps {
                for a in 0..n {
                    let j = idx[a] as isize + off[a];
                    if j < 0 || j >= cells[a] as isize {
                        continue 'tap;
                    }
                    tgt[a] = j as usize;
                }
                acc += w * vals[f.linear_index(&tgt)];
            }
            acc
        })
        .collect();
    f.with_values(out).expect("same geometry")
}

/// Mean of f over the cells whose centres lie in B(x, r), f = 0 off the box.
pub fn ball_average(f: &GridFunction, r: f64) -> Result<GridFunction> {
    if !(r >= f.min_spacing()) {
        return domain(format!(
            "averaging radius {r} is smaller than one cell ({})",
            f.min_spacing()
        ));
    }
    let taps = stencil(f, r);
    let w = 1.0 / taps.len() as f64;
    let taps: Vec<_> = taps.into_iter().map(|(o, _)| (o, w)).collect();
    Ok(stencil_apply(f, &taps))
}

/// Discrete Hardy–Littlewood maximal function over dyadic radii
/// spacing·2^j up to `max_radius`, for diagnostics.
pub fn maximal_function(f: &GridFunction, max_radius: f64) -> Result<GridFunction> {
    let abs = f.map(f64::abs);
    let mut best = abs.clone();
    let mut r = f.min_spacing();
    while r <= max_radius {
        let avg = ball_average(&abs, r)?;
        for (b, a) in best.values_mut().iter_mut().zip(avg.values()) {
            *b = b.max(*a);
        }
        r *= 2.0;
    }
    Ok(best)
}

/// How [`mollify`] forms K_ε ∗ f.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "route", rename_all = "snake_case")]
pub enum MollifyRoute {
    /// Σ a_l (χ_{B(0, ε r_l)} ∗ f) ε^{−n} from the N-level layer cake.
    LayerCake { levels: u32 },
    /// Plain discrete convolution with ε^{−n}K(·/ε).
    Direct,
}

/// K_ε ∗ f with K_ε = ε^{−n}K(·/ε), as a discrete convolution over cell
/// centres. `reach` is a radius beyond which K is negligible.
pub fn mollify<F: Fn(f64) -> f64>(
    f: &GridFunction,
    kernel: F,
    reach: f64,
    eps: f64,
    route: MollifyRoute,
) -> Result<GridFunction> {
    if !(eps > 0.0) {
        return domain(format!("mollifier scale must be positive, got {eps}"));
    }
    let n = f.dim();
    let scale = f.cell_volume() / eps.powi(n as i32);
    let taps = match route {
        MollifyRoute::Direct => stencil(f, eps * reach)
            .into_iter()
            .map(|(o, d)| (o, scale * kernel(d / eps)))
            .filter(|(_, w)| *w != 0.0)
            .collect::<Vec<_>>(),
        MollifyRoute::LayerCake { levels } => {
            let cake = layer_cake(&kernel, levels, reach)?;
            // sum of weights of all balls containing an offset: radii are decreasing
            let radii: Vec<f64> = cake.terms.iter().map(|t| eps * t.radius).collect();
            let mut suffix = vec![0.0; radii.len() + 1];
            for i in (0..radii.len()).rev() {
                suffix[i] = suffix[i + 1] + cake.terms[i].weight;
            }
            stencil(f, eps * cake.max_radius())
                .into_iter()
                .map(|(o, d)| {
                    let inside = radii.partition_point(|&r| r >= d);
                    (o, scale * (suffix[0] - suffix[inside]))
                })
                .filter(|(_, w)| *w != 0.0)
                .collect()
        }
    };
    Ok(stencil_apply(f, &taps))
}
