//! Zeros of a quasipolynomial inside a rectangle of the complex plane.
//!
//! The rectangle is cut into vertical strips no wider than `20/τ`, then
//! bisected along its longer side until every piece encloses at most
//! [`TERMINAL_CAPACITY`] zeros according to the argument principle. Inside
//! a terminal piece the zeros are the roots of a small polynomial rebuilt
//! from contour moments; they are clustered, polished by Newton's method
//! (on Δ⁽ʳ⁻¹⁾ for a cluster of size r) and their multiplicity is confirmed
//! by a winding count on a tiny square around each one.

mod polyroots;
mod quadrature;

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::de::{self, Deserializer};
use serde::ser::{SerializeTuple, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::progress::Progress;
use crate::quasipoly::{binomial, ComplexRectangle, Quasipolynomial};
use quadrature::{Integrator, Moments, MAX_MOMENT};

/// Largest number of zeros extracted from the moments of one region.
pub const TERMINAL_CAPACITY: usize = MAX_MOMENT;

/// How many times a rectangle whose boundary touches a zero is shifted by
/// `1e-4` of its diagonal before giving up.
pub const MAX_BOUNDARY_RETRIES: usize = 8;

/// Moment roots closer than this (in units of the region half-diagonal)
/// are treated as one cluster.
const CLUSTER_RADIUS: f64 = 0.05;

/// Refined zeros closer than this times `1 + |s|` are merged.
const MERGE_TOLERANCE: f64 = 1e-8;

const SPLIT_FRACTIONS: [f64; 9] = [0.5, 0.537, 0.462, 0.581, 0.419, 0.633, 0.371, 0.702, 0.298];

/// One zero with its multiplicity and `|Δ|` at the computed location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub location: Complex64,
    pub multiplicity: usize,
    pub residual: f64,
}

impl Serialize for Root {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let mut t = ser.serialize_tuple(4)?;
        t.serialize_element(&self.location.re)?;
        t.serialize_element(&self.location.im)?;
        t.serialize_element(&self.multiplicity)?;
        t.serialize_element(&self.residual)?;
        t.end()
    }
}

impl<'de> Deserialize<'de> for Root {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let (re, im, multiplicity, residual) = <(f64, f64, usize, f64)>::deserialize(de)?;
        if multiplicity == 0 {
            return Err(de::Error::custom("multiplicity must be positive"));
        }
        Ok(Root {
            location: Complex64::new(re, im),
            multiplicity,
            residual,
        })
    }
}

/// Zeros found in a rectangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootSet {
    /// The rectangle actually searched (possibly shifted off a boundary zero).
    pub rectangle: ComplexRectangle,
    /// Sorted by real part, then imaginary part.
    pub roots: Vec<Root>,
    pub winding_count: usize,
    /// Largest real part among the roots; `-∞` (JSON `null`) when empty.
    #[serde(with = "neg_infinite_as_null")]
    pub window_abscissa: f64,
}

impl RootSet {
    pub fn total_multiplicity(&self) -> usize {
        self.roots.iter().map(|r| r.multiplicity).sum()
    }

    /// `re,im,multiplicity,residual` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("re,im,multiplicity,residual\n");
        for r in &self.roots {
            out.push_str(&format!(
                "{:.16e},{:.16e},{},{:.16e}\n",
                r.location.re, r.location.im, r.multiplicity, r.residual
            ));
        }
        out
    }
}

mod neg_infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, ser: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            ser.serialize_f64(*v)
        } else {
            ser.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(de)?.unwrap_or(f64::NEG_INFINITY))
    }
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, ser: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            ser.serialize_f64(*v)
        } else {
            ser.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(de)?.unwrap_or(f64::INFINITY))
    }
}

/// Number of zeros (with multiplicity) inside `rect`.
pub fn count_roots(q: &Quasipolynomial, rect: &ComplexRectangle) -> Result<usize> {
    let progress = Progress::new();
    with_boundary_retries(rect, |r| {
        let solver = Solver::new(q, &progress, true);
        Ok(solver.solve(*r, None, true)?.count)
    })
}

/// Raw winding integral `(1/2πi) ∮ Δ'/Δ ds` over `rect` before rounding.
///
/// `refinement` multiplies the initial number of quadrature panels per
/// edge. No strip splitting or boundary shifting is applied.
pub fn winding_integral(
    q: &Quasipolynomial,
    rect: &ComplexRectangle,
    refinement: usize,
) -> Result<Complex64> {
    let integrator = Integrator {
        refinement,
        ..Integrator::STANDARD
    };
    Ok(integrator.moments(q, rect)?.values[0])
}

pub fn find_roots(q: &Quasipolynomial, rect: &ComplexRectangle) -> Result<RootSet> {
    find_roots_with(q, rect, &Progress::new())
}

pub fn find_roots_with(
    q: &Quasipolynomial,
    rect: &ComplexRectangle,
    progress: &Progress,
) -> Result<RootSet> {
    with_boundary_retries(rect, |r| {
        let solver = Solver::new(q, progress, false);
        let outcome = solver.solve(*r, None, true)?;
        let mut roots = outcome.roots;
        roots.sort_by(|x, y| {
            x.location
                .re
                .total_cmp(&y.location.re)
                .then(x.location.im.total_cmp(&y.location.im))
        });
        let total: usize = roots.iter().map(|r| r.multiplicity).sum();
        if total != outcome.count {
            return Err(Error::ConvergenceFailure(format!(
                "found {total} zeros but the winding count is {}",
                outcome.count
            )));
        }
        let window_abscissa = roots
            .iter()
            .map(|r| r.location.re)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(RootSet {
            rectangle: *r,
            roots,
            winding_count: outcome.count,
            window_abscissa,
        })
    })
}

fn with_boundary_retries<T>(
    rect: &ComplexRectangle,
    f: impl Fn(&ComplexRectangle) -> Result<T>,
) -> Result<T> {
    let d = 1e-4 * rect.diagonal();
    // Real-axis shifts first so symmetric windows stay symmetric.
    const SHIFTS: [(f64, f64); MAX_BOUNDARY_RETRIES + 1] = [
        (0.0, 0.0),
        (1.0, 0.0),
        (-1.0, 0.0),
        (2.0, 0.0),
        (-2.0, 0.0),
        (0.0, 1.0),
        (0.0, -1.0),
        (1.0, 1.0),
        (-1.0, -1.0),
    ];
    for (dx, dy) in SHIFTS {
        match f(&rect.translated(dx * d, dy * d)) {
            Err(Error::ContourTooClose { .. }) => continue,
            other => return other,
        }
    }
    Err(Error::RootOnBoundary {
        retries: MAX_BOUNDARY_RETRIES,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    /// Cut by a vertical line (splits the real extent).
    Real,
    /// Cut by a horizontal line.
    Imag,
}

struct Outcome {
    roots: Vec<Root>,
    count: usize,
}

struct Solver<'a> {
    q: &'a Quasipolynomial,
    strip_width: f64,
    count_only: bool,
    progress: &'a Progress,
}

impl<'a> Solver<'a> {
    fn new(q: &'a Quasipolynomial, progress: &'a Progress, count_only: bool) -> Self {
        Self {
            q,
            strip_width: 20.0 / q.tau(),
            count_only,
            progress,
        }
    }

    fn integrate(&self, rect: &ComplexRectangle) -> Result<Moments> {
        let m = Integrator::STANDARD.moments(self.q, rect)?;
        if m.count().is_some() {
            return Ok(m);
        }
        for refinement in [4, 16] {
            let tighter = Integrator {
                refinement,
                tolerance: 1e-12,
                ..Integrator::STANDARD
            };
            let m = tighter.moments(self.q, rect)?;
            if m.count().is_some() {
                return Ok(m);
            }
        }
        Err(Error::ConvergenceFailure(format!(
            "winding integral over {rect:?} is not near an integer"
        )))
    }

    fn solve(&self, rect: ComplexRectangle, known: Option<Moments>, retry: bool) -> Result<Outcome> {
        self.progress.check()?;
        if known.is_none() && rect.width() > self.strip_width {
            return self.split(rect, Axis::Real, None, retry);
        }
        let moments = match known {
            Some(m) => m,
            None => self.integrate(&rect)?,
        };
        let count = moments.count().expect("integrate returns integral counts");
        self.progress.tick();
        if count == 0 || self.count_only {
            return Ok(Outcome {
                roots: Vec::new(),
                count,
            });
        }
        if count <= TERMINAL_CAPACITY {
            match self.extract(&rect, &moments, count) {
                Ok(roots) => return Ok(Outcome { roots, count }),
                Err(e @ Error::Cancelled { .. }) => return Err(e),
                Err(e) if !retry => return Err(e),
                Err(_) => {}
            }
            return self.split(rect, longer_side(&rect), Some(count), false);
        }
        if let Some(root) = self.single_cluster(&moments, count) {
            return Ok(Outcome {
                roots: vec![root],
                count,
            });
        }
        self.split(rect, longer_side(&rect), Some(count), retry)
    }

    fn split(
        &self,
        rect: ComplexRectangle,
        axis: Axis,
        expected: Option<usize>,
        retry: bool,
    ) -> Result<Outcome> {
        let mut last = None;
        for frac in SPLIT_FRACTIONS {
            let (lo, hi, line) = split_rect(&rect, axis, frac);
            let attempt = match expected {
                None => self.solve_pair(lo, None, hi, None, retry),
                Some(expected) => {
                    match self.integrate(&lo).and_then(|m1| Ok((m1, self.integrate(&hi)?))) {
                        Ok((m1, m2)) => {
                            let found = m1.count().unwrap_or(0) + m2.count().unwrap_or(0);
                            if found != expected {
                                last = Some(Error::ConvergenceFailure(format!(
                                    "halves hold {found} zeros, parent holds {expected}"
                                )));
                                continue;
                            }
                            self.solve_pair(lo, Some(m1), hi, Some(m2), retry)
                        }
                        Err(e) => Err(e),
                    }
                }
            };
            match attempt {
                Err(Error::ContourTooClose { re, im }) if on_line(axis, line, re, im) => {
                    last = Some(Error::ConvergenceFailure(format!(
                        "every cut of {rect:?} passes near a zero"
                    )));
                }
                other => return other,
            }
        }
        Err(last.unwrap_or_else(|| Error::ConvergenceFailure("region could not be split".into())))
    }

    fn solve_pair(
        &self,
        lo: ComplexRectangle,
        m_lo: Option<Moments>,
        hi: ComplexRectangle,
        m_hi: Option<Moments>,
        retry: bool,
    ) -> Result<Outcome> {
        let (a, b) = join(|| self.solve(lo, m_lo, retry), || self.solve(hi, m_hi, retry));
        let mut a = a?;
        let b = b?;
        a.roots.extend(b.roots);
        a.count += b.count;
        Ok(a)
    }

    /// Zeros of a terminal region from its moments.
    fn extract(&self, rect: &ComplexRectangle, moments: &Moments, count: usize) -> Result<Vec<Root>> {
        let coeffs = polyroots::from_power_sums(&moments.values[1..=count]);
        let candidates = polyroots::aberth(&coeffs);
        let to_plane = |w: Complex64| moments.center + w * moments.radius;

        let mut roots = Vec::new();
        for cluster in clusters(&candidates, CLUSTER_RADIUS) {
            let size = cluster.len();
            let mean = cluster.iter().sum::<Complex64>() / size as f64;
            match self.refine(to_plane(mean), size) {
                Ok(root) => roots.push(root),
                Err(_) if size > 1 => {
                    // Not a genuine multiple zero: polish members separately.
                    let mut separate: Vec<Root> = Vec::new();
                    for &w in &cluster {
                        let z = self.newton(to_plane(w), 0)?;
                        if separate
                            .iter()
                            .any(|r| (r.location - z).norm() < micro_radius(z, r.multiplicity))
                        {
                            continue;
                        }
                        let multiplicity = self.micro_count(z, 1)?;
                        if multiplicity == 0 {
                            return Err(Error::ConvergenceFailure(format!("no zero near {z}")));
                        }
                        separate.push(self.root_at(z, multiplicity));
                    }
                    roots.extend(separate);
                }
                Err(e) => return Err(e),
            }
        }

        let roots = merge(roots);
        let total: usize = roots.iter().map(|r| r.multiplicity).sum();
        if total != count {
            return Err(Error::ConvergenceFailure(format!(
                "extracted {total} zeros from a region holding {count}"
            )));
        }
        if let Some(r) = roots.iter().find(|r| !rect.contains_strictly(r.location)) {
            return Err(Error::ConvergenceFailure(format!(
                "refined zero {} left its region",
                r.location
            )));
        }
        Ok(roots)
    }

    /// A region holding more zeros than the moment capacity may still be a
    /// single high-multiplicity zero; accept it if the central moments vanish
    /// and a tight recount agrees.
    fn single_cluster(&self, moments: &Moments, count: usize) -> Option<Root> {
        let n = count as f64;
        let mean = moments.values[1] / n;
        let mut power_sums = moments.values;
        power_sums[0] = Complex64::new(n, 0.0);
        let tight = (2..=MAX_MOMENT).all(|p| {
            let central: Complex64 = (0..=p)
                .map(|j| power_sums[j] * binomial(p, j) * (-mean).powi((p - j) as i32))
                .sum();
            central.norm() < 1e-6 * n
        });
        if !tight {
            return None;
        }
        self.refine(moments.center + mean * moments.radius, count).ok()
    }

    /// Polishes a cluster of `size` zeros and confirms the multiplicity.
    fn refine(&self, start: Complex64, size: usize) -> Result<Root> {
        let z = self.newton(start, size - 1)?;
        let found = self.micro_count(z, size)?;
        if found != size {
            return Err(Error::ConvergenceFailure(format!(
                "cluster of {size} near {z} recounts as {found}"
            )));
        }
        Ok(self.root_at(z, size))
    }

    fn root_at(&self, z: Complex64, multiplicity: usize) -> Root {
        Root {
            location: z,
            multiplicity,
            residual: self.q.evaluate(z).norm(),
        }
    }

    fn order_pair(&self, z: Complex64, order: usize) -> Result<(Complex64, Complex64)> {
        if order == 0 {
            Ok(self.q.value_and_slope(z))
        } else {
            Ok((self.q.derivative(z, order)?, self.q.derivative(z, order + 1)?))
        }
    }

    /// Damped Newton iteration on Δ⁽ᵒʳᵈᵉʳ⁾.
    fn newton(&self, start: Complex64, order: usize) -> Result<Complex64> {
        let mut z = start;
        let (mut f, mut df) = self.order_pair(z, order)?;
        let mut converged = false;
        for _ in 0..100 {
            if f.norm() <= 1e-12 * self.q.residual_scale(z) {
                converged = true;
                break;
            }
            let step = f / df;
            if !(step.re.is_finite() && step.im.is_finite()) {
                break;
            }
            let mut lambda = 1.0;
            loop {
                let next = z - step * lambda;
                let (fn_, dfn) = self.order_pair(next, order)?;
                if fn_.norm() < f.norm() || lambda < 1.0 / 1024.0 {
                    z = next;
                    f = fn_;
                    df = dfn;
                    break;
                }
                lambda *= 0.5;
            }
            if (step * lambda).norm() <= 1e-14 * (1.0 + z.norm()) {
                converged = true;
                break;
            }
        }
        if !converged && f.norm() > 1e-8 * self.q.residual_scale(z) {
            return Err(Error::ConvergenceFailure(format!(
                "Newton iteration stalled near {z}"
            )));
        }
        // Two more polishing steps, kept only while they help.
        for _ in 0..2 {
            let step = f / df;
            if !(step.re.is_finite() && step.im.is_finite()) {
                break;
            }
            let next = z - step;
            let (fn_, dfn) = self.order_pair(next, order)?;
            if fn_.norm() > f.norm() {
                break;
            }
            z = next;
            f = fn_;
            df = dfn;
        }
        if z.im.abs() <= 1e-12 * (1.0 + z.norm()) {
            z.im = 0.0;
        }
        Ok(z)
    }

    /// Winding count on a small square around `z`.
    fn micro_count(&self, z: Complex64, expected: usize) -> Result<usize> {
        let base = micro_radius(z, expected);
        for factor in [1.0, 0.5, 1.7] {
            let rect = ComplexRectangle::around(z, base * factor)?;
            match Integrator::MICRO.moments(self.q, &rect) {
                Ok(m) => {
                    if let Some(c) = m.count() {
                        return Ok(c);
                    }
                }
                Err(Error::ContourTooClose { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        Err(Error::ConvergenceFailure(format!(
            "no clean winding count around {z}"
        )))
    }
}

/// Half-width of the recount square: `1e-4 (1+|z|)`, widened for higher
/// multiplicities so `|Δ|` on it stays above rounding noise.
fn micro_radius(z: Complex64, multiplicity: usize) -> f64 {
    let r = multiplicity.max(1) as f64;
    1e-8_f64.powf(1.0 / r).max(1e-4) * (1.0 + z.norm())
}

fn merge(mut roots: Vec<Root>) -> Vec<Root> {
    roots.sort_by(|a, b| a.location.re.total_cmp(&b.location.re));
    let mut out: Vec<Root> = Vec::with_capacity(roots.len());
    for r in roots {
        let close = out.iter_mut().find(|o| {
            (o.location - r.location).norm() <= MERGE_TOLERANCE * (1.0 + r.location.norm())
        });
        match close {
            Some(o) => o.multiplicity += r.multiplicity,
            None => out.push(r),
        }
    }
    out
}

/// Single-linkage clusters of points closer than `radius`.
fn clusters(points: &[Complex64], radius: f64) -> Vec<Vec<Complex64>> {
    let n = points.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(label: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while label[r] != r {
            r = label[r];
        }
        label[i] = r;
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (points[i] - points[j]).norm() < radius {
                let a = find(&mut label, i);
                let b = find(&mut label, j);
                label[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<Complex64>> = BTreeMap::new();
    for i in 0..n {
        let root = find(&mut label, i);
        groups.entry(root).or_default().push(points[i]);
    }
    groups.into_values().collect()
}

fn longer_side(rect: &ComplexRectangle) -> Axis {
    if rect.width() >= rect.height() {
        Axis::Real
    } else {
        Axis::Imag
    }
}

fn split_rect(rect: &ComplexRectangle, axis: Axis, frac: f64) -> (ComplexRectangle, ComplexRectangle, f64) {
    match axis {
        Axis::Real => {
            let x = rect.x_min + frac * rect.width();
            let lo = ComplexRectangle { x_max: x, ..*rect };
            let hi = ComplexRectangle { x_min: x, ..*rect };
            (lo, hi, x)
        }
        Axis::Imag => {
            let y = rect.y_min + frac * rect.height();
            let lo = ComplexRectangle { y_max: y, ..*rect };
            let hi = ComplexRectangle { y_min: y, ..*rect };
            (lo, hi, y)
        }
    }
}

fn on_line(axis: Axis, line: f64, re: f64, im: f64) -> bool {
    match axis {
        Axis::Real => re == line,
        Axis::Imag => im == line,
    }
}

#[cfg(feature = "parallel")]
fn join<A, B, RA, RB>(a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    rayon::join(a, b)
}

#[cfg(not(feature = "parallel"))]
fn join<A, B, RA, RB>(a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA,
    B: FnOnce() -> RB,
{
    (a(), b())
}

/// Window-limited dominance of an assigned real root.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub dominant: bool,
    /// `s₀` minus the largest real part among the other roots; `+∞`
    /// (JSON `null`) when no other root lies in the window.
    #[serde(with = "infinite_as_null")]
    pub margin: f64,
}

/// Checks that every root other than the one at `s0` lies to its left.
pub fn certify_dominance(roots: &RootSet, s0: f64) -> Result<DominanceReport> {
    let target = Complex64::new(s0, 0.0);
    let assigned = roots
        .roots
        .iter()
        .enumerate()
        .filter(|(_, r)| (r.location - target).norm() <= 1e-6)
        .min_by(|(_, a), (_, b)| {
            (a.location - target)
                .norm()
                .total_cmp(&(b.location - target).norm())
        })
        .map(|(i, _)| i)
        .ok_or(Error::AssignedRootMissing { s0 })?;
    let rightmost_other = roots
        .roots
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != assigned)
        .map(|(_, r)| r.location.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let margin = s0 - rightmost_other;
    Ok(DominanceReport {
        dominant: rightmost_other <= s0 - 1e-9,
        margin,
    })
}

/// Roots at the perturbed delays `τ + kε`, k = -K…K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivitySweep {
    pub epsilon: f64,
    #[serde(rename = "k")]
    pub k_max: usize,
    /// Nominal delay.
    pub tau: f64,
    /// Keyed by k; JSON object keys are the decimal strings of k.
    pub per_k: BTreeMap<i64, RootSet>,
}

impl SensitivitySweep {
    /// `k,re,im,multiplicity` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,re,im,multiplicity\n");
        for (k, set) in &self.per_k {
            for r in &set.roots {
                out.push_str(&format!(
                    "{k},{:.16e},{:.16e},{}\n",
                    r.location.re, r.location.im, r.multiplicity
                ));
            }
        }
        out
    }
}

pub fn sensitivity_sweep(
    q: &Quasipolynomial,
    epsilon: f64,
    k_max: usize,
    rect: &ComplexRectangle,
) -> Result<SensitivitySweep> {
    sensitivity_sweep_with(q, epsilon, k_max, rect, &Progress::new())
}

pub fn sensitivity_sweep_with(
    q: &Quasipolynomial,
    epsilon: f64,
    k_max: usize,
    rect: &ComplexRectangle,
    progress: &Progress,
) -> Result<SensitivitySweep> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
    }
    if k_max == 0 {
        return Err(Error::InvalidInput("K must be at least 1".into()));
    }
    let tau = q.tau();
    if tau - k_max as f64 * epsilon <= 0.0 {
        return Err(Error::InvalidPerturbation {
            tau,
            epsilon,
            k: k_max,
        });
    }
    let k = k_max as i64;
    let run = |k: i64| -> Result<(i64, RootSet)> {
        let set = if k == 0 {
            find_roots_with(q, rect, progress)?
        } else {
            find_roots_with(&q.with_delay(tau + k as f64 * epsilon)?, rect, progress)?
        };
        Ok((k, set))
    };
    #[cfg(feature = "parallel")]
    let entries: Vec<Result<(i64, RootSet)>> = {
        use rayon::prelude::*;
        (-k..=k).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let entries: Vec<Result<(i64, RootSet)>> = (-k..=k).map(run).collect();

    let per_k = entries.into_iter().collect::<Result<BTreeMap<_, _>>>()?;
    Ok(SensitivitySweep {
        epsilon,
        k_max,
        tau,
        per_k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn unit_square() -> ComplexRectangle {
        ComplexRectangle::new(-1.0, 1.0, -1.0, 1.0).unwrap()
    }

    #[test]
    fn counts_constructed_multiple_roots() {
        let double = Quasipolynomial::new(1, 0, vec![-1.0], vec![1.0], 1.0).unwrap();
        assert_eq!(count_roots(&double, &unit_square()).unwrap(), 2);
        let triple = Quasipolynomial::new(2, 0, vec![2.0, -2.0], vec![-2.0], 1.0).unwrap();
        assert_eq!(count_roots(&triple, &unit_square()).unwrap(), 3);
    }

    #[test]
    fn finds_triple_root() {
        let triple = Quasipolynomial::new(2, 0, vec![2.0, -2.0], vec![-2.0], 1.0).unwrap();
        let rs = find_roots(&triple, &unit_square()).unwrap();
        assert_eq!(rs.roots.len(), 1);
        assert_eq!(rs.roots[0].multiplicity, 3);
        assert!(rs.roots[0].location.norm() < 1e-8);
        assert_eq!(rs.winding_count, 3);
    }

    #[test]
    fn finds_crrid_pair() {
        let e = std::f64::consts::E;
        let b0 = 1.0 / (e * e - e);
        let a0 = 1.0 - e * b0;
        let q = Quasipolynomial::new(1, 0, vec![a0], vec![b0], 1.0).unwrap();
        let rect = ComplexRectangle::new(-2.5, 0.0, -1.0, 1.0).unwrap();
        let rs = find_roots(&q, &rect).unwrap();
        assert_eq!(rs.roots.len(), 2);
        assert!((rs.roots[0].location - c(-2.0, 0.0)).norm() < 1e-8);
        assert!((rs.roots[1].location - c(-1.0, 0.0)).norm() < 1e-8);
        assert!(rs.roots.iter().all(|r| r.multiplicity == 1));
        assert_eq!(rs.window_abscissa, rs.roots[1].location.re);
    }

    #[test]
    fn boundary_root_is_shifted_off() {
        // Double root at 0 lies on the left edge.
        let q = Quasipolynomial::new(1, 0, vec![-1.0], vec![1.0], 1.0).unwrap();
        let rect = ComplexRectangle::new(0.0, 1.0, -0.5, 0.5).unwrap();
        let rs = find_roots(&q, &rect).unwrap();
        assert_ne!(rs.rectangle, rect);
        assert_eq!(rs.total_multiplicity(), rs.winding_count);
    }

    #[test]
    fn empty_window() {
        let q = Quasipolynomial::new(1, 0, vec![1.0], vec![0.0], 1.0).unwrap();
        let rect = ComplexRectangle::new(1.0, 2.0, -1.0, 1.0).unwrap();
        let rs = find_roots(&q, &rect).unwrap();
        assert!(rs.roots.is_empty());
        assert_eq!(rs.window_abscissa, f64::NEG_INFINITY);
        let json = serde_json::to_value(&rs).unwrap();
        assert!(json["window_abscissa"].is_null());
    }

    #[test]
    fn dominance_checks() {
        let rect = unit_square();
        let lone = RootSet {
            rectangle: rect,
            roots: vec![Root {
                location: c(0.0, 0.0),
                multiplicity: 2,
                residual: 0.0,
            }],
            winding_count: 2,
            window_abscissa: 0.0,
        };
        let rep = certify_dominance(&lone, 0.0).unwrap();
        assert!(rep.dominant);
        assert_eq!(rep.margin, f64::INFINITY);
        assert!(matches!(
            certify_dominance(&lone, 0.5),
            Err(Error::AssignedRootMissing { .. })
        ));

        let mut two = lone.clone();
        two.roots = vec![
            Root {
                location: c(-2.0, 0.0),
                multiplicity: 1,
                residual: 0.0,
            },
            Root {
                location: c(-1.0, 0.0),
                multiplicity: 1,
                residual: 0.0,
            },
        ];
        let rep = certify_dominance(&two, -2.0).unwrap();
        assert!(!rep.dominant);
        assert_eq!(rep.margin, -1.0);
    }

    #[test]
    fn sweep_rejects_nonpositive_delay() {
        let q = Quasipolynomial::new(1, 0, vec![-1.0], vec![1.0], 1.0).unwrap();
        assert!(matches!(
            sensitivity_sweep(&q, 1.0, 1, &unit_square()),
            Err(Error::InvalidPerturbation { .. })
        ));
        assert!(sensitivity_sweep(&q, 0.1, 0, &unit_square()).is_err());
    }

    #[test]
    fn sweep_without_delay_term_is_constant() {
        let q = Quasipolynomial::new(2, 0, vec![2.0, 1.0], vec![0.0], 1.0).unwrap();
        let rect = ComplexRectangle::new(-2.0, 2.0, -2.0, 2.0).unwrap();
        let sweep = sensitivity_sweep(&q, 0.1, 2, &rect).unwrap();
        assert_eq!(sweep.per_k.len(), 5);
        let nominal = &sweep.per_k[&0];
        for set in sweep.per_k.values() {
            assert_eq!(set.roots.len(), nominal.roots.len());
            for (a, b) in set.roots.iter().zip(&nominal.roots) {
                assert!((a.location - b.location).norm() < 1e-9);
            }
        }
        let json = serde_json::to_value(&sweep).unwrap();
        assert!(json["per_k"]["-2"].is_object());
        assert!(sweep.to_csv().starts_with("k,re,im,multiplicity\n-2,"));
    }

    #[test]
    fn cancellation_stops_search() {
        let q = Quasipolynomial::new(1, 0, vec![-1.0], vec![1.0], 1.0).unwrap();
        let p = Progress::new();
        p.cancel();
        assert!(matches!(
            find_roots_with(&q, &unit_square(), &p),
            Err(Error::Cancelled { .. })
        ));
    }

    #[test]
    fn root_json_is_a_tuple() {
        let r = Root {
            location: c(-1.0, 2.0),
            multiplicity: 2,
            residual: 0.5,
        };
        assert_eq!(serde_json::to_string(&r).unwrap(), "[-1.0,2.0,2,0.5]");
        let back: Root = serde_json::from_str("[-1.0,2.0,2,0.5]").unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn clustering_links_chains() {
        let pts = [c(0.0, 0.0), c(0.03, 0.0), c(0.06, 0.0), c(0.5, 0.5)];
        let groups = clusters(&pts, 0.05);
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].len(), 3);
    }
}
