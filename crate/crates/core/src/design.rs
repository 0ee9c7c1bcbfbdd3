//! Coefficient assignment for delayed feedback.
//!
//! Three problems are solved, all as small real linear systems in the
//! unknown coefficients:
//!
//! * generic MID: every coefficient is free and a real root `s₀` of maximal
//!   multiplicity `n + m + 1` is imposed;
//! * generic CRRID: every coefficient is free and `n + m + 1` real roots
//!   are imposed (repeated values become derivative conditions);
//! * control-oriented MID: the plant coefficients `a` are fixed, only `b`
//!   is free, and a root of multiplicity `m + 2` is imposed. One of `τ`,
//!   `s₀` is then an extra unknown found by a scalar search.
//!
//! The set of `(s₀, τ)` for which the control-oriented problem is solvable
//! is the zero set of [`admissibility_residual`], traced by
//! [`admissibility_contour`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize, Serializer};

use crate::contour::{self, Crossing, GridEdge};
use crate::error::{Error, Result};
use crate::linalg::{self, SquareMatrix};
use crate::progress::Progress;
use crate::quasipoly::{binomial, falling_factorial, Quasipolynomial, MAX_DERIVATIVE_ORDER};

/// Residuals must stay below this multiple of the quasipolynomial's
/// residual scale at the assigned root.
pub const DESIGN_TOLERANCE: f64 = 1e-8;

/// Number of samples used to bracket zeros of the admissibility residual.
pub const SEARCH_SAMPLES: usize = 2048;

/// Absolute width at which bracket bisection stops.
pub const BISECTION_TOLERANCE: f64 = 1e-12;

/// Delay used in place of τ = 0 on the bottom row of admissibility grids.
pub const TAU_FLOOR: f64 = 1e-9;

/// A fully determined system and how well it meets the imposed conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub quasipolynomial: Quasipolynomial,
    /// The assigned root that is meant to be dominant (s₀, or s₁ for CRRID).
    pub assigned_root: f64,
    /// `|Δ⁽ᵏ⁾(sᵢ)|` for every imposed condition, in the order imposed.
    pub residuals: Vec<f64>,
    pub condition_estimate: f64,
    /// τ or s₀ when the control-oriented solver determined it.
    pub solved_parameter: Option<f64>,
}

impl DesignResult {
    /// Largest residual divided by the residual scale at the assigned root.
    pub fn relative_residual(&self) -> f64 {
        let scale = self
            .quasipolynomial
            .residual_scale(Complex64::new(self.assigned_root, 0.0));
        self.residuals.iter().fold(0.0_f64, |acc, r| acc.max(*r)) / scale
    }
}

/// Row of the condition `Δ⁽ᵏ⁾(s) = 0`, linear in `[a₀…a_{n-1}, b₀…b_m]`.
///
/// Returns the coefficient row and the right-hand side contributed by the
/// monic `sⁿ` term.
fn condition_row(n: usize, m: usize, tau: f64, s: f64, k: usize) -> (Vec<f64>, f64) {
    let mut row = Vec::with_capacity(n + m + 1);
    for i in 0..n {
        row.push(monomial_derivative(i, k, s));
    }
    let decay = (-s * tau).exp();
    row.extend(delayed_row(m, tau, s, k).into_iter().map(|c| c * decay));
    (row, -monomial_derivative(n, k, s))
}

/// Coefficients of `e^{sτ} dᵏ/dsᵏ [e^{-sτ} sⁱ]` for i = 0…m.
fn delayed_row(m: usize, tau: f64, s: f64, k: usize) -> Vec<f64> {
    (0..=m)
        .map(|i| {
            (0..=k.min(i))
                .map(|j| {
                    binomial(k, j) * (-tau).powi((k - j) as i32) * monomial_derivative(i, j, s)
                })
                .sum()
        })
        .collect()
}

/// dᵏ/dsᵏ sⁱ
fn monomial_derivative(i: usize, k: usize, s: f64) -> f64 {
    if k > i {
        0.0
    } else {
        falling_factorial(i, k) * s.powi((i - k) as i32)
    }
}

fn check_orders(n: usize, m: usize) -> Result<()> {
    if m > n {
        return Err(Error::invalid(format!("need n >= m, got n = {n}, m = {m}")));
    }
    if n + m + 1 > MAX_DERIVATIVE_ORDER {
        return Err(Error::invalid(format!("n + m = {} is too large", n + m)));
    }
    Ok(())
}

fn check_delay(tau: f64) -> Result<()> {
    if tau.is_finite() && tau > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("delay must be positive and finite, got {tau}")))
    }
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite, got {v}")))
    }
}

/// Imposes conditions `(s, order)` on every coefficient and solves.
fn solve_full(
    n: usize,
    m: usize,
    tau: f64,
    conditions: &[(f64, usize)],
    assigned_root: f64,
) -> Result<DesignResult> {
    let dim = n + m + 1;
    debug_assert_eq!(conditions.len(), dim);
    let mut matrix = SquareMatrix::zeros(dim);
    let mut rhs = vec![0.0; dim];
    for (r, &(s, k)) in conditions.iter().enumerate() {
        let (row, b) = condition_row(n, m, tau, s, k);
        for (c, v) in row.into_iter().enumerate() {
            matrix.set(r, c, v);
        }
        rhs[r] = b;
    }
    let sol = linalg::solve(&matrix, &rhs)?;
    let a = sol.x[..n].to_vec();
    let b = sol.x[n..].to_vec();
    let quasipolynomial = Quasipolynomial::new(n, m, a, b, tau)?;
    let residuals = conditions
        .iter()
        .map(|&(s, k)| Ok(quasipolynomial.derivative(Complex64::new(s, 0.0), k)?.norm()))
        .collect::<Result<Vec<_>>>()?;
    Ok(DesignResult {
        quasipolynomial,
        assigned_root,
        residuals,
        condition_estimate: sol.condition,
        solved_parameter: None,
    })
}

/// All coefficients making `s0` a root of multiplicity `n + m + 1`.
pub fn solve_generic_mid(n: usize, m: usize, tau: f64, s0: f64) -> Result<DesignResult> {
    check_orders(n, m)?;
    if n == 0 {
        return Err(Error::invalid("generic MID needs n >= 1"));
    }
    check_delay(tau)?;
    check_finite("s0", s0)?;
    let conditions: Vec<_> = (0..=n + m).map(|k| (s0, k)).collect();
    solve_full(n, m, tau, &conditions, s0)
}

/// All coefficients making each of `roots` (sorted non-increasing, length
/// `n + m + 1`) a root of Δ. A value repeated r times is imposed with
/// multiplicity r.
pub fn solve_generic_crrid(n: usize, m: usize, tau: f64, roots: &[f64]) -> Result<DesignResult> {
    check_orders(n, m)?;
    if n == 0 {
        return Err(Error::invalid("generic CRRID needs n >= 1"));
    }
    check_delay(tau)?;
    if roots.len() != n + m + 1 {
        return Err(Error::invalid(format!(
            "expected {} roots, got {}",
            n + m + 1,
            roots.len()
        )));
    }
    for &r in roots {
        check_finite("root", r)?;
    }
    if roots.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::invalid("roots must be sorted in non-increasing order"));
    }
    let mut conditions = Vec::with_capacity(roots.len());
    let mut order = 0;
    for (i, &r) in roots.iter().enumerate() {
        if i > 0 && roots[i - 1] == r {
            order += 1;
        } else {
            order = 0;
        }
        conditions.push((r, order));
    }
    solve_full(n, m, tau, &conditions, roots[0])
}

/// Fixed plant coefficients for the control-oriented problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPlant {
    pub n: usize,
    pub m: usize,
    /// a₀…a_{n-1}
    pub a: Vec<f64>,
}

impl ControlPlant {
    pub fn new(n: usize, m: usize, a: Vec<f64>) -> Result<Self> {
        check_orders(n, m)?;
        if n == 0 {
            return Err(Error::invalid("control-oriented design needs n >= 1"));
        }
        if a.len() != n {
            return Err(Error::invalid(format!(
                "expected {n} plant coefficients, got {}",
                a.len()
            )));
        }
        if a.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("plant coefficients must be finite"));
        }
        Ok(Self { n, m, a })
    }

    fn monic(&self) -> Vec<f64> {
        let mut p = self.a.clone();
        p.push(1.0);
        p
    }

    /// k-th derivative of the monic plant polynomial at real s.
    fn plant_derivative(&self, s: f64, k: usize) -> f64 {
        self.monic()
            .iter()
            .enumerate()
            .map(|(i, &c)| c * monomial_derivative(i, k, s))
            .sum()
    }

    /// `b̃ = e^{-s₀τ} b` from the conditions Δ⁽ᵏ⁾(s₀) = 0, k = 0…m.
    fn scaled_feedback(&self, s0: f64, tau: f64) -> Result<(Vec<f64>, f64)> {
        let m = self.m;
        let rows: Vec<Vec<f64>> = (0..=m).map(|k| delayed_row(m, tau, s0, k)).collect();
        let rhs: Vec<f64> = (0..=m).map(|k| -self.plant_derivative(s0, k)).collect();
        let sol = linalg::solve(&SquareMatrix::from_rows(&rows), &rhs)?;
        Ok((sol.x, sol.condition))
    }
}

/// The unique b₀…b_m with Δ⁽ᵏ⁾(s₀) = 0 for k = 0…m.
pub fn solve_b_given(plant: &ControlPlant, s0: f64, tau: f64) -> Result<Vec<f64>> {
    check_delay(tau)?;
    check_finite("s0", s0)?;
    let (scaled, _) = plant.scaled_feedback(s0, tau)?;
    let growth = (s0 * tau).exp();
    Ok(scaled.into_iter().map(|c| c * growth).collect())
}

/// `Δ⁽ᵐ⁺¹⁾(s₀)` once `b` is chosen by [`solve_b_given`].
///
/// Zero exactly when `(s₀, τ)` is admissible.
pub fn admissibility_residual(plant: &ControlPlant, s0: f64, tau: f64) -> Result<f64> {
    check_delay(tau)?;
    check_finite("s0", s0)?;
    let (scaled, _) = plant.scaled_feedback(s0, tau)?;
    Ok(residual_from_scaled(plant, s0, tau, &scaled))
}

fn residual_from_scaled(plant: &ControlPlant, s0: f64, tau: f64, scaled: &[f64]) -> f64 {
    let k = plant.m + 1;
    let row = delayed_row(plant.m, tau, s0, k);
    plant.plant_derivative(s0, k) + row.iter().zip(scaled).map(|(r, b)| r * b).sum::<f64>()
}

/// Which of τ and s₀ the user supplies in control-oriented mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ControlGiven {
    #[serde(rename = "tau")]
    Delay(f64),
    #[serde(rename = "s0")]
    Root(f64),
}

/// Optional overrides of the default scalar search windows.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchWindow {
    pub s0_min: Option<f64>,
    pub tau_max: Option<f64>,
}

/// Every real solution of the control-oriented MID problem in the search
/// window. The first entry is the default selection: rightmost s₀ when τ is
/// given, smallest τ when s₀ is given.
pub fn solve_control_mid(
    plant: &ControlPlant,
    given: ControlGiven,
    window: SearchWindow,
) -> Result<Vec<DesignResult>> {
    match given {
        ControlGiven::Delay(tau) => {
            check_delay(tau)?;
            let lower = window.s0_min.unwrap_or(-50.0 / tau);
            if !(lower.is_finite() && lower < 0.0) {
                return Err(Error::invalid(format!("s0 search bound must be negative, got {lower}")));
            }
            let f = |s0: f64| admissibility_residual(plant, s0, tau).unwrap_or(f64::NAN);
            let mut roots = scalar_zeros(f, lower, 0.0, SEARCH_SAMPLES);
            if roots.is_empty() {
                return Err(Error::NoAdmissiblePoint { lower, upper: 0.0 });
            }
            roots.sort_by(|x, y| y.total_cmp(x));
            roots
                .into_iter()
                .map(|s0| control_result(plant, s0, tau, s0))
                .collect()
        }
        ControlGiven::Root(s0) => {
            check_finite("s0", s0)?;
            let upper = window.tau_max.unwrap_or(100.0 / s0.abs().max(1.0));
            if !(upper.is_finite() && upper > 0.0) {
                return Err(Error::invalid(format!("tau search bound must be positive, got {upper}")));
            }
            let lower = upper * TAU_FLOOR;
            let f = |tau: f64| admissibility_residual(plant, s0, tau).unwrap_or(f64::NAN);
            let mut roots = scalar_zeros(f, lower, upper, SEARCH_SAMPLES);
            if roots.is_empty() {
                return Err(Error::NoAdmissiblePoint { lower, upper });
            }
            roots.sort_by(f64::total_cmp);
            roots
                .into_iter()
                .map(|tau| control_result(plant, s0, tau, tau))
                .collect()
        }
    }
}

fn control_result(plant: &ControlPlant, s0: f64, tau: f64, solved: f64) -> Result<DesignResult> {
    let (scaled, condition) = plant.scaled_feedback(s0, tau)?;
    let growth = (s0 * tau).exp();
    let b = scaled.iter().map(|c| c * growth).collect();
    let quasipolynomial = Quasipolynomial::new(plant.n, plant.m, plant.a.clone(), b, tau)?;
    let s = Complex64::new(s0, 0.0);
    let residuals = (0..=plant.m + 1)
        .map(|k| Ok(quasipolynomial.derivative(s, k)?.norm()))
        .collect::<Result<Vec<_>>>()?;
    Ok(DesignResult {
        quasipolynomial,
        assigned_root: s0,
        residuals,
        condition_estimate: condition,
        solved_parameter: Some(solved),
    })
}

/// Zeros of `f` on `[lo, hi]`: sign changes between `samples` equispaced
/// points, each refined by bisection. NaN samples break brackets.
pub(crate) fn scalar_zeros(f: impl Fn(f64) -> f64, lo: f64, hi: f64, samples: usize) -> Vec<f64> {
    let xs: Vec<f64> = (0..samples)
        .map(|i| {
            if i + 1 == samples {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (samples - 1) as f64
            }
        })
        .collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut zeros = Vec::new();
    for i in 0..samples {
        if fs[i] == 0.0 {
            zeros.push(xs[i]);
            continue;
        }
        if i + 1 < samples
            && fs[i + 1] != 0.0
            && fs[i].is_finite()
            && fs[i + 1].is_finite()
            && (fs[i] > 0.0) != (fs[i + 1] > 0.0)
        {
            zeros.push(bisect(&f, xs[i], xs[i + 1], fs[i]));
        }
    }
    zeros
}

fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut f_lo: f64) -> f64 {
    for _ in 0..200 {
        if hi - lo <= BISECTION_TOLERANCE {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if !f_mid.is_finite() {
            break;
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The plotted window `[s0_min, 0] × [0, tau_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityWindow {
    pub s0_min: f64,
    pub s0_max: f64,
    pub tau_min: f64,
    pub tau_max: f64,
}

/// Sampled admissibility residual and its zero-level curves.
#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityContour {
    pub rectangle: AdmissibilityWindow,
    /// Nodes along s₀ and along τ.
    pub resolution: [usize; 2],
    /// Row-major with s₀ varying fastest; invalid nodes are `null`.
    #[serde(serialize_with = "serialize_grid")]
    pub grid: Vec<f64>,
    /// Each polyline is a list of `[s0, tau]` points.
    pub polylines: Vec<Vec<[f64; 2]>>,
    #[serde(skip)]
    edges: Vec<Vec<GridEdge>>,
    #[serde(skip)]
    s0_nodes: Vec<f64>,
    #[serde(skip)]
    tau_nodes: Vec<f64>,
}

fn serialize_grid<S: Serializer>(grid: &[f64], ser: S) -> std::result::Result<S::Ok, S::Error> {
    ser.collect_seq(grid.iter().map(|v| v.is_finite().then_some(*v)))
}

impl AdmissibilityContour {
    pub fn s0_nodes(&self) -> &[f64] {
        &self.s0_nodes
    }

    pub fn tau_nodes(&self) -> &[f64] {
        &self.tau_nodes
    }

    /// Largest τ over all polyline vertices, if any.
    pub fn max_tau(&self) -> Option<f64> {
        self.vertices().map(|p| p[1]).reduce(f64::max)
    }

    /// Largest s₀ over all polyline vertices, if any.
    pub fn max_s0(&self) -> Option<f64> {
        self.vertices().map(|p| p[0]).reduce(f64::max)
    }

    pub fn vertices(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        self.polylines.iter().flatten().copied()
    }

    /// Moves vertex `index` of polyline `line` onto the exact zero set by
    /// bisecting the residual along the grid edge it was interpolated on.
    pub fn refine_vertex(&self, plant: &ControlPlant, line: usize, index: usize) -> Result<[f64; 2]> {
        let edge = self
            .edges
            .get(line)
            .and_then(|l| l.get(index))
            .ok_or_else(|| Error::invalid(format!("no vertex {index} on polyline {line}")))?;
        let [(i0, j0), (i1, j1)] = edge.nodes();
        let p0 = [self.s0_nodes[i0], self.tau_nodes[j0]];
        let p1 = [self.s0_nodes[i1], self.tau_nodes[j1]];
        let along = |t: f64| [p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1])];
        let f = |t: f64| {
            let [s0, tau] = along(t);
            admissibility_residual(plant, s0, tau).unwrap_or(f64::NAN)
        };
        let f0 = f(0.0);
        let f1 = f(1.0);
        if f0 == 0.0 {
            return Ok(p0);
        }
        if f1 == 0.0 {
            return Ok(p1);
        }
        if !(f0.is_finite() && f1.is_finite()) || (f0 > 0.0) == (f1 > 0.0) {
            return Err(Error::invalid("grid edge does not bracket a zero"));
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut f_lo = f0;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let f_mid = f(mid);
            if f_mid == 0.0 {
                return Ok(along(mid));
            }
            if (f_mid > 0.0) == (f_lo > 0.0) {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
            }
        }
        Ok(along(0.5 * (lo + hi)))
    }
}

/// Samples the admissibility residual on `[s0_min, 0] × [0, tau_max]` and
/// extracts its zero level.
pub fn admissibility_contour(
    plant: &ControlPlant,
    s0_min: f64,
    tau_max: f64,
    resolution: [usize; 2],
) -> Result<AdmissibilityContour> {
    admissibility_contour_with(plant, s0_min, tau_max, resolution, &Progress::new())
}

pub fn admissibility_contour_with(
    plant: &ControlPlant,
    s0_min: f64,
    tau_max: f64,
    resolution: [usize; 2],
    progress: &Progress,
) -> Result<AdmissibilityContour> {
    if !(s0_min.is_finite() && s0_min < 0.0) {
        return Err(Error::invalid(format!("s0_min must be negative, got {s0_min}")));
    }
    if !(tau_max.is_finite() && tau_max > 0.0) {
        return Err(Error::invalid(format!("tau_max must be positive, got {tau_max}")));
    }
    let [nx, ny] = resolution;
    if nx < 8 || ny < 8 {
        return Err(Error::invalid(format!("grid resolution must be at least 8, got {nx}x{ny}")));
    }
    progress.add_total(ny);

    let s0_nodes: Vec<f64> = (0..nx)
        .map(|i| {
            if i + 1 == nx {
                0.0
            } else {
                s0_min - s0_min * i as f64 / (nx - 1) as f64
            }
        })
        .collect();
    let tau_nodes: Vec<f64> = (0..ny)
        .map(|j| match j {
            0 => TAU_FLOOR,
            _ if j + 1 == ny => tau_max,
            _ => tau_max * j as f64 / (ny - 1) as f64,
        })
        .collect();

    let mut grid = vec![f64::NAN; nx * ny];
    let fill_row = |(j, row): (usize, &mut [f64])| -> Result<()> {
        progress.check()?;
        let tau = tau_nodes[j];
        for (i, v) in row.iter_mut().enumerate() {
            *v = admissibility_residual(plant, s0_nodes[i], tau).unwrap_or(f64::NAN);
        }
        progress.tick();
        Ok(())
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        grid.par_chunks_mut(nx).enumerate().try_for_each(fill_row)?;
    }
    #[cfg(not(feature = "parallel"))]
    grid.chunks_mut(nx).enumerate().try_for_each(fill_row)?;

    let field = contour::Field {
        nx,
        ny,
        values: &grid,
        xs: &s0_nodes,
        ys: &tau_nodes,
    };
    let lines = contour::zero_level_polylines(&field);
    let polylines = lines
        .iter()
        .map(|l| l.iter().map(|c: &Crossing| c.point).collect())
        .collect();
    let edges = lines
        .iter()
        .map(|l| l.iter().map(|c| c.edge).collect())
        .collect();

    Ok(AdmissibilityContour {
        rectangle: AdmissibilityWindow {
            s0_min,
            s0_max: 0.0,
            tau_min: 0.0,
            tau_max,
        },
        resolution,
        grid,
        polylines,
        edges,
        s0_nodes,
        tau_nodes,
    })
}
