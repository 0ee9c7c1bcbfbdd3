//! Adaptive Gauss–Legendre integration of `Δ'/Δ · wᵖ` along rectangle
//! boundaries, where `w = (z - c) / r` is the position normalised to the
//! rectangle's centre and half-diagonal.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quasipoly::{ComplexRectangle, Quasipolynomial};

/// Highest moment order carried alongside the winding integral.
pub(crate) const MAX_MOMENT: usize = 4;

const NODES: usize = 16;
const MAX_DEPTH: usize = 40;

type Vector = [Complex64; MAX_MOMENT + 1];

struct GaussLegendre {
    nodes: [f64; NODES],
    weights: [f64; NODES],
}

/// 16-point rule on [-1, 1], from Newton iteration on the Legendre
/// polynomial starting at the Chebyshev-like guesses.
fn rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| {
        let mut nodes = [0.0; NODES];
        let mut weights = [0.0; NODES];
        let n = NODES as f64;
        for i in 0..NODES {
            let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=NODES {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        GaussLegendre { nodes, weights }
    })
}

/// Normalised contour moments `(1/2πi) ∮ wᵖ Δ'/Δ dz`, p = 0…MAX_MOMENT.
///
/// For zeros `zₖ` enclosed (with multiplicity) the p-th entry equals
/// `Σ ((zₖ - centre)/radius)ᵖ`; entry 0 is the winding count.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Moments {
    pub values: Vector,
    pub center: Complex64,
    pub radius: f64,
}

impl Moments {
    /// Rounded winding count; fails unless the raw integral sits within
    /// `1e-2` of a non-negative integer.
    pub fn count(&self) -> Option<usize> {
        let raw = self.values[0];
        let rounded = raw.re.round();
        if (raw.re - rounded).abs() < 1e-2 && raw.im.abs() < 1e-2 && rounded >= 0.0 {
            Some(rounded as usize)
        } else {
            None
        }
    }
}

/// Integration settings.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Integrator {
    /// `|Δ| / (sum of term magnitudes)` below which a node counts as
    /// touching a zero.
    pub guard: f64,
    /// Absolute error target for each moment over the whole contour.
    pub tolerance: f64,
    /// Multiplier on the initial number of panels per edge.
    pub refinement: usize,
}

impl Integrator {
    pub const STANDARD: Integrator = Integrator {
        guard: 1e-9,
        tolerance: 1e-10,
        refinement: 1,
    };

    pub const MICRO: Integrator = Integrator {
        guard: 1e-14,
        tolerance: 1e-6,
        refinement: 1,
    };

    pub fn moments(&self, q: &Quasipolynomial, rect: &ComplexRectangle) -> Result<Moments> {
        let center = rect.center();
        let radius = 0.5 * rect.diagonal();
        let corners = rect.corners();
        let perimeter = 2.0 * (rect.width() + rect.height());
        let mut total = zero();
        for e in 0..4 {
            let z0 = corners[e];
            let z1 = corners[(e + 1) % 4];
            let len = (z1 - z0).norm();
            let panels = initial_panels(q, len) * self.refinement.max(1);
            let edge_tol = self.tolerance * len / perimeter;
            let panel_tol = edge_tol / panels as f64;
            for p in 0..panels {
                let a = z0 + (z1 - z0) * (p as f64 / panels as f64);
                let b = if p + 1 == panels {
                    z1
                } else {
                    z0 + (z1 - z0) * ((p + 1) as f64 / panels as f64)
                };
                let ctx = Ctx {
                    q,
                    center,
                    radius,
                    guard: self.guard,
                };
                let whole = ctx.panel(a, b)?;
                let v = ctx.adapt(a, b, whole.0, panel_tol, 0)?;
                add_assign(&mut total, &v);
            }
        }
        let scale = Complex64::new(0.0, 2.0 * PI);
        Ok(Moments {
            values: total.map(|v| v / scale),
            center,
            radius,
        })
    }
}

/// Panels needed to resolve the delay factor's oscillation along an edge.
fn initial_panels(q: &Quasipolynomial, len: f64) -> usize {
    let waves = len * q.tau() / PI;
    (waves.ceil() as usize).clamp(1, 4096) + 1
}

struct Ctx<'a> {
    q: &'a Quasipolynomial,
    center: Complex64,
    radius: f64,
    guard: f64,
}

impl Ctx<'_> {
    /// Rule applied to one panel, with an estimate of the rounding noise
    /// in the result: Δ carries an absolute error near `ε·Σ|terms|`, so
    /// Δ'/Δ has relative error about `ε / rel`.
    fn panel(&self, a: Complex64, b: Complex64) -> Result<(Vector, f64)> {
        let rule = rule();
        let half = (b - a) * 0.5;
        let mid = (a + b) * 0.5;
        let mut acc = zero();
        let mut noise = 0.0;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let z = mid + half * *x;
            let (ld, rel) = self.q.log_derivative(z);
            if !(rel >= self.guard) || !ld.re.is_finite() || !ld.im.is_finite() {
                return Err(Error::ContourTooClose { re: z.re, im: z.im });
            }
            let pos = (z - self.center) / self.radius;
            let mut term = ld * half * *w;
            noise += term.norm() * 4.0 * f64::EPSILON / rel;
            for slot in acc.iter_mut() {
                *slot += term;
                term *= pos;
            }
        }
        Ok((acc, noise))
    }

    fn adapt(&self, a: Complex64, b: Complex64, whole: Vector, tol: f64, depth: usize) -> Result<Vector> {
        let mid = (a + b) * 0.5;
        let (left, noise_l) = self.panel(a, mid)?;
        let (right, noise_r) = self.panel(mid, b)?;
        let mut sum = left;
        add_assign(&mut sum, &right);
        let noise = 8.0 * (noise_l + noise_r);
        let err = sum
            .iter()
            .zip(&whole)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        let size = sum.iter().map(|x| x.norm()).fold(0.0, f64::max);
        if err <= tol.max(1e-13 * size).max(noise).max(1e-15) {
            return Ok(sum);
        }
        if depth >= MAX_DEPTH {
            return Err(Error::ContourTooClose { re: mid.re, im: mid.im });
        }
        let mut l = self.adapt(a, mid, left, 0.5 * tol, depth + 1)?;
        let r = self.adapt(mid, b, right, 0.5 * tol, depth + 1)?;
        add_assign(&mut l, &r);
        Ok(l)
    }
}

fn zero() -> Vector {
    [Complex64::new(0.0, 0.0); MAX_MOMENT + 1]
}

fn add_assign(acc: &mut Vector, v: &Vector) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}
