//! Characteristic quasipolynomials of single-delay linear equations
//!
//! ```text
//! Δ(s) = sⁿ + a_{n-1} s^{n-1} + … + a₀ + e^{-sτ} (b_m s^m + … + b₀)
//! ```
//!
//! together with exact evaluation of Δ and its derivatives of any order up
//! to [`MAX_DERIVATIVE_ORDER`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest derivative order for which binomial coefficients stay exact in
/// 64-bit integers.
pub const MAX_DERIVATIVE_ORDER: usize = 64;

/// Whether the highest derivative also appears with the delay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquationKind {
    Retarded,
    Neutral,
}

/// `sⁿ + Σ aₖ sᵏ + e^{-sτ} Σ bₖ sᵏ` with a monic non-delayed part.
///
/// Coefficients are stored lowest degree first. Values are immutable once
/// built; [`Quasipolynomial::new`] enforces `n ≥ m`, `τ > 0`, matching
/// vector lengths and finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawQuasipolynomial")]
pub struct Quasipolynomial {
    n: usize,
    m: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    tau: f64,
}

#[derive(Deserialize)]
struct RawQuasipolynomial {
    n: usize,
    m: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    tau: f64,
}

impl TryFrom<RawQuasipolynomial> for Quasipolynomial {
    type Error = Error;

    fn try_from(raw: RawQuasipolynomial) -> Result<Self> {
        Quasipolynomial::new(raw.n, raw.m, raw.a, raw.b, raw.tau)
    }
}

impl Quasipolynomial {
    pub fn new(n: usize, m: usize, a: Vec<f64>, b: Vec<f64>, tau: f64) -> Result<Self> {
        if m > n {
            return Err(Error::invalid(format!("delayed order m = {m} exceeds n = {n}")));
        }
        if a.len() != n {
            return Err(Error::invalid(format!(
                "expected {n} non-delayed coefficients, got {}",
                a.len()
            )));
        }
        if b.len() != m + 1 {
            return Err(Error::invalid(format!(
                "expected {} delayed coefficients, got {}",
                m + 1,
                b.len()
            )));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::invalid(format!("delay must be positive and finite, got {tau}")));
        }
        if a.iter().chain(&b).any(|c| !c.is_finite()) {
            return Err(Error::invalid("coefficients must be finite"));
        }
        Ok(Self { n, m, a, b, tau })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Non-delayed coefficients a₀…a_{n-1}.
    pub fn a(&self) -> &[f64] {
        &self.a
    }

    /// Delayed coefficients b₀…b_m.
    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Same coefficients, different delay.
    pub fn with_delay(&self, tau: f64) -> Result<Self> {
        Self::new(self.n, self.m, self.a.clone(), self.b.clone(), tau)
    }

    pub fn kind(&self) -> EquationKind {
        if self.n == self.m && self.b[self.m] != 0.0 {
            EquationKind::Neutral
        } else {
            EquationKind::Retarded
        }
    }

    /// True when every delayed coefficient vanishes, so Δ is a polynomial.
    pub fn is_delay_free(&self) -> bool {
        self.b.iter().all(|&c| c == 0.0)
    }

    /// Coefficients of the monic non-delayed polynomial, lowest degree first.
    pub fn monic_part(&self) -> Vec<f64> {
        let mut p = self.a.clone();
        p.push(1.0);
        p
    }

    pub fn evaluate(&self, s: Complex64) -> Complex64 {
        let p = horner_monic(&self.a, s);
        let q = horner(&self.b, s);
        p + (-s * self.tau).exp() * q
    }

    /// Exact k-th derivative by the Leibniz rule on `e^{-sτ} Q(s)`.
    pub fn derivative(&self, s: Complex64, k: usize) -> Result<Complex64> {
        if k > MAX_DERIVATIVE_ORDER {
            return Err(Error::invalid(format!(
                "derivative order {k} exceeds {MAX_DERIVATIVE_ORDER}"
            )));
        }
        if k == 0 {
            return Ok(self.evaluate(s));
        }
        let p = self.monic_part();
        let non_delayed = poly_derivative(&p, s, k);
        let mut delayed = Complex64::new(0.0, 0.0);
        let mut tau_pow = 1.0;
        // j runs downwards so (-τ)^(k-j) is built incrementally.
        for j in (0..=k).rev() {
            if j <= self.m {
                delayed += binomial(k, j) * tau_pow * poly_derivative(&self.b, s, j);
            }
            tau_pow *= -self.tau;
        }
        Ok(non_delayed + (-s * self.tau).exp() * delayed)
    }

    /// Δ(s) and Δ'(s) in one pass.
    pub fn value_and_slope(&self, s: Complex64) -> (Complex64, Complex64) {
        let (p, dp) = horner_with_slope_monic(&self.a, s);
        let (q, dq) = horner_with_slope(&self.b, s);
        let e = (-s * self.tau).exp();
        (p + e * q, dp + e * (dq - self.tau * q))
    }

    /// Δ'(s)/Δ(s) and |Δ(s)| relative to the magnitude of its terms.
    ///
    /// Both are computed with the exponential factored out whenever
    /// `|e^{-sτ}| > 1`, so they stay finite far into the left half plane.
    pub fn log_derivative(&self, s: Complex64) -> (Complex64, f64) {
        let (p, dp) = horner_with_slope_monic(&self.a, s);
        let (q, dq) = horner_with_slope(&self.b, s);
        let growth = -s.re * self.tau;
        let (poly_weight, phase) = if growth > 0.0 {
            ((-growth).exp(), Complex64::from_polar(1.0, -s.im * self.tau))
        } else {
            (1.0, (-s * self.tau).exp())
        };
        let num = dp * poly_weight + phase * (dq - self.tau * q);
        let den = p * poly_weight + phase * q;

        let r = s.norm();
        let p_mag = abs_horner_monic(&self.a, r);
        let q_mag = abs_horner(&self.b, r);
        let terms = p_mag * poly_weight + phase.norm() * q_mag;
        let rel = if terms > 0.0 { den.norm() / terms } else { 0.0 };
        (num / den, rel)
    }

    /// Residual scale `max(1,|s|)ⁿ (1 + max|aₖ| + max|bₖ| e^{-Re(s) τ})`.
    pub fn residual_scale(&self, s: Complex64) -> f64 {
        let max_a = self.a.iter().fold(0.0_f64, |acc, c| acc.max(c.abs()));
        let max_b = self.b.iter().fold(0.0_f64, |acc, c| acc.max(c.abs()));
        s.norm().max(1.0).powi(self.n as i32) * (1.0 + max_a + max_b * (-s.re * self.tau).exp())
    }
}

/// Exact binomial coefficient C(k, j) for k ≤ 64, as f64.
pub(crate) fn binomial(k: usize, j: usize) -> f64 {
    if j > k {
        return 0.0;
    }
    let j = j.min(k - j);
    let mut c: u128 = 1;
    for i in 0..j {
        c = c * (k - i) as u128 / (i + 1) as u128;
    }
    c as f64
}

/// i·(i-1)·…·(i-k+1)
pub(crate) fn falling_factorial(i: usize, k: usize) -> f64 {
    if k > i {
        return 0.0;
    }
    ((i - k + 1)..=i).fold(1.0, |acc, x| acc * x as f64)
}

pub(crate) fn horner(coeffs: &[f64], s: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

fn horner_monic(coeffs: &[f64], s: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(1.0, 0.0), |acc, &c| acc * s + c)
}

fn horner_with_slope(coeffs: &[f64], s: Complex64) -> (Complex64, Complex64) {
    let zero = Complex64::new(0.0, 0.0);
    coeffs.iter().rev().fold((zero, zero), |(v, d), &c| (v * s + c, d * s + v))
}

fn horner_with_slope_monic(coeffs: &[f64], s: Complex64) -> (Complex64, Complex64) {
    let init = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    coeffs.iter().rev().fold(init, |(v, d), &c| (v * s + c, d * s + v))
}

fn abs_horner(coeffs: &[f64], r: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * r + c.abs())
}

fn abs_horner_monic(coeffs: &[f64], r: f64) -> f64 {
    coeffs.iter().rev().fold(1.0, |acc, &c| acc * r + c.abs())
}

/// k-th derivative of `Σ cᵢ sⁱ` at s.
pub(crate) fn poly_derivative(coeffs: &[f64], s: Complex64, k: usize) -> Complex64 {
    if k >= coeffs.len() {
        return Complex64::new(0.0, 0.0);
    }
    coeffs[k..]
        .iter()
        .enumerate()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, (offset, &c)| {
            acc * s + c * falling_factorial(offset + k, k)
        })
}

/// Axis-aligned rectangle `[x_min, x_max] × [y_min, y_max]` in ℂ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRectangle")]
pub struct ComplexRectangle {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

#[derive(Deserialize)]
struct RawRectangle {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl TryFrom<RawRectangle> for ComplexRectangle {
    type Error = Error;

    fn try_from(r: RawRectangle) -> Result<Self> {
        ComplexRectangle::new(r.x_min, r.x_max, r.y_min, r.y_max)
    }
}

impl ComplexRectangle {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let finite = [x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite());
        if !finite || x_min >= x_max || y_min >= y_max {
            return Err(Error::invalid(format!(
                "degenerate rectangle [{x_min}, {x_max}] x [{y_min}, {y_max}]"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            y_min,
            y_max,
        })
    }

    /// Square of half-width `radius` centred at `c`.
    pub fn around(c: Complex64, radius: f64) -> Result<Self> {
        Self::new(c.re - radius, c.re + radius, c.im - radius, c.im + radius)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn contains_strictly(&self, z: Complex64) -> bool {
        z.re > self.x_min && z.re < self.x_max && z.im > self.y_min && z.im < self.y_max
    }

    pub fn is_symmetric_about_real_axis(&self) -> bool {
        self.y_min == -self.y_max
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            x_min: self.x_min + dx,
            x_max: self.x_max + dx,
            y_min: self.y_min + dy,
            y_max: self.y_max + dy,
        }
    }

    /// Counter-clockwise corners starting at the lower left.
    pub fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.x_min, self.y_min),
            Complex64::new(self.x_max, self.y_min),
            Complex64::new(self.x_max, self.y_max),
            Complex64::new(self.x_min, self.y_max),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn double_root() -> Quasipolynomial {
        Quasipolynomial::new(1, 0, vec![-1.0], vec![1.0], 1.0).unwrap()
    }

    fn triple_root() -> Quasipolynomial {
        Quasipolynomial::new(2, 0, vec![2.0, -2.0], vec![-2.0], 1.0).unwrap()
    }

    fn oscillator() -> Quasipolynomial {
        Quasipolynomial::new(2, 0, vec![(2.0 * PI).powi(2), 0.0], vec![-33.81], 0.12).unwrap()
    }

    #[test]
    fn rejects_invalid_shapes() {
        assert!(Quasipolynomial::new(1, 2, vec![0.0], vec![0.0; 3], 1.0).is_err());
        assert!(Quasipolynomial::new(2, 0, vec![0.0], vec![0.0], 1.0).is_err());
        assert!(Quasipolynomial::new(2, 0, vec![0.0, 0.0], vec![], 1.0).is_err());
        assert!(Quasipolynomial::new(1, 0, vec![0.0], vec![0.0], 0.0).is_err());
        assert!(Quasipolynomial::new(1, 0, vec![f64::NAN], vec![0.0], 1.0).is_err());
    }

    #[test]
    fn classification() {
        assert_eq!(oscillator().kind(), EquationKind::Retarded);
        let neutral = Quasipolynomial::new(1, 1, vec![1.0], vec![0.5, 0.2], 1.0).unwrap();
        assert_eq!(neutral.kind(), EquationKind::Neutral);
        let degenerate = Quasipolynomial::new(1, 1, vec![1.0], vec![0.5, 0.0], 1.0).unwrap();
        assert_eq!(degenerate.kind(), EquationKind::Retarded);
    }

    #[test]
    fn oscillator_design_point_is_near_root() {
        let q = oscillator();
        assert!(q.evaluate(c(-2.859, 0.0)).norm() < 1e-2);
        assert!(q.derivative(c(-2.859, 0.0), 1).unwrap().norm() < 1e-1);
    }

    #[test]
    fn constructed_roots_vanish() {
        let q = double_root();
        assert_eq!(q.evaluate(c(0.0, 0.0)), c(0.0, 0.0));
        assert_eq!(q.derivative(c(0.0, 0.0), 1).unwrap(), c(0.0, 0.0));
        assert_eq!(q.derivative(c(0.0, 0.0), 2).unwrap(), c(1.0, 0.0));

        let q = triple_root();
        for k in 0..3 {
            assert_eq!(q.derivative(c(0.0, 0.0), k).unwrap(), c(0.0, 0.0), "order {k}");
        }
        assert!(q.derivative(c(0.0, 0.0), 3).unwrap().norm() > 1.0);
    }

    #[test]
    fn derivative_order_limit() {
        let q = double_root();
        assert!(q.derivative(c(0.0, 0.0), MAX_DERIVATIVE_ORDER).is_ok());
        assert!(q.derivative(c(0.0, 0.0), MAX_DERIVATIVE_ORDER + 1).is_err());
    }

    #[test]
    fn binomials_are_exact() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(64, 32), 1_832_624_140_942_590_534_u64 as f64);
        assert_eq!(binomial(3, 4), 0.0);
    }

    #[test]
    fn value_and_slope_agree_with_derivative() {
        let q = oscillator();
        let s = c(-1.3, 4.2);
        let (v, d) = q.value_and_slope(s);
        assert!((v - q.evaluate(s)).norm() < 1e-12 * v.norm().max(1.0));
        assert!((d - q.derivative(s, 1).unwrap()).norm() < 1e-12 * d.norm().max(1.0));
    }

    #[test]
    fn log_derivative_far_left() {
        let q = oscillator();
        // e^{600} overflows, the scaled form must not.
        let s = c(-5000.0, 30.0);
        let (ld, rel) = q.log_derivative(s);
        assert!(ld.re.is_finite() && ld.im.is_finite());
        assert!((ld - c(-q.tau(), 0.0)).norm() < 1e-2);
        assert!(rel > 0.5);
    }

    #[test]
    fn serializes_flat_in_field_order() {
        let q = double_root();
        let json = serde_json::to_string(&q).unwrap();
        assert_eq!(json, r#"{"n":1,"m":0,"a":[-1.0],"b":[1.0],"tau":1.0}"#);
        let back: Quasipolynomial = serde_json::from_str(&json).unwrap();
        assert_eq!(back, q);
        assert!(serde_json::from_str::<Quasipolynomial>(
            r#"{"n":1,"m":0,"a":[-1.0],"b":[1.0],"tau":-1.0}"#
        )
        .is_err());
    }

    #[test]
    fn rectangle_validation() {
        assert!(ComplexRectangle::new(0.0, 0.0, -1.0, 1.0).is_err());
        assert!(ComplexRectangle::new(0.0, 1.0, 1.0, -1.0).is_err());
        let r = ComplexRectangle::new(-1.0, 1.0, -2.0, 2.0).unwrap();
        assert!(r.is_symmetric_about_real_axis());
        assert!(r.contains_strictly(c(0.0, 0.0)));
        assert!(!r.contains_strictly(c(1.0, 0.0)));
    }
}
