//! Explicit Euler method of steps for
//! `y⁽ⁿ⁾(t) + Σ aₖ y⁽ᵏ⁾(t) + Σ bₖ y⁽ᵏ⁾(t - τ) = 0` on `[-τ, T]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::progress::Progress;
use crate::quasipoly::{falling_factorial, Quasipolynomial};

pub const MIN_STEPS_PER_DELAY: usize = 10;
pub const DEFAULT_STEPS_PER_DELAY: usize = 1000;
pub const BLOW_UP_THRESHOLD: f64 = 1e300;

/// Initial function on `[-τ, 0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", try_from = "RawInitialCondition")]
pub enum InitialCondition {
    /// `c`
    Constant { c: f64 },
    /// `Σ cₖ tᵏ`, lowest degree first.
    Polynomial { coeffs: Vec<f64> },
    /// `A e^{γt}`
    Exponential {
        #[serde(rename = "A")]
        a: f64,
        gamma: f64,
    },
    /// `A sin(ωt + φ)`
    Trigonometric {
        #[serde(rename = "A")]
        a: f64,
        omega: f64,
        phi: f64,
    },
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawInitialCondition {
    Constant(ConstantForm),
    Polynomial {
        coeffs: Vec<f64>,
    },
    Exponential {
        #[serde(alias = "a", rename = "A")]
        a: f64,
        gamma: f64,
    },
    Trigonometric {
        #[serde(alias = "a", rename = "A")]
        a: f64,
        omega: f64,
        phi: f64,
    },
}

/// `{"constant": 1}` and `{"constant": {"c": 1}}` are both accepted.
#[derive(Deserialize)]
#[serde(untagged)]
enum ConstantForm {
    Bare(f64),
    Named { c: f64 },
}

impl TryFrom<RawInitialCondition> for InitialCondition {
    type Error = Error;

    fn try_from(raw: RawInitialCondition) -> Result<Self> {
        let ic = match raw {
            RawInitialCondition::Constant(ConstantForm::Bare(c) | ConstantForm::Named { c }) => {
                InitialCondition::Constant { c }
            }
            RawInitialCondition::Polynomial { coeffs } => InitialCondition::Polynomial { coeffs },
            RawInitialCondition::Exponential { a, gamma } => InitialCondition::Exponential { a, gamma },
            RawInitialCondition::Trigonometric { a, omega, phi } => {
                InitialCondition::Trigonometric { a, omega, phi }
            }
        };
        ic.validate()?;
        Ok(ic)
    }
}

impl InitialCondition {
    pub fn validate(&self) -> Result<()> {
        let finite = match self {
            InitialCondition::Constant { c } => c.is_finite(),
            InitialCondition::Polynomial { coeffs } => {
                if coeffs.is_empty() {
                    return Err(Error::invalid("polynomial initial condition needs coefficients"));
                }
                coeffs.iter().all(|c| c.is_finite())
            }
            InitialCondition::Exponential { a, gamma } => a.is_finite() && gamma.is_finite(),
            InitialCondition::Trigonometric { a, omega, phi } => {
                a.is_finite() && omega.is_finite() && phi.is_finite()
            }
        };
        if finite {
            Ok(())
        } else {
            Err(Error::invalid("initial condition parameters must be finite"))
        }
    }
}

/// k-th derivative of the initial function at t.
pub fn eval_initial(ic: &InitialCondition, t: f64, k: usize) -> f64 {
    match ic {
        InitialCondition::Constant { c } => {
            if k == 0 {
                *c
            } else {
                0.0
            }
        }
        InitialCondition::Polynomial { coeffs } => {
            if k >= coeffs.len() {
                return 0.0;
            }
            coeffs[k..]
                .iter()
                .enumerate()
                .rev()
                .fold(0.0, |acc, (offset, &c)| acc * t + c * falling_factorial(offset + k, k))
        }
        InitialCondition::Exponential { a, gamma } => a * gamma.powi(k as i32) * (gamma * t).exp(),
        InitialCondition::Trigonometric { a, omega, phi } => {
            let shift = k as f64 * std::f64::consts::FRAC_PI_2;
            a * omega.powi(k as i32) * (omega * t + phi + shift).sin()
        }
    }
}

/// Sampled solution on the uniform grid `t = -τ + i h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub h: f64,
}

impl Trajectory {
    /// Every j-th sample (plus the last one) so at most `max_points` remain.
    pub fn decimated(&self, max_points: usize) -> Trajectory {
        let len = self.t.len();
        if len <= max_points || max_points < 2 {
            return self.clone();
        }
        let stride = (len - 1).div_ceil(max_points - 1);
        let mut idx: Vec<usize> = (0..len).step_by(stride).collect();
        if *idx.last().unwrap() != len - 1 {
            idx.push(len - 1);
        }
        Trajectory {
            t: idx.iter().map(|&i| self.t[i]).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            h: self.h,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.t.len() * 48 + 4);
        out.push_str("t,y\n");
        for (t, y) in self.t.iter().zip(&self.y) {
            out.push_str(&format!("{t:.16e},{y:.16e}\n"));
        }
        out
    }
}

pub fn simulate(
    q: &Quasipolynomial,
    ic: &InitialCondition,
    t_end: f64,
    steps_per_delay: usize,
) -> Result<Trajectory> {
    simulate_with(q, ic, t_end, steps_per_delay, &Progress::new())
}

pub fn simulate_with(
    q: &Quasipolynomial,
    ic: &InitialCondition,
    t_end: f64,
    steps_per_delay: usize,
    progress: &Progress,
) -> Result<Trajectory> {
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::invalid(format!("final time must be positive, got {t_end}")));
    }
    if steps_per_delay < MIN_STEPS_PER_DELAY {
        return Err(Error::invalid(format!(
            "steps_per_delay must be at least {MIN_STEPS_PER_DELAY}, got {steps_per_delay}"
        )));
    }
    ic.validate()?;

    let n = q.n();
    let tau = q.tau();
    let a = q.a();
    let b = q.b();
    let neutral = q.m() == n;
    let lag = steps_per_delay;
    let h = tau / lag as f64;
    let forward = (t_end / h).ceil() as usize;
    let total = lag + forward + 1;
    progress.add_total(forward);

    // states[i*n + k] = y⁽ᵏ⁾(tᵢ); top[i] = y⁽ⁿ⁾(tᵢ).
    let mut states = vec![0.0; total * n];
    let mut top = vec![0.0; total];
    let mut t = Vec::with_capacity(total);
    let mut y = Vec::with_capacity(total);

    for i in 0..=lag {
        let ti = if i == 0 { -tau } else { -tau + i as f64 * h };
        for k in 0..n {
            states[i * n + k] = eval_initial(ic, ti, k);
        }
        top[i] = eval_initial(ic, ti, n);
        t.push(ti);
        y.push(states[i * n]);
    }

    for i in lag..lag + forward {
        if (i - lag).is_multiple_of(1024) {
            progress.check()?;
        }
        let now = &states[i * n..(i + 1) * n];
        let past = &states[(i - lag) * n..(i - lag + 1) * n];
        let mut highest = 0.0;
        for k in 0..n {
            highest -= a[k] * now[k];
        }
        for (k, bk) in b.iter().enumerate().take(n) {
            highest -= bk * past[k];
        }
        if neutral {
            highest -= b[n] * top[i - lag];
        }
        // Only the stored y⁽ⁿ⁾ history past t = 0 comes from the scheme.
        if i > lag {
            top[i] = highest;
        }
        let (done, rest) = states.split_at_mut((i + 1) * n);
        let now = &done[i * n..];
        let next = &mut rest[..n];
        for k in 0..n {
            let slope = if k + 1 < n { now[k + 1] } else { highest };
            next[k] = now[k] + h * slope;
        }
        let ti = -tau + (i + 1) as f64 * h;
        if !(next[0].abs() <= BLOW_UP_THRESHOLD) {
            return Err(Error::BlowUp { time: ti });
        }
        t.push(ti);
        y.push(next[0]);
        progress.tick();
    }

    Ok(Trajectory { t, y, h })
}
