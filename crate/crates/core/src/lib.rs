//! Root assignment for linear equations with one delay.
//!
//! The characteristic function of
//!
//! ```text
//! y⁽ⁿ⁾(t) + Σ aₖ y⁽ᵏ⁾(t) + Σ bₖ y⁽ᵏ⁾(t - τ) = 0
//! ```
//!
//! is the quasipolynomial `Δ(s) = sⁿ + Σ aₖ sᵏ + e^{-sτ} Σ bₖ sᵏ`. This crate
//! picks coefficients so that Δ has a prescribed real root of high
//! multiplicity (or a prescribed set of real roots), locates every zero of Δ
//! in a rectangle to check that the assigned root dominates, and simulates
//! the equation in time.
//!
//! ```
//! use qpdesign::{design, rootfinder, ComplexRectangle};
//!
//! let plant = design::ControlPlant::new(2, 0, vec![39.478, 0.0]).unwrap();
//! let designs = design::solve_control_mid(
//!     &plant,
//!     design::ControlGiven::Delay(0.12),
//!     design::SearchWindow::default(),
//! )
//! .unwrap();
//! let best = &designs[0];
//! assert!((best.assigned_root + 2.859).abs() < 5e-3);
//!
//! let window = ComplexRectangle::new(-60.0, 10.0, -60.0, 60.0).unwrap();
//! let roots = rootfinder::find_roots(&best.quasipolynomial, &window).unwrap();
//! let report = rootfinder::certify_dominance(&roots, best.assigned_root).unwrap();
//! assert!(report.dominant);
//! ```

pub mod contour;
pub mod design;
pub mod error;
pub mod linalg;
pub mod progress;
pub mod quasipoly;
pub mod rootfinder;
pub mod simulate;

pub use error::{Error, Result};
pub use progress::Progress;
pub use quasipoly::{ComplexRectangle, EquationKind, Quasipolynomial};
