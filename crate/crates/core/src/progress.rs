//! Cooperative cancellation and progress reporting for long computations.
//!
//! Root finding over large rectangles, sensitivity sweeps and admissibility
//! grids check a shared [`Progress`] between work units. Another thread may
//! call [`Progress::cancel`] at any time; the computation then stops at the
//! next check and returns [`Error::Cancelled`] carrying the counters.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use crate::error::{Error, Result};

#[derive(Debug, Default)]
pub struct Progress {
    cancelled: AtomicBool,
    completed: AtomicUsize,
    total: AtomicUsize,
}

impl Progress {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.cancelled.store(true, Ordering::Relaxed);
    }

    pub fn is_cancelled(&self) -> bool {
        self.cancelled.load(Ordering::Relaxed)
    }

    pub fn completed(&self) -> usize {
        self.completed.load(Ordering::Relaxed)
    }

    /// Total work units, or 0 when not known in advance.
    pub fn total(&self) -> usize {
        self.total.load(Ordering::Relaxed)
    }

    pub(crate) fn add_total(&self, units: usize) {
        self.total.fetch_add(units, Ordering::Relaxed);
    }

    pub(crate) fn tick(&self) {
        self.completed.fetch_add(1, Ordering::Relaxed);
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.is_cancelled() {
            Err(Error::Cancelled {
                completed: self.completed(),
                total: self.total(),
            })
        } else {
            Ok(())
        }
    }
}
