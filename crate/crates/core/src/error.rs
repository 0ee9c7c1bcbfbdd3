use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the design, root-finding and simulation routines can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("linear system is numerically singular (condition estimate {condition:.3e})")]
    SingularSystem { condition: f64 },

    #[error("no admissible point in the search window [{lower}, {upper}]")]
    NoAdmissiblePoint { lower: f64, upper: f64 },

    #[error("contour passes too close to a zero near {re} + {im}i")]
    ContourTooClose { re: f64, im: f64 },

    #[error("a zero lies on the rectangle boundary (gave up after {retries} shifted retries)")]
    RootOnBoundary { retries: usize },

    #[error("root refinement did not converge: {0}")]
    ConvergenceFailure(String),

    #[error("no root within 1e-6 of the assigned root {s0}")]
    AssignedRootMissing { s0: f64 },

    #[error("perturbed delay {tau} - {k} * {epsilon} is not positive")]
    InvalidPerturbation { tau: f64, epsilon: f64, k: usize },

    #[error("solution exceeded 1e300 in magnitude at t = {time}")]
    BlowUp { time: f64 },

    #[error("computation cancelled after {completed} of {total} work units")]
    Cancelled { completed: usize, total: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
