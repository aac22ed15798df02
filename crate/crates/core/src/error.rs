use thiserror::Error;

/// Errors raised while building or solving a problem.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid weight field: {0}")]
    InvalidWeight(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    LinearSolver { iterations: usize, residual: f64 },

    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error(
        "eigen iteration did not converge after {iterations} iterations (last change {change:e})"
    )]
    EigenIteration { iterations: usize, change: f64 },

    #[error("degenerate component: {part} vanished (A-norm {norm:e})")]
    DegenerateComponent { part: &'static str, norm: f64 },

    #[error("no root of the fiber equation along {part} (last bracket [{lo:e}, {hi:e}])")]
    NoFiberRoot {
        part: &'static str,
        lo: f64,
        hi: f64,
    },

    #[error("seed construction failed: {0}")]
    Seed(String),

    #[error("descent stagnated at iteration {iteration} with gradient norm {grad_norm:e}")]
    Stagnation {
        iteration: usize,
        grad_norm: f64,
        energy_trace: Vec<f64>,
    },

    #[error("descent failed at iteration {iteration}: {source}")]
    Descent {
        iteration: usize,
        energy_trace: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error("mu sweep failed at index {index} (mu = {mu}): {source}")]
    Sweep {
        index: usize,
        mu: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// The innermost error, through sweep and descent wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Descent { source, .. } | Error::Sweep { source, .. } => source.root(),
            e => e,
        }
    }

    /// Energy trace of the failed descent, when one was recorded.
    pub fn energy_trace(&self) -> Option<&[f64]> {
        match self {
            Error::Descent { energy_trace, .. } | Error::Stagnation { energy_trace, .. } => {
                Some(energy_trace)
            }
            Error::Sweep { source, .. } => source.energy_trace(),
            _ => None,
        }
    }

    /// The chart broke down: a signed part vanished or lost its fiber root.
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self.root(),
            Error::DegenerateComponent { .. } | Error::NoFiberRoot { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
