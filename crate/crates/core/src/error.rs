use thiserror::Error;

/// Errors shared across the model, simulation, and analysis layers.
#[derive(Debug, Clone, Error)]
pub enum CoreError {
    /// A parameter violates its construction range.
    #[error("invalid parameter {name}: {value} ({constraint})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    /// Graph construction failed (zero-degree node or index out of range).
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    /// A state value is outside its admissible domain.
    #[error("state out of domain: {0}")]
    OutOfDomain(String),

    /// The impact variable exceeded the overflow guard during simulation.
    #[error("impact overflow at t = {t}: eps = {eps} exceeds guard {guard}")]
    ImpactOverflow { t: f64, eps: f64, guard: f64 },

    /// Configuration space too large for the dense generator matrix.
    #[error("population too large for generator matrix: n = {n} (max {max})")]
    PopulationTooLarge { n: usize, max: usize },

    /// Adaptive integration failed (step underflow or invariant breach).
    #[error("integration failure at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    /// An analysis routine requires the stability assumptions to hold.
    #[error("parameter assumptions violated: {0}")]
    AssumptionsViolated(String),

    /// The requested computation needs a precondition the input lacks.
    #[error("{0}")]
    Precondition(String),
}

impl CoreError {
    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        CoreError::Precondition(msg.into())
    }
}
