use thiserror::Error;

/// Errors raised while building models or running solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("model incomplete: {0}")]
    ModelIncomplete(String),

    #[error("index out of range: {what} = {index}, size {size}")]
    Index {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("row {row} is not a probability distribution (sum = {sum})")]
    Stochasticity { row: String, sum: f64 },

    #[error("chain is not unichain: {classes} recurrent classes {detail}")]
    Ergodicity { classes: usize, detail: String },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error(
        "value iteration oscillates with period 2 after {iterations} sweeps; \
         apply an aperiodicity transform (RviOptions::aperiodicity)"
    )]
    Periodic { iterations: usize },

    #[error("enumeration budget exceeded: {actions}^{observations} = {candidates} > {budget}")]
    Budget {
        actions: usize,
        observations: usize,
        candidates: f64,
        budget: usize,
    },

    #[error("observation {0} has zero stationary probability")]
    UnreachableObservation(usize),

    #[error("invalid parameter: {0}")]
    Parameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
