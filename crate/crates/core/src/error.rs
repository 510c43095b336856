use thiserror::Error;

/// Errors produced by the estimation and meta-analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A distribution or transform parameter is outside its domain.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// An argument is outside the domain of the function (e.g. a probability not in (0, 1)).
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed or insufficient input data.
    #[error("invalid input: {0}")]
    Input(String),

    /// An estimator could not produce a fit.
    #[error("estimation failed: {0}")]
    Estimation(String),

    /// Too many bootstrap replicates failed.
    #[error("bootstrap unstable: {successes} of {requested} replicates succeeded")]
    BootstrapUnstable {
        successes: usize,
        requested: usize,
        /// Estimates from the replicates that did succeed.
        partial: Vec<f64>,
    },

    /// An iterative solver did not converge.
    #[error("no convergence after {iterations} iterations: {context}")]
    NoConvergence {
        iterations: usize,
        context: String,
        trace: Vec<f64>,
    },

    /// A Monte Carlo oracle saw too many estimator failures to be trusted.
    #[error("oracle unreliable: {failures} of {reps} estimator runs failed")]
    OracleUnreliable { failures: usize, reps: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
