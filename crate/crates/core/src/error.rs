use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index out of range: {0}")]
    Index(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    Domain(String),

    #[error("baseline cells are collinear: {0}")]
    CollinearBaseline(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("graph is not connected ({components} components)")]
    DisconnectedGraph { components: usize },

    #[error("model specification: {0}")]
    Model(String),

    #[error("mode finding did not converge after {iterations} iterations (gradient norm {grad_norm:.3e})")]
    NonConvergence { iterations: usize, grad_norm: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("data: {0}")]
    Data(String),
}

impl Error {
    /// True for failures of numerical procedures (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite(_) | Error::NonConvergence { .. } | Error::NonFinite(_)
        )
    }
}
