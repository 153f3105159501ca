use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("cannot classify macro quad {quad}: {reason}")]
    Classification { quad: usize, reason: String },

    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("non-positive Jacobian in element {element} (det = {det:e})")]
    Geometry { element: usize, det: f64 },

    #[error("point ({x}, {y}) is outside the mesh")]
    Location { x: f64, y: f64 },

    #[error("function is singular at the origin")]
    Singularity,

    #[error("CG did not converge after {iterations} iterations (relative residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("solver failed for p = {p}, eps = {eps:e}: {source}")]
    Experiment {
        p: usize,
        eps: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
