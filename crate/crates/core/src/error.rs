use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("energy is not differentiable at a constant loop (L = {0:e})")]
    ConstantLoop(f64),

    #[error("point ({x}, {y}) lies within {threshold:e} of the curve; winding number indeterminate")]
    Indeterminate { x: f64, y: f64, threshold: f64 },

    #[error("winding angle sum {0} is not close to an integer")]
    WindingRounding(f64),

    #[error("grid support touches the boundary ring")]
    DomainTooSmall,

    #[error("mollifier radius {eps} is below 4h = {min}")]
    Resolution { eps: f64, min: f64 },

    #[error("quadrature did not converge at sample {index}")]
    Quadrature { index: usize },

    #[error("operation requires a radial field")]
    NotRadial,

    #[error("ODE integration failed: {0}")]
    Integration(String),

    #[error("path relaxation aborted: {0}")]
    Relaxation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
