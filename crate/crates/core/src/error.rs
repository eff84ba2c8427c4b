use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("scenario definition error at t={t}, x={x:?}: {message}")]
    ScenarioDefinition {
        t: f64,
        x: Vec<f64>,
        message: String,
    },

    #[error("unknown scenario `{name}`; valid names: {}", valid.join(", "))]
    Catalog { name: String, valid: Vec<String> },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("blow-up in scenario `{scenario}`: particle {particle} is non-finite after step {step}")]
    BlowUp {
        scenario: String,
        particle: usize,
        step: u64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("cost error: {0}")]
    Cost(String),

    #[error("estimator error: {0}")]
    Estimator(String),

    #[error("eigenproblem error: {0}")]
    Eigen(String),

    #[error("quadrature error: {0}")]
    Quadrature(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("fixed point not reached after {periods} periods (last distances: {trace:?})")]
    NonConvergence { periods: usize, trace: Vec<f64> },

    #[error("schema violations: {}", .0.join("; "))]
    Schema(Vec<String>),

    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
