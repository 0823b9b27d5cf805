use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("near resonance at series index {index}: |2s - alpha + i| = {distance:.3e} (alpha = {alpha}{})", .atom.map(|a| format!(", atom {a}")).unwrap_or_default())]
    NearResonance {
        alpha: f64,
        index: usize,
        distance: f64,
        atom: Option<usize>,
    },

    #[error("quadrature did not converge after {panels} panels (partial value {partial}, error estimate {error_estimate:.3e})")]
    QuadratureNonConvergence {
        partial: f64,
        error_estimate: f64,
        panels: usize,
    },

    #[error("model error: {0}")]
    Model(String),

    #[error("numeric error: {message} (condition estimate {condition_estimate:.3e})")]
    Numeric {
        message: String,
        condition_estimate: f64,
    },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("fixed-point iteration did not converge within {} iterations (last update {:.3e})", .history.len(), .history.last().copied().unwrap_or(f64::NAN))]
    FixedPointDiverged { history: Vec<f64> },

    #[error("contract error: {0}")]
    Contract(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
