use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative inner solver hit its iteration cap. The last iterate is
    /// kept so callers can inspect how far it got.
    #[error("no convergence after {iterations} iterations (marginal error {marginal_error:.3e}){}", context_suffix(.context))]
    Convergence {
        iterations: usize,
        marginal_error: f64,
        last_potentials: Vec<f64>,
        context: Option<String>,
    },

    #[error("non-finite value encountered: {0}")]
    Numeric(String),

    #[error("graph is not connected: {0}")]
    Connectivity(String),

    #[error("batch size {requested} at iteration {iteration} exceeds cap {cap}")]
    Resource {
        iteration: usize,
        requested: u64,
        cap: u64,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn context_suffix(context: &Option<String>) -> String {
    match context {
        Some(c) => format!(" [{c}]"),
        None => String::new(),
    }
}

impl Error {
    /// Attach a location label (node, iteration, ...) to a convergence failure.
    /// Other variants are returned unchanged.
    pub fn with_context(self, label: impl Into<String>) -> Self {
        match self {
            Error::Convergence {
                iterations,
                marginal_error,
                last_potentials,
                context,
            } => {
                let label = label.into();
                let context = Some(match context {
                    Some(inner) => format!("{label}; {inner}"),
                    None => label,
                });
                Error::Convergence {
                    iterations,
                    marginal_error,
                    last_potentials,
                    context,
                }
            }
            other => other,
        }
    }

    pub fn is_convergence_failure(&self) -> bool {
        matches!(self, Error::Convergence { .. } | Error::Resource { .. } | Error::Numeric(_))
    }
}
