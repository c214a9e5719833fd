use thiserror::Error;

/// Failures raised anywhere in the pipeline.
///
/// The variants map one-to-one onto the CLI exit-code classes: domain and
/// consistency problems are caller errors, budget/stiffness/bracket
/// problems are numerical failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("step budget of {0} exhausted")]
    Budget(usize),

    #[error("step size underflow at t = {t:e} (h = {h:e})")]
    Stiffness { t: f64, h: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no sign change on [{a}, {b}]: g(a) = {fa:e}, g(b) = {fb:e}")]
    Bracket { a: f64, b: f64, fa: f64, fb: f64 },

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn consistency(msg: impl Into<String>) -> Self {
        Error::Consistency(msg.into())
    }

    /// True for failures of the numerical kernels themselves, as opposed to
    /// bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Budget(_)
                | Error::Stiffness { .. }
                | Error::Bracket { .. }
                | Error::Consistency(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
