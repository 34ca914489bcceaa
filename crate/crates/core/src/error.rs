use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("total pump power is zero; the intracavity power ratio is undefined")]
    ZeroPumpPower,

    #[error("self-consistent frequency did not converge after {iterations} iterations (last step {last_step:e} rad/s)")]
    NoConvergence { iterations: usize, last_step: f64 },

    #[error("parametric instability: |s| = {s} >= 1")]
    ParametricInstability { s: f64 },

    #[error("anti-damping: effective damping {gamma_eff:e} rad/s is not positive")]
    AntiDamping { gamma_eff: f64 },

    #[error("internal consistency check failed for {what}: relative error {rel_err:e}")]
    Consistency { what: &'static str, rel_err: f64 },

    #[error("model spectrum is negative ({value:e}) at bin {index}")]
    NegativeSpectrum { index: usize, value: f64 },

    #[error("frequency grid does not contain both sidebands: {0}")]
    GridTooNarrow(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("sample rate {fs} Hz must exceed 4 x LO offset ({delta_lo} Hz)")]
    Aliasing { fs: f64, delta_lo: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("config error in [{section}] at line {line}: {message}")]
    Config {
        section: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for the stability failures (parametric instability or anti-damping).
    pub fn is_instability(&self) -> bool {
        matches!(
            self,
            Error::ParametricInstability { .. } | Error::AntiDamping { .. }
        )
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
