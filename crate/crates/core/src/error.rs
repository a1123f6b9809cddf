use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("mode index {mode} is not resolvable on a {points}-point grid (need |m| <= {max})")]
    UnresolvableMode { mode: i64, points: usize, max: i64 },

    #[error("{0} is undefined for a zero-volume (straight) filament")]
    ZeroVolume(&'static str),

    #[error("segment {index} of the curve has zero length")]
    DegenerateSegment { index: usize },

    #[error("induction kernel has a pole at z = 0")]
    KernelPole,

    #[error("nonlinear step {step} produced non-finite values")]
    BlowUp { step: usize },

    #[error("momentum integral has relative imaginary residual {residual:e}; state is corrupted or not periodic")]
    ImaginaryResidual { residual: f64 },

    #[error("state is not single-mode: dominant mode carries {fraction:.6} of the spectral power")]
    NotSingleMode { fraction: f64 },

    #[error("amplitude bound undefined: k^2 T0 Gamma ln(eps) = {value} must exceed 2 pi^2 = {threshold}")]
    BoundPrecondition { value: f64, threshold: f64 },

    #[error("time step {dt} not resolvable on the grid: {reason}")]
    UnresolvedTimeStep { dt: f64, reason: String },

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("config field `{field}`: {constraint}")]
    Validation { field: String, constraint: String },

    #[error("{context}: {source}")]
    Scenario {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad user input rather than a failed run.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::ConfigParse(_) | Error::Validation { .. } => true,
            Error::Scenario { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}
