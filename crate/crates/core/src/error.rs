use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Schema violation while reading an input file. `field` is the JSON
    /// path of the offending value.
    #[error("{file}: parse error at `{field}`: {message}")]
    Parse {
        file: String,
        field: String,
        message: String,
    },

    /// Input parsed but violates a model invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// Argument outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("mean stress {mean} is at or beyond the yield strength {yield_strength}")]
    YieldExceeded { mean: f64, yield_strength: f64 },

    #[error(
        "simulation unstable at t = {time:.4} s: speed deviation of mass `{mass}` reached {speed:.4} p.u."
    )]
    Unstable { time: f64, mass: String, speed: f64 },

    #[error("power flow diverged after {iterations} iterations (worst mismatch {mismatch:.3e} p.u. at bus {bus})")]
    Diverged {
        iterations: usize,
        bus: String,
        mismatch: f64,
    },

    /// Failure while evaluating a named scenario.
    #[error("scenario `{label}`: {source}")]
    Scenario {
        label: String,
        #[source]
        source: Box<Error>,
    },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("linear program is unbounded")]
    Unbounded,

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad or missing input rather than by the
    /// numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. } | Error::Parse { .. } | Error::Validation(_) | Error::Json(_)
        )
    }
}
