use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("length mismatch: expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("chi basis Gram defect {defect:.3e} exceeds {limit:.1e}: velocity grid does not resolve the Maxwellian")]
    UnresolvedGrid { defect: f64, limit: f64 },

    #[error("no admissible global temperature: max theta {max} > 2 * min theta {min}")]
    TemperatureBracket { min: f64, max: f64 },

    #[error("non-physical moments: mass {mass}, temperature {theta}")]
    NonPhysicalMoments { mass: f64, theta: f64 },

    #[error("hydrodynamic component in L^-1 argument: relative projection {relative:.3e}")]
    HydrodynamicComponent { relative: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("Newton iteration diverged; residual history {history:?}")]
    NewtonDivergence { history: Vec<f64> },

    #[error("time step {dt:.4e} violates the CFL bound {limit:.4e}")]
    Cfl { dt: f64, limit: f64 },

    #[error("vacuum state: density {rho:.3e} in cell {cell}")]
    Vacuum { cell: usize, rho: f64 },

    #[error("cascade inconsistency: hydrodynamic leakage {leakage:.3e} above {limit:.1e}")]
    CascadeInconsistency { leakage: f64, limit: f64 },

    #[error("{what} became non-finite at t = {time}")]
    NonFinite { what: String, time: f64 },

    #[error("negative distribution values beyond clipping budget ({clipped} of {total} entries)")]
    Positivity { clipped: usize, total: usize },

    #[error("{key}: {message}")]
    Config { key: String, message: String },

    #[error("malformed file {path}: {message}")]
    Format { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::LengthMismatch { expected, got });
    }
    Ok(())
}
