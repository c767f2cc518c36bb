use thiserror::Error;

/// Errors raised by the barrier, filter, plant and simulation layers.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum CbfError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("stale barrier buffer: t = {t} is outside epoch {epoch} ([{start}, {end}])")]
    StaleBuffer {
        t: f64,
        epoch: u64,
        start: f64,
        end: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("safety filter infeasible: |a| = {a_norm:e}, a.u_d + b = {slack:e}")]
    Infeasible { a_norm: f64, slack: f64 },

    #[error("singular attitude command: u_z + g = {0}")]
    SingularCommand(f64),

    #[error("integration failure at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("scenario error: {0}")]
    Scenario(String),
}

pub type Result<T> = std::result::Result<T, CbfError>;

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(CbfError::InvalidArgument(format!("{what} must be finite")))
    }
}
