use thiserror::Error;

/// Errors raised by the pricing engines and their inputs.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A curve or option contract failed validation.
    #[error("invalid input `{field}`: {reason}")]
    InvalidInput { field: &'static str, reason: String },

    /// The time partition would need more steps than allowed.
    #[error(
        "partition would exceed {cap} steps (dx = {dx}, sigma_lo = {sigma_lo}, T = {horizon}); \
         increase dx or raise the step cap"
    )]
    StepCapExceeded {
        cap: usize,
        dx: f64,
        sigma_lo: f64,
        horizon: f64,
    },

    /// Branch condition `d*eta_n < rho_n < u*eta_n` fails, so `theta_n` leaves (0, 1).
    #[error(
        "branch condition violated at step {step} (t = {time}): theta = {theta} not in (0, 1)"
    )]
    Branch { step: usize, time: f64, theta: f64 },

    /// The explicit scheme weight `a_n` leaves (0, 1).
    #[error(
        "stability condition violated at step {step} (t = {time}): a = {a} not in (0, 1); \
         use a smaller dx"
    )]
    Stability { step: usize, time: f64, a: f64 },

    /// Truncated grid too narrow to price reliably.
    #[error("truncation too narrow: {0}")]
    Truncation(String),

    /// Internal consistency failure (mismatched row lengths and similar).
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            field,
            reason: reason.into(),
        }
    }

    /// Attaches the step index and node time to branch / stability failures.
    pub fn at_step(self, step: usize, time: impl num_traits::ToPrimitive) -> Self {
        let time = time.to_f64().unwrap_or(f64::NAN);
        match self {
            Error::Branch { theta, .. } => Error::Branch { step, time, theta },
            Error::Stability { a, .. } => Error::Stability { step, time, a },
            other => other,
        }
    }

    /// True for failures of the numerical preconditions (branch / stability / step cap).
    pub fn is_numeric_precondition(&self) -> bool {
        matches!(
            self,
            Error::Branch { .. }
                | Error::Stability { .. }
                | Error::StepCapExceeded { .. }
                | Error::Truncation(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
