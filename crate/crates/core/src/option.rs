use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Put,
    Call,
}

impl OptionKind {
    pub fn flipped(self) -> Self {
        match self {
            OptionKind::Put => OptionKind::Call,
            OptionKind::Call => OptionKind::Put,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExerciseStyle {
    American,
    European,
}

/// A vanilla option contract.
///
/// A zero strike is accepted and gives the degenerate payoffs `0` (put) and `S` (call).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionSpec<T> {
    pub kind: OptionKind,
    pub style: ExerciseStyle,
    pub strike: T,
    pub spot: T,
    pub maturity: T,
}

impl<T: Real> OptionSpec<T> {
    pub fn new(
        kind: OptionKind,
        style: ExerciseStyle,
        strike: T,
        spot: T,
        maturity: T,
    ) -> Result<Self> {
        let spec = Self {
            kind,
            style,
            strike,
            spot,
            maturity,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn american_put(strike: T, spot: T, maturity: T) -> Result<Self> {
        Self::new(
            OptionKind::Put,
            ExerciseStyle::American,
            strike,
            spot,
            maturity,
        )
    }

    pub fn american_call(strike: T, spot: T, maturity: T) -> Result<Self> {
        Self::new(
            OptionKind::Call,
            ExerciseStyle::American,
            strike,
            spot,
            maturity,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strike >= T::zero()) || !self.strike.is_finite() {
            return Err(Error::invalid(
                "strike",
                format!("must be finite and non-negative, got {}", self.strike),
            ));
        }
        if !(self.spot > T::zero()) || !self.spot.is_finite() {
            return Err(Error::invalid(
                "spot",
                format!("must be positive and finite, got {}", self.spot),
            ));
        }
        if !(self.maturity > T::zero()) || !self.maturity.is_finite() {
            return Err(Error::invalid(
                "maturity",
                format!("must be positive and finite, got {}", self.maturity),
            ));
        }
        Ok(())
    }

    pub fn is_american(&self) -> bool {
        self.style == ExerciseStyle::American
    }

    /// Intrinsic value at underlying price `s`.
    #[inline]
    pub fn payoff(&self, s: T) -> T {
        match self.kind {
            OptionKind::Put => (self.strike - s).max(T::zero()),
            OptionKind::Call => (s - self.strike).max(T::zero()),
        }
    }

    /// Same contract with spot and strike scaled by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        Self {
            strike: self.strike * factor,
            spot: self.spot * factor,
            ..*self
        }
    }

    /// Scale for value tolerances: the strike for puts, the larger of spot and strike for calls.
    pub fn value_scale(&self) -> T {
        match self.kind {
            OptionKind::Put => self.strike,
            OptionKind::Call => self.spot.max(self.strike),
        }
    }
}
