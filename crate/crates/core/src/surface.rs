//! Read access shared by lattice and grid solutions.

use std::ops::RangeInclusive;

use crate::option::OptionSpec;
use crate::partition::TimePartition;
use crate::scalar::Real;

/// Values `V_j^n` on nodes `(t_n, x_j = ln S0 + j dx)`.
pub trait ValueSurface<T: Real> {
    fn spec(&self) -> &OptionSpec<T>;

    fn partition(&self) -> &TimePartition<T>;

    /// Stored node indices at level `n`; `None` when only the root was kept.
    fn index_range(&self, n: usize) -> Option<RangeInclusive<i64>>;

    fn value(&self, n: usize, j: i64) -> Option<T>;

    /// Engine label used in reports.
    fn engine(&self) -> &'static str;

    /// Price at `(S0, t_0)`.
    fn root(&self) -> T;

    /// Number of time levels, `N + 1`.
    fn levels(&self) -> usize {
        self.partition().len() + 1
    }

    fn dx(&self) -> T {
        self.partition().dx()
    }

    fn anchor(&self) -> T {
        self.spec().spot.ln()
    }

    fn log_price(&self, j: i64) -> T {
        self.anchor() + T::from_index(j) * self.dx()
    }

    fn node_price(&self, j: i64) -> T {
        self.spec().spot * (T::from_index(j) * self.dx()).exp()
    }

    fn payoff(&self, j: i64) -> T {
        self.spec().payoff(self.node_price(j))
    }

    /// Absolute tolerance for `V == payoff` decisions.
    fn tolerance(&self) -> T {
        T::exercise_tolerance(self.spec().value_scale())
    }

    /// Whether `(n, j)` is an artificial truncation column rather than a computed node.
    fn is_cut(&self, _n: usize, _j: i64) -> bool {
        false
    }

    fn has_surface(&self) -> bool {
        self.index_range(0).is_some()
    }

    /// Whether `(n, j)` lies in the exercise region, `V <= payoff + tol`.
    fn is_exercise(&self, n: usize, j: i64) -> Option<bool> {
        let v = self.value(n, j)?;
        Some(v <= self.payoff(j) + self.tolerance())
    }
}
