//! Approximate optimal exercise boundary extracted from a solved surface.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::option::{OptionKind, OptionSpec};
use crate::partition::TimePartition;
use crate::scalar::Real;
use crate::surface::ValueSurface;

/// Boundary index at one time level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryNode<T> {
    pub level: usize,
    pub time: T,
    pub index: i64,
    /// `x = index * dx + c`
    pub log_price: T,
    pub price: T,
}

/// Piecewise-linear boundary through the per-level boundary nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExerciseBoundary<T> {
    pub kind: OptionKind,
    pub nodes: Vec<BoundaryNode<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum BoundaryOutcome<T> {
    /// Early exercise is never optimal (call with `q = 0`).
    NoBoundary,
    Boundary(ExerciseBoundary<T>),
}

impl<T: Real> BoundaryOutcome<T> {
    pub fn boundary(&self) -> Option<&ExerciseBoundary<T>> {
        match self {
            BoundaryOutcome::Boundary(b) => Some(b),
            BoundaryOutcome::NoBoundary => None,
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, BoundaryOutcome::NoBoundary)
    }
}

fn interpolate<T: Real>(
    nodes: &[BoundaryNode<T>],
    t: T,
    pick: impl Fn(&BoundaryNode<T>) -> T,
) -> Option<T> {
    let first = nodes.first()?;
    let last = nodes.last()?;
    if t < first.time || t > last.time {
        return None;
    }
    let k = nodes.partition_point(|b| b.time <= t);
    if k == nodes.len() {
        return Some(pick(last));
    }
    let (a, b) = (&nodes[k - 1], &nodes[k]);
    let w = (t - a.time) / (b.time - a.time);
    Some(w * pick(b) + (T::one() - w) * pick(a))
}

impl<T: Real> ExerciseBoundary<T> {
    pub fn indices(&self) -> impl Iterator<Item = i64> + '_ {
        self.nodes.iter().map(|b| b.index)
    }

    /// Log-price boundary `x = rho(t)`, linear in `x` between levels.
    pub fn log_price_at(&self, t: T) -> Option<T> {
        interpolate(&self.nodes, t, |b| b.log_price)
    }

    /// Price boundary `S(t)`, linear in `S` between levels.
    pub fn price_at(&self, t: T) -> Option<T> {
        interpolate(&self.nodes, t, |b| b.price)
    }

    pub fn time_span(&self) -> Option<(T, T)> {
        Some((self.nodes.first()?.time, self.nodes.last()?.time))
    }

    /// First pair of consecutive levels breaking the expected ordering:
    /// nondecreasing in `t` for puts, nonincreasing for calls.
    pub fn monotonicity_break(&self) -> Option<(BoundaryNode<T>, BoundaryNode<T>)> {
        self.nodes.windows(2).find_map(|w| {
            let ok = match self.kind {
                OptionKind::Put => w[0].index <= w[1].index,
                OptionKind::Call => w[0].index >= w[1].index,
            };
            (!ok).then_some((w[0], w[1]))
        })
    }

    pub fn at_level(&self, level: usize) -> Option<&BoundaryNode<T>> {
        self.nodes.iter().find(|b| b.level == level)
    }
}

/// Exercise-side boundary index at level `n`.
///
/// Puts scan upward from the lowest stored node, calls downward from the
/// highest, stopping at the first node with `V > payoff + tol`. `None` when
/// the first scanned node is already in continuation.
pub fn level_index<T: Real, S: ValueSurface<T> + ?Sized>(sol: &S, n: usize) -> Option<i64> {
    let range = sol.index_range(n)?;
    let mut last = None;
    let exercise = |j: i64| sol.is_exercise(n, j).unwrap_or(false);
    match sol.spec().kind {
        OptionKind::Put => {
            for j in range {
                if !exercise(j) {
                    break;
                }
                last = Some(j);
            }
        }
        OptionKind::Call => {
            for j in range.rev() {
                if !exercise(j) {
                    break;
                }
                last = Some(j);
            }
        }
    }
    last
}

/// Extracts per-level boundary indices for `n = 0..N-1` from an American surface.
///
/// A call whose yield vanishes on every step has no boundary.
pub fn extract_boundary<T: Real, S: ValueSurface<T> + ?Sized>(
    sol: &S,
) -> Result<BoundaryOutcome<T>> {
    if !sol.spec().is_american() {
        return Err(Error::Domain(
            "exercise boundary requires an American option".into(),
        ));
    }
    if !sol.has_surface() {
        return Err(Error::Domain(
            "exercise boundary requires the full value surface; solve with full storage".into(),
        ));
    }
    let q_vanishes = sol.partition().steps().iter().all(|s| s.q == T::zero());
    if sol.spec().kind == OptionKind::Call && q_vanishes {
        return Ok(BoundaryOutcome::NoBoundary);
    }
    let nodes_t = sol.partition().nodes();
    let levels = sol.levels().saturating_sub(1);
    let nodes: Vec<_> = (0..levels)
        .filter_map(|n| {
            level_index(sol, n).map(|j| BoundaryNode {
                level: n,
                time: nodes_t[n],
                index: j,
                log_price: sol.log_price(j),
                price: sol.node_price(j),
            })
        })
        .collect();
    if nodes.is_empty() {
        return Ok(BoundaryOutcome::NoBoundary);
    }
    Ok(BoundaryOutcome::Boundary(ExerciseBoundary {
        kind: sol.spec().kind,
        nodes,
    }))
}

/// Builds the boundary level by level from rows handed over during a sweep,
/// without keeping the surface. Agrees with [`extract_boundary`] node for node.
#[derive(Debug, Clone)]
pub struct BoundaryTracker<T> {
    spec: OptionSpec<T>,
    dx: T,
    times: Vec<T>,
    tol: T,
    no_boundary: bool,
    nodes: Vec<BoundaryNode<T>>,
}

impl<T: Real> BoundaryTracker<T> {
    pub fn new(spec: &OptionSpec<T>, partition: &TimePartition<T>) -> Self {
        let q_vanishes = partition.steps().iter().all(|s| s.q == T::zero());
        Self {
            spec: *spec,
            dx: partition.dx(),
            times: partition.nodes().to_vec(),
            tol: T::exercise_tolerance(spec.value_scale()),
            no_boundary: spec.kind == OptionKind::Call && q_vanishes,
            nodes: Vec::new(),
        }
    }

    /// Row of level `n` covering `j = j_min, j_min + 1, ...`; the terminal level is ignored.
    pub fn observe(&mut self, n: usize, j_min: i64, row: &[T]) {
        if self.no_boundary || n + 1 >= self.times.len() {
            return;
        }
        let spec = self.spec;
        let price = |j: i64| spec.spot * (T::from_index(j) * self.dx).exp();
        let exercise = |i: usize| {
            let j = j_min + i as i64;
            row[i] <= spec.payoff(price(j)) + self.tol
        };
        let found = match spec.kind {
            OptionKind::Put => (0..row.len()).take_while(|&i| exercise(i)).last(),
            OptionKind::Call => (0..row.len()).rev().take_while(|&i| exercise(i)).last(),
        };
        if let Some(i) = found {
            let j = j_min + i as i64;
            self.nodes.push(BoundaryNode {
                level: n,
                time: self.times[n],
                index: j,
                log_price: spec.spot.ln() + T::from_index(j) * self.dx,
                price: price(j),
            });
        }
    }

    pub fn finish(mut self) -> BoundaryOutcome<T> {
        if self.no_boundary || self.nodes.is_empty() {
            return BoundaryOutcome::NoBoundary;
        }
        self.nodes.sort_by_key(|b| b.level);
        BoundaryOutcome::Boundary(ExerciseBoundary {
            kind: self.spec.kind,
            nodes: self.nodes,
        })
    }
}

/// Sup of `|a(t) - b(t)|` in log-price over the node times of both boundaries
/// where both are defined.
pub fn boundary_sup_difference<T: Real>(
    a: &ExerciseBoundary<T>,
    b: &ExerciseBoundary<T>,
) -> Option<T> {
    let (a0, a1) = a.time_span()?;
    let (b0, b1) = b.time_span()?;
    let (lo, hi) = (a0.max(b0), a1.min(b1));
    a.nodes
        .iter()
        .chain(&b.nodes)
        .map(|node| node.time)
        .filter(|&t| t >= lo && t <= hi)
        .filter_map(|t| Some((a.log_price_at(t)? - b.log_price_at(t)?).abs()))
        .fold(None, |acc: Option<T>, d| Some(acc.map_or(d, |m| m.max(d))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(level: usize, time: f64, index: i64) -> BoundaryNode<f64> {
        BoundaryNode {
            level,
            time,
            index,
            log_price: index as f64 * 0.1,
            price: (index as f64 * 0.1).exp(),
        }
    }

    #[test]
    fn interpolates_between_levels() {
        let b = ExerciseBoundary {
            kind: OptionKind::Put,
            nodes: vec![node(0, 0.0, -3), node(1, 1.0, -1)],
        };
        assert!((b.log_price_at(0.5).unwrap() - -0.2).abs() < 1e-15);
        let s = b.price_at(0.25).unwrap();
        let want = 0.75 * (-0.3f64).exp() + 0.25 * (-0.1f64).exp();
        assert!((s - want).abs() < 1e-15);
        assert!(b.log_price_at(1.5).is_none());
        assert_eq!(b.log_price_at(1.0), Some(b.nodes[1].log_price));
    }

    #[test]
    fn detects_ordering_breaks() {
        let put = ExerciseBoundary {
            kind: OptionKind::Put,
            nodes: vec![node(0, 0.0, -3), node(1, 0.1, -2), node(2, 0.2, -2)],
        };
        assert!(put.monotonicity_break().is_none());
        let call = ExerciseBoundary {
            kind: OptionKind::Call,
            ..put.clone()
        };
        let (a, b) = call.monotonicity_break().unwrap();
        assert_eq!((a.level, b.level), (0, 1));
    }
}
