//! Node-by-node checks of the order properties of a solved surface.

use crate::boundary::BoundaryOutcome;
use crate::coefficients::ConditionReport;
use crate::eds::GridSolution;
use crate::option::OptionKind;
use crate::scalar::Real;
use crate::surface::ValueSurface;

use super::report::{Status, Verdict};

/// Tracks the worst violation of a check.
struct Worst {
    value: f64,
    at: Option<(usize, i64)>,
    count: usize,
}

impl Worst {
    fn new() -> Self {
        Self {
            value: 0.0,
            at: None,
            count: 0,
        }
    }

    /// Records `excess` if it is positive.
    fn see(&mut self, excess: f64, n: usize, j: i64) {
        if excess > 0.0 {
            self.count += 1;
            if excess > self.value {
                self.value = excess;
                self.at = Some((n, j));
            }
        }
    }

    fn into_verdict(self, mut v: Verdict, hypotheses_hold: bool) -> Verdict {
        v.worst = self.value;
        v.location = self.at;
        v.status = match (hypotheses_hold, self.count > 0) {
            (true, false) => Status::Pass,
            (true, true) => Status::Fail,
            (false, true) => Status::ExpectedCounterexampleFound,
            (false, false) => Status::ExpectedCounterexampleNotFound,
        };
        if self.count > 0 {
            v.detail = format!("{} violating nodes", self.count);
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditOptions {
    /// Allowed increase of values from an earlier level to a later one, on top
    /// of the rounding tolerance.
    pub time_slack: f64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self { time_slack: 0.0 }
    }
}

/// Space, bound, intrinsic and time checks on a fully stored surface.
pub fn monotonicity_audit<T: Real, S: ValueSurface<T> + ?Sized>(
    sol: &S,
    conditions: &ConditionReport<T>,
) -> Vec<Verdict> {
    monotonicity_audit_with(sol, conditions, &AuditOptions::default())
}

pub fn monotonicity_audit_with<T: Real, S: ValueSurface<T> + ?Sized>(
    sol: &S,
    conditions: &ConditionReport<T>,
    options: &AuditOptions,
) -> Vec<Verdict> {
    let engine = sol.engine();
    let spec = *sol.spec();
    let tol = sol.tolerance().as_f64();
    if !sol.has_surface() {
        return vec![Verdict::new("surface", "value surface stored", engine)
            .with_status(Status::Skipped)
            .with_detail("solved without full storage")];
    }

    let mut space = Worst::new();
    let mut bounds = Worst::new();
    let mut floor = Worst::new();
    for n in 0..sol.levels() {
        let Some(range) = sol.index_range(n) else {
            continue;
        };
        let mut prev: Option<f64> = None;
        for j in range {
            let v = sol.value(n, j).map(Real::as_f64).unwrap_or(f64::NAN);
            let phi = sol.payoff(j).as_f64();
            if let Some(p) = prev {
                let excess = match spec.kind {
                    OptionKind::Put => v - p,
                    OptionKind::Call => p - v,
                };
                space.see(excess - tol, n, j);
            }
            prev = Some(v);
            let cap = match spec.kind {
                OptionKind::Put => spec.strike.as_f64(),
                OptionKind::Call => sol.node_price(j).as_f64(),
            };
            bounds.see((-v).max(v - cap) - tol, n, j);
            if v.is_nan() {
                bounds.see(f64::INFINITY, n, j);
            }
            if spec.is_american() {
                floor.see(phi - v - tol, n, j);
            }
        }
    }

    let mut out = vec![
        space.into_verdict(
            Verdict::new(
                "space-monotonicity",
                match spec.kind {
                    OptionKind::Put => "put value nonincreasing in the underlying",
                    OptionKind::Call => "call value nondecreasing in the underlying",
                },
                engine,
            ),
            true,
        ),
        bounds.into_verdict(
            Verdict::new(
                "value-bounds",
                match spec.kind {
                    OptionKind::Put => "0 <= put <= strike",
                    OptionKind::Call => "0 <= call <= underlying",
                },
                engine,
            ),
            true,
        ),
    ];
    if spec.is_american() {
        out.push(floor.into_verdict(
            Verdict::new(
                "intrinsic-floor",
                "American value at least the payoff",
                engine,
            ),
            true,
        ));
        out.push(time_monotonicity(sol, conditions, options));
    }
    out
}

/// `V_j^n >= V_j^{n+1}` at every `j` stored on both levels.
///
/// Asserted when the ratio hypotheses for the option kind hold; otherwise the
/// verdict records whether a counterexample was found.
pub fn time_monotonicity<T: Real, S: ValueSurface<T> + ?Sized>(
    sol: &S,
    conditions: &ConditionReport<T>,
    options: &AuditOptions,
) -> Verdict {
    let (hypotheses, property) = match sol.spec().kind {
        OptionKind::Put => (
            conditions.put_monotone_ok,
            "put value nonincreasing in time (r/sigma^2 nondecreasing, q/sigma^2 nonincreasing)",
        ),
        OptionKind::Call => (
            conditions.call_monotone_ok,
            "call value nonincreasing in time (r/sigma^2 nonincreasing, q/sigma^2 nondecreasing)",
        ),
    };
    let tol = sol.tolerance().as_f64() + options.time_slack;
    let mut worst = Worst::new();
    for n in 0..sol.levels().saturating_sub(1) {
        let (Some(a), Some(b)) = (sol.index_range(n), sol.index_range(n + 1)) else {
            continue;
        };
        let lo = *a.start().max(b.start());
        let hi = *a.end().min(b.end());
        for j in lo..=hi {
            if let (Some(early), Some(late)) = (sol.value(n, j), sol.value(n + 1, j)) {
                worst.see(late.as_f64() - early.as_f64() - tol, n, j);
            }
        }
    }
    worst.into_verdict(
        Verdict::new("time-monotonicity", property, sol.engine()),
        hypotheses,
    )
}

/// Put values nondecreasing and call values nonincreasing in the strike:
/// `bumped` must share spot, partition and grid spacing with `base` and carry a larger strike.
/// Truncation columns of either surface are skipped.
pub fn strike_monotonicity<T: Real, S: ValueSurface<T> + ?Sized>(base: &S, bumped: &S) -> Verdict {
    let kind = base.spec().kind;
    let tol = base.tolerance().max(bumped.tolerance()).as_f64();
    let mut worst = Worst::new();
    let levels = base.levels().min(bumped.levels());
    for n in 0..levels {
        let (Some(a), Some(b)) = (base.index_range(n), bumped.index_range(n)) else {
            continue;
        };
        let lo = *a.start().max(b.start());
        let hi = *a.end().min(b.end());
        for j in (lo..=hi).filter(|&j| !base.is_cut(n, j) && !bumped.is_cut(n, j)) {
            if let (Some(v), Some(w)) = (base.value(n, j), bumped.value(n, j)) {
                let excess = match kind {
                    OptionKind::Put => v.as_f64() - w.as_f64(),
                    OptionKind::Call => w.as_f64() - v.as_f64(),
                };
                worst.see(excess - tol, n, j);
            }
        }
    }
    let property = match kind {
        OptionKind::Put => "put value nondecreasing in the strike",
        OptionKind::Call => "call value nonincreasing in the strike",
    };
    worst.into_verdict(
        Verdict::new("strike-monotonicity", property, base.engine()),
        true,
    )
}

/// Discrete complementarity at interior grid nodes: `U >= payoff`,
/// `U >= continuation`, with equality in at least one.
pub fn complementarity_audit<T: Real>(sol: &GridSolution<T>) -> Verdict {
    let mut v = Verdict::new(
        "complementarity",
        "U >= payoff, U >= continuation, one of them tight",
        "eds",
    );
    if !sol.spec().is_american() || !sol.has_surface() {
        return v.with_status(Status::Skipped);
    }
    let tol = sol.tolerance().as_f64();
    let j_max = sol.j_max();
    let mut worst = Worst::new();
    for n in 0..sol.partition().len() {
        let op = sol.operator(n);
        for j in (1 - j_max)..j_max {
            let at = |m: usize, k: i64| sol.value(m, k).unwrap_or(T::nan());
            let u = at(n, j).as_f64();
            let cont = op
                .continuation(at(n + 1, j - 1), at(n + 1, j), at(n + 1, j + 1))
                .as_f64();
            let phi = sol.payoff(j).as_f64();
            let slack = (u - phi).min(u - cont);
            worst.see((-slack).max(slack) - tol, n, j);
        }
    }
    v = worst.into_verdict(v, true);
    v
}

/// Boundary ordering in time: put indices nondecreasing, call indices nonincreasing.
pub fn boundary_audit<T: Real>(
    outcome: &BoundaryOutcome<T>,
    engine: &str,
    hypotheses_hold: bool,
) -> Verdict {
    let v = Verdict::new(
        "boundary-monotonicity",
        "put boundary nondecreasing in time, call boundary nonincreasing",
        engine,
    );
    let Some(b) = outcome.boundary() else {
        return v.with_status(Status::Skipped).with_detail("no boundary");
    };
    let mut worst = Worst::new();
    for w in b.nodes.windows(2) {
        let step = match b.kind {
            OptionKind::Put => w[0].index - w[1].index,
            OptionKind::Call => w[1].index - w[0].index,
        };
        worst.see(step as f64, w[1].level, w[1].index);
    }
    worst.into_verdict(v, hypotheses_hold)
}

/// The no-boundary outcome for a call without yield.
pub fn no_boundary_audit<T: Real>(outcome: &BoundaryOutcome<T>, engine: &str) -> Verdict {
    let v = Verdict::new(
        "no-boundary",
        "call without yield is never exercised early",
        engine,
    );
    if outcome.is_none() {
        v
    } else {
        v.with_status(Status::Fail)
            .with_detail("extractor returned a boundary")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::btm::{price_btm_dx, BtmOptions};
    use crate::coefficients::{check_conditions, CoefficientCurve, CoefficientSet};
    use crate::eds::solve_eds;
    use crate::option::OptionSpec;

    fn rate_drop() -> CoefficientSet<f64> {
        CoefficientSet::new(
            CoefficientCurve::step(vec![(0.0, 0.2), (2.0, 0.1)]).unwrap(),
            CoefficientCurve::constant(0.0),
            CoefficientCurve::constant(1.0),
            5.0,
        )
        .unwrap()
    }

    #[test]
    fn constant_put_passes_every_check() {
        let cs = CoefficientSet::constant(0.1, 0.0, 1.0, 1.0).unwrap();
        let spec = OptionSpec::american_put(1.0, 1.0, 1.0).unwrap();
        let sol = price_btm_dx(&spec, &cs, 0.05, &BtmOptions::default()).unwrap();
        let rep = check_conditions(&cs, sol.partition(), sol.up_factor());
        for v in monotonicity_audit(&sol, &rep) {
            assert_eq!(v.status, Status::Pass, "{v:?}");
        }
    }

    #[test]
    fn rate_drop_breaks_time_monotonicity() {
        let cs = rate_drop();
        let spec = OptionSpec::american_put(1.0, 1.0, 5.0).unwrap();
        let sol = price_btm_dx(&spec, &cs, 0.1, &BtmOptions::default()).unwrap();
        let rep = check_conditions(&cs, sol.partition(), sol.up_factor());
        assert!(!rep.put_monotone_ok);
        let v = time_monotonicity(&sol, &rep, &AuditOptions::default());
        assert_eq!(v.status, Status::ExpectedCounterexampleFound);
        assert!(v.worst > 0.0 && v.location.is_some());
    }

    #[test]
    fn grid_complementarity_is_tight() {
        let cs = CoefficientSet::constant(0.1, 0.05, 0.5, 1.0).unwrap();
        let spec = OptionSpec::american_call(1.0, 1.0, 1.0).unwrap();
        let sol = solve_eds(&spec, &cs, 0.05, 0.7, 6.0).unwrap();
        assert_eq!(complementarity_audit(&sol).status, Status::Pass);
    }
}
