//! Time-dependent market coefficients `r(t)`, `q(t)`, `sigma(t)` and the
//! structural hypotheses the monotonicity results rely on.
//!
//! Curves are piecewise constant ("step") or piecewise linear between knots.
//! At a knot the curve takes the knot's own value, so a step curve with
//! knots `(0, 0.2), (2, 0.1)` evaluates to `0.1` at `t = 2`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::partition::TimePartition;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Step,
    Linear,
}

/// Piecewise curve on `[0, inf)`; constant after the last knot.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientCurve<T> {
    interpolation: Interpolation,
    knots: Vec<(T, T)>,
}

impl<T: Real> CoefficientCurve<T> {
    pub fn new(interpolation: Interpolation, knots: Vec<(T, T)>) -> Result<Self> {
        let Some(&(t0, _)) = knots.first() else {
            return Err(Error::invalid("knots", "curve needs at least one knot"));
        };
        if t0 != T::zero() {
            return Err(Error::invalid(
                "knots",
                format!("first knot must be at t = 0, got {t0}"),
            ));
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::invalid(
                    "knots",
                    format!(
                        "knot times must be strictly increasing ({} then {})",
                        w[0].0, w[1].0
                    ),
                ));
            }
        }
        if let Some(&(t, v)) = knots.iter().find(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::invalid(
                "knots",
                format!("non-finite knot ({t}, {v})"),
            ));
        }
        Ok(Self {
            interpolation,
            knots,
        })
    }

    pub fn constant(value: T) -> Self {
        Self {
            interpolation: Interpolation::Step,
            knots: vec![(T::zero(), value)],
        }
    }

    pub fn step(knots: Vec<(T, T)>) -> Result<Self> {
        Self::new(Interpolation::Step, knots)
    }

    pub fn linear(knots: Vec<(T, T)>) -> Result<Self> {
        Self::new(Interpolation::Linear, knots)
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn knots(&self) -> &[(T, T)] {
        &self.knots
    }

    /// Evaluates the curve; `t` is assumed non-negative.
    pub fn eval(&self, t: T) -> T {
        // index of the last knot with t_k <= t
        let k = self
            .knots
            .partition_point(|&(tk, _)| tk <= t)
            .saturating_sub(1);
        let (tk, vk) = self.knots[k];
        match self.interpolation {
            Interpolation::Step => vk,
            Interpolation::Linear => match self.knots.get(k + 1) {
                Some(&(tn, vn)) => vk + (vn - vk) * ((t - tk) / (tn - tk)),
                None => vk,
            },
        }
    }

    /// Exact extrema over `[0, horizon]`: they occur at knots or at the horizon.
    pub fn range_on(&self, horizon: T) -> (T, T) {
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for &(_, v) in self.knots.iter().take_while(|(t, _)| *t <= horizon) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let end = self.eval(horizon);
        (lo.min(end), hi.max(end))
    }

    pub fn is_constant(&self) -> bool {
        let v0 = self.knots[0].1;
        self.knots.iter().all(|&(_, v)| v == v0)
    }
}

/// Coefficients sampled at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates<T> {
    pub r: T,
    pub q: T,
    pub sigma: T,
}

/// The three market curves on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet<T> {
    r: CoefficientCurve<T>,
    q: CoefficientCurve<T>,
    sigma: CoefficientCurve<T>,
    horizon: T,
    sigma_lo: T,
    sigma_hi: T,
}

impl<T: Real> CoefficientSet<T> {
    /// Validates `sigma > 0`, `r >= 0` and `q >= 0` on `[0, horizon]`.
    pub fn new(
        r: CoefficientCurve<T>,
        q: CoefficientCurve<T>,
        sigma: CoefficientCurve<T>,
        horizon: T,
    ) -> Result<Self> {
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(Error::invalid(
                "horizon",
                format!("must be positive and finite, got {horizon}"),
            ));
        }
        let (sigma_lo, sigma_hi) = sigma.range_on(horizon);
        if !(sigma_lo > T::zero()) {
            return Err(Error::invalid(
                "sigma",
                format!("volatility must stay positive, min is {sigma_lo}"),
            ));
        }
        let (r_lo, _) = r.range_on(horizon);
        if r_lo < T::zero() {
            return Err(Error::invalid(
                "r",
                format!("negative rates are not supported, min is {r_lo}"),
            ));
        }
        let (q_lo, _) = q.range_on(horizon);
        if q_lo < T::zero() {
            return Err(Error::invalid(
                "q",
                format!("negative yields are not supported, min is {q_lo}"),
            ));
        }
        Ok(Self {
            r,
            q,
            sigma,
            horizon,
            sigma_lo,
            sigma_hi,
        })
    }

    /// Constant coefficients, the common test fixture.
    pub fn constant(r: T, q: T, sigma: T, horizon: T) -> Result<Self> {
        Self::new(
            CoefficientCurve::constant(r),
            CoefficientCurve::constant(q),
            CoefficientCurve::constant(sigma),
            horizon,
        )
    }

    pub fn r(&self) -> &CoefficientCurve<T> {
        &self.r
    }

    pub fn q(&self) -> &CoefficientCurve<T> {
        &self.q
    }

    pub fn sigma(&self) -> &CoefficientCurve<T> {
        &self.sigma
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn sigma_lo(&self) -> T {
        self.sigma_lo
    }

    pub fn sigma_hi(&self) -> T {
        self.sigma_hi
    }

    /// `(r, q, sigma)` at `t`; errors outside `[0, horizon]`.
    pub fn eval(&self, t: T) -> Result<Rates<T>> {
        if !(t >= T::zero() && t <= self.horizon) {
            return Err(Error::Domain(format!(
                "t = {t} outside [0, {}]",
                self.horizon
            )));
        }
        Ok(self.eval_unchecked(t))
    }

    pub(crate) fn eval_unchecked(&self, t: T) -> Rates<T> {
        Rates {
            r: self.r.eval(t),
            q: self.q.eval(t),
            sigma: self.sigma.eval(t),
        }
    }

    /// Same set with `r` and `q` exchanged (the call-put symmetry image).
    pub fn swapped(&self) -> Self {
        Self {
            r: self.q.clone(),
            q: self.r.clone(),
            ..self.clone()
        }
    }

    /// Restricts the horizon, e.g. to price a shorter maturity on the same curves.
    pub fn with_horizon(&self, horizon: T) -> Result<Self> {
        Self::new(self.r.clone(), self.q.clone(), self.sigma.clone(), horizon)
    }

    pub fn q_vanishes(&self) -> bool {
        self.q.range_on(self.horizon).1 == T::zero()
    }
}

/// Which structural hypothesis a [`Violation`] refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `r / sigma^2` nondecreasing (put hypothesis).
    RateRatioNondecreasing,
    /// `q / sigma^2` nonincreasing (put hypothesis).
    YieldRatioNonincreasing,
    /// `r / sigma^2` nonincreasing (call hypothesis).
    RateRatioNonincreasing,
    /// `q / sigma^2` nondecreasing (call hypothesis).
    YieldRatioNondecreasing,
    /// `q_n > 0`.
    YieldPositive,
    /// `d * eta_n < rho_n < u * eta_n`.
    Branch,
}

impl Condition {
    pub fn name(self) -> &'static str {
        match self {
            Condition::RateRatioNondecreasing => "r/sigma^2 nondecreasing",
            Condition::YieldRatioNonincreasing => "q/sigma^2 nonincreasing",
            Condition::RateRatioNonincreasing => "r/sigma^2 nonincreasing",
            Condition::YieldRatioNondecreasing => "q/sigma^2 nondecreasing",
            Condition::YieldPositive => "q > 0",
            Condition::Branch => "d*eta < rho < u*eta",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation<T> {
    pub step: usize,
    pub time: T,
    pub condition: Condition,
    pub lhs: T,
    pub rhs: T,
}

/// Outcome of [`check_conditions`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport<T> {
    pub put_monotone_ok: bool,
    pub call_monotone_ok: bool,
    pub q_positive: bool,
    pub branch_ok: bool,
    pub violations: Vec<Violation<T>>,
}

impl<T: Real> ConditionReport<T> {
    pub fn all_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violations_of(&self, condition: Condition) -> impl Iterator<Item = &Violation<T>> {
        self.violations
            .iter()
            .filter(move |v| v.condition == condition)
    }
}

fn ratio_tolerance<T: Real>(a: T, b: T) -> T {
    T::epsilon() * T::lit(64.0) * a.abs().max(b.abs())
}

/// Evaluates the ratio hypotheses at every partition node and the branch
/// condition at every step, listing each failing node.
pub fn check_conditions<T: Real>(
    cs: &CoefficientSet<T>,
    partition: &TimePartition<T>,
    u: T,
) -> ConditionReport<T> {
    let steps = partition.steps();
    let nodes = partition.nodes();
    let d = u.recip();
    let mut violations = Vec::new();

    let mut push = |step: usize, condition: Condition, lhs: T, rhs: T| {
        violations.push(Violation {
            step,
            time: nodes[step],
            condition,
            lhs,
            rhs,
        });
    };

    // (r, q) / sigma^2 at every node t_0..=t_N
    let terminal = cs.eval_unchecked(partition.last_node());
    let ratios: Vec<(T, T)> = steps
        .iter()
        .map(|s| (s.r, s.q, s.sigma))
        .chain(std::iter::once((terminal.r, terminal.q, terminal.sigma)))
        .map(|(r, q, sigma)| (r / (sigma * sigma), q / (sigma * sigma)))
        .collect();

    for (n, pair) in ratios.windows(2).enumerate() {
        let ((r_prev, q_prev), (r_next, q_next)) = (pair[0], pair[1]);
        let tol_r = ratio_tolerance(r_prev, r_next);
        let tol_q = ratio_tolerance(q_prev, q_next);
        let at = n + 1;
        if r_next < r_prev - tol_r {
            push(at, Condition::RateRatioNondecreasing, r_next, r_prev);
        }
        if q_next > q_prev + tol_q {
            push(at, Condition::YieldRatioNonincreasing, q_next, q_prev);
        }
        if r_next > r_prev + tol_r {
            push(at, Condition::RateRatioNonincreasing, r_next, r_prev);
        }
        if q_next < q_prev - tol_q {
            push(at, Condition::YieldRatioNondecreasing, q_next, q_prev);
        }
    }

    for (n, s) in steps.iter().enumerate() {
        if !(s.q > T::zero()) {
            push(n, Condition::YieldPositive, s.q, T::zero());
        }
        let ratio = s.rho / s.eta;
        if !(d < ratio && ratio < u) {
            push(n, Condition::Branch, ratio, if ratio <= d { d } else { u });
        }
    }

    let has = |c: Condition| violations.iter().any(|v| v.condition == c);
    ConditionReport {
        put_monotone_ok: !has(Condition::RateRatioNondecreasing)
            && !has(Condition::YieldRatioNonincreasing),
        call_monotone_ok: !has(Condition::RateRatioNonincreasing)
            && !has(Condition::YieldRatioNondecreasing),
        q_positive: !has(Condition::YieldPositive),
        branch_ok: !has(Condition::Branch),
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{build_partition, PartitionOptions};

    fn rate_drop() -> CoefficientCurve<f64> {
        CoefficientCurve::step(vec![(0.0, 0.2), (2.0, 0.1)]).unwrap()
    }

    #[test]
    fn constant_curve_evaluates_everywhere() {
        let cs = CoefficientSet::constant(0.1, 0.0, 1.0, 5.0).unwrap();
        let rates = cs.eval(2.5).unwrap();
        assert_eq!((rates.r, rates.q, rates.sigma), (0.1, 0.0, 1.0));
    }

    #[test]
    fn step_curve_takes_new_level_at_its_knot() {
        let r = rate_drop();
        assert_eq!(r.eval(1.999), 0.2);
        assert_eq!(r.eval(2.0), 0.1);
        assert_eq!(r.eval(4.0), 0.1);
    }

    #[test]
    fn linear_ramp_midpoint() {
        let s = CoefficientCurve::linear(vec![(0.0, 1.0), (1.0, 2.0)]).unwrap();
        assert_eq!(s.eval(0.5), 1.5);
        assert_eq!(s.eval(3.0), 2.0);
    }

    #[test]
    fn eval_outside_horizon_is_domain_error() {
        let cs = CoefficientSet::constant(0.1, 0.0, 1.0, 5.0).unwrap();
        assert!(matches!(cs.eval(5.5), Err(Error::Domain(_))));
        assert!(matches!(cs.eval(-0.1), Err(Error::Domain(_))));
        assert!(cs.eval(5.0).is_ok());
    }

    #[test]
    fn rejects_bad_curves() {
        assert!(CoefficientCurve::step(vec![(0.5, 0.1)]).is_err());
        assert!(CoefficientCurve::step(vec![(0.0, 0.1), (0.0, 0.2)]).is_err());
        assert!(CoefficientCurve::<f64>::step(vec![]).is_err());
        let neg = CoefficientCurve::constant(-0.01);
        assert!(CoefficientSet::new(
            neg,
            CoefficientCurve::constant(0.0),
            CoefficientCurve::constant(1.0),
            1.0
        )
        .is_err());
        let zero_vol = CoefficientCurve::linear(vec![(0.0, 1.0), (1.0, 0.0)]).unwrap();
        assert!(CoefficientSet::new(
            CoefficientCurve::constant(0.1),
            CoefficientCurve::constant(0.0),
            zero_vol.clone(),
            1.0
        )
        .is_err());
        // the ramp only reaches zero beyond a shorter horizon
        assert!(CoefficientSet::new(
            CoefficientCurve::constant(0.1),
            CoefficientCurve::constant(0.0),
            zero_vol,
            0.5
        )
        .is_ok());
    }

    #[test]
    fn sigma_bounds_from_knots() {
        let sigma = CoefficientCurve::step(vec![(0.0, 0.5), (0.3, 2.0), (0.7, 1.0)]).unwrap();
        let cs = CoefficientSet::new(
            CoefficientCurve::constant(0.05),
            CoefficientCurve::constant(0.0),
            sigma,
            1.0,
        )
        .unwrap();
        assert_eq!((cs.sigma_lo(), cs.sigma_hi()), (0.5, 2.0));
    }

    #[test]
    fn constant_coefficients_satisfy_both_hypotheses() {
        let cs = CoefficientSet::<f64>::constant(0.1, 0.0, 1.0, 1.0).unwrap();
        let p = build_partition(&cs, 1.0, 0.1, 1.0, &PartitionOptions::default()).unwrap();
        let rep = check_conditions(&cs, &p, 0.1f64.exp());
        assert!(rep.put_monotone_ok && rep.call_monotone_ok && rep.branch_ok);
        assert!(!rep.q_positive);
        assert!(rep
            .violations
            .iter()
            .all(|v| v.condition == Condition::YieldPositive));
    }

    #[test]
    fn falling_rate_breaks_put_hypothesis_at_knot() {
        let cs = CoefficientSet::new(
            rate_drop(),
            CoefficientCurve::constant(0.0),
            CoefficientCurve::constant(1.0),
            5.0,
        )
        .unwrap();
        let p = build_partition(&cs, 5.0, 0.1, 1.0, &PartitionOptions::default()).unwrap();
        let rep = check_conditions(&cs, &p, 0.1f64.exp());
        assert!(!rep.put_monotone_ok);
        assert!(rep.call_monotone_ok);
        let v: Vec<_> = rep
            .violations_of(Condition::RateRatioNondecreasing)
            .collect();
        assert_eq!(v.len(), 1);
        assert!(
            v[0].time >= 2.0 && v[0].time < 2.0 + 0.0101,
            "violation at {}",
            v[0].time
        );
    }

    #[test]
    fn branch_condition_holds_for_moderate_rates() {
        // rho = 1.001, eta = 1: d < 1.001 < u with u = e^0.1
        let cs = CoefficientSet::<f64>::constant(0.1, 0.0, 1.0, 1.0).unwrap();
        let p = build_partition(&cs, 1.0, 0.1, 1.0, &PartitionOptions::default()).unwrap();
        assert!((p.steps()[0].rho - 1.001).abs() < 1e-15);
        assert!(check_conditions(&cs, &p, 0.1f64.exp()).branch_ok);
    }

    #[test]
    fn branch_failure_names_the_step() {
        // large rate-yield spread with a tiny up factor
        let cs = CoefficientSet::constant(3.0, 0.0, 0.2, 1.0).unwrap();
        let p = build_partition(&cs, 1.0, 0.01, 1.0, &PartitionOptions::default()).unwrap();
        let u = 1.0001f64;
        let rep = check_conditions(&cs, &p, u);
        assert!(!rep.branch_ok);
        let first = rep.violations_of(Condition::Branch).next().unwrap();
        assert_eq!(first.step, 0);
    }
}
