//! Volatility-adapted time partition.
//!
//! Every step satisfies `sigma(t_n)^2 * dt_n = alpha * dx^2`, so a move of one
//! grid cell in log-price carries the same variance at every level. With
//! `alpha = 1` and `dx = ln u` this is the partition that makes the binomial
//! tree recombine under time-varying volatility.

use serde::Serialize;

use crate::coefficients::CoefficientSet;
use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const DEFAULT_MAX_STEPS: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionOptions {
    /// Hard cap on the number of steps `N`.
    pub max_steps: usize,
    /// Append one short step so the last node lands exactly on the maturity.
    pub snap_last_step: bool,
}

impl Default for PartitionOptions {
    fn default() -> Self {
        Self {
            max_steps: DEFAULT_MAX_STEPS,
            snap_last_step: false,
        }
    }
}

/// Per-step data for `[t_n, t_{n+1}]`, coefficients sampled at `t_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Step<T> {
    pub dt: T,
    pub sigma: T,
    pub r: T,
    pub q: T,
    /// `1 + r_n dt_n`
    pub rho: T,
    /// `1 + q_n dt_n`
    pub eta: T,
    /// `sigma_n^2 dt_n / dx^2`; equals the partition's alpha except on a snapped last step.
    pub alpha: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimePartition<T> {
    horizon: T,
    dx: T,
    alpha: T,
    nodes: Vec<T>,
    steps: Vec<Step<T>>,
    gap: T,
    terminal_dt: T,
    snapped: bool,
}

/// `alpha dx^2 / sigma^2`, correctly rounded up to a tie.
fn variance_step<T: Real>(alpha: T, dx: T, sigma: T) -> T {
    let dx = Dd::new(dx);
    let sigma = Dd::new(sigma);
    Dd::new(alpha).mul(dx).mul(dx).div(sigma.mul(sigma)).hi
}

/// Builds `t_0 = 0, t_{n+1} = t_n + alpha dx^2 / sigma(t_n)^2` until the next
/// node would pass `horizon`.
pub fn build_partition<T: Real>(
    cs: &CoefficientSet<T>,
    horizon: T,
    dx: T,
    alpha: T,
    options: &PartitionOptions,
) -> Result<TimePartition<T>> {
    if !(dx > T::zero()) || !dx.is_finite() {
        return Err(Error::invalid(
            "dx",
            format!("must be positive and finite, got {dx}"),
        ));
    }
    if !(alpha > T::zero() && alpha <= T::one()) {
        return Err(Error::invalid(
            "alpha",
            format!("must lie in (0, 1], got {alpha}"),
        ));
    }
    if !(horizon > T::zero()) || !horizon.is_finite() {
        return Err(Error::invalid(
            "maturity",
            format!("must be positive and finite, got {horizon}"),
        ));
    }
    if horizon > cs.horizon() {
        return Err(Error::Domain(format!(
            "maturity {horizon} beyond the coefficient horizon {}",
            cs.horizon()
        )));
    }

    let cell = alpha * dx * dx;
    let cap_error = || Error::StepCapExceeded {
        cap: options.max_steps,
        dx: dx.as_f64(),
        sigma_lo: cs.sigma_lo().as_f64(),
        horizon: horizon.as_f64(),
    };
    // N > T sigma_lo^2 / (alpha dx^2) - 1, so this rejects before allocating
    let lower = horizon * cs.sigma_lo() * cs.sigma_lo() / cell - T::one();
    if lower.as_f64() >= options.max_steps as f64 {
        return Err(cap_error());
    }

    let tol = T::epsilon() * T::lit(4.0) * horizon;
    let mut nodes = vec![T::zero()];
    let mut steps = Vec::new();
    let mut t = T::zero();
    let mut carry = T::zero();
    loop {
        let rates = cs.eval_unchecked(t);
        let dt = variance_step(alpha, dx, rates.sigma);
        // compensated running sum keeps t_n within an ulp of the exact sum of steps
        let y = dt - carry;
        let next = t + y;
        let next_carry = (next - t) - y;
        if next > horizon + tol {
            break;
        }
        if steps.len() == options.max_steps {
            return Err(cap_error());
        }
        steps.push(Step {
            dt,
            sigma: rates.sigma,
            r: rates.r,
            q: rates.q,
            rho: T::one() + rates.r * dt,
            eta: T::one() + rates.q * dt,
            alpha,
        });
        t = next.min(horizon);
        carry = if next > horizon {
            T::zero()
        } else {
            next_carry
        };
        nodes.push(t);
    }

    let terminal = cs.eval_unchecked(t);
    let terminal_dt = variance_step(alpha, dx, terminal.sigma);
    let mut gap = horizon - t;
    let mut snapped = false;
    if options.snap_last_step && gap > T::zero() {
        steps.push(Step {
            dt: gap,
            sigma: terminal.sigma,
            r: terminal.r,
            q: terminal.q,
            rho: T::one() + terminal.r * gap,
            eta: T::one() + terminal.q * gap,
            alpha: terminal.sigma * terminal.sigma * gap / (dx * dx),
        });
        nodes.push(horizon);
        gap = T::zero();
        snapped = true;
    }

    Ok(TimePartition {
        horizon,
        dx,
        alpha,
        nodes,
        steps,
        gap,
        terminal_dt,
        snapped,
    })
}

impl<T: Real> TimePartition<T> {
    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn dx(&self) -> T {
        self.dx
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    /// Up factor `u = e^dx` of the matching binomial tree.
    pub fn up_factor(&self) -> T {
        self.dx.exp()
    }

    /// Number of steps `N`.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `t_0, ..., t_N`.
    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn steps(&self) -> &[Step<T>] {
        &self.steps
    }

    pub fn last_node(&self) -> T {
        self.nodes[self.nodes.len() - 1]
    }

    /// `T - t_N`; zero when snapped.
    pub fn gap(&self) -> T {
        self.gap
    }

    pub fn is_snapped(&self) -> bool {
        self.snapped
    }

    /// `dt_N = alpha dx^2 / sigma(t_N)^2`, the step that would follow the last node.
    pub fn terminal_dt(&self) -> T {
        self.terminal_dt
    }

    /// Index `n` with `t_n <= t < t_{n+1}`, if `t` lies in `[t_0, t_N)`.
    pub fn locate(&self, t: T) -> Option<usize> {
        if !(t >= T::zero() && t < self.last_node()) {
            return None;
        }
        Some(self.nodes.partition_point(|&tn| tn <= t) - 1)
    }

    /// Step size interpolated between `dt_n` and `dt_{n+1}` for `t` in `[t_n, t_{n+1})`.
    ///
    /// For `n = N - 1` the following step is `dt_N` from [`Self::terminal_dt`].
    /// The result satisfies `t + dt(t)` in `[t_{n+1}, t_{n+2})`.
    pub fn interpolated_dt(&self, t: T) -> Result<T> {
        let n = self
            .locate(t)
            .ok_or_else(|| Error::Domain(format!("t = {t} outside [0, {})", self.last_node())))?;
        let (t0, t1) = (self.nodes[n], self.nodes[n + 1]);
        let dt_here = self.steps[n].dt;
        let dt_next = self.steps.get(n + 1).map_or(self.terminal_dt, |s| s.dt);
        let w = (t - t0) / (t1 - t0);
        Ok(w * dt_next + (T::one() - w) * dt_here)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoefficientCurve;

    fn vol_set(sigma: CoefficientCurve<f64>, horizon: f64) -> CoefficientSet<f64> {
        CoefficientSet::new(
            CoefficientCurve::constant(0.1),
            CoefficientCurve::constant(0.0),
            sigma,
            horizon,
        )
        .unwrap()
    }

    fn jump_set() -> CoefficientSet<f64> {
        vol_set(
            CoefficientCurve::step(vec![(0.0, 1.0), (0.02, 2.0)]).unwrap(),
            0.05,
        )
    }

    #[test]
    fn constant_sigma_gives_uniform_steps() {
        let cs = CoefficientSet::<f64>::constant(0.1, 0.0, 1.0, 0.05).unwrap();
        let p = build_partition(&cs, 0.05, 0.1, 1.0, &PartitionOptions::default()).unwrap();
        assert_eq!(p.len(), 5);
        assert!(p.gap().abs() < 1e-15);
        for s in p.steps() {
            assert!((s.dt - 0.01).abs() < 1e-17);
        }
    }

    #[test]
    fn volatility_jump_shrinks_steps() {
        let p = build_partition(&jump_set(), 0.05, 0.1, 1.0, &PartitionOptions::default()).unwrap();
        let nodes = p.nodes();
        assert!((nodes[1] - 0.01).abs() < 1e-15);
        assert!((nodes[2] - 0.02).abs() < 1e-15);
        assert!(p.steps()[2..].iter().all(|s| (s.dt - 0.0025).abs() < 1e-17));
        // 0.02 + 12 * 0.0025 = 0.05
        assert_eq!(p.len(), 14);
    }

    #[test]
    fn step_and_count_brackets() {
        let sigma = CoefficientCurve::linear(vec![(0.0, 0.5), (1.0, 2.0)]).unwrap();
        let cs = vol_set(sigma, 1.0);
        let p = build_partition(&cs, 1.0, 0.1, 1.0, &PartitionOptions::default()).unwrap();
        for s in p.steps() {
            assert!(
                s.dt >= 0.0025 * (1.0 - 1e-15) && s.dt <= 0.04 * (1.0 + 1e-15),
                "{}",
                s.dt
            );
        }
        let n = p.len() as f64;
        assert!(n > 24.0 && n <= 400.0, "N = {n}");
    }

    #[test]
    fn exact_variance_per_step() {
        let sigma = CoefficientCurve::linear(vec![(0.0, 0.3), (0.4, 0.9), (1.0, 0.6)]).unwrap();
        let cs = vol_set(sigma, 1.0);
        let (dx, alpha) = (0.037, 0.8);
        let p = build_partition(&cs, 1.0, dx, alpha, &PartitionOptions::default()).unwrap();
        let target = alpha * dx * dx;
        for s in p.steps() {
            let v = s.sigma * s.sigma * s.dt;
            assert!((v - target).abs() <= 2.0 * f64::EPSILON * target);
        }
        assert!(p.last_node() <= 1.0);
        assert!(1.0 < p.last_node() + p.terminal_dt());
    }

    #[test]
    fn interpolated_dt_at_nodes_and_between() {
        let p = build_partition(&jump_set(), 0.05, 0.1, 1.0, &PartitionOptions::default()).unwrap();
        assert_eq!(p.interpolated_dt(p.nodes()[1]).unwrap(), p.steps()[1].dt);
        let mid = p.interpolated_dt(0.015).unwrap();
        assert!((mid - 0.00625).abs() < 1e-12, "{mid}");
        assert!(p.interpolated_dt(p.last_node()).is_err());
        assert!(p.interpolated_dt(-1e-9).is_err());
    }

    #[test]
    fn interpolated_dt_constant_for_constant_sigma() {
        let cs = CoefficientSet::constant(0.1, 0.0, 0.7, 1.0).unwrap();
        let p = build_partition(&cs, 1.0, 0.05, 1.0, &PartitionOptions::default()).unwrap();
        let dt0 = p.steps()[0].dt;
        for k in 0..50 {
            let t = p.last_node() * k as f64 / 50.0;
            assert!((p.interpolated_dt(t).unwrap() - dt0).abs() < 1e-16);
        }
    }

    #[test]
    fn step_cap_is_enforced() {
        let cs = CoefficientSet::constant(0.1, 0.0, 1.0, 1.0).unwrap();
        let opts = PartitionOptions {
            max_steps: 50,
            ..Default::default()
        };
        let err = build_partition(&cs, 1.0, 0.1, 1.0, &opts).unwrap_err();
        assert!(matches!(err, Error::StepCapExceeded { cap: 50, .. }));
        assert!(build_partition(&cs, 1.0, 0.15, 1.0, &opts).is_ok());
    }

    #[test]
    fn rejects_bad_parameters() {
        let cs = CoefficientSet::constant(0.1, 0.0, 1.0, 1.0).unwrap();
        let o = PartitionOptions::default();
        assert!(build_partition(&cs, 1.0, 0.0, 1.0, &o).is_err());
        assert!(build_partition(&cs, 1.0, 0.1, 1.5, &o).is_err());
        assert!(build_partition(&cs, 1.0, 0.1, 0.0, &o).is_err());
        assert!(matches!(
            build_partition(&cs, 2.0, 0.1, 1.0, &o),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn snap_lands_on_maturity() {
        let cs = CoefficientSet::constant(0.1, 0.0, 1.0, 1.0).unwrap();
        let opts = PartitionOptions {
            snap_last_step: true,
            ..Default::default()
        };
        let plain = build_partition(&cs, 1.0, 0.3, 1.0, &PartitionOptions::default()).unwrap();
        assert!(plain.gap() > 0.0);
        let p = build_partition(&cs, 1.0, 0.3, 1.0, &opts).unwrap();
        assert!(p.is_snapped());
        assert_eq!(p.last_node(), 1.0);
        assert_eq!(p.gap(), 0.0);
        assert_eq!(p.len(), plain.len() + 1);
        let last = p.steps().last().unwrap();
        assert!(last.alpha < 1.0 && last.alpha > 0.0);
    }

    #[test]
    fn works_in_single_precision() {
        let cs = CoefficientSet::<f32>::constant(0.1, 0.0, 1.0, 1.0).unwrap();
        let p = build_partition(&cs, 1.0f32, 0.1, 1.0, &PartitionOptions::default()).unwrap();
        assert_eq!(p.len(), 100);
    }
}
