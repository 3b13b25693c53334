//! Binomial tree on the volatility-adapted partition.
//!
//! Nodes sit at `S_j = S0 u^j`, `d = 1/u`, and the backward step is
//!
//! ```text
//! V_j^n = max{ (theta_n V_{j+1}^{n+1} + (1 - theta_n) V_{j-1}^{n+1}) / rho_n, phi_j }
//! theta_n = (rho_n / eta_n - d) / (u - d)
//! ```
//!
//! with the max dropped for European exercise. Each level stores every
//! integer `j` in `[-n, n]`, not only the parity reachable from the root, so
//! values at the same `j` can be compared across consecutive levels.

use std::ops::RangeInclusive;

use crate::boundary::{extract_boundary, BoundaryOutcome};
use crate::coefficients::CoefficientSet;
use crate::dd::{quick_two_sum, split, splitter, two_prod_split, two_sum, Dd};
use crate::error::{Error, Result};
use crate::option::OptionSpec;
use crate::partition::{build_partition, PartitionOptions, TimePartition};
use crate::scalar::Real;
use crate::surface::ValueSurface;

/// Up-move weight and its dual under `r <-> q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaPair<T> {
    pub theta: T,
    /// `1 - theta`, evaluated without cancellation.
    pub theta_down: T,
    /// `(eta/rho - d) / (u - d)`
    pub theta_dual: T,
}

/// Risk-neutral up weight. Fails when the branch condition
/// `d eta < rho < u eta` does not hold; the step is filled in by the pricer.
pub fn theta<T: Real>(rho: T, eta: T, u: T) -> Result<ThetaPair<T>> {
    if !(u > T::one()) || !u.is_finite() {
        return Err(Error::invalid(
            "u",
            format!("up factor must exceed 1, got {u}"),
        ));
    }
    theta_log(rho, eta, u.ln())
}

/// [`theta`] with `u = e^dx`.
///
/// Evaluated as `((rho - 1) - (eta - 1) d + (1 - d)) / (eta (u - d))` with
/// `1 - d` and `u - d` from `expm1` and `sinh`, which avoids the cancellation
/// in `rho/eta - d` for small `dx`.
pub fn theta_log<T: Real>(rho: T, eta: T, dx: T) -> Result<ThetaPair<T>> {
    if !(dx > T::zero()) || !dx.is_finite() {
        return Err(Error::invalid(
            "dx",
            format!("must be positive and finite, got {dx}"),
        ));
    }
    if !(eta > T::zero()) || !(rho > T::zero()) {
        return Err(Error::invalid(
            "eta",
            format!("rho and eta must be positive, got {rho}, {eta}"),
        ));
    }
    let one = T::one();
    let d = (-dx).exp();
    let one_minus_d = -(-dx).exp_m1();
    let spread = T::lit(2.0) * dx.sinh();
    let theta = ((rho - one) - (eta - one) * d + one_minus_d) / (eta * spread);
    if !(theta > T::zero() && theta < one) {
        return Err(Error::Branch {
            step: 0,
            time: 0.0,
            theta: theta.as_f64(),
        });
    }
    let u_minus_one = dx.exp_m1();
    let u = dx.exp();
    let theta_down = ((eta - one) * u - (rho - one) + u_minus_one) / (eta * spread);
    let theta_dual = ((eta - one) - (rho - one) * d + one_minus_d) / (rho * spread);
    Ok(ThetaPair {
        theta,
        theta_down,
        theta_dual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Storage {
    /// Keep every level (needed for boundaries, audits and dumps).
    #[default]
    Full,
    /// Keep two rows; only the root price survives.
    RootOnly,
}

/// Arithmetic of the backward induction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Summation {
    /// One rounding per operation. Relative error grows like `N eps / 2`.
    #[default]
    Plain,
    /// Node values carried as unevaluated pairs; roughly seven times slower.
    /// Keeps the exact identities near working precision for large `N`.
    Compensated,
}

#[derive(Debug, Clone, Default)]
pub struct BtmOptions {
    pub partition: PartitionOptions,
    pub storage: Storage,
    pub summation: Summation,
}

/// Solved tree.
#[derive(Debug, Clone)]
pub struct LatticeSolution<T> {
    spec: OptionSpec<T>,
    partition: TimePartition<T>,
    u: T,
    thetas: Vec<T>,
    /// `rows[n][j + n]` for `j` in `[-n, n]`
    rows: Option<Vec<Vec<T>>>,
    root: T,
}

impl<T: Real> LatticeSolution<T> {
    pub fn price(&self) -> T {
        self.root
    }

    pub fn up_factor(&self) -> T {
        self.u
    }

    pub fn thetas(&self) -> &[T] {
        &self.thetas
    }

    pub fn gap(&self) -> T {
        self.partition.gap()
    }

    /// Stored level `n` as `(j_min, values)`.
    pub fn row(&self, n: usize) -> Option<(i64, &[T])> {
        let rows = self.rows.as_ref()?;
        rows.get(n).map(|r| (-(n as i64), r.as_slice()))
    }
}

impl<T: Real> ValueSurface<T> for LatticeSolution<T> {
    fn spec(&self) -> &OptionSpec<T> {
        &self.spec
    }

    fn partition(&self) -> &TimePartition<T> {
        &self.partition
    }

    fn index_range(&self, n: usize) -> Option<RangeInclusive<i64>> {
        let rows = self.rows.as_ref()?;
        (n < rows.len()).then(|| -(n as i64)..=n as i64)
    }

    fn value(&self, n: usize, j: i64) -> Option<T> {
        let row = self.rows.as_ref()?.get(n)?;
        let i = j + n as i64;
        (i >= 0).then(|| row.get(i as usize).copied()).flatten()
    }

    fn engine(&self) -> &'static str {
        "btm"
    }

    fn root(&self) -> T {
        self.root
    }
}

/// Prices with full storage and default partition options.
pub fn price_btm<T: Real>(
    spec: &OptionSpec<T>,
    cs: &CoefficientSet<T>,
    u: T,
) -> Result<LatticeSolution<T>> {
    price_btm_with(spec, cs, u, &BtmOptions::default())
}

pub fn price_btm_with<T: Real>(
    spec: &OptionSpec<T>,
    cs: &CoefficientSet<T>,
    u: T,
    options: &BtmOptions,
) -> Result<LatticeSolution<T>> {
    if !(u > T::one()) || !u.is_finite() {
        return Err(Error::invalid(
            "u",
            format!("up factor must exceed 1, got {u}"),
        ));
    }
    price_btm_dx(spec, cs, u.ln(), options)
}

/// Same as [`price_btm_with`] with the log step `dx = ln u` given directly.
///
/// Prefer this when matching an explicit grid: `ln(exp(dx))` need not round
/// back to `dx`, which can shift the last partition node.
pub fn price_btm_dx<T: Real>(
    spec: &OptionSpec<T>,
    cs: &CoefficientSet<T>,
    dx: T,
    options: &BtmOptions,
) -> Result<LatticeSolution<T>> {
    spec.validate()?;
    let partition = build_partition(cs, spec.maturity, dx, T::one(), &options.partition)?;
    rollback(spec, partition, options.storage, options.summation)
}

/// Backward induction on an already built partition with `u = e^dx`.
pub fn rollback<T: Real>(
    spec: &OptionSpec<T>,
    partition: TimePartition<T>,
    storage: Storage,
    summation: Summation,
) -> Result<LatticeSolution<T>> {
    let mut rows = Vec::new();
    let keep = storage == Storage::Full;
    if keep {
        check_full_storage(partition.len(), partition.len() + 1)?;
        rows.reserve(partition.len() + 1);
    }
    let (thetas, root) = rollback_visit(spec, &partition, summation, |_, row| {
        if keep {
            rows.push(row.to_vec());
        }
    })?;
    let rows = keep.then(|| {
        rows.reverse();
        rows
    });
    Ok(LatticeSolution {
        spec: *spec,
        u: partition.up_factor(),
        partition,
        thetas,
        rows,
        root,
    })
}

/// Rolls back level by level from `N` to `0`, handing each row `j = -n..=n`
/// to `visit(n, row)`. Returns the weights `theta_n` and the root value.
///
/// With [`Summation::Compensated`] the rows handed out are the rounded values.
pub fn rollback_visit<T: Real>(
    spec: &OptionSpec<T>,
    partition: &TimePartition<T>,
    summation: Summation,
    mut visit: impl FnMut(usize, &[T]),
) -> Result<(Vec<T>, T)> {
    if partition.alpha() != T::one() {
        return Err(Error::invalid(
            "alpha",
            "the tree needs a partition built with alpha = 1",
        ));
    }
    let steps = partition.steps();
    let n_steps = steps.len();
    let dx = partition.dx();

    let weights = steps
        .iter()
        .enumerate()
        .map(|(n, s)| theta_log(s.rho, s.eta, dx).map_err(|e| e.at_step(n, partition.nodes()[n])))
        .collect::<Result<Vec<_>>>()?;

    // payoff over j in [-N, N]
    let width = 2 * n_steps + 1;
    let payoff: Vec<T> = (0..width)
        .map(|i| {
            let j = i as i64 - n_steps as i64;
            spec.payoff(spec.spot * (T::from_index(j) * dx).exp())
        })
        .collect();

    let discounted: Vec<_> = steps
        .iter()
        .map(|s| DiscountedWeights::new(s.rho, s.eta, dx))
        .collect();

    let american = spec.is_american();
    let mut next = payoff.clone();
    let mut cur = vec![T::zero(); width];
    let tiny = negligible_value::<T>();
    if summation == Summation::Compensated {
        let root = compensated(&payoff, &discounted, american, &mut visit);
        return Ok((weights.iter().map(|w| w.theta).collect(), root));
    }
    visit(n_steps, &next);
    for n in (0..n_steps).rev() {
        let w = discounted[n];
        let m = 2 * n + 1;
        let rows = next[2..m + 2]
            .iter()
            .zip(&next[..m])
            .zip(&payoff[n_steps - n..n_steps - n + m]);
        for (((&a, &b), &phi), out) in rows.zip(cur[..m].iter_mut()) {
            let cont = (w.up.hi * a + w.down.hi * b) + (w.up.lo * a + w.down.lo * b);
            let cont = if cont.abs() < tiny { T::zero() } else { cont };
            *out = if american && phi > cont { phi } else { cont };
        }
        std::mem::swap(&mut next, &mut cur);
        visit(n, &next[..m]);
    }
    Ok((weights.iter().map(|w| w.theta).collect(), next[0]))
}

/// Values below this are flushed to zero. They only feed subnormal
/// arithmetic, which is slow and carries nothing at working precision.
fn negligible_value<T: Real>() -> T {
    T::min_positive_value() / (T::epsilon() * T::epsilon())
}

fn compensated<T: Real>(
    payoff: &[T],
    weights: &[DiscountedWeights<T>],
    american: bool,
    visit: &mut impl FnMut(usize, &[T]),
) -> T {
    let n_steps = weights.len();
    let c = splitter::<T>();
    let mut hi = payoff.to_vec();
    let mut lo = vec![T::zero(); hi.len()];
    let mut next_hi = vec![T::zero(); hi.len()];
    let mut next_lo = vec![T::zero(); hi.len()];
    let mut parts = vec![(T::zero(), T::zero()); hi.len()];
    let zero = T::zero();
    let tiny = negligible_value::<T>();
    visit(n_steps, &hi);
    for n in (0..n_steps).rev() {
        let w = weights[n];
        let (up_split, down_split) = (split(w.up.hi, c), split(w.down.hi, c));
        let m = 2 * n + 1;
        for (p, &v) in parts[..m + 2].iter_mut().zip(&hi[..m + 2]) {
            *p = split(v, c);
        }
        let values = hi[2..m + 2]
            .iter()
            .zip(&hi[..m])
            .zip(parts[2..m + 2].iter().zip(&parts[..m]));
        let tails = lo[2..m + 2].iter().zip(&lo[..m]);
        let rows = values.zip(tails).zip(&payoff[n_steps - n..n_steps - n + m]);
        for (((((&a, &b), (&sa, &sb)), (&la, &lb)), &phi), (h_out, l_out)) in
            rows.zip(next_hi[..m].iter_mut().zip(next_lo[..m].iter_mut()))
        {
            let (p1, e1) = two_prod_split(w.up.hi, a, up_split, sa);
            let (p2, e2) = two_prod_split(w.down.hi, b, down_split, sb);
            let (s, e3) = two_sum(p1, p2);
            let tail =
                (e1 + e2 + e3) + (w.up.hi * la + w.down.hi * lb) + (w.up.lo * a + w.down.lo * b);
            let (h, l) = quick_two_sum(s, tail);
            let exercise = american && (phi > h || (phi == h && l < zero));
            let negligible = h.abs() < tiny;
            *h_out = if exercise {
                phi
            } else if negligible {
                zero
            } else {
                h
            };
            *l_out = if exercise || negligible { zero } else { l };
        }
        std::mem::swap(&mut hi, &mut next_hi);
        std::mem::swap(&mut lo, &mut next_lo);
        visit(n, &hi[..m]);
    }
    hi[0]
}

/// `theta / rho` and `(1 - theta) / rho` to twice working precision.
///
/// Rounding these once per step biases every level the same way, and over
/// `10^4` steps that drift reaches `1e-12` relative. Carrying the low parts
/// leaves only the per-node rounding, which does not accumulate coherently.
#[derive(Debug, Clone, Copy)]
struct DiscountedWeights<T> {
    up: Dd<T>,
    down: Dd<T>,
}

impl<T: Real> DiscountedWeights<T> {
    fn new(rho: T, eta: T, dx: T) -> Self {
        let u = Dd::exp(dx);
        let d = Dd::exp(-dx);
        let (rho, eta) = (Dd::new(rho), Dd::new(eta));
        let denom = rho.mul(eta).mul(u.sub(d));
        Self {
            up: rho.sub(eta.mul(d)).div(denom),
            down: eta.mul(u).sub(rho).div(denom),
        }
    }
}

/// Largest surface kept with [`Storage::Full`], in cells (8 bytes each for `f64`).
pub const FULL_STORAGE_CELL_CAP: usize = 200_000_000;

pub(crate) fn check_full_storage(n_steps: usize, width: usize) -> Result<()> {
    let cells = (n_steps + 1).saturating_mul(width);
    if cells > FULL_STORAGE_CELL_CAP {
        return Err(Error::Domain(format!(
            "full surface would hold {cells} cells (N = {n_steps}); use root-only storage or a larger dx"
        )));
    }
    Ok(())
}

/// Per-level boundary indices and `S(t)` for an American lattice.
pub fn extract_boundary_btm<T: Real>(sol: &LatticeSolution<T>) -> Result<BoundaryOutcome<T>> {
    extract_boundary(sol)
}

/// Maps `(call, S, E, r, q)` to `(put, E, S, q, r)` and vice versa.
///
/// On the same partition the image has exactly the same tree price.
pub fn symmetry_transform<T: Real>(
    spec: &OptionSpec<T>,
    cs: &CoefficientSet<T>,
) -> Result<(OptionSpec<T>, CoefficientSet<T>)> {
    let image = OptionSpec::new(
        spec.kind.flipped(),
        spec.style,
        spec.spot,
        spec.strike,
        spec.maturity,
    )?;
    Ok((image, cs.swapped()))
}

/// `|V - V_image| / max(|V|, tiny)` between a contract and its symmetry image.
pub fn symmetry_residual_btm<T: Real>(
    spec: &OptionSpec<T>,
    cs: &CoefficientSet<T>,
    dx: T,
    options: &BtmOptions,
) -> Result<(T, T, T)> {
    let (image, swapped) = symmetry_transform(spec, cs)?;
    let a = price_btm_dx(spec, cs, dx, options)?.price();
    let b = price_btm_dx(&image, &swapped, dx, options)?.price();
    Ok((a, b, relative_gap(a, b)))
}

pub(crate) fn relative_gap<T: Real>(a: T, b: T) -> T {
    let scale = a.abs().max(b.abs());
    if scale == T::zero() {
        T::zero()
    } else {
        (a - b).abs() / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoefficientCurve;
    use crate::option::{ExerciseStyle, OptionKind};

    fn unit_put(maturity: f64) -> OptionSpec<f64> {
        OptionSpec::american_put(1.0, 1.0, maturity).unwrap()
    }

    #[test]
    fn theta_symmetric_case() {
        let u = 1.2f64;
        let d = 1.0 / u;
        let p = theta(1.003, 1.003, u).unwrap();
        assert!((p.theta - (1.0 - d) / (u - d)).abs() < 1e-15);
        assert!((p.theta - p.theta_dual).abs() < 1e-15);
    }

    #[test]
    fn theta_hand_value() {
        let u = 0.1f64.exp();
        let p = theta(1.001, 1.0, u).unwrap();
        let want = (1.001 - (-0.1f64).exp()) / (0.1f64.exp() - (-0.1f64).exp());
        assert!((p.theta - want).abs() < 1e-15);
        assert!((p.theta - 0.48001).abs() < 1e-5);
    }

    #[test]
    fn theta_duality_identities() {
        let u = 0.07f64.exp();
        let d = 1.0 / u;
        let (rho, eta) = (1.0023, 1.0011);
        let p = theta(rho, eta, u).unwrap();
        assert!((p.theta * u / rho - (1.0 - p.theta_dual) / eta).abs() < 1e-15);
        assert!(((1.0 - p.theta) * d / rho - p.theta_dual / eta).abs() < 1e-15);
    }

    #[test]
    fn theta_rejects_branch_violation() {
        assert!(matches!(theta(1.2, 1.0, 1.1), Err(Error::Branch { .. })));
        assert!(matches!(theta(0.8, 1.0, 1.1), Err(Error::Branch { .. })));
    }

    #[test]
    fn two_step_put_matches_hand_rollback() {
        let cs = CoefficientSet::constant(0.1, 0.0, 1.0, 0.02).unwrap();
        let sol = price_btm_dx(&unit_put(0.02), &cs, 0.1, &BtmOptions::default()).unwrap();
        assert_eq!(sol.partition().len(), 2);
        // down node at level 1 is exercised
        let phi = 1.0 - (-0.1f64).exp();
        assert_eq!(sol.value(1, -1), Some(phi));
        assert!((sol.price() - 0.049434).abs() < 5e-6, "{}", sol.price());
    }

    #[test]
    fn terminal_level_is_payoff() {
        let cs = CoefficientSet::constant(0.05, 0.02, 0.3, 1.0).unwrap();
        let sol = price_btm(&unit_put(1.0), &cs, 0.05f64.exp()).unwrap();
        let n = sol.partition().len();
        for j in -(n as i64)..=n as i64 {
            assert_eq!(sol.value(n, j), Some(sol.payoff(j)));
        }
    }

    #[test]
    fn zero_strike_put_is_worthless() {
        let cs = CoefficientSet::constant(0.1, 0.0, 1.0, 0.5).unwrap();
        let spec = OptionSpec::american_put(0.0, 1.0, 0.5).unwrap();
        let sol = price_btm(&spec, &cs, 0.1f64.exp()).unwrap();
        for n in 0..sol.levels() {
            for j in sol.index_range(n).unwrap() {
                assert_eq!(sol.value(n, j), Some(0.0));
            }
        }
    }

    #[test]
    fn american_dominates_european() {
        let cs = CoefficientSet::constant(0.08, 0.03, 0.4, 1.0).unwrap();
        for kind in [OptionKind::Put, OptionKind::Call] {
            let am = OptionSpec::new(kind, ExerciseStyle::American, 1.1, 1.0, 1.0).unwrap();
            let eu = OptionSpec {
                style: ExerciseStyle::European,
                ..am
            };
            let a = price_btm(&am, &cs, 0.04f64.exp()).unwrap();
            let e = price_btm(&eu, &cs, 0.04f64.exp()).unwrap();
            for n in 0..a.levels() {
                for j in a.index_range(n).unwrap() {
                    assert!(a.value(n, j).unwrap() >= e.value(n, j).unwrap());
                }
            }
        }
    }

    #[test]
    fn compensated_rollback_agrees_and_keeps_symmetry() {
        let cs = CoefficientSet::constant(0.073, 0.031, 0.41, 0.9).unwrap();
        let spec = OptionSpec::american_call(0.93, 1.17, 0.9).unwrap();
        let dx = 0.41 * (0.9f64 / 3000.0).sqrt();
        let plain = price_btm_dx(&spec, &cs, dx, &BtmOptions::default()).unwrap();
        let opts = BtmOptions {
            storage: Storage::RootOnly,
            summation: Summation::Compensated,
            ..Default::default()
        };
        let comp = price_btm_dx(&spec, &cs, dx, &opts).unwrap();
        assert!(relative_gap(plain.price(), comp.price()) < 1e-12);
        let (_, _, rel) = symmetry_residual_btm(&spec, &cs, dx, &opts).unwrap();
        assert!(rel < 1e-14, "{rel:e}");
    }

    #[test]
    fn root_only_matches_full() {
        let cs = CoefficientSet::constant(0.05, 0.01, 0.25, 1.0).unwrap();
        let spec = unit_put(1.0);
        let u = 0.02f64.exp();
        let full = price_btm(&spec, &cs, u).unwrap();
        let opts = BtmOptions {
            storage: Storage::RootOnly,
            ..Default::default()
        };
        let lean = price_btm_with(&spec, &cs, u, &opts).unwrap();
        assert_eq!(full.price(), lean.price());
        assert!(lean.row(0).is_none());
    }

    #[test]
    fn put_boundary_sits_below_strike_near_maturity_without_yield() {
        // N even so that level N-1 holds odd j; the boundary is j = -1
        let cs = CoefficientSet::constant(0.1, 0.0, 1.0, 0.04).unwrap();
        let sol = price_btm_dx(&unit_put(0.04), &cs, 0.1, &BtmOptions::default()).unwrap();
        let n = sol.partition().len();
        let b = extract_boundary_btm(&sol).unwrap();
        let b = b.boundary().unwrap();
        assert_eq!(b.at_level(n - 1).unwrap().index, -1);
    }

    #[test]
    fn call_without_yield_has_no_boundary() {
        let cs = CoefficientSet::constant(0.1, 0.0, 1.0, 1.0).unwrap();
        let spec = OptionSpec::american_call(1.0, 1.0, 1.0).unwrap();
        let sol = price_btm(&spec, &cs, 0.1f64.exp()).unwrap();
        assert!(extract_boundary_btm(&sol).unwrap().is_none());
    }

    #[test]
    fn boundary_needs_american_full_surface() {
        let cs = CoefficientSet::constant(0.1, 0.0, 1.0, 1.0).unwrap();
        let eu = OptionSpec::new(OptionKind::Put, ExerciseStyle::European, 1.0, 1.0, 1.0).unwrap();
        let sol = price_btm(&eu, &cs, 0.1f64.exp()).unwrap();
        assert!(extract_boundary_btm(&sol).is_err());
    }

    #[test]
    fn symmetry_identity_on_small_tree() {
        let cs = CoefficientSet::constant(0.1, 0.2, 1.0, 1.0).unwrap();
        let call = OptionSpec::american_call(1.0, 1.0, 1.0).unwrap();
        let (_, _, rel) = symmetry_residual_btm(&call, &cs, 0.1, &BtmOptions::default()).unwrap();
        assert!(rel <= 1e-13, "{rel}");
        let (image, swapped) = symmetry_transform(&call, &cs).unwrap();
        assert_eq!(image.kind, OptionKind::Put);
        assert_eq!(swapped.r().eval(0.3), 0.2);
        assert_eq!(swapped.q().eval(0.3), 0.1);
    }

    #[test]
    fn symmetry_fixed_point() {
        let cs = CoefficientSet::constant(0.07, 0.07, 0.5, 1.0).unwrap();
        let call = OptionSpec::american_call(1.0, 1.0, 1.0).unwrap();
        let put = OptionSpec::american_put(1.0, 1.0, 1.0).unwrap();
        let u = 0.05f64.exp();
        let c = price_btm(&call, &cs, u).unwrap().price();
        let p = price_btm(&put, &cs, u).unwrap().price();
        assert!((c - p).abs() <= 1e-14 * c);
    }

    #[test]
    fn homogeneity_under_doubling_is_exact() {
        let sigma = CoefficientCurve::linear(vec![(0.0, 0.3), (1.0, 0.5)]).unwrap();
        let cs = CoefficientSet::new(
            CoefficientCurve::constant(0.04),
            CoefficientCurve::constant(0.01),
            sigma,
            1.0,
        )
        .unwrap();
        let spec = OptionSpec::american_put(1.1, 0.9, 1.0).unwrap();
        let u = 0.03f64.exp();
        let a = price_btm(&spec, &cs, u).unwrap().price();
        let b = price_btm(&spec.scaled(2.0), &cs, u).unwrap().price();
        assert_eq!(b, 2.0 * a);
    }

    #[test]
    fn branch_failure_reports_step() {
        // rho = 1.0125 > u = e^0.01
        let cs = CoefficientSet::constant(5.0, 0.0, 0.2, 0.1).unwrap();
        let err = price_btm(&unit_put(0.1), &cs, 0.01f64.exp()).unwrap_err();
        assert!(matches!(err, Error::Branch { step: 0, .. }), "{err}");
    }
}
