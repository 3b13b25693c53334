//! Explicit difference scheme for the obstacle problem in log-price.
//!
//! On `x_j = c + j dx` with `c = ln S0` and the adapted partition,
//!
//! ```text
//! U_j^n = max{ ((1 - alpha) U_j^{n+1} + alpha (a_n U_{j+1}^{n+1} + (1 - a_n) U_{j-1}^{n+1})) / rho_n, phi_j }
//! a_n   = 1/2 + dx / (2 sigma_n^2) (r_n - q_n - sigma_n^2 / 2)
//! ```
//!
//! The grid is cut at `|x - c| <= W` and the two cut columns hold the payoff.

use std::ops::RangeInclusive;

use serde::Serialize;

use crate::boundary::{extract_boundary, BoundaryOutcome};
use crate::btm::{relative_gap, Storage};
use crate::coefficients::CoefficientSet;
use crate::error::{Error, Result};
use crate::option::{OptionKind, OptionSpec};
use crate::partition::{build_partition, PartitionOptions, TimePartition};
use crate::scalar::Real;
use crate::surface::ValueSurface;

pub const DEFAULT_HALF_WIDTH_K: f64 = 6.0;
/// Narrowest accepted truncation, in units of `sigma_hi sqrt(T)`.
pub const MIN_HALF_WIDTH_K: f64 = 4.0;

/// Up weight `a_n` and its image `a'_n` with `r` and `q` exchanged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct APair<T> {
    pub a: T,
    pub a_swapped: T,
}

fn raw_a<T: Real>(r: T, q: T, sigma: T, dx: T) -> T {
    let half = T::lit(0.5);
    let s2 = sigma * sigma;
    half + dx / (T::lit(2.0) * s2) * (r - q - half * s2)
}

/// `a_n`; fails with a stability error (step filled in by the solver) outside `(0, 1)`.
pub fn a_coeff<T: Real>(r: T, q: T, sigma: T, dx: T) -> Result<APair<T>> {
    if !(sigma > T::zero()) {
        return Err(Error::invalid(
            "sigma",
            format!("must be positive, got {sigma}"),
        ));
    }
    let a = raw_a(r, q, sigma, dx);
    if !(a > T::zero() && a < T::one()) {
        return Err(Error::Stability {
            step: 0,
            time: 0.0,
            a: a.as_f64(),
        });
    }
    Ok(APair {
        a,
        a_swapped: raw_a(q, r, sigma, dx),
    })
}

/// One backward step `U^n = F_n U^{n+1}` on a truncated row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOperator<T> {
    pub alpha: T,
    pub a: T,
    pub rho: T,
    pub american: bool,
}

impl<T: Real> StepOperator<T> {
    /// Interior cells use the stencil, the first and last cells copy `phi`.
    pub fn apply(&self, next: &[T], phi: &[T], out: &mut [T]) -> Result<()> {
        let len = next.len();
        if phi.len() != len || out.len() != len {
            return Err(Error::Internal(format!(
                "row lengths differ: next {len}, payoff {}, out {}",
                phi.len(),
                out.len()
            )));
        }
        if len < 3 {
            return Err(Error::Internal(format!(
                "row of length {len} has no interior"
            )));
        }
        out[0] = phi[0];
        out[len - 1] = phi[len - 1];
        for i in 1..len - 1 {
            let cont = self.continuation(next[i - 1], next[i], next[i + 1]);
            out[i] = if self.american {
                cont.max(phi[i])
            } else {
                cont
            };
        }
        Ok(())
    }

    /// Discounted continuation value from the three cells below.
    #[inline]
    pub fn continuation(&self, down: T, mid: T, up: T) -> T {
        let one = T::one();
        ((one - self.alpha) * mid + self.alpha * (self.a * up + (one - self.a) * down)) / self.rho
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdsOptions<T> {
    pub dx: T,
    pub alpha: T,
    pub half_width_k: T,
    pub partition: PartitionOptions,
    pub storage: Storage,
}

impl<T: Real> EdsOptions<T> {
    pub fn new(dx: T, alpha: T) -> Self {
        Self {
            dx,
            alpha,
            half_width_k: T::lit(DEFAULT_HALF_WIDTH_K),
            partition: PartitionOptions::default(),
            storage: Storage::Full,
        }
    }

    pub fn root_only(mut self) -> Self {
        self.storage = Storage::RootOnly;
        self
    }
}

/// Solved grid.
#[derive(Debug, Clone)]
pub struct GridSolution<T> {
    spec: OptionSpec<T>,
    partition: TimePartition<T>,
    half_width: T,
    j_max: i64,
    a_coeffs: Vec<APair<T>>,
    /// `rows[n][j + j_max]` for `j` in `[-j_max, j_max]`
    rows: Option<Vec<Vec<T>>>,
    root: T,
}

impl<T: Real> GridSolution<T> {
    pub fn price(&self) -> T {
        self.root
    }

    pub fn alpha(&self) -> T {
        self.partition.alpha()
    }

    /// Truncation half-width `W` in log-price.
    pub fn half_width(&self) -> T {
        self.half_width
    }

    /// Grid spans `j` in `[-j_max, j_max]`.
    pub fn j_max(&self) -> i64 {
        self.j_max
    }

    pub fn a_coeffs(&self) -> &[APair<T>] {
        &self.a_coeffs
    }

    /// Order of the per-step symmetry residual: 3 when `alpha = 1`, else 2.
    pub fn delta(&self) -> u32 {
        symmetry_order(self.alpha())
    }

    pub fn gap(&self) -> T {
        self.partition.gap()
    }

    /// Operator of step `n`; panics if `n >= N`.
    pub fn operator(&self, n: usize) -> StepOperator<T> {
        operator(&self.partition, &self.a_coeffs, n, self.spec.is_american())
    }
}

pub fn symmetry_order<T: Real>(alpha: T) -> u32 {
    if alpha == T::one() {
        3
    } else {
        2
    }
}

impl<T: Real> ValueSurface<T> for GridSolution<T> {
    fn spec(&self) -> &OptionSpec<T> {
        &self.spec
    }

    fn partition(&self) -> &TimePartition<T> {
        &self.partition
    }

    fn index_range(&self, n: usize) -> Option<RangeInclusive<i64>> {
        let rows = self.rows.as_ref()?;
        (n < rows.len()).then(|| -self.j_max..=self.j_max)
    }

    fn value(&self, n: usize, j: i64) -> Option<T> {
        let row = self.rows.as_ref()?.get(n)?;
        let i = j + self.j_max;
        (i >= 0).then(|| row.get(i as usize).copied()).flatten()
    }

    fn engine(&self) -> &'static str {
        "eds"
    }

    fn is_cut(&self, _n: usize, j: i64) -> bool {
        j.abs() == self.j_max
    }

    fn root(&self) -> T {
        self.root
    }
}

/// `W = |ln(E/S0)| + k sigma_hi sqrt(T)`; the log-moneyness term is dropped when `E = 0`.
pub fn truncation_half_width<T: Real>(spec: &OptionSpec<T>, sigma_hi: T, k: T) -> T {
    let moneyness = if spec.strike > T::zero() {
        (spec.strike / spec.spot).ln().abs()
    } else {
        T::zero()
    };
    moneyness + k * sigma_hi * spec.maturity.sqrt()
}

pub fn solve_eds<T: Real>(
    spec: &OptionSpec<T>,
    cs: &CoefficientSet<T>,
    dx: T,
    alpha: T,
    half_width_k: T,
) -> Result<GridSolution<T>> {
    let options = EdsOptions {
        half_width_k,
        ..EdsOptions::new(dx, alpha)
    };
    solve_eds_with(spec, cs, &options)
}

pub fn solve_eds_with<T: Real>(
    spec: &OptionSpec<T>,
    cs: &CoefficientSet<T>,
    options: &EdsOptions<T>,
) -> Result<GridSolution<T>> {
    let grid = setup(spec, cs, options)?;
    let american = spec.is_american();
    match options.storage {
        Storage::Full => {
            let n_steps = grid.partition.len();
            crate::btm::check_full_storage(n_steps, grid.phi.len())?;
            let mut rows = Vec::with_capacity(n_steps + 1);
            let root = sweep(&grid, american, |_, row| rows.push(row.to_vec()))?;
            rows.reverse();
            Ok(grid.finish(spec, Some(rows), root))
        }
        Storage::RootOnly => {
            let root = sweep_cone(
                &grid.partition,
                &grid.a_coeffs,
                &grid.phi,
                grid.j_max,
                american,
            );
            Ok(grid.finish(spec, None, root))
        }
    }
}

/// Full-width sweep handing each row `j = -j_max..=j_max` to `visit(n, row)`
/// from `n = N` down to `0`. The returned solution keeps no rows.
pub fn solve_eds_visit<T: Real>(
    spec: &OptionSpec<T>,
    cs: &CoefficientSet<T>,
    options: &EdsOptions<T>,
    visit: impl FnMut(usize, &[T]),
) -> Result<GridSolution<T>> {
    let grid = setup(spec, cs, options)?;
    let root = sweep(&grid, spec.is_american(), visit)?;
    Ok(grid.finish(spec, None, root))
}

struct Setup<T> {
    partition: TimePartition<T>,
    a_coeffs: Vec<APair<T>>,
    half_width: T,
    j_max: i64,
    phi: Vec<T>,
}

impl<T: Real> Setup<T> {
    fn finish(self, spec: &OptionSpec<T>, rows: Option<Vec<Vec<T>>>, root: T) -> GridSolution<T> {
        GridSolution {
            spec: *spec,
            partition: self.partition,
            half_width: self.half_width,
            j_max: self.j_max,
            a_coeffs: self.a_coeffs,
            rows,
            root,
        }
    }
}

fn setup<T: Real>(
    spec: &OptionSpec<T>,
    cs: &CoefficientSet<T>,
    options: &EdsOptions<T>,
) -> Result<Setup<T>> {
    spec.validate()?;
    let k = options.half_width_k;
    if !(k >= T::lit(MIN_HALF_WIDTH_K)) || !k.is_finite() {
        return Err(Error::invalid(
            "half_width_k",
            format!("must be finite and at least {MIN_HALF_WIDTH_K}, got {k}"),
        ));
    }
    let partition = build_partition(
        cs,
        spec.maturity,
        options.dx,
        options.alpha,
        &options.partition,
    )?;
    let dx = partition.dx();

    let a_coeffs = partition
        .steps()
        .iter()
        .enumerate()
        .map(|(n, s)| {
            a_coeff(s.r, s.q, s.sigma, dx).map_err(|e| e.at_step(n, partition.nodes()[n]))
        })
        .collect::<Result<Vec<_>>>()?;

    let half_width = truncation_half_width(spec, cs.sigma_hi(), k);
    let j_max = (half_width / dx).ceil().to_i64().ok_or_else(|| {
        Error::Truncation(format!(
            "half-width {half_width} over dx {dx} is not representable"
        ))
    })?;
    if j_max < 2 {
        return Err(Error::Truncation(format!(
            "grid holds only j in [-{j_max}, {j_max}] (W = {half_width}, dx = {dx})"
        )));
    }

    let width = (2 * j_max + 1) as usize;
    let phi: Vec<T> = (0..width)
        .map(|i| {
            let j = i as i64 - j_max;
            spec.payoff(spec.spot * (T::from_index(j) * dx).exp())
        })
        .collect();
    Ok(Setup {
        partition,
        a_coeffs,
        half_width,
        j_max,
        phi,
    })
}

fn sweep<T: Real>(
    grid: &Setup<T>,
    american: bool,
    mut visit: impl FnMut(usize, &[T]),
) -> Result<T> {
    let mut next = grid.phi.clone();
    let mut cur = grid.phi.clone();
    visit(grid.partition.len(), &next);
    for n in (0..grid.partition.len()).rev() {
        operator(&grid.partition, &grid.a_coeffs, n, american).apply(&next, &grid.phi, &mut cur)?;
        std::mem::swap(&mut next, &mut cur);
        visit(n, &next);
    }
    Ok(next[grid.j_max as usize])
}

fn operator<T: Real>(
    partition: &TimePartition<T>,
    a: &[APair<T>],
    n: usize,
    american: bool,
) -> StepOperator<T> {
    let step = partition.steps()[n];
    StepOperator {
        alpha: step.alpha,
        a: a[n].a,
        rho: step.rho,
        american,
    }
}

/// Two-row sweep restricted to the cells that can reach the root, `|j| <= n`.
/// Produces the same arithmetic as the full sweep on those cells.
fn sweep_cone<T: Real>(
    partition: &TimePartition<T>,
    a: &[APair<T>],
    phi: &[T],
    j_max: i64,
    american: bool,
) -> T {
    let centre = j_max as usize;
    let mut next = phi.to_vec();
    let mut cur = phi.to_vec();
    for n in (0..partition.len()).rev() {
        let op = operator(partition, a, n, american);
        let reach = (n as i64).min(j_max) as usize;
        for i in centre - reach..=centre + reach {
            cur[i] = if i == 0 || i == phi.len() - 1 {
                phi[i]
            } else {
                let cont = op.continuation(next[i - 1], next[i], next[i + 1]);
                if american {
                    cont.max(phi[i])
                } else {
                    cont
                }
            };
        }
        std::mem::swap(&mut next, &mut cur);
    }
    next[centre]
}

pub fn extract_boundary_eds<T: Real>(sol: &GridSolution<T>) -> Result<BoundaryOutcome<T>> {
    extract_boundary(sol)
}

/// Log-price bracket for the boundary at the last level before maturity.
///
/// Put: `[ln m - 2dx, ln m]` with `m = min(E, r E / q)` (`m = E` when `q = 0`).
/// Call: `[ln m, ln m + 2dx]` with `m = max(E, r E / q)`; `None` when `q = 0`.
pub fn near_maturity_bounds<T: Real>(
    spec: &OptionSpec<T>,
    partition: &TimePartition<T>,
) -> Option<(T, T)> {
    let last = partition.steps().last()?;
    let (e, r, q) = (spec.strike, last.r, last.q);
    let two_dx = T::lit(2.0) * partition.dx();
    match spec.kind {
        OptionKind::Put => {
            let m = if q == T::zero() { e } else { e.min(r * e / q) };
            let hi = m.ln();
            Some((hi - two_dx, hi))
        }
        OptionKind::Call => {
            if q == T::zero() {
                return None;
            }
            let lo = e.max(r * e / q).ln();
            Some((lo, lo + two_dx))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetryResidual<T> {
    pub price: T,
    pub image_price: T,
    /// `|price - image_price|`
    pub residual: T,
    /// Relative error of `U(3 S0, 3 E) = 3 U(S0, E)`.
    pub homogeneity_error: T,
    pub delta: u32,
}

/// Compares a contract with its call-put image `(E, S0, q, r)`, each solved on
/// its own grid, and checks homogeneity under scaling by 3.
pub fn eds_symmetry_residual<T: Real>(
    spec: &OptionSpec<T>,
    cs: &CoefficientSet<T>,
    options: &EdsOptions<T>,
) -> Result<SymmetryResidual<T>> {
    let lean = EdsOptions {
        storage: Storage::RootOnly,
        ..options.clone()
    };
    let (image, swapped) = crate::btm::symmetry_transform(spec, cs)?;
    let price = solve_eds_with(spec, cs, &lean)?.price();
    let image_price = solve_eds_with(&image, &swapped, &lean)?.price();
    let mu = T::lit(3.0);
    let scaled = solve_eds_with(&spec.scaled(mu), cs, &lean)?.price();
    Ok(SymmetryResidual {
        price,
        image_price,
        residual: (price - image_price).abs(),
        homogeneity_error: relative_gap(scaled, mu * price),
        delta: symmetry_order(options.alpha),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::btm::{price_btm_dx, theta};
    use crate::option::ExerciseStyle;

    fn constant_rates(maturity: f64) -> CoefficientSet<f64> {
        CoefficientSet::constant(0.1, 0.0, 1.0, maturity).unwrap()
    }

    #[test]
    fn a_coeff_hand_values() {
        let p = a_coeff(0.1f64, 0.0, 1.0, 0.1).unwrap();
        assert!((p.a - 0.48).abs() < 1e-15);
        assert!((p.a_swapped - 0.47).abs() < 1e-15);
        let p = a_coeff(0.05f64, 0.05, 0.7, 0.02).unwrap();
        assert!((p.a - (0.5 - 0.02 / 4.0)).abs() < 1e-15);
    }

    #[test]
    fn a_coeff_rejects_unstable_step() {
        assert!(matches!(
            a_coeff(5.0, 0.0, 0.1, 0.5),
            Err(Error::Stability { .. })
        ));
    }

    #[test]
    fn a_tracks_theta_to_third_order() {
        let (r, q, sigma) = (0.1, 0.03, 0.8);
        let mut prev = f64::INFINITY;
        for dx in [0.1, 0.05, 0.025] {
            let dt: f64 = dx * dx / (sigma * sigma);
            let th = theta(1.0 + r * dt, 1.0 + q * dt, dx.exp()).unwrap().theta;
            let a = a_coeff(r, q, sigma, dx).unwrap().a;
            let err = (a - th).abs();
            assert!(err < 2.0 * dx * dx * dx, "dx {dx}: {err}");
            assert!(err < prev / 6.0);
            prev = err;
        }
    }

    #[test]
    fn alpha_one_is_two_point_rule() {
        let op = StepOperator {
            alpha: 1.0,
            a: 0.3,
            rho: 1.01,
            american: false,
        };
        let next = [1.0, 2.0, 7.0, 3.0];
        let mut out = [0.0; 4];
        op.apply(&next, &[0.0; 4], &mut out).unwrap();
        assert_eq!(out[1], (0.3 * 7.0 + 0.7 * 1.0) / 1.01);
        assert_eq!(out[2], (0.3 * 3.0 + 0.7 * 2.0) / 1.01);
    }

    #[test]
    fn apply_checks_lengths() {
        let op = StepOperator {
            alpha: 0.5,
            a: 0.5,
            rho: 1.0,
            american: true,
        };
        let mut out = [0.0; 3];
        assert!(matches!(
            op.apply(&[0.0; 4], &[0.0; 3], &mut out),
            Err(Error::Internal(_))
        ));
    }

    #[test]
    fn terminal_level_is_payoff() {
        let spec = OptionSpec::american_put(1.0, 1.0, 0.5).unwrap();
        let sol = solve_eds(&spec, &constant_rates(0.5), 0.05, 0.7, 6.0).unwrap();
        let n = sol.partition().len();
        for j in sol.index_range(n).unwrap() {
            assert_eq!(sol.value(n, j), Some(sol.payoff(j)));
        }
        assert_eq!(sol.delta(), 2);
    }

    #[test]
    fn root_only_matches_full() {
        let cs = CoefficientSet::constant(0.06, 0.02, 0.3, 1.0).unwrap();
        for kind in [OptionKind::Put, OptionKind::Call] {
            let spec = OptionSpec::new(kind, ExerciseStyle::American, 1.0, 1.1, 1.0).unwrap();
            for alpha in [1.0, 0.6] {
                let opts = EdsOptions::new(0.03, alpha);
                let full = solve_eds_with(&spec, &cs, &opts).unwrap();
                let lean = solve_eds_with(&spec, &cs, &opts.clone().root_only()).unwrap();
                assert_eq!(full.price(), lean.price());
            }
        }
    }

    #[test]
    fn close_to_tree_on_matched_lattice() {
        let spec = OptionSpec::american_put(1.0, 1.0, 1.0).unwrap();
        let cs = constant_rates(1.0);
        let dx = 0.025f64;
        let grid = solve_eds(&spec, &cs, dx, 1.0, 6.0).unwrap();
        let tree = price_btm_dx(&spec, &cs, dx, &Default::default()).unwrap();
        assert_eq!(grid.partition().len(), tree.partition().len());
        assert!((grid.price() - tree.price()).abs() < 1e-4);
        assert_eq!(grid.delta(), 3);
    }

    #[test]
    fn american_dominates_european() {
        let cs = CoefficientSet::constant(0.08, 0.0, 0.5, 1.0).unwrap();
        let am = OptionSpec::american_put(1.0, 1.0, 1.0).unwrap();
        let eu = OptionSpec {
            style: ExerciseStyle::European,
            ..am
        };
        let a = solve_eds(&am, &cs, 0.05, 0.8, 6.0).unwrap();
        let e = solve_eds(&eu, &cs, 0.05, 0.8, 6.0).unwrap();
        for n in 0..a.levels() {
            for j in a.index_range(n).unwrap() {
                assert!(a.value(n, j).unwrap() >= e.value(n, j).unwrap());
            }
        }
    }

    #[test]
    fn rejects_narrow_truncation() {
        let spec = OptionSpec::american_put(1.0, 1.0, 1.0).unwrap();
        let err = solve_eds(&spec, &constant_rates(1.0), 0.05, 1.0, 3.0).unwrap_err();
        assert!(matches!(
            err,
            Error::InvalidInput {
                field: "half_width_k",
                ..
            }
        ));
    }

    #[test]
    fn reports_unstable_step() {
        // a = 1/2 + 0.2 / 0.5 * (-2.125) < 0
        let cs = CoefficientSet::constant(0.0, 2.0, 0.5, 1.0).unwrap();
        let spec = OptionSpec::american_put(1.0, 1.0, 1.0).unwrap();
        let err = solve_eds(&spec, &cs, 0.2, 1.0, 6.0).unwrap_err();
        assert!(matches!(err, Error::Stability { step: 0, .. }), "{err}");
    }

    #[test]
    fn near_maturity_brackets() {
        let dx = 0.05;
        let part = |r: f64, q: f64| {
            let cs = CoefficientSet::constant(r, q, 1.0, 1.0).unwrap();
            build_partition(&cs, 1.0, dx, 1.0, &PartitionOptions::default()).unwrap()
        };
        let put = OptionSpec::american_put(1.0, 1.0, 1.0).unwrap();
        let call = OptionSpec::american_call(1.0, 1.0, 1.0).unwrap();

        let (lo, hi) = near_maturity_bounds(&put, &part(0.1, 0.05)).unwrap();
        assert_eq!((lo, hi), (-2.0 * dx, 0.0));
        let (_, hi) = near_maturity_bounds(&put, &part(0.1, 0.2)).unwrap();
        assert!((hi - 0.5f64.ln()).abs() < 1e-15);
        let (_, hi) = near_maturity_bounds(&put, &part(0.1, 0.0)).unwrap();
        assert_eq!(hi, 0.0);

        let (lo, hi) = near_maturity_bounds(&call, &part(0.2, 0.1)).unwrap();
        assert!((lo - 2f64.ln()).abs() < 1e-15);
        assert!((hi - lo - 2.0 * dx).abs() < 1e-15);
        assert!(near_maturity_bounds(&call, &part(0.2, 0.0)).is_none());
    }

    #[test]
    fn put_boundary_in_bracket() {
        let cs = CoefficientSet::constant(0.1, 0.2, 1.0, 1.0).unwrap();
        let spec = OptionSpec::american_put(1.0, 1.0, 1.0).unwrap();
        let sol = solve_eds(&spec, &cs, 0.05, 1.0, 6.0).unwrap();
        let n = sol.partition().len();
        let b = extract_boundary_eds(&sol).unwrap();
        let x = b.boundary().unwrap().at_level(n - 1).unwrap().log_price;
        let (lo, hi) = near_maturity_bounds(&spec, sol.partition()).unwrap();
        assert!(lo <= x && x <= hi, "{lo} <= {x} <= {hi}");
    }

    #[test]
    fn symmetry_residual_shrinks() {
        let cs = CoefficientSet::constant(0.1, 0.2, 1.0, 1.0).unwrap();
        let call = OptionSpec::american_call(1.0, 1.0, 1.0).unwrap();
        let coarse = eds_symmetry_residual(&call, &cs, &EdsOptions::new(0.05, 1.0)).unwrap();
        let fine = eds_symmetry_residual(&call, &cs, &EdsOptions::new(0.025, 1.0)).unwrap();
        assert!(fine.residual < coarse.residual);
        assert!(coarse.homogeneity_error <= 1e-12);
        assert_eq!(coarse.delta, 3);
    }
}
