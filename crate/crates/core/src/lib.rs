//! American and European option pricing on lattices adapted to time-dependent
//! rate `r(t)`, yield `q(t)` and volatility `sigma(t)`.
//!
//! Two engines share one time partition, built so that `sigma(t_n)^2 dt_n`
//! is constant:
//!
//! - [`btm`]: recombining binomial tree with up factor `u = e^dx`;
//! - [`eds`]: explicit difference scheme in log-price with weight `alpha`.
//!
//! [`analysis`] turns the monotonicity, symmetry, boundary and convergence
//! properties of both engines into runnable checks.
//!
//! The core is generic over [`Real`] (`f32` or `f64`); the aliases at the crate
//! root fix the scalar to `f64`.
//!
//! ```
//! use tdlattice::{price_btm_dx, CoefficientSet, OptionSpec};
//!
//! let cs = CoefficientSet::constant(0.1, 0.0, 1.0, 0.02).unwrap();
//! let put = OptionSpec::american_put(1.0, 1.0, 0.02).unwrap();
//! let sol = price_btm_dx(&put, &cs, 0.1, &Default::default()).unwrap();
//! assert!((sol.price() - 0.049434).abs() < 5e-6);
//! ```

pub mod analysis;
pub mod boundary;
pub mod btm;
pub mod coefficients;
mod dd;
pub mod eds;
pub mod error;
pub mod export;
pub mod option;
pub mod partition;
pub mod scalar;
pub mod surface;

pub use boundary::{extract_boundary, BoundaryNode, BoundaryOutcome, ExerciseBoundary};
pub use btm::{
    extract_boundary_btm, price_btm, price_btm_dx, price_btm_with, symmetry_transform, theta,
    BtmOptions, Storage, ThetaPair,
};
pub use coefficients::{
    check_conditions, Condition, ConditionReport, Interpolation, Rates, Violation,
};
pub use eds::{
    a_coeff, eds_symmetry_residual, extract_boundary_eds, near_maturity_bounds, solve_eds,
    solve_eds_with, APair, EdsOptions, StepOperator, SymmetryResidual,
};
pub use error::{Error, Result};
pub use option::{ExerciseStyle, OptionKind};
pub use partition::{build_partition, PartitionOptions, Step};
pub use scalar::Real;
pub use surface::ValueSurface;

pub type CoefficientCurve = coefficients::CoefficientCurve<f64>;
pub type CoefficientSet = coefficients::CoefficientSet<f64>;
pub type OptionSpec = option::OptionSpec<f64>;
pub type TimePartition = partition::TimePartition<f64>;
pub type LatticeSolution = btm::LatticeSolution<f64>;
pub type GridSolution = eds::GridSolution<f64>;
