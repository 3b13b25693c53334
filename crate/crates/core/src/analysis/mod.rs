//! Experiment harness: monotonicity audits, symmetry residuals, tree/grid
//! gap and self-convergence studies, and the canonical scenarios.
//!
//! Studies run in `f64`.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::boundary::{BoundaryOutcome, BoundaryTracker};
use crate::btm::{self, BtmOptions, LatticeSolution, Storage};
use crate::coefficients::CoefficientSet;
use crate::eds::{self, EdsOptions, GridSolution, DEFAULT_HALF_WIDTH_K};
use crate::error::Result;
use crate::option::OptionSpec;
use crate::partition::{build_partition, PartitionOptions, TimePartition};
use crate::surface::ValueSurface;

pub mod audit;
pub mod report;
pub mod scenarios;
pub mod studies;

pub use audit::{
    boundary_audit, complementarity_audit, monotonicity_audit, monotonicity_audit_with,
    no_boundary_audit, strike_monotonicity, time_monotonicity, AuditOptions,
};
pub use report::{log_log_slope, RefinementRow, Status, StudyReport, Verdict};
pub use scenarios::{run_checks, run_scenario, scenario_suite, Scenario};
pub use studies::{btm_eds_gap_study, convergence_study, symmetry_study, truncation_study};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Btm,
    Eds,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Btm => "btm",
            Engine::Eds => "eds",
        }
    }
}

/// Discretisation shared by both engines. The tree always uses `alpha = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Numerics {
    pub dx: f64,
    pub alpha: f64,
    pub half_width_k: f64,
    pub partition: PartitionOptions,
}

impl Numerics {
    pub fn new(dx: f64, alpha: f64) -> Self {
        Self {
            dx,
            alpha,
            half_width_k: DEFAULT_HALF_WIDTH_K,
            partition: PartitionOptions::default(),
        }
    }

    pub fn with_dx(&self, dx: f64) -> Self {
        Self { dx, ..self.clone() }
    }

    pub fn alpha_for(&self, engine: Engine) -> f64 {
        match engine {
            Engine::Btm => 1.0,
            Engine::Eds => self.alpha,
        }
    }

    pub fn btm_options(&self, storage: Storage) -> BtmOptions {
        BtmOptions {
            partition: self.partition.clone(),
            storage,
            ..Default::default()
        }
    }

    pub fn eds_options(&self, storage: Storage) -> EdsOptions<f64> {
        EdsOptions {
            dx: self.dx,
            alpha: self.alpha,
            half_width_k: self.half_width_k,
            partition: self.partition.clone(),
            storage,
        }
    }

    /// The partition an engine would build for `spec`.
    pub fn partition(
        &self,
        engine: Engine,
        spec: &OptionSpec<f64>,
        cs: &CoefficientSet<f64>,
    ) -> Result<TimePartition<f64>> {
        build_partition(
            cs,
            spec.maturity,
            self.dx,
            self.alpha_for(engine),
            &self.partition,
        )
    }
}

impl Default for Numerics {
    fn default() -> Self {
        Self::new(0.05, 1.0)
    }
}

/// Either engine's solution behind one surface.
#[derive(Debug, Clone)]
pub enum Solved {
    Tree(LatticeSolution<f64>),
    Grid(GridSolution<f64>),
}

impl Solved {
    pub fn engine_kind(&self) -> Engine {
        match self {
            Solved::Tree(_) => Engine::Btm,
            Solved::Grid(_) => Engine::Eds,
        }
    }

    /// `delta` of the grid's symmetry residual; `None` for the tree.
    pub fn delta(&self) -> Option<u32> {
        match self {
            Solved::Tree(_) => None,
            Solved::Grid(g) => Some(g.delta()),
        }
    }

    pub fn as_grid(&self) -> Option<&GridSolution<f64>> {
        match self {
            Solved::Grid(g) => Some(g),
            Solved::Tree(_) => None,
        }
    }

    pub fn boundary(&self) -> Result<BoundaryOutcome<f64>> {
        crate::boundary::extract_boundary(self)
    }
}

macro_rules! delegate {
    ($self:ident, $s:ident => $e:expr) => {
        match $self {
            Solved::Tree($s) => $e,
            Solved::Grid($s) => $e,
        }
    };
}

impl ValueSurface<f64> for Solved {
    fn spec(&self) -> &OptionSpec<f64> {
        delegate!(self, s => s.spec())
    }

    fn partition(&self) -> &TimePartition<f64> {
        delegate!(self, s => s.partition())
    }

    fn index_range(&self, n: usize) -> Option<RangeInclusive<i64>> {
        delegate!(self, s => s.index_range(n))
    }

    fn value(&self, n: usize, j: i64) -> Option<f64> {
        delegate!(self, s => s.value(n, j))
    }

    fn engine(&self) -> &'static str {
        delegate!(self, s => s.engine())
    }

    fn is_cut(&self, n: usize, j: i64) -> bool {
        delegate!(self, s => s.is_cut(n, j))
    }

    fn root(&self) -> f64 {
        delegate!(self, s => s.root())
    }
}

pub fn solve(
    engine: Engine,
    spec: &OptionSpec<f64>,
    cs: &CoefficientSet<f64>,
    numerics: &Numerics,
    storage: Storage,
) -> Result<Solved> {
    Ok(match engine {
        Engine::Btm => Solved::Tree(btm::price_btm_dx(
            spec,
            cs,
            numerics.dx,
            &numerics.btm_options(storage),
        )?),
        Engine::Eds => Solved::Grid(eds::solve_eds_with(
            spec,
            cs,
            &numerics.eds_options(storage),
        )?),
    })
}

/// Root price and boundary from a sweep that keeps two rows only.
#[derive(Debug, Clone)]
pub struct Tracked {
    pub price: f64,
    pub partition: TimePartition<f64>,
    /// `None` for European contracts.
    pub boundary: Option<BoundaryOutcome<f64>>,
}

pub fn solve_tracked(
    engine: Engine,
    spec: &OptionSpec<f64>,
    cs: &CoefficientSet<f64>,
    numerics: &Numerics,
) -> Result<Tracked> {
    let partition = numerics.partition(engine, spec, cs)?;
    let mut tracker = spec
        .is_american()
        .then(|| BoundaryTracker::new(spec, &partition));
    let price = match engine {
        Engine::Btm => {
            let (_, root) =
                btm::rollback_visit(spec, &partition, btm::Summation::Plain, |n, row| {
                    if let Some(t) = tracker.as_mut() {
                        t.observe(n, -(n as i64), row);
                    }
                })?;
            root
        }
        Engine::Eds => {
            let mut j_min = 0;
            let sol = eds::solve_eds_visit(
                spec,
                cs,
                &numerics.eds_options(Storage::RootOnly),
                |n, row| {
                    j_min = -((row.len() as i64 - 1) / 2);
                    if let Some(t) = tracker.as_mut() {
                        t.observe(n, j_min, row);
                    }
                },
            )?;
            sol.price()
        }
    };
    Ok(Tracked {
        price,
        partition,
        boundary: tracker.map(BoundaryTracker::finish),
    })
}
