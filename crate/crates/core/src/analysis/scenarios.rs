//! Canonical parameter sets and the full battery of checks for one instance.

use crate::btm::{self, relative_gap, Storage};
use crate::coefficients::{check_conditions, CoefficientCurve, CoefficientSet};
use crate::eds::{self, near_maturity_bounds};
use crate::error::Result;
use crate::option::{OptionKind, OptionSpec};
use crate::surface::ValueSurface;

use super::audit::{
    boundary_audit, complementarity_audit, monotonicity_audit, no_boundary_audit,
    strike_monotonicity,
};
use super::report::{Status, StudyReport, Verdict};
use super::{solve, Engine, Numerics};

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: &'static str,
    pub description: &'static str,
    pub spec: OptionSpec<f64>,
    pub coefficients: CoefficientSet<f64>,
}

/// Relative tolerance for the exact tree identities.
pub const EXACT_IDENTITY_TOL: f64 = 1e-12;
/// Strike bump used by the strike-monotonicity check.
pub const STRIKE_BUMP: f64 = 1.1;

/// - `constant-rate-put`: r = 0.1, q = 0, sigma = 1, T = 5, E = S0 = 1; every hypothesis holds.
/// - `rate-drop-put`: as above with r = 0.2 on [0, 2) and 0.1 from t = 2; the rate ratio falls.
/// - `yield-call`: call with r = 0.1, q = 0.2, sigma = 1, T = 1; pairs with the put (r, q) = (0.2, 0.1).
/// - `zero-yield-call`: call with r = 0.1, q = 0, sigma = 1, T = 1; no exercise boundary.
pub fn scenario_suite() -> Vec<Scenario> {
    let constant =
        |r: f64, q: f64, t: f64| CoefficientSet::constant(r, q, 1.0, t).expect("valid constants");
    let rate_drop = CoefficientSet::new(
        CoefficientCurve::step(vec![(0.0, 0.2), (2.0, 0.1)]).expect("valid knots"),
        CoefficientCurve::constant(0.0),
        CoefficientCurve::constant(1.0),
        5.0,
    )
    .expect("valid curves");
    let put = |t: f64| OptionSpec::american_put(1.0, 1.0, t).expect("valid spec");
    let call = |t: f64| OptionSpec::american_call(1.0, 1.0, t).expect("valid spec");
    vec![
        Scenario {
            name: "constant-rate-put",
            description: "American put, r = 0.1, q = 0, sigma = 1, T = 5, E = 1",
            spec: put(5.0),
            coefficients: constant(0.1, 0.0, 5.0),
        },
        Scenario {
            name: "rate-drop-put",
            description: "American put, r = 0.2 on [0, 2) then 0.1, q = 0, sigma = 1, T = 5, E = 1",
            spec: put(5.0),
            coefficients: rate_drop,
        },
        Scenario {
            name: "yield-call",
            description: "American call, r = 0.1, q = 0.2, sigma = 1, T = 1, E = 1",
            spec: call(1.0),
            coefficients: constant(0.1, 0.2, 1.0),
        },
        Scenario {
            name: "zero-yield-call",
            description: "American call, r = 0.1, q = 0, sigma = 1, T = 1, E = 1",
            spec: call(1.0),
            coefficients: constant(0.1, 0.0, 1.0),
        },
    ]
}

pub fn find_scenario(name: &str) -> Option<Scenario> {
    scenario_suite().into_iter().find(|s| s.name == name)
}

/// Solves the instance on both engines and runs every applicable check.
pub fn run_scenario(scenario: &Scenario, numerics: &Numerics) -> Result<StudyReport> {
    run_checks(
        scenario.name,
        &scenario.spec,
        &scenario.coefficients,
        numerics,
        &[Engine::Btm, Engine::Eds],
    )
}

pub fn run_checks(
    name: &str,
    spec: &OptionSpec<f64>,
    cs: &CoefficientSet<f64>,
    numerics: &Numerics,
    engines: &[Engine],
) -> Result<StudyReport> {
    let mut report = StudyReport::new(name);
    report.param("kind", format!("{:?}", spec.kind).to_lowercase());
    report.param("style", format!("{:?}", spec.style).to_lowercase());
    report.param("strike", spec.strike);
    report.param("spot", spec.spot);
    report.param("maturity", spec.maturity);
    report.param("dx", numerics.dx);
    report.param("alpha", numerics.alpha);
    report.param("half_width_k", numerics.half_width_k);

    for &engine in engines {
        let sol = solve(engine, spec, cs, numerics, Storage::Full)?;
        let part = sol.partition();
        let conditions = check_conditions(cs, part, part.up_factor());
        report.param(&format!("{}_price", engine.name()), sol.root());
        report.param(&format!("{}_steps", engine.name()), part.len());
        report.param(&format!("{}_gap", engine.name()), part.gap());

        report
            .verdicts
            .extend(monotonicity_audit(&sol, &conditions));
        if let Some(grid) = sol.as_grid() {
            report.verdicts.push(complementarity_audit(grid));
        }

        if spec.strike > 0.0 {
            let bumped_spec = OptionSpec {
                strike: spec.strike * STRIKE_BUMP,
                ..*spec
            };
            let bumped = solve(engine, &bumped_spec, cs, numerics, Storage::Full)?;
            report.verdicts.push(strike_monotonicity(&sol, &bumped));
        }

        if spec.is_american() {
            let outcome = sol.boundary()?;
            let no_yield_call =
                spec.kind == OptionKind::Call && part.steps().iter().all(|s| s.q == 0.0);
            if no_yield_call {
                report
                    .verdicts
                    .push(no_boundary_audit(&outcome, sol.engine()));
            } else {
                let hypotheses = match spec.kind {
                    OptionKind::Put => conditions.put_monotone_ok,
                    OptionKind::Call => conditions.call_monotone_ok && conditions.q_positive,
                };
                report
                    .verdicts
                    .push(boundary_audit(&outcome, sol.engine(), hypotheses));
                report.verdicts.push(bracket_verdict(&sol, &outcome));
            }
        }

        report
            .verdicts
            .push(homogeneity_verdict(engine, spec, cs, numerics)?);
        if spec.strike > 0.0 {
            report
                .verdicts
                .push(symmetry_verdict(engine, spec, cs, numerics)?);
        }
    }
    Ok(report)
}

fn bracket_verdict<S: ValueSurface<f64>>(
    sol: &S,
    outcome: &crate::boundary::BoundaryOutcome<f64>,
) -> Verdict {
    let v = Verdict::new(
        "near-maturity-bracket",
        "boundary at the last level before maturity within two cells of ln min/max(E, rE/q)",
        sol.engine(),
    );
    let part = sol.partition();
    let (Some((lo, hi)), Some(last)) = (
        near_maturity_bounds(sol.spec(), part),
        part.len().checked_sub(1),
    ) else {
        return v.with_status(Status::Skipped);
    };
    let Some(node) = outcome.boundary().and_then(|b| b.at_level(last)) else {
        return v
            .with_status(Status::Fail)
            .with_detail("no boundary node at the last level");
    };
    let x = node.log_price;
    let slack = 1e-12 * (1.0 + x.abs());
    let miss = (lo - x).max(x - hi);
    let mut v = v.with_detail(format!("x = {x}, bracket [{lo}, {hi}]"));
    if miss > slack {
        v.status = Status::Fail;
        v.worst = miss;
        v.location = Some((last, node.index));
    }
    v
}

fn homogeneity_verdict(
    engine: Engine,
    spec: &OptionSpec<f64>,
    cs: &CoefficientSet<f64>,
    numerics: &Numerics,
) -> Result<Verdict> {
    let mu = match engine {
        Engine::Btm => 2.0,
        Engine::Eds => 3.0,
    };
    let a = solve(engine, spec, cs, numerics, Storage::RootOnly)?.root();
    let b = solve(engine, &spec.scaled(mu), cs, numerics, Storage::RootOnly)?.root();
    let err = relative_gap(b, mu * a);
    let mut v = Verdict::new(
        "homogeneity",
        "price(mu S0, mu E) = mu price(S0, E)",
        engine.name(),
    )
    .with_detail(format!("mu = {mu}, relative error {err:e}"));
    v.worst = err;
    if err > EXACT_IDENTITY_TOL {
        v.status = Status::Fail;
    }
    Ok(v)
}

/// Tree: exact identity, asserted. Grid: residual reported, not asserted.
fn symmetry_verdict(
    engine: Engine,
    spec: &OptionSpec<f64>,
    cs: &CoefficientSet<f64>,
    numerics: &Numerics,
) -> Result<Verdict> {
    let v = Verdict::new(
        "call-put-symmetry",
        "C(S, E; r, q) = P(E, S; q, r)",
        engine.name(),
    );
    Ok(match engine {
        Engine::Btm => {
            let (a, b, rel) = btm::symmetry_residual_btm(
                spec,
                cs,
                numerics.dx,
                &numerics.btm_options(Storage::RootOnly),
            )?;
            let mut v = v.with_detail(format!("{a} vs {b}"));
            v.worst = rel;
            if rel > EXACT_IDENTITY_TOL {
                v.status = Status::Fail;
            }
            v
        }
        Engine::Eds => {
            let r = eds::eds_symmetry_residual(spec, cs, &numerics.eds_options(Storage::RootOnly))?;
            let mut v = v.with_status(Status::Skipped).with_detail(format!(
                "residual {:e} (delta = {}); order checked by refinement",
                r.residual, r.delta
            ));
            v.worst = r.residual;
            v
        }
    })
}
