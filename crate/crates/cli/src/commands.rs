//! One function per subcommand. Each resolves the config, runs the library
//! and writes text to stdout plus artifacts to the output directory, if any.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;
use tdlattice::analysis::{
    btm_eds_gap_study, convergence_study, run_checks, solve, solve_tracked, symmetry_study,
    truncation_study, Engine, Solved, Status, StudyReport, Verdict,
};
use tdlattice::btm::{self, BtmOptions, Storage};
use tdlattice::export::{write_boundary_csv, write_partition_csv, write_surface_csv, RunMetadata};
use tdlattice::{check_conditions, ConditionReport, ExerciseStyle, ValueSurface};

use crate::config::{Resolved, RunConfig, StudyKind};
use crate::error::CliError;

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes to stdout; a closed pipe (e.g. `| head`) ends output quietly.
fn emit(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Write {
            path: "<stdout>".into(),
            source: e,
        }),
        _ => Ok(()),
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn csv(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> String {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("utf-8 csv")
}

fn solve_with(engine: Engine, run: &Resolved, storage: Storage) -> Result<Solved, CliError> {
    Ok(match engine {
        Engine::Btm => {
            let opts = BtmOptions {
                partition: run.numerics.partition.clone(),
                storage,
                summation: run.summation,
            };
            Solved::Tree(btm::price_btm_dx(
                &run.spec,
                &run.coefficients,
                run.numerics.dx,
                &opts,
            )?)
        }
        Engine::Eds => solve(engine, &run.spec, &run.coefficients, &run.numerics, storage)?,
    })
}

fn conditions(run: &Resolved, sol: &Solved) -> ConditionReport<f64> {
    let p = sol.partition();
    check_conditions(&run.coefficients, p, p.up_factor())
}

#[derive(Serialize)]
struct PriceRun {
    #[serde(flatten)]
    metadata: RunMetadata,
    conditions: ConditionReport<f64>,
}

pub fn price(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let run = cfg.resolve()?;
    let mut runs = Vec::new();
    let mut text = String::new();
    for engine in cfg.engine.engines() {
        let sol = solve_with(engine, &run, Storage::RootOnly)?;
        let metadata = RunMetadata::from_solved(&sol);
        let conditions = conditions(&run, &sol);
        let delta = metadata.delta.map_or("-".to_string(), |d| d.to_string());
        let _ = writeln!(
            text,
            "{}: price {} steps {} gap {} delta {}",
            metadata.engine, metadata.price, metadata.steps, metadata.gap, delta
        );
        let _ = writeln!(
            text,
            "  put_monotone_ok {} call_monotone_ok {} q_positive {} branch_ok {}",
            conditions.put_monotone_ok,
            conditions.call_monotone_ok,
            conditions.q_positive,
            conditions.branch_ok
        );
        runs.push(PriceRun {
            metadata,
            conditions,
        });
    }
    emit(&text)?;
    if let Some(dir) = out {
        write_file(&dir.join("price.json"), &json(&runs))?;
    }
    Ok(())
}

fn require_american(run: &Resolved) -> Result<(), CliError> {
    if run.spec.style != ExerciseStyle::American {
        return Err(CliError::config(
            "option.style",
            "boundaries exist for American contracts only",
        ));
    }
    Ok(())
}

pub fn boundary(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let run = cfg.resolve()?;
    require_american(&run)?;
    let engines = cfg.engine.engines();
    for &engine in &engines {
        let tracked = solve_tracked(engine, &run.spec, &run.coefficients, &run.numerics)?;
        let outcome = tracked
            .boundary
            .expect("American contracts track a boundary");
        let text = csv(|b| write_boundary_csv(b, &outcome));
        match out {
            Some(dir) => write_file(&dir.join(format!("boundary_{}.csv", engine.name())), &text)?,
            None => {
                if engines.len() > 1 {
                    emit(&format!("# engine: {}\n", engine.name()))?;
                }
                emit(&text)?;
            }
        }
    }
    Ok(())
}

pub fn surface(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let run = cfg.resolve()?;
    let dir = out.ok_or_else(|| {
        CliError::config("output.dir", "the surface command writes files; pass --out")
    })?;
    for engine in cfg.engine.engines() {
        let sol = solve_with(engine, &run, Storage::Full)?;
        let name = engine.name();
        write_file(
            &dir.join(format!("surface_{name}.csv")),
            &csv(|b| write_surface_csv(b, &sol)),
        )?;
        write_file(
            &dir.join(format!("partition_{name}.csv")),
            &csv(|b| write_partition_csv(b, sol.partition())),
        )?;
        write_file(
            &dir.join(format!("metadata_{name}.json")),
            &json(&RunMetadata::from_solved(&sol)),
        )?;
        if run.spec.style == ExerciseStyle::American {
            let outcome = sol.boundary()?;
            write_file(
                &dir.join(format!("boundary_{name}.csv")),
                &csv(|b| write_boundary_csv(b, &outcome)),
            )?;
        }
        emit(&format!(
            "{name}: price {} written to {}\n",
            sol.root(),
            dir.display()
        ))?;
    }
    Ok(())
}

/// Truncation threshold relative to the strike.
const TRUNCATION_TOL: f64 = 1e-10;

fn truncation_report(run: &Resolved) -> Result<StudyReport, CliError> {
    let change = truncation_study(&run.spec, &run.coefficients, &run.numerics)?;
    let scale = run.spec.strike.max(run.spec.spot);
    let mut report = StudyReport::new("truncation");
    report.param("half_width_k", run.numerics.half_width_k);
    let mut v = Verdict::new(
        "truncation",
        "doubling the half-width factor barely moves the price",
        "eds",
    )
    .with_detail(format!("change {change:e}"));
    v.worst = change;
    if change >= TRUNCATION_TOL * scale {
        v.status = Status::Fail;
    }
    report.verdicts.push(v);
    Ok(report)
}

pub fn study(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let run = cfg.resolve()?;
    let (spec, cs, numerics) = (&run.spec, &run.coefficients, &run.numerics);
    let reports = match cfg.study {
        StudyKind::Scenario => vec![run_checks(
            &run.name,
            spec,
            cs,
            numerics,
            &cfg.engine.engines(),
        )?],
        StudyKind::Gap => vec![btm_eds_gap_study(spec, cs, &cfg.dx_list(2)?, numerics)?],
        StudyKind::Convergence => {
            let dxs = cfg.dx_list(3)?;
            cfg.engine
                .engines()
                .into_iter()
                .map(|e| convergence_study(spec, cs, &dxs, e, numerics))
                .collect::<Result<Vec<_>, _>>()?
        }
        StudyKind::Symmetry => vec![symmetry_study(spec, cs, &cfg.dx_list(2)?, numerics)?],
        StudyKind::Truncation => vec![truncation_report(&run)?],
    };

    let mut failed = 0;
    for report in &reports {
        emit(&report.render_text())?;
        failed += report.failures().count();
        if let Some(dir) = out {
            let stem = format!("report_{}", report.scenario);
            write_file(&dir.join(format!("{stem}.json")), &json(report))?;
            if !report.refinement.is_empty() {
                write_file(&dir.join(format!("{stem}.csv")), &report.refinement_csv())?;
            }
        }
    }
    if failed > 0 {
        return Err(CliError::Checks(failed));
    }
    Ok(())
}

#[derive(Serialize)]
struct VerifyRun {
    engine: &'static str,
    steps: usize,
    conditions: ConditionReport<f64>,
}

pub fn verify(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let run = cfg.resolve()?;
    let mut runs = Vec::new();
    let mut text = String::new();
    for engine in cfg.engine.engines() {
        let p = run
            .numerics
            .partition(engine, &run.spec, &run.coefficients)?;
        let conditions = check_conditions(&run.coefficients, &p, p.up_factor());
        let _ = writeln!(
            text,
            "{}: steps {} put_monotone_ok {} call_monotone_ok {} q_positive {} branch_ok {} violations {}",
            engine.name(),
            p.len(),
            conditions.put_monotone_ok,
            conditions.call_monotone_ok,
            conditions.q_positive,
            conditions.branch_ok,
            conditions.violations.len()
        );
        for v in conditions.violations.iter().take(10) {
            let _ = writeln!(
                text,
                "  step {} t = {}: {:?} ({} vs {})",
                v.step, v.time, v.condition, v.lhs, v.rhs
            );
        }
        runs.push(VerifyRun {
            engine: engine.name(),
            steps: p.len(),
            conditions,
        });
    }
    emit(&text)?;
    if let Some(dir) = out {
        write_file(&dir.join("verify.json"), &json(&runs))?;
    }
    Ok(())
}
