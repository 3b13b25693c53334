use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

/// Outcome of one check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    /// Hypotheses fail and the property was seen to break.
    ExpectedCounterexampleFound,
    /// Hypotheses fail but no break was seen; informational.
    ExpectedCounterexampleNotFound,
    /// Not applicable to this instance.
    Skipped,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::ExpectedCounterexampleFound => "expected-counterexample: found",
            Status::ExpectedCounterexampleNotFound => "expected-counterexample: not found",
            Status::Skipped => "skipped",
        }
    }

    pub fn is_failure(self) -> bool {
        self == Status::Fail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub check: String,
    /// Property the check stands for.
    pub property: String,
    pub engine: String,
    pub status: Status,
    /// Largest violation seen, `0` when none.
    pub worst: f64,
    /// `(n, j)` of the worst violation.
    pub location: Option<(usize, i64)>,
    pub detail: String,
}

impl Verdict {
    pub fn new(check: &str, property: &str, engine: &str) -> Self {
        Self {
            check: check.into(),
            property: property.into(),
            engine: engine.into(),
            status: Status::Pass,
            worst: 0.0,
            location: None,
            detail: String::new(),
        }
    }

    pub fn with_status(mut self, status: Status) -> Self {
        self.status = status;
        self
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn passed(&self) -> bool {
        !self.status.is_failure()
    }
}

/// One refinement level of a study, rows sorted by `dx` descending.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct RefinementRow {
    pub dx: f64,
    pub steps: usize,
    /// Terminal gap `T - t_N`.
    pub gap: f64,
    pub price: Option<f64>,
    /// `|price(dx) - price(next dx)|`
    pub price_diff: Option<f64>,
    /// Sup over time of the boundary difference to the next level, in log-price.
    pub boundary_diff: Option<f64>,
    /// Sup over matched nodes of `|tree - grid|`.
    pub engine_gap: Option<f64>,
    /// Whether the last-level boundary sits in its near-maturity bracket.
    pub bracket_ok: Option<bool>,
    pub symmetry_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct StudyReport {
    pub scenario: String,
    pub parameters: BTreeMap<String, String>,
    pub verdicts: Vec<Verdict>,
    pub refinement: Vec<RefinementRow>,
    pub slopes: BTreeMap<String, f64>,
    pub extrapolated_price: Option<f64>,
}

impl StudyReport {
    pub fn new(scenario: impl Into<String>) -> Self {
        Self {
            scenario: scenario.into(),
            ..Default::default()
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) {
        self.parameters.insert(key.into(), value.to_string());
    }

    /// True when no check failed. Expected counterexamples do not count as failures.
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(Verdict::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().filter(|v| !v.passed())
    }

    pub fn verdict(&self, check: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.check == check)
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario {}", self.scenario);
        for (k, v) in &self.parameters {
            let _ = writeln!(out, "  {k} = {v}");
        }
        for v in &self.verdicts {
            let at = v
                .location
                .map(|(n, j)| format!(" at (n={n}, j={j})"))
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "  [{}] {} {}: {} (worst {:e}{at}){}{}",
                v.engine,
                v.check,
                v.property,
                v.status.label(),
                v.worst,
                if v.detail.is_empty() { "" } else { "; " },
                v.detail
            );
        }
        if !self.refinement.is_empty() {
            let _ = writeln!(
                out,
                "  dx, N, gap, price, price_diff, boundary_diff, engine_gap"
            );
            for r in &self.refinement {
                let _ = writeln!(
                    out,
                    "  {}, {}, {}, {}, {}, {}, {}",
                    r.dx,
                    r.steps,
                    r.gap,
                    opt(r.price),
                    opt(r.price_diff),
                    opt(r.boundary_diff),
                    opt(r.engine_gap)
                );
            }
        }
        for (k, v) in &self.slopes {
            let _ = writeln!(out, "  slope {k} = {v}");
        }
        if let Some(p) = self.extrapolated_price {
            let _ = writeln!(out, "  extrapolated price = {p}");
        }
        out
    }

    /// Refinement table as CSV.
    pub fn refinement_csv(&self) -> String {
        let mut out = String::from(
            "dx,steps,gap,price,price_diff,boundary_diff,engine_gap,bracket_ok,symmetry_residual\n",
        );
        for r in &self.refinement {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.dx,
                r.steps,
                r.gap,
                opt(r.price),
                opt(r.price_diff),
                opt(r.boundary_diff),
                opt(r.engine_gap),
                r.bracket_ok.map(|b| b.to_string()).unwrap_or_default(),
                opt(r.symmetry_residual)
            );
        }
        out
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Ordinary least-squares slope of `ln y` against `ln x`, skipping non-positive pairs.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
