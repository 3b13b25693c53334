//! The JSON run configuration and its translation into library types.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use tdlattice::analysis::scenarios::find_scenario;
use tdlattice::analysis::{Engine, Numerics};
use tdlattice::btm::Summation;
use tdlattice::coefficients::{CoefficientCurve, Interpolation};
use tdlattice::eds::MIN_HALF_WIDTH_K;
use tdlattice::{CoefficientSet, ExerciseStyle, OptionKind, OptionSpec, PartitionOptions};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Name of a built-in scenario; `option` and `coefficients` override its parts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub option: Option<OptionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<CoefficientsConfig>,
    #[serde(default)]
    pub engine: EngineChoice,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub study: StudyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionConfig {
    pub kind: OptionKind,
    pub style: ExerciseStyle,
    pub strike: f64,
    pub spot: f64,
    pub maturity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsConfig {
    pub r: CurveConfig,
    pub q: CurveConfig,
    pub sigma: CurveConfig,
}

/// A bare number is a constant curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CurveConfig {
    Constant(f64),
    Knots {
        interpolation: InterpolationTag,
        knots: Vec<Knot>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterpolationTag {
    Step,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Knot {
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EngineChoice {
    #[default]
    Btm,
    Eds,
    Both,
}

impl EngineChoice {
    pub fn engines(self) -> Vec<Engine> {
        match self {
            EngineChoice::Btm => vec![Engine::Btm],
            EngineChoice::Eds => vec![Engine::Eds],
            EngineChoice::Both => vec![Engine::Btm, Engine::Eds],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    /// Log-price spacing, `ln u` for the tree.
    #[serde(default = "default_dx", alias = "ln_u")]
    pub dx: f64,
    /// Grid CFL fraction; the tree always uses 1.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_half_width_k")]
    pub half_width_k: f64,
    #[serde(default)]
    pub snap_last_step: bool,
    /// Compensated summation in the tree rollback.
    #[serde(default)]
    pub compensated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dx_list: Option<Vec<f64>>,
}

fn default_dx() -> f64 {
    0.05
}

fn default_alpha() -> f64 {
    1.0
}

fn default_half_width_k() -> f64 {
    tdlattice::eds::DEFAULT_HALF_WIDTH_K
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            dx: default_dx(),
            alpha: default_alpha(),
            half_width_k: default_half_width_k(),
            snap_last_step: false,
            compensated: false,
            max_steps: None,
            dx_list: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyKind {
    /// Every check on one instance.
    #[default]
    Scenario,
    /// Sup-node gap between tree and grid over `dx_list`.
    Gap,
    /// Self-convergence over a geometric `dx_list`.
    Convergence,
    /// Grid symmetry residual over `dx_list`.
    Symmetry,
    /// Grid price change when the truncation factor doubles.
    Truncation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

/// A validated configuration in library terms.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub name: String,
    pub spec: OptionSpec,
    pub coefficients: CoefficientSet,
    pub numerics: Numerics,
    pub summation: Summation,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            CliError::Config {
                field: if path == "." { "config".into() } else { path },
                reason: format!("{inner} (line {}, column {})", inner.line(), inner.column()),
            }
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let base = match &self.scenario {
            Some(name) => Some(find_scenario(name).ok_or_else(|| {
                CliError::config("scenario", format!("unknown scenario {name:?}"))
            })?),
            None => None,
        };
        let spec = match (&self.option, &base) {
            (Some(o), _) => OptionSpec::new(o.kind, o.style, o.strike, o.spot, o.maturity)
                .map_err(|e| field_error("option", e))?,
            (None, Some(s)) => s.spec,
            (None, None) => {
                return Err(CliError::config(
                    "option",
                    "missing; give `option` or `scenario`",
                ))
            }
        };
        let coefficients = match (&self.coefficients, &base) {
            (Some(c), _) => CoefficientSet::new(
                curve(&c.r, "coefficients.r")?,
                curve(&c.q, "coefficients.q")?,
                curve(&c.sigma, "coefficients.sigma")?,
                spec.maturity,
            )
            .map_err(|e| field_error("coefficients", e))?,
            (None, Some(s)) => s.coefficients.clone(),
            (None, None) => {
                return Err(CliError::config(
                    "coefficients",
                    "missing; give `coefficients` or `scenario`",
                ))
            }
        };
        if coefficients.horizon() < spec.maturity {
            return Err(CliError::config(
                "option.maturity",
                format!("beyond the coefficient horizon {}", coefficients.horizon()),
            ));
        }

        let n = &self.numerics;
        if !(n.dx > 0.0 && n.dx.is_finite()) {
            return Err(CliError::config(
                "numerics.dx",
                format!("must be positive and finite, got {}", n.dx),
            ));
        }
        if !(n.alpha > 0.0 && n.alpha <= 1.0) {
            return Err(CliError::config(
                "numerics.alpha",
                format!("must lie in (0, 1], got {}", n.alpha),
            ));
        }
        if !(n.half_width_k >= MIN_HALF_WIDTH_K) || !n.half_width_k.is_finite() {
            return Err(CliError::config(
                "numerics.half_width_k",
                format!(
                    "must be at least {MIN_HALF_WIDTH_K}, got {}",
                    n.half_width_k
                ),
            ));
        }
        if let Some(list) = &n.dx_list {
            if let Some(bad) = list.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
                return Err(CliError::config(
                    "numerics.dx_list",
                    format!("entries must be positive, got {bad}"),
                ));
            }
        }
        let mut partition = PartitionOptions {
            snap_last_step: n.snap_last_step,
            ..Default::default()
        };
        if let Some(cap) = n.max_steps {
            partition.max_steps = cap;
        }
        let numerics = Numerics {
            half_width_k: n.half_width_k,
            partition,
            ..Numerics::new(n.dx, n.alpha)
        };
        Ok(Resolved {
            name: self.scenario.clone().unwrap_or_else(|| "custom".into()),
            spec,
            coefficients,
            numerics,
            summation: if n.compensated {
                Summation::Compensated
            } else {
                Summation::Plain
            },
        })
    }

    /// `dx_list`, or an error naming the field when a study needs more entries.
    pub fn dx_list(&self, at_least: usize) -> Result<Vec<f64>, CliError> {
        let list = self.numerics.dx_list.clone().unwrap_or_default();
        if list.len() < at_least {
            return Err(CliError::config(
                "numerics.dx_list",
                format!(
                    "this study needs at least {at_least} values, got {}",
                    list.len()
                ),
            ));
        }
        Ok(list)
    }
}

fn curve(c: &CurveConfig, field: &str) -> Result<CoefficientCurve<f64>, CliError> {
    match c {
        CurveConfig::Constant(v) => Ok(CoefficientCurve::constant(*v)),
        CurveConfig::Knots {
            interpolation,
            knots,
        } => {
            let interp = match interpolation {
                InterpolationTag::Step => Interpolation::Step,
                InterpolationTag::Linear => Interpolation::Linear,
            };
            CoefficientCurve::new(interp, knots.iter().map(|k| (k.t, k.value)).collect())
                .map_err(|e| field_error(field, e))
        }
    }
}

/// Prefixes the library's field name with the config section.
fn field_error(section: &str, e: tdlattice::Error) -> CliError {
    match e {
        tdlattice::Error::InvalidInput { field, reason } => {
            let field = match field {
                "r" | "q" | "sigma" if section == "coefficients" => format!("coefficients.{field}"),
                _ if section.contains('.') => section.to_string(),
                _ => format!("{section}.{field}"),
            };
            CliError::Config { field, reason }
        }
        other => CliError::config(section, other.to_string()),
    }
}
