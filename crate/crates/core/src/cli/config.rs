//! JSON system description.  Unknown keys are rejected.
//!
//! ```json
//! {
//!   "schema": "floquet-config/1",
//!   "timescale": { "preset": "P", "a": 1, "b": 1 },
//!   "dimension": 2,
//!   "matrix": [["-3 + sin(2*pi*t)", "1"], ["0", "-3"]],
//!   "forcing": ["1", "0"],
//!   "t0": 0,
//!   "options": { "h_max": 0.01, "rk_tol": 1e-10, "pb_terms": 12, "grid": 20 }
//! }
//! ```
//!
//! Numbers may be given as JSON numbers or as constant expressions (`"2*pi"`).
//! Time-scale presets: `R` (`period`), `Z` (`period`, integer), `hZ` (`h`,
//! `period`), `P` (`a`, `b`, optional `period` as a multiple of `a + b`) or the
//! shorthand `"P(a,b)"`; alternatively an explicit `runs` list with optional
//! `period`.  `anchor` shifts any of them.

use std::path::Path;

use serde::Deserialize;

use crate::expr::Expression;
use crate::timescale::{PeriodicTimeScale, Run, TimePoint, DEFAULT_TOL};
use crate::transition::{Forcing, LinearDynamicSystem, SolverOptions};

use super::CliError;

pub const CONFIG_SCHEMA: &str = "floquet-config/1";

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Number {
    Value(f64),
    Expr(String),
}

impl Number {
    pub fn value(&self, what: &str) -> Result<f64, CliError> {
        match self {
            Number::Value(v) => Ok(*v),
            Number::Expr(s) => {
                let e = Expression::parse(s).map_err(|e| CliError::Config(format!("{what}: {e}")))?;
                if !e.is_constant() {
                    return Err(CliError::Config(format!("{what}: `{s}` depends on t")));
                }
                e.evaluate_real(0.0)
                    .map_err(|e| CliError::Config(format!("{what}: {e}")))
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(default)]
    pub schema: Option<String>,
    #[serde(default)]
    pub description: Option<String>,
    pub timescale: TimescaleConfig,
    pub dimension: usize,
    pub matrix: Vec<Vec<String>>,
    #[serde(default)]
    pub forcing: Option<Vec<String>>,
    #[serde(default)]
    pub t0: Option<Number>,
    #[serde(default)]
    pub options: OptionsConfig,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TimescaleConfig {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub period: Option<Number>,
    #[serde(default)]
    pub h: Option<Number>,
    #[serde(default)]
    pub a: Option<Number>,
    #[serde(default)]
    pub b: Option<Number>,
    #[serde(default)]
    pub anchor: Option<Number>,
    #[serde(default)]
    pub runs: Option<Vec<RunConfig>>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// `"continuous"` or `"point"`
    pub kind: String,
    #[serde(default)]
    pub length: Option<Number>,
    #[serde(default)]
    pub gap: Option<Number>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OptionsConfig {
    pub h_max: f64,
    pub rk_tol: f64,
    pub pb_terms: usize,
    /// Number of grid points per period for residual checks.
    pub grid: usize,
    pub tolerances: Tolerances,
}

impl Default for OptionsConfig {
    fn default() -> Self {
        let s = SolverOptions::default();
        OptionsConfig {
            h_max: s.h_max,
            rk_tol: s.rk_tol,
            pb_terms: s.pb_terms,
            grid: 20,
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// band around 1 and the unit circle
    pub unit: f64,
    pub exp_r_period: f64,
    pub decomposition: f64,
    pub periodicity: f64,
    pub spectral_mapping: f64,
    pub nonuniqueness: f64,
    pub eigenvector: f64,
    pub mode: f64,
    pub transform: f64,
    pub peano_baker: f64,
    pub closure: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            unit: 1e-7,
            exp_r_period: 1e-9,
            decomposition: 1e-6,
            periodicity: 1e-6,
            spectral_mapping: 1e-7,
            nonuniqueness: 1e-8,
            eigenvector: 1e-8,
            mode: 1e-6,
            transform: 5e-5,
            peano_baker: 1e-6,
            closure: 1e-6,
        }
    }
}

/// A validated configuration turned into library objects.
#[derive(Debug, Clone)]
pub struct Problem {
    pub config: SystemConfig,
    pub sys: LinearDynamicSystem,
    pub forcing: Option<Forcing>,
    pub t0: TimePoint,
    pub opts: SolverOptions,
    pub tolerances: Tolerances,
    pub grid: usize,
}

impl SystemConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn build(self) -> Result<Problem, CliError> {
        if let Some(schema) = &self.schema {
            if schema != CONFIG_SCHEMA {
                return Err(CliError::Config(format!(
                    "unsupported schema `{schema}` (expected `{CONFIG_SCHEMA}`)"
                )));
            }
        }
        let n = self.dimension;
        if n == 0 {
            return Err(CliError::Config("dimension must be positive".into()));
        }
        if self.matrix.len() != n || self.matrix.iter().any(|r| r.len() != n) {
            return Err(CliError::Config(format!("matrix must be {n}x{n}")));
        }
        let ts = self.timescale.build()?;
        let sys = LinearDynamicSystem::from_strings(ts.clone(), &self.matrix)
            .map_err(|e| CliError::Config(format!("matrix: {e}")))?;
        let forcing = match &self.forcing {
            None => None,
            Some(f) if f.len() != n => {
                return Err(CliError::Config(format!("forcing must have {n} entries")))
            }
            Some(f) => Some(Forcing::parse(f).map_err(|e| CliError::Config(format!("forcing: {e}")))?),
        };
        let t0_value = match &self.t0 {
            Some(t) => t.value("t0")?,
            None => ts.anchor(),
        };
        let t0 = ts
            .locate(t0_value, DEFAULT_TOL)
            .ok_or_else(|| CliError::Config(format!("t0 = {t0_value} is not in the time scale")))?;
        let o = &self.options;
        let opts = SolverOptions {
            h_max: o.h_max,
            rk_tol: o.rk_tol,
            pb_terms: o.pb_terms,
        };
        opts.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if o.grid < 2 {
            return Err(CliError::Config("options.grid must be at least 2".into()));
        }
        Ok(Problem {
            sys,
            forcing,
            t0,
            opts,
            tolerances: o.tolerances,
            grid: o.grid,
            config: self,
        })
    }
}

fn required(n: &Option<Number>, what: &str) -> Result<f64, CliError> {
    n.as_ref()
        .ok_or_else(|| CliError::Config(format!("timescale.{what} is required")))?
        .value(&format!("timescale.{what}"))
}

impl TimescaleConfig {
    pub fn build(&self) -> Result<PeriodicTimeScale, CliError> {
        let err = |e: crate::timescale::TimeScaleError| CliError::Config(format!("timescale: {e}"));
        let anchor = match &self.anchor {
            Some(a) => a.value("timescale.anchor")?,
            None => 0.0,
        };
        let ts = match (&self.preset, &self.runs) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config("timescale: give either preset or runs".into()))
            }
            (None, None) => return Err(CliError::Config("timescale: preset or runs required".into())),
            (None, Some(runs)) => {
                let runs = runs
                    .iter()
                    .enumerate()
                    .map(|(i, r)| r.build(i))
                    .collect::<Result<Vec<_>, _>>()?;
                match &self.period {
                    Some(p) => PeriodicTimeScale::with_period(anchor, runs, p.value("timescale.period")?),
                    None => PeriodicTimeScale::new(anchor, runs),
                }
                .map_err(err)?
            }
            (Some(preset), None) => {
                let preset = preset.trim();
                match preset {
                    "R" => PeriodicTimeScale::real_line(required(&self.period, "period")?).map_err(err)?,
                    "Z" => {
                        let p = required(&self.period, "period")?;
                        if p.fract() != 0.0 || p < 1.0 || p > f64::from(u32::MAX) {
                            return Err(CliError::Config(format!(
                                "timescale: Z needs a positive integer period, got {p}"
                            )));
                        }
                        PeriodicTimeScale::integers(p as u32).map_err(err)?
                    }
                    "hZ" => {
                        PeriodicTimeScale::lattice(required(&self.h, "h")?, required(&self.period, "period")?)
                            .map_err(err)?
                    }
                    "P" => self.pattern(required(&self.a, "a")?, required(&self.b, "b")?)?,
                    other if other.starts_with("P(") && other.ends_with(')') => {
                        let inner = &other[2..other.len() - 1];
                        let parts: Vec<&str> = inner.split(',').collect();
                        if parts.len() != 2 {
                            return Err(CliError::Config(format!("timescale: cannot read preset `{other}`")));
                        }
                        let a = Number::Expr(parts[0].trim().into()).value("timescale.a")?;
                        let b = Number::Expr(parts[1].trim().into()).value("timescale.b")?;
                        self.pattern(a, b)?
                    }
                    other => return Err(CliError::Config(format!("timescale: unknown preset `{other}`"))),
                }
                .with_anchor(anchor)
            }
        };
        Ok(ts)
    }

    fn pattern(&self, a: f64, b: f64) -> Result<PeriodicTimeScale, CliError> {
        let err = |e: crate::timescale::TimeScaleError| CliError::Config(format!("timescale: {e}"));
        let base = PeriodicTimeScale::pattern(a, b).map_err(err)?;
        match &self.period {
            Some(p) => base.repeated_to(p.value("timescale.period")?).map_err(err),
            None => Ok(base),
        }
    }
}

impl RunConfig {
    fn build(&self, index: usize) -> Result<Run, CliError> {
        let gap = match &self.gap {
            Some(g) => g.value(&format!("runs[{index}].gap"))?,
            None => 0.0,
        };
        match self.kind.as_str() {
            "continuous" => {
                let length = self
                    .length
                    .as_ref()
                    .ok_or_else(|| CliError::Config(format!("runs[{index}].length is required")))?
                    .value(&format!("runs[{index}].length"))?;
                Ok(Run::continuous(length, gap))
            }
            "point" => {
                if self.length.is_some() {
                    return Err(CliError::Config(format!("runs[{index}]: a point has no length")));
                }
                Ok(Run::point(gap))
            }
            other => Err(CliError::Config(format!("runs[{index}].kind `{other}` is not continuous|point"))),
        }
    }
}
