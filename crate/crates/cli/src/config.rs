//! Experiment configuration: TOML file plus `--set key=value` overrides.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::ValueEnum;
use phaseforge_core::{GradientTruncation, ScalarField, SolverConfig, TruncationRule};
use serde::{Deserialize, Deserializer};

use crate::error::CliError;

pub const DEFAULT_THRESHOLD: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    Unstructured,
    Sparse,
    LowRank,
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Problem::Unstructured => "unstructured",
            Problem::Sparse => "sparse",
            Problem::LowRank => "lowrank",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    AltminPhase,
    Wf,
    Twf,
    AltminSparse,
    ThreshWf,
    Copram,
    AltminLowrap,
    Lrpr1,
    TwfColumnwise,
}

impl SolverKind {
    pub const ALL: [SolverKind; 9] = [
        SolverKind::AltminPhase,
        SolverKind::Wf,
        SolverKind::Twf,
        SolverKind::AltminSparse,
        SolverKind::ThreshWf,
        SolverKind::Copram,
        SolverKind::AltminLowrap,
        SolverKind::Lrpr1,
        SolverKind::TwfColumnwise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::AltminPhase => "altmin-phase",
            SolverKind::Wf => "wf",
            SolverKind::Twf => "twf",
            SolverKind::AltminSparse => "altmin-sparse",
            SolverKind::ThreshWf => "thresh-wf",
            SolverKind::Copram => "copram",
            SolverKind::AltminLowrap => "altmin-lowrap",
            SolverKind::Lrpr1 => "lrpr1",
            SolverKind::TwfColumnwise => "twf-columnwise",
        }
    }

    /// Solvers that take a whole matrix of per-column measurements.
    pub fn is_lowrank(self) -> bool {
        matches!(self, SolverKind::AltminLowrap | SolverKind::Lrpr1 | SolverKind::TwfColumnwise)
    }

    pub fn is_sparse(self) -> bool {
        matches!(self, SolverKind::AltminSparse | SolverKind::ThreshWf | SolverKind::Copram)
    }

    pub fn supports(self, problem: Problem) -> bool {
        match problem {
            Problem::LowRank => self.is_lowrank(),
            Problem::Sparse => !self.is_lowrank(),
            Problem::Unstructured => !self.is_lowrank() && !self.is_sparse(),
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SolverKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<_> = SolverKind::ALL.iter().map(|k| k.name()).collect();
            format!("unknown solver '{s}' (expected one of {})", names.join(", "))
        })
    }
}

/// Per-solver settings layered over [`SolverConfig::default`].
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub step_size: Option<f64>,
    pub sample_splitting: Option<bool>,
    pub per_substep_splitting: Option<bool>,
    /// `"none"` or `"mean-multiple"`.
    pub truncation: Option<String>,
    pub c_trunc: Option<f64>,
    pub alpha_lb: Option<f64>,
    pub alpha_ub: Option<f64>,
    pub inner_iters: Option<usize>,
    pub ls_tol: Option<f64>,
}

impl SolverOverrides {
    pub const KEYS: [&'static str; 11] = [
        "max_iters",
        "tol",
        "step_size",
        "sample_splitting",
        "per_substep_splitting",
        "truncation",
        "c_trunc",
        "alpha_lb",
        "alpha_ub",
        "inner_iters",
        "ls_tol",
    ];

    pub fn solver_config(&self) -> Result<SolverConfig, CliError> {
        let base = SolverConfig::default();
        let c_trunc = self.c_trunc.unwrap_or(base.truncation.c_trunc);
        let truncation = match self.truncation.as_deref() {
            Some("none") => TruncationRule { c_trunc, ..TruncationRule::NONE },
            None | Some("mean-multiple") => TruncationRule::mean_multiple(c_trunc).map_err(config_err)?,
            Some(other) => return Err(CliError::Config(format!("unknown truncation '{other}' (expected none|mean-multiple)"))),
        };
        let cfg = SolverConfig {
            max_iters: self.max_iters.unwrap_or(base.max_iters),
            tol: self.tol.unwrap_or(base.tol),
            step_size: self.step_size.or(base.step_size),
            sample_splitting: self.sample_splitting.unwrap_or(base.sample_splitting),
            per_substep_splitting: self.per_substep_splitting.unwrap_or(base.per_substep_splitting),
            truncation,
            gradient_truncation: GradientTruncation {
                alpha_lb: self.alpha_lb.unwrap_or(base.gradient_truncation.alpha_lb),
                alpha_ub: self.alpha_ub.unwrap_or(base.gradient_truncation.alpha_ub),
            },
            inner_iters: self.inner_iters.unwrap_or(base.inner_iters),
            ls_tol: self.ls_tol.unwrap_or(base.ls_tol),
            seed: base.seed,
        };
        cfg.validate().map_err(config_err)?;
        Ok(cfg)
    }
}

fn config_err(e: impl fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn deserialize_field<'de, D: Deserializer<'de>>(d: D) -> Result<ScalarField, D::Error> {
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

fn real() -> ScalarField {
    ScalarField::Real
}
fn one() -> usize {
    1
}
fn default_trials() -> usize {
    10
}
fn default_condition() -> f64 {
    2.0
}
fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub solver: SolverKind,
    #[serde(default = "real", deserialize_with = "deserialize_field")]
    pub field: ScalarField,
    pub n: usize,
    #[serde(default = "one")]
    pub q: usize,
    #[serde(default = "one")]
    pub r: usize,
    #[serde(default = "one")]
    pub s: usize,
    /// Ratio of largest to smallest singular value of generated low-rank truths.
    #[serde(default = "default_condition")]
    pub condition: f64,
    /// Explicit measurement counts.
    #[serde(default)]
    pub m: Option<Vec<usize>>,
    /// Measurement counts as multiples of `n`, rounded to the nearest integer.
    #[serde(default)]
    pub m_per_n: Option<Vec<f64>>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// A trial succeeds when its final relative error is below this.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Record wall time; off by default so output depends only on the config.
    #[serde(default)]
    pub timing: bool,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub overrides: SolverOverrides,
}

impl ExperimentConfig {
    /// Parses TOML, applies `key=value` overrides, then validates.
    ///
    /// Bare keys naming a solver setting go to `[overrides]`; anything else
    /// is a dotted path from the document root.
    pub fn from_toml(text: &str, sets: &[(String, String)]) -> Result<Self, CliError> {
        let mut table: toml::Table = text.parse().map_err(config_err)?;
        for (key, value) in sets {
            apply_set(&mut table, key, value)?;
        }
        let cfg: ExperimentConfig = table.try_into().map_err(config_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path, sets: &[(String, String)]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, sets).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Measurement counts of the sweep, in the configured order.
    pub fn grid(&self) -> Result<Vec<usize>, CliError> {
        let grid: Vec<usize> = match (&self.m, &self.m_per_n) {
            (Some(ms), None) => ms.clone(),
            (None, Some(fs)) => {
                if let Some(f) = fs.iter().find(|f| !(f.is_finite() && **f > 0.0)) {
                    return Err(CliError::Config(format!("m_per_n entries must be positive, got {f}")));
                }
                fs.iter().map(|f| ((f * self.n as f64).round() as usize).max(1)).collect()
            }
            (Some(_), Some(_)) => return Err(CliError::Config("give either m or m_per_n, not both".into())),
            (None, None) => return Err(CliError::Config("missing measurement grid (m or m_per_n)".into())),
        };
        if grid.is_empty() {
            return Err(CliError::Config("measurement grid is empty".into()));
        }
        if grid.contains(&0) {
            return Err(CliError::Config("measurement counts must be positive".into()));
        }
        Ok(grid)
    }

    pub fn solver_config(&self) -> Result<SolverConfig, CliError> {
        self.overrides.solver_config()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: String| Err(CliError::Config(msg));
        if self.n == 0 {
            return fail("n must be positive".into());
        }
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return fail(format!("threshold must lie in (0, 1), got {}", self.threshold));
        }
        if !self.solver.supports(self.problem) {
            return fail(format!("solver {} does not apply to {} problems", self.solver, self.problem));
        }
        match self.problem {
            Problem::Sparse if self.s == 0 || self.s > self.n => {
                return fail(format!("sparsity {} outside 1..={}", self.s, self.n));
            }
            Problem::LowRank => {
                if self.q == 0 || self.r == 0 || self.r > self.n.min(self.q) {
                    return fail(format!("rank {} outside 1..={}", self.r, self.n.min(self.q)));
                }
                if !(self.condition >= 1.0 && self.condition.is_finite()) {
                    return fail(format!("condition must be >= 1, got {}", self.condition));
                }
            }
            _ => {}
        }
        if self.threads == Some(0) {
            return fail("threads must be positive".into());
        }
        self.grid()?;
        self.solver_config()?;
        Ok(())
    }

    /// Sparsity passed to solvers: `s` for sparse problems, otherwise `n`.
    pub fn sparsity(&self) -> usize {
        if self.problem == Problem::Sparse {
            self.s
        } else {
            self.n
        }
    }
}

/// Splits `key=value`.
pub fn parse_set(arg: &str) -> Result<(String, String), CliError> {
    match arg.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(CliError::Usage(format!("--set expects key=value, got '{arg}'"))),
    }
}

fn apply_set(table: &mut toml::Table, key: &str, raw: &str) -> Result<(), CliError> {
    let value: toml::Value = raw.parse().unwrap_or_else(|_| toml::Value::String(raw.to_string()));
    let path: Vec<&str> = if SolverOverrides::KEYS.contains(&key) {
        vec!["overrides", key]
    } else {
        key.split('.').collect()
    };
    let (last, parents) = path.split_last().expect("split yields at least one item");
    let mut cur = table;
    for p in parents {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(CliError::Config(format!("--set {key}: '{p}' is not a table"))),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}
