//! Experiment configuration: a TOML file with one `[objective]`, one `[noise]`,
//! an optional `[test]` table and any number of `[[policy]]` tables.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policies::{SgdConfig, SgdInit, StepSchedule};
use crate::problems::{moment_certificate, FunctionClass, NoiseModel, ObjectiveSpec, Term};
use crate::sequential_tests::{ConfidenceParam, HeavyTailTestConfig, SubGaussianTestConfig, TestConfig};

/// Environment variable that replaces the default output directory.
pub const OUTPUT_DIR_ENV: &str = "RWT_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "results";
pub const DEFAULT_CHECKPOINTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    pub xstar: f64,
    pub terms: Vec<Term>,
    /// Inferred from the terms when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fclass: Option<FunctionClass>,
}

impl ObjectiveConfig {
    pub fn power(coef: f64, exponent: f64, xstar: f64) -> Self {
        ObjectiveConfig {
            xstar,
            terms: vec![Term::new(coef, exponent)],
            fclass: None,
        }
    }

    pub fn build(&self) -> Result<ObjectiveSpec> {
        ObjectiveSpec::new(self.terms.clone(), self.xstar, self.fclass)
    }
}

/// Overrides for the sequential tests used by the walk.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestParams {
    /// Sub-Gaussian parameter; defaults to the Gaussian noise variance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_sq: Option<f64>,
    /// Moment order of the heavy-tail test; required with Pareto noise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// Moment bound; defaults to a certificate derived from the noise model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Rwt,
    RwtCached,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    /// Curve name in the CSV.
    pub label: String,
    pub kind: PolicyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_check: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<StepSchedule>,
    /// Fixed SGD starting point; uniform on `[0, 1]` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x1: Option<f64>,
    /// Replaces the experiment's objective for this policy only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<ObjectiveConfig>,
}

impl PolicySpec {
    pub fn rwt(label: impl Into<String>, p_check: f64) -> Self {
        PolicySpec {
            label: label.into(),
            kind: PolicyKind::Rwt,
            p_check: Some(p_check),
            cache: None,
            step: None,
            x1: None,
            objective: None,
        }
    }

    pub fn rwt_cached(label: impl Into<String>, p_check: f64, cache: usize) -> Self {
        PolicySpec {
            kind: PolicyKind::RwtCached,
            cache: Some(cache),
            ..Self::rwt(label, p_check)
        }
    }

    pub fn sgd(label: impl Into<String>, step: StepSchedule) -> Self {
        PolicySpec {
            label: label.into(),
            kind: PolicyKind::Sgd,
            p_check: None,
            cache: None,
            step: Some(step),
            x1: None,
            objective: None,
        }
    }

    pub fn with_objective(mut self, objective: ObjectiveConfig) -> Self {
        self.objective = Some(objective);
        self
    }
}

fn default_log_axes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Stem of the CSV and plot-script files.
    pub name: String,
    pub horizon: u64,
    pub num_runs: u64,
    #[serde(default)]
    pub base_seed: u64,
    /// Times at which cumulative regret is recorded; a 64-point geometric grid
    /// ending at the horizon when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_log_axes")]
    pub log_axes: bool,
    pub objective: ObjectiveConfig,
    pub noise: NoiseModel,
    #[serde(default)]
    pub test: TestParams,
    #[serde(rename = "policy")]
    pub policies: Vec<PolicySpec>,
}

/// A policy with everything needed to run it.
#[derive(Debug, Clone)]
pub struct ResolvedPolicy {
    pub label: String,
    pub objective: ObjectiveSpec,
    pub algorithm: Algorithm,
}

#[derive(Debug, Clone)]
pub enum Algorithm {
    Rwt(TestConfig),
    RwtCached(TestConfig, usize),
    Sgd(SgdConfig),
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::param("config", e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::param("config", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::param("config", format!("{}: {e}", path.display())))?;
        let cfg = Self::from_toml(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Recorded times, sorted and deduplicated.
    pub fn checkpoint_times(&self) -> Vec<u64> {
        match &self.checkpoints {
            Some(c) => {
                let mut c = c.clone();
                c.sort_unstable();
                c.dedup();
                c
            }
            None => geometric_checkpoints(self.horizon, DEFAULT_CHECKPOINTS),
        }
    }

    /// Explicit `output_dir`, else the environment override, else `results`.
    pub fn output_dir(&self) -> PathBuf {
        if let Some(d) = &self.output_dir {
            return d.clone();
        }
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(d) if !d.is_empty() => PathBuf::from(d),
            _ => PathBuf::from(DEFAULT_OUTPUT_DIR),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.resolve().map(|_| ())
    }

    /// Validates the whole configuration and builds every policy.
    pub fn resolve(&self) -> Result<Vec<ResolvedPolicy>> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::param("name", format!("{:?} is not a usable file stem", self.name)));
        }
        if self.horizon == 0 {
            return Err(Error::param("horizon", "must be at least 1"));
        }
        if self.num_runs == 0 {
            return Err(Error::param("num_runs", "must be at least 1"));
        }
        if let Some(c) = &self.checkpoints {
            if c.is_empty() || c.iter().any(|&t| t == 0 || t > self.horizon) {
                return Err(Error::param(
                    "checkpoints",
                    format!("must be non-empty and within 1..={}", self.horizon),
                ));
            }
        }
        self.noise.validate()?;
        if self.policies.is_empty() {
            return Err(Error::param("policy", "at least one policy is required"));
        }
        let default_objective = self.objective.build()?;
        let mut labels = std::collections::HashSet::new();
        let mut out = Vec::with_capacity(self.policies.len());
        for p in &self.policies {
            if p.label.is_empty() || p.label.contains([',', '"', '\'', '\n']) {
                return Err(Error::param("label", format!("{:?} is not a usable curve name", p.label)));
            }
            if !labels.insert(p.label.as_str()) {
                return Err(Error::param("label", format!("{:?} is used twice", p.label)));
            }
            let objective = match &p.objective {
                Some(o) => o.build()?,
                None => default_objective.clone(),
            };
            let algorithm = match p.kind {
                PolicyKind::Rwt => Algorithm::Rwt(self.test_config(p, &objective)?),
                PolicyKind::RwtCached => {
                    let cache = p.cache.ok_or_else(|| Error::param("cache", format!("missing for {:?}", p.label)))?;
                    if cache == 0 {
                        return Err(Error::param("cache", "must be at least 1"));
                    }
                    Algorithm::RwtCached(self.test_config(p, &objective)?, cache)
                }
                PolicyKind::Sgd => {
                    let schedule = p.step.ok_or_else(|| Error::param("step", format!("missing for {:?}", p.label)))?;
                    schedule.validate()?;
                    let init = match p.x1 {
                        None => SgdInit::Uniform,
                        Some(x) if (0.0..=1.0).contains(&x) => SgdInit::Fixed(x),
                        Some(x) => return Err(Error::param("x1", format!("{x} is outside [0, 1]"))),
                    };
                    Algorithm::Sgd(SgdConfig { schedule, init })
                }
            };
            out.push(ResolvedPolicy {
                label: p.label.clone(),
                objective,
                algorithm,
            });
        }
        Ok(out)
    }

    fn test_config(&self, p: &PolicySpec, objective: &ObjectiveSpec) -> Result<TestConfig> {
        let p_check = ConfidenceParam::new(
            p.p_check.ok_or_else(|| Error::param("p_check", format!("missing for {:?}", p.label)))?,
        )?;
        match self.noise {
            NoiseModel::Gaussian { sigma_sq } => {
                let s2 = self.test.sigma_sq.unwrap_or(sigma_sq);
                Ok(TestConfig::SubGaussian(SubGaussianTestConfig::new(s2, p_check)?))
            }
            NoiseModel::SymmetricPareto { .. } => {
                let b = self
                    .test
                    .b
                    .ok_or_else(|| Error::param("test.b", "required with heavy-tailed noise"))?;
                let u = match self.test.u {
                    Some(u) => u,
                    None => moment_certificate(objective, &self.noise, b)?,
                };
                Ok(TestConfig::HeavyTail(HeavyTailTestConfig::new(b, u, p_check)?))
            }
        }
    }
}

/// `n` geometrically spaced integer times from `⌈T/n⌉` to `T`, deduplicated.
pub fn geometric_checkpoints(horizon: u64, n: usize) -> Vec<u64> {
    if horizon == 0 || n == 0 {
        return Vec::new();
    }
    let first = horizon.div_ceil(n as u64).max(1);
    if n == 1 || first == horizon {
        return vec![horizon];
    }
    let ratio = (horizon as f64 / first as f64).powf(1.0 / (n - 1) as f64);
    let mut out: Vec<u64> = (0..n)
        .map(|i| ((first as f64) * ratio.powi(i as i32)).round() as u64)
        .map(|t| t.clamp(first, horizon))
        .collect();
    out[0] = first;
    out[n - 1] = horizon;
    out.dedup();
    out
}
