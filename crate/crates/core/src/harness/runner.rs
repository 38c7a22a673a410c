//! Monte Carlo fan-out over seeded runs and aggregation into a summary table.

use rayon::prelude::*;

use super::config::{Algorithm, ExperimentConfig, ResolvedPolicy};
use crate::error::Result;
use crate::policies::{run_rwt, run_rwt_cached, run_sgd, RegretTrace};
use crate::problems::{run_rng, GradientOracle, NoiseModel};

/// Runs one policy for one run index of an experiment seeded with `base_seed`.
pub fn run_policy(
    policy: &ResolvedPolicy,
    noise: &NoiseModel,
    horizon: u64,
    base_seed: u64,
    run: u64,
) -> Result<RegretTrace> {
    let mut oracle = GradientOracle::new(policy.objective.clone(), *noise, run_rng(base_seed, run))?;
    match &policy.algorithm {
        Algorithm::Rwt(test) => Ok(run_rwt(&mut oracle, test, horizon)),
        Algorithm::RwtCached(test, cache) => run_rwt_cached(&mut oracle, test, horizon, *cache),
        Algorithm::Sgd(cfg) => run_sgd(&mut oracle, cfg, horizon),
    }
}

/// Cumulative regret at `checkpoints` for every run, indexed by run.
pub fn run_curves(
    policy: &ResolvedPolicy,
    noise: &NoiseModel,
    horizon: u64,
    base_seed: u64,
    num_runs: u64,
    checkpoints: &[u64],
) -> Result<Vec<Vec<f64>>> {
    (0..num_runs)
        .into_par_iter()
        .map(|run| {
            run_policy(policy, noise, horizon, base_seed, run).map(|tr| tr.cumulative_at(checkpoints))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub policy: String,
    pub checkpoint_t: u64,
    pub mean_regret: f64,
    /// Sample standard deviation over `√num_runs`; zero for a single run.
    pub stderr: f64,
    pub num_runs: u64,
}

/// Mean cumulative regret per policy and checkpoint, rows sorted by (policy, t).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SummaryTable {
    rows: Vec<SummaryRow>,
}

impl SummaryTable {
    pub fn from_rows(mut rows: Vec<SummaryRow>) -> Self {
        rows.sort_by(|a, b| a.policy.cmp(&b.policy).then(a.checkpoint_t.cmp(&b.checkpoint_t)));
        SummaryTable { rows }
    }

    /// Aggregates per-run curves (outer index: run) in run order.
    pub fn push_curves(&mut self, policy: &str, checkpoints: &[u64], curves: &[Vec<f64>]) {
        let n = curves.len() as u64;
        for (j, &t) in checkpoints.iter().enumerate() {
            let (mean, stderr) = mean_stderr(curves.iter().map(|c| c[j]));
            self.rows.push(SummaryRow {
                policy: policy.to_string(),
                checkpoint_t: t,
                mean_regret: mean,
                stderr,
                num_runs: n,
            });
        }
        let rows = std::mem::take(&mut self.rows);
        *self = Self::from_rows(rows);
    }

    pub fn rows(&self) -> &[SummaryRow] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Distinct policy labels in row order.
    pub fn policies(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if out.last() != Some(&r.policy.as_str()) {
                out.push(&r.policy);
            }
        }
        out
    }

    pub fn curve(&self, policy: &str) -> Vec<&SummaryRow> {
        self.rows.iter().filter(|r| r.policy == policy).collect()
    }

    pub fn row(&self, policy: &str, t: u64) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.policy == policy && r.checkpoint_t == t)
    }

    pub fn mean_at(&self, policy: &str, t: u64) -> Option<f64> {
        self.row(policy, t).map(|r| r.mean_regret)
    }
}

/// Mean and standard error, accumulated in iteration order.
pub fn mean_stderr(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Runs every policy of a validated configuration.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<SummaryTable> {
    let policies = cfg.resolve()?;
    let checkpoints = cfg.checkpoint_times();
    let mut table = SummaryTable::default();
    for p in &policies {
        let curves = run_curves(p, &cfg.noise, cfg.horizon, cfg.base_seed, cfg.num_runs, &checkpoints)?;
        table.push_curves(&p.label, &checkpoints, &curves);
    }
    Ok(table)
}
