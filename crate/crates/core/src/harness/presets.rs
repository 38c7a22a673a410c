//! Built-in experiments matching the three published regret figures.

use super::config::{ExperimentConfig, ObjectiveConfig, PolicySpec, TestParams};
use crate::error::{Error, Result};
use crate::policies::StepSchedule;
use crate::problems::{strong_convexity_alpha, NoiseModel, Term};

pub const PRESETS: [&str; 3] = ["fig3", "fig4", "fig5"];
pub const DEFAULT_RUNS: u64 = 1000;
pub const DEFAULT_HORIZON: u64 = 100_000;
pub const P_CHECK: f64 = 0.2;

fn base(name: &str, runs: u64, horizon: u64, seed: u64, objective: ObjectiveConfig) -> ExperimentConfig {
    ExperimentConfig {
        name: name.to_string(),
        horizon,
        num_runs: runs,
        base_seed: seed,
        checkpoints: None,
        output_dir: None,
        log_axes: true,
        objective,
        noise: NoiseModel::Gaussian { sigma_sq: 1.0 },
        test: TestParams::default(),
        policies: Vec::new(),
    }
}

/// `4|x - 0.2|^1.2` under `N(0, 1)`: the walk against SGD with four step sizes,
/// including `1/(α̂t)` with the underestimate `α̂ = α/4`.
pub fn fig3(runs: u64, horizon: u64, seed: u64) -> ExperimentConfig {
    let alpha = strong_convexity_alpha(4.0, 1.2, 0.2).expect("exponent above one");
    let mut cfg = base("fig3", runs, horizon, seed, ObjectiveConfig::power(4.0, 1.2, 0.2));
    cfg.policies = vec![
        PolicySpec::rwt("rwt", P_CHECK),
        PolicySpec::sgd("sgd_0.1/t", StepSchedule::COverT { c: 0.1 }),
        PolicySpec::sgd("sgd_1/(alpha*t)", StepSchedule::InverseAlphaT { alpha_hat: alpha }),
        PolicySpec::sgd("sgd_1/(alpha_hat*t)", StepSchedule::InverseAlphaT { alpha_hat: alpha / 4.0 }),
        PolicySpec::sgd("sgd_1/sqrt(t)", StepSchedule::InverseSqrtT),
    ];
    cfg
}

/// `3|x-0.2|^1.6 - 1.5744|x-0.2|^2`.
pub fn fig4_f1() -> ObjectiveConfig {
    ObjectiveConfig {
        xstar: 0.2,
        terms: vec![Term::new(3.0, 1.6), Term::new(-1.5744, 2.0)],
        fclass: None,
    }
}

/// `3|x-0.2|^1.6`.
pub fn fig4_f2() -> ObjectiveConfig {
    ObjectiveConfig::power(3.0, 1.6, 0.2)
}

/// The walk and `1/√t` SGD on a barely convex objective and on its leading term.
pub fn fig4(runs: u64, horizon: u64, seed: u64) -> ExperimentConfig {
    let mut cfg = base("fig4", runs, horizon, seed, fig4_f1());
    cfg.policies = vec![
        PolicySpec::rwt("rwt_f1", P_CHECK),
        PolicySpec::sgd("sgd_1/sqrt(t)_f1", StepSchedule::InverseSqrtT),
        PolicySpec::rwt("rwt_f2", P_CHECK).with_objective(fig4_f2()),
        PolicySpec::sgd("sgd_1/sqrt(t)_f2", StepSchedule::InverseSqrtT).with_objective(fig4_f2()),
    ];
    cfg
}

/// Cached walk with cache sizes 1, 3 and 6 on `|x - 0.05|^1.4`.
pub fn fig5(runs: u64, horizon: u64, seed: u64) -> ExperimentConfig {
    let mut cfg = base("fig5", runs, horizon, seed, ObjectiveConfig::power(1.0, 1.4, 0.05));
    cfg.policies = [1, 3, 6]
        .into_iter()
        .map(|c| PolicySpec::rwt_cached(format!("rwt_cache{c}"), P_CHECK, c))
        .collect();
    cfg
}

pub fn preset(name: &str, runs: u64, horizon: u64, seed: u64) -> Result<ExperimentConfig> {
    match name {
        "fig3" => Ok(fig3(runs, horizon, seed)),
        "fig4" => Ok(fig4(runs, horizon, seed)),
        "fig5" => Ok(fig5(runs, horizon, seed)),
        _ => Err(Error::param(
            "preset",
            format!("unknown preset {name:?}, expected one of {}", PRESETS.join(", ")),
        )),
    }
}
