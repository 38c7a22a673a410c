//! Statistical and structural checks of the whole pipeline, each reported as a
//! single pass/fail line. Tolerances are fixed constants below.

use std::fmt;
use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Distribution, Pareto, StandardNormal};

use crate::bounds::{lemma1_tail, lemma2_sample_bound, lemma3_sample_bound, theorem1_regret_bound, theorem2_regret_bound, BoundInputs};
use crate::dyadic_tree::{DyadicPoint, NodeId};
use crate::error::{Error, Result};
use crate::harness::config::{geometric_checkpoints, ExperimentConfig, ObjectiveConfig, PolicySpec, TestParams};
use crate::harness::output::write_csv;
use crate::harness::presets::{fig3, fig4, fig4_f1, fig4_f2, fig5};
use crate::harness::runner::{run_experiment, SummaryTable};
use crate::policies::{run_rwt, run_rwt_cached, run_rwt_observed, FinalPosition, MoveDecision, WalkStep};
use crate::problems::{moment_certificate, run_rng, GradientOracle, NoiseModel, ObjectiveSpec};
use crate::sequential_tests::{
    heavytail_threshold, run_test, subgaussian_threshold, ConfidenceParam, HeavyTailTestConfig, SubGaussianTestConfig,
    TestConfig, TestOutcome, TestSession, Verdict,
};

pub const P_CHECK: f64 = 0.2;
pub const TEST_GRADIENT: f64 = 0.3;
pub const TEST_RUNS: u64 = 2000;
pub const ERROR_MARGIN: f64 = 0.027;
pub const HEAVY_TEST_RUNS: u64 = 200;
pub const HEAVY_TAIL_INDEX: f64 = 1.9;
/// Noise scale of the heavy-tail test check; keeps `B₀` small enough for the
/// test to stop within a few hundred thousand samples.
pub const HEAVY_TEST_SCALE: f64 = 0.1;
pub const HEAVY_B: f64 = 1.5;
pub const LEMMA1_WALKS: u64 = 500;
pub const LEMMA1_STEPS: u64 = 200;
pub const LEMMA1_MARGIN: f64 = 0.035;
/// Samples a single walk may draw before the move count is frozen.
pub const LEMMA1_SAMPLE_CAP: u64 = 1_000_000;
pub const FIGURE_RUNS: u64 = 200;
pub const FIGURE_HORIZON: u64 = 100_000;
pub const CACHE3_MIN_REDUCTION: f64 = 0.40;
pub const CACHE6_MAX_GAIN: f64 = 0.15;
pub const TREE_DEPTH: u64 = 12;
pub const SEED: u64 = 0;

/// One criterion's outcome.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {:>2} {}: {}", self.id, self.name, self.detail)
    }
}

fn check(id: u8, name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { id, name, passed, detail }
}

fn p_check() -> ConfidenceParam {
    ConfidenceParam::new(P_CHECK).expect("constant is in range")
}

fn half() -> DyadicPoint {
    DyadicPoint::try_new(1u32, 1).expect("1/2")
}

/// Sub-Gaussian test at `g = 0.3`, `σ² = 1`: wrong-sign rate and mean sample count.
fn subgaussian_runs(runs: u64) -> (u64, f64) {
    let cfg = TestConfig::SubGaussian(SubGaussianTestConfig::new(1.0, p_check()).expect("valid"));
    let point = half();
    let mut wrong = 0;
    let mut total = 0u64;
    for r in 0..runs {
        let mut rng = run_rng(SEED, r);
        let run = run_test(
            &point,
            || {
                let z: f64 = rng.sample(StandardNormal);
                TEST_GRADIENT + z
            },
            &cfg,
            u64::MAX,
        );
        if run.outcome == TestOutcome::Decided(Verdict::Minus) {
            wrong += 1;
        }
        total += run.samples;
    }
    (wrong, total as f64 / runs as f64)
}

/// Heavy-tail test configuration of the sample-complexity check: `u` certifies
/// `E|0.3 + ξ|^b` for the symmetric Pareto noise.
pub fn heavy_test_config() -> Result<HeavyTailTestConfig> {
    let noise = NoiseModel::SymmetricPareto {
        tail_index: HEAVY_TAIL_INDEX,
        scale: HEAVY_TEST_SCALE,
    };
    let u = 2f64.powf(HEAVY_B - 1.0) * (TEST_GRADIENT.powf(HEAVY_B) + noise.abs_moment(HEAVY_B)?);
    HeavyTailTestConfig::new(HEAVY_B, u, p_check())
}

fn heavy_runs(runs: u64, cfg: &HeavyTailTestConfig) -> (u64, f64) {
    let pareto = Pareto::new(HEAVY_TEST_SCALE, HEAVY_TAIL_INDEX).expect("valid");
    let tc = TestConfig::HeavyTail(*cfg);
    let point = half();
    let mut wrong = 0;
    let mut total = 0u64;
    for r in 0..runs {
        let mut rng = run_rng(SEED, r);
        let run = run_test(
            &point,
            || {
                let m = pareto.sample(&mut rng);
                TEST_GRADIENT + if rng.random::<bool>() { m } else { -m }
            },
            &tc,
            u64::MAX,
        );
        if run.outcome == TestOutcome::Decided(Verdict::Minus) {
            wrong += 1;
        }
        total += run.samples;
    }
    (wrong, total as f64 / runs as f64)
}

pub fn check_test_error_rate() -> CheckResult {
    let (wrong, _) = subgaussian_runs(TEST_RUNS);
    let rate = wrong as f64 / TEST_RUNS as f64;
    let limit = P_CHECK + ERROR_MARGIN;
    check(
        1,
        "sequential-test error rate",
        rate <= limit,
        format!("wrong-sign rate {rate:.4} over {TEST_RUNS} runs, limit {limit:.3}"),
    )
}

pub fn check_sample_complexity() -> CheckResult {
    let (_, mean_tau) = subgaussian_runs(TEST_RUNS);
    let bound2 = lemma2_sample_bound(TEST_GRADIENT, 1.0, p_check()).expect("g > 0");
    let ht = heavy_test_config().expect("valid heavy-tail config");
    let (ht_wrong, ht_tau) = heavy_runs(HEAVY_TEST_RUNS, &ht);
    let bound3 = lemma3_sample_bound(TEST_GRADIENT, &ht).expect("g > 0");
    check(
        2,
        "sample-complexity dominance",
        mean_tau <= bound2 && ht_tau <= bound3,
        format!(
            "sub-Gaussian mean tau {mean_tau:.1} <= {bound2:.1}; heavy-tail (b={HEAVY_B}, Pareto index \
             {HEAVY_TAIL_INDEX}, scale {HEAVY_TEST_SCALE}) mean tau {ht_tau:.0} <= {bound3:.4e}, \
             wrong {ht_wrong}/{HEAVY_TEST_RUNS}"
        ),
    )
}

/// Outcome of the geometric-convergence experiment.
#[derive(Debug, Clone, Copy)]
pub struct Lemma1Stats {
    pub violations: u64,
    pub truncated: u64,
    pub right_moves: u64,
    pub moves: u64,
}

fn right_direction(step: &WalkStep, xstar: f64) -> bool {
    let l = step.from.left_child().contains(xstar);
    let r = step.from.right_child().contains(xstar);
    match step.decision {
        MoveDecision::LeftChild => l,
        MoveDecision::RightChild => r,
        MoveDecision::Parent => !l && !r,
    }
}

/// Walks on `4|x - 0.2|^1.2` under `N(0, 1)`, each stopped after `steps` moves
/// or `sample_cap` samples. A walk that hits the cap is judged at the number of
/// moves it completed.
pub fn lemma1_experiment(walks: u64, steps: u64, sample_cap: u64) -> Result<Lemma1Stats> {
    let objective = ObjectiveSpec::power(4.0, 1.2, 0.2)?;
    let xstar = objective.xstar();
    let p = p_check().walk_bias();
    let test = TestConfig::SubGaussian(SubGaussianTestConfig::new(1.0, p_check())?);
    let mut stats = Lemma1Stats {
        violations: 0,
        truncated: 0,
        right_moves: 0,
        moves: 0,
    };
    for w in 0..walks {
        let mut oracle = GradientOracle::new(objective.clone(), NoiseModel::Gaussian { sigma_sq: 1.0 }, run_rng(SEED, w))?;
        let mut right = 0;
        let trace = run_rwt_observed(&mut oracle, &test, sample_cap, Some(steps), |s| {
            if right_direction(s, xstar) {
                right += 1;
            }
        });
        let n = trace.moves();
        stats.moves += n;
        stats.right_moves += right;
        if n < steps {
            stats.truncated += 1;
        }
        let FinalPosition::Node(node) = trace.final_position() else {
            unreachable!("the walk ends on a node")
        };
        let bound = if n == 0 { 1.0 } else { lemma1_tail(n, p)?.0 };
        if node.max_distance_to(xstar) > bound {
            stats.violations += 1;
        }
    }
    Ok(stats)
}

pub fn check_lemma1() -> CheckResult {
    let p = p_check().walk_bias();
    let (delta, prob) = lemma1_tail(LEMMA1_STEPS, p).expect("p > 1/2");
    let limit = prob + LEMMA1_MARGIN;
    match lemma1_experiment(LEMMA1_WALKS, LEMMA1_STEPS, LEMMA1_SAMPLE_CAP) {
        Ok(s) => {
            let frac = s.violations as f64 / LEMMA1_WALKS as f64;
            let bias = s.right_moves as f64 / s.moves.max(1) as f64;
            check(
                3,
                "geometric convergence",
                frac <= limit,
                format!(
                    "violation fraction {frac:.4} <= {limit:.4} (delta bound {delta:.4} at n={LEMMA1_STEPS}); \
                     {} of {LEMMA1_WALKS} walks stopped early by the {LEMMA1_SAMPLE_CAP}-sample cap \
                     (mean moves {:.1}); right-direction moves {bias:.4} vs p >= {p:.3}",
                    s.truncated,
                    s.moves as f64 / LEMMA1_WALKS as f64
                ),
            )
        }
        Err(e) => check(3, "geometric convergence", false, e.to_string()),
    }
}

/// Default grid plus the decade times used by the order check.
fn figure_checkpoints(horizon: u64) -> Vec<u64> {
    let mut c = geometric_checkpoints(horizon, 64);
    c.extend([1_000, 10_000, 100_000].into_iter().filter(|&t| t <= horizon));
    c.sort_unstable();
    c.dedup();
    c
}

fn run_figure(mut cfg: ExperimentConfig) -> Result<SummaryTable> {
    cfg.checkpoints = Some(figure_checkpoints(cfg.horizon));
    run_experiment(&cfg)
}

fn fig3_table() -> &'static Result<SummaryTable> {
    static T: OnceLock<Result<SummaryTable>> = OnceLock::new();
    T.get_or_init(|| run_figure(fig3(FIGURE_RUNS, FIGURE_HORIZON, SEED)))
}

fn fig4_table() -> &'static Result<SummaryTable> {
    static T: OnceLock<Result<SummaryTable>> = OnceLock::new();
    T.get_or_init(|| run_figure(fig4(FIGURE_RUNS, FIGURE_HORIZON, SEED)))
}

fn final_mean(table: &SummaryTable, policy: &str) -> f64 {
    table.mean_at(policy, FIGURE_HORIZON).unwrap_or(f64::NAN)
}

pub fn check_fig3() -> CheckResult {
    let name = "regret against SGD step sizes";
    let table = match fig3_table() {
        Ok(t) => t,
        Err(e) => return check(4, name, false, e.to_string()),
    };
    let rwt = final_mean(table, "rwt");
    let sqrt = final_mean(table, "sgd_1/sqrt(t)");
    let hat = final_mean(table, "sgd_1/(alpha_hat*t)");
    let tuned = final_mean(table, "sgd_0.1/t");
    let exact = final_mean(table, "sgd_1/(alpha*t)");
    check(
        4,
        name,
        rwt < sqrt && rwt < hat,
        format!(
            "R(T) rwt {rwt:.2} < sgd 1/sqrt(t) {sqrt:.2} and < sgd 1/(alpha_hat t) {hat:.2}; \
             (sgd 0.1/t {tuned:.2}, sgd 1/(alpha t) {exact:.2})"
        ),
    )
}

pub fn check_fig4() -> CheckResult {
    let name = "adaptivity to a better objective";
    let table = match fig4_table() {
        Ok(t) => t,
        Err(e) => return check(5, name, false, e.to_string()),
    };
    let (r1, r2) = (final_mean(table, "rwt_f1"), final_mean(table, "rwt_f2"));
    let (s1, s2) = (final_mean(table, "sgd_1/sqrt(t)_f1"), final_mean(table, "sgd_1/sqrt(t)_f2"));
    check(
        5,
        name,
        r2 < r1 && s2 >= s1,
        format!("rwt f2 {r2:.2} < f1 {r1:.2}; sgd f2 {s2:.2} >= f1 {s1:.2}"),
    )
}

pub fn check_fig5() -> CheckResult {
    let name = "caching";
    let table = match run_figure(fig5(FIGURE_RUNS, FIGURE_HORIZON, SEED)) {
        Ok(t) => t,
        Err(e) => return check(6, name, false, e.to_string()),
    };
    let c1 = final_mean(&table, "rwt_cache1");
    let c3 = final_mean(&table, "rwt_cache3");
    let c6 = final_mean(&table, "rwt_cache6");
    let reduction = 1.0 - c3 / c1;
    let gain = 1.0 - c6 / c3;
    check(
        6,
        name,
        reduction >= CACHE3_MIN_REDUCTION && gain <= CACHE6_MAX_GAIN,
        format!(
            "R(T) c=1 {c1:.2}, c=3 {c3:.2}, c=6 {c6:.2}; reduction 3 vs 1 {:.1}% >= {:.0}%, \
             gain 6 vs 3 {:.1}% <= {:.0}%",
            100.0 * reduction,
            100.0 * CACHE3_MIN_REDUCTION,
            100.0 * gain,
            100.0 * CACHE6_MAX_GAIN
        ),
    )
}

/// The heavy-tail regret experiment: symmetric Pareto noise with index 1.9 on
/// `4|x - 0.2|^1.2`, walk at `b = 1.5` with the certified `u`.
pub fn heavy_tail_config(runs: u64) -> ExperimentConfig {
    ExperimentConfig {
        name: "heavy_tail".into(),
        horizon: FIGURE_HORIZON,
        num_runs: runs,
        base_seed: SEED,
        checkpoints: Some(vec![10_000, 100_000]),
        output_dir: None,
        log_axes: true,
        objective: ObjectiveConfig::power(4.0, 1.2, 0.2),
        noise: NoiseModel::SymmetricPareto {
            tail_index: HEAVY_TAIL_INDEX,
            scale: HEAVY_TEST_SCALE,
        },
        test: TestParams {
            b: Some(HEAVY_B),
            ..TestParams::default()
        },
        policies: vec![PolicySpec::rwt("rwt", P_CHECK)],
    }
}

pub fn check_heavy_tail() -> CheckResult {
    let name = "heavy-tail sublinearity";
    let cfg = heavy_tail_config(FIGURE_RUNS);
    let run = || -> Result<(bool, String)> {
        let table = run_experiment(&cfg)?;
        let obj = cfg.objective.build()?;
        let u = moment_certificate(&obj, &cfg.noise, HEAVY_B)?;
        let ht = HeavyTailTestConfig::new(HEAVY_B, u, p_check())?;
        let inputs = BoundInputs::heavy_tail(&ht, obj.g_max());
        let r4 = table.mean_at("rwt", 10_000).unwrap_or(f64::NAN);
        let r5 = table.mean_at("rwt", 100_000).unwrap_or(f64::NAN);
        let b4 = theorem2_regret_bound(&obj.fclass(), &inputs, 10_000)?;
        let b5 = theorem2_regret_bound(&obj.fclass(), &inputs, 100_000)?;
        let sublinear = r5 / 1e5 < r4 / 1e4;
        let dominated = r4 <= b4 && r5 <= b5;
        Ok((
            sublinear && dominated,
            format!(
                "R/T at 1e4 {:.6}, at 1e5 {:.6} (must decrease); R {r4:.1} <= {b4:.4e}, {r5:.1} <= {b5:.4e}; \
                 B0 {:.1}, u {u:.3}, moves in run 0: {}",
                r4 / 1e4,
                r5 / 1e5,
                ht.b0(),
                first_run_moves(&cfg)?
            ),
        ))
    };
    match run() {
        Ok((pass, detail)) => check(7, name, pass, detail),
        Err(e) => check(7, name, false, e.to_string()),
    }
}

fn first_run_moves(cfg: &ExperimentConfig) -> Result<u64> {
    let policies = cfg.resolve()?;
    let trace = crate::harness::runner::run_policy(&policies[0], &cfg.noise, cfg.horizon, cfg.base_seed, 0)?;
    Ok(trace.moves())
}

fn dominance_rows(table: &SummaryTable, policy: &str, obj: &ObjectiveSpec) -> Result<(usize, usize, usize, f64)> {
    let inputs = BoundInputs::subgaussian(1.0, p_check(), obj.g_max());
    let (mut ok, mut bad, mut skipped) = (0, 0, 0);
    let mut first_t = f64::NAN;
    for row in table.curve(policy) {
        match theorem1_regret_bound(&obj.fclass(), &inputs, row.checkpoint_t) {
            Ok(b) if row.mean_regret <= b => {
                if first_t.is_nan() {
                    first_t = row.checkpoint_t as f64;
                }
                ok += 1
            }
            Ok(_) => bad += 1,
            Err(Error::OutOfDomain { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((ok, bad, skipped, first_t))
}

pub fn check_theorem_dominance() -> CheckResult {
    let name = "regret bound dominance";
    let run = || -> Result<(bool, String)> {
        let t3 = fig3_table().as_ref().map_err(Clone::clone)?;
        let t4 = fig4_table().as_ref().map_err(Clone::clone)?;
        let cases = [
            (t3, "rwt", ObjectiveConfig::power(4.0, 1.2, 0.2).build()?),
            (t4, "rwt_f1", fig4_f1().build()?),
            (t4, "rwt_f2", fig4_f2().build()?),
        ];
        let mut pass = true;
        let mut parts = Vec::new();
        for (table, policy, obj) in &cases {
            let (ok, bad, skipped, first) = dominance_rows(table, policy, obj)?;
            pass &= bad == 0 && ok > 0;
            parts.push(format!("{policy}: {ok} below, {bad} above, {skipped} undefined (first checked t={first})"));
        }
        Ok((pass, parts.join("; ")))
    };
    match run() {
        Ok((pass, detail)) => check(8, name, pass, detail),
        Err(e) => check(8, name, false, e.to_string()),
    }
}

pub fn check_order() -> CheckResult {
    let name = "regret order";
    let table = match fig3_table() {
        Ok(t) => t,
        Err(e) => return check(9, name, false, e.to_string()),
    };
    let ratios: Vec<f64> = [1_000u64, 10_000, 100_000]
        .iter()
        .map(|&t| table.mean_at("rwt", t).unwrap_or(f64::NAN) / (t as f64).sqrt())
        .collect();
    check(
        9,
        name,
        ratios.windows(2).all(|w| w[1] < w[0]),
        format!(
            "R(T)/sqrt(T) at 1e3, 1e4, 1e5: {:.4}, {:.4}, {:.4} (must decrease)",
            ratios[0], ratios[1], ratios[2]
        ),
    )
}

/// Every child pair tiles its parent and each depth tiles `[0, 1]`.
pub fn tree_partition_ok(max_depth: u64) -> (bool, u64) {
    let mut level = vec![NodeId::root()];
    let mut nodes = 0;
    for _ in 1..=max_depth {
        let mut next = Vec::with_capacity(level.len() * 2);
        for n in &level {
            let (l, r) = (n.left_child(), n.right_child());
            let (iv, li, ri) = (n.interval(), l.interval(), r.interval());
            if li.left != iv.left || li.right != iv.mid || ri.left != iv.mid || ri.right != iv.right {
                return (false, nodes);
            }
            if l.parent() != *n || r.parent() != *n {
                return (false, nodes);
            }
            next.push(l);
            next.push(r);
        }
        let mut edge = DyadicPoint::zero();
        for n in &next {
            let iv = n.interval();
            if iv.left != edge {
                return (false, nodes);
            }
            edge = iv.right;
        }
        if !edge.is_one() {
            return (false, nodes);
        }
        nodes += next.len() as u64;
        level = next;
    }
    (true, nodes)
}

fn thresholds_decreasing(max_s: u64) -> bool {
    let sg = SubGaussianTestConfig::new(1.0, p_check()).expect("valid");
    let ht = heavy_test_config().expect("valid");
    let mut prev = f64::INFINITY;
    for s in 3..=max_s {
        let v = subgaussian_threshold(s, &sg).expect("s >= 3");
        if v > prev {
            return false;
        }
        prev = v;
    }
    // the heavy-tail band is checked through a session so the penalty sum stays O(s)
    let mut session = TestSession::new();
    let mut prev = heavytail_threshold(3, &ht).expect("s >= 3");
    for s in 1..=max_s {
        let _ = session.ht_step(0.0, &ht);
        if s >= 4 {
            let v = session.heavytail_threshold(&ht);
            if v > prev * (1.0 + 1e-12) {
                return false;
            }
            prev = v;
        }
    }
    true
}

fn csv_bytes(cfg: &ExperimentConfig) -> Result<Vec<u8>> {
    let table = run_experiment(cfg)?;
    let mut buf = Vec::new();
    write_csv(&table, &mut buf).map_err(|e| Error::param("csv", e.to_string()))?;
    Ok(buf)
}

pub fn check_structural() -> CheckResult {
    let name = "determinism and structure";
    let run = || -> Result<(bool, String)> {
        let cfg = fig3(4, 1_000, 7);
        let deterministic = csv_bytes(&cfg)? == csv_bytes(&cfg)?;
        let (tree_ok, nodes) = tree_partition_ok(TREE_DEPTH);
        let thresholds = thresholds_decreasing(100_000);
        let obj = ObjectiveSpec::power(4.0, 1.2, 0.2)?;
        let noise = NoiseModel::Gaussian { sigma_sq: 1.0 };
        let test = TestConfig::SubGaussian(SubGaussianTestConfig::new(1.0, p_check())?);
        let mut cache_ok = true;
        for seed in 0..20 {
            let a = run_rwt(&mut GradientOracle::new(obj.clone(), noise, run_rng(SEED, seed))?, &test, 20_000);
            let b = run_rwt_cached(&mut GradientOracle::new(obj.clone(), noise, run_rng(SEED, seed))?, &test, 20_000, 1)?;
            cache_ok &= a == b;
        }
        let pass = deterministic && tree_ok && nodes == 8190 && thresholds && cache_ok;
        Ok((
            pass,
            format!(
                "identical CSV reruns {deterministic}; tree partition over {nodes} nodes {tree_ok}; \
                 thresholds non-increasing on s=3..1e5 {thresholds}; cache 1 equals plain walk on 20 seeds {cache_ok}"
            ),
        ))
    };
    match run() {
        Ok((pass, detail)) => check(10, name, pass, detail),
        Err(e) => check(10, name, false, e.to_string()),
    }
}

/// The fast suites: test error, sample complexity, convergence, structure.
pub fn quick_suite() -> Vec<CheckResult> {
    vec![
        check_test_error_rate(),
        check_sample_complexity(),
        check_lemma1(),
        check_structural(),
    ]
}

/// All ten criteria.
pub fn full_suite() -> Vec<CheckResult> {
    vec![
        check_test_error_rate(),
        check_sample_complexity(),
        check_lemma1(),
        check_fig3(),
        check_fig4(),
        check_fig5(),
        check_heavy_tail(),
        check_theorem_dominance(),
        check_order(),
        check_structural(),
    ]
}
