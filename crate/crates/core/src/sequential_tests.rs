//! Local sequential sign tests.
//!
//! A test draws gradient samples at one query point until a confidence
//! band around the (possibly truncated) running mean excludes zero, and then
//! reports the sign. The band follows a law-of-the-iterated-logarithm envelope,
//! so the test is valid at whatever time it happens to stop: each wrong-sign
//! verdict has probability at most `p_check`.
//!
//! Two variants exist. The sub-Gaussian test uses the plain running mean.
//! The heavy-tailed test zeroes the `t`-th sample when it exceeds a growing
//! truncation level `B_t` and widens the band by the accumulated truncation bias.
//!
//! Sessions are streaming: they keep a count and one or two running sums, never
//! the samples themselves. No verdict is issued before the third sample.

use crate::dyadic_tree::DyadicPoint;
use crate::error::{Error, Result};

/// Samples required before a verdict may be issued.
pub const MIN_SAMPLES: u64 = 3;

/// Per-test error tolerance, restricted to `(0, 1 - 2^{-1/3})` so that three
/// correct verdicts in a row happen with probability above one half.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ConfidenceParam(f64);

impl ConfidenceParam {
    /// `1 - 2^{-1/3}`, the exclusive upper limit.
    pub fn upper_limit() -> f64 {
        1.0 - 2f64.powf(-1.0 / 3.0)
    }

    pub fn new(p_check: f64) -> Result<Self> {
        if p_check > 0.0 && p_check < Self::upper_limit() {
            Ok(ConfidenceParam(p_check))
        } else {
            Err(Error::param(
                "p_check",
                format!(
                    "{p_check} is outside (0, {:.6})",
                    ConfidenceParam::upper_limit()
                ),
            ))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Guaranteed bias `(1 - p_check)^3` of the walk built on these tests.
    pub fn walk_bias(self) -> f64 {
        (1.0 - self.0).powi(3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubGaussianTestConfig {
    sigma_sq: f64,
    p_check: ConfidenceParam,
}

impl SubGaussianTestConfig {
    pub fn new(sigma_sq: f64, p_check: ConfidenceParam) -> Result<Self> {
        if !(sigma_sq > 0.0 && sigma_sq.is_finite()) {
            return Err(Error::param("sigma_sq", format!("{sigma_sq} must be > 0")));
        }
        Ok(SubGaussianTestConfig { sigma_sq, p_check })
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }

    pub fn p_check(&self) -> ConfidenceParam {
        self.p_check
    }
}

/// Heavy-tailed test parameters: moment order `b`, moment bound `u`, and the
/// derived truncation scale `B₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeavyTailTestConfig {
    b: f64,
    u: f64,
    p_check: ConfidenceParam,
    b0: f64,
}

impl HeavyTailTestConfig {
    pub fn new(b: f64, u: f64, p_check: ConfidenceParam) -> Result<Self> {
        if !(b > 1.0 && b.is_finite()) {
            return Err(Error::param("b", format!("moment order {b} must be > 1")));
        }
        if !(u > 0.0 && u.is_finite()) {
            return Err(Error::param("u", format!("moment bound {u} must be > 0")));
        }
        Ok(HeavyTailTestConfig {
            b,
            u,
            p_check,
            b0: compute_b0(b, u, p_check),
        })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn b0(&self) -> f64 {
        self.b0
    }

    pub fn p_check(&self) -> ConfidenceParam {
        self.p_check
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestConfig {
    SubGaussian(SubGaussianTestConfig),
    HeavyTail(HeavyTailTestConfig),
}

impl TestConfig {
    pub fn p_check(&self) -> ConfidenceParam {
        match self {
            TestConfig::SubGaussian(c) => c.p_check,
            TestConfig::HeavyTail(c) => c.p_check,
        }
    }
}

/// Sign verdict of a finished test: `Plus` means `g(x) > 0` (optimum to the left).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Plus,
    Minus,
}

impl Verdict {
    pub fn sign(self) -> i8 {
        match self {
            Verdict::Plus => 1,
            Verdict::Minus => -1,
        }
    }

    pub fn flipped(self) -> Verdict {
        match self {
            Verdict::Plus => Verdict::Minus,
            Verdict::Minus => Verdict::Plus,
        }
    }
}

/// `sqrt((5σ²/s) · ln(6 ln s / √p̌))`.
pub fn subgaussian_threshold(s: u64, cfg: &SubGaussianTestConfig) -> Result<f64> {
    check_min_samples(s)?;
    Ok(subgaussian_threshold_unchecked(s, cfg))
}

fn subgaussian_threshold_unchecked(s: u64, cfg: &SubGaussianTestConfig) -> f64 {
    let s = s as f64;
    let log_term = (6.0 * s.ln() / cfg.p_check.0.sqrt()).ln();
    (5.0 * cfg.sigma_sq / s * log_term).sqrt()
}

/// `λ(t) = 10^b · ln(12 · max{ln t, 2} / (b √p̌))`.
pub fn lambda_t(t: u64, b: f64, p_check: ConfidenceParam) -> f64 {
    let lt = (t.max(1) as f64).ln().max(2.0);
    10f64.powf(b) * (12.0 * lt / (b * p_check.0.sqrt())).ln()
}

/// The truncation scale `B₀`: the largest of
/// `(2^{(2+b)/b} / λ(1)^{(2-b)/b} · 15u/(3-√2))^{1/b}`,
/// `(4√2 u ln 2 / √(ln ln 3))^{1/b}` and `2√2 b u 10^{b/2}`.
pub fn compute_b0(b: f64, u: f64, p_check: ConfidenceParam) -> f64 {
    let [t1, t2, t3] = b0_terms(b, u, p_check);
    t1.max(t2).max(t3)
}

/// The three candidates whose maximum is `B₀`, in printed order.
pub fn b0_terms(b: f64, u: f64, p_check: ConfidenceParam) -> [f64; 3] {
    let sqrt2 = std::f64::consts::SQRT_2;
    let lambda1 = lambda_t(1, b, p_check);
    let t1 = (2f64.powf((2.0 + b) / b) / lambda1.powf((2.0 - b) / b) * 15.0 * u / (3.0 - sqrt2))
        .powf(1.0 / b);
    let t2 = (4.0 * sqrt2 * u * std::f64::consts::LN_2 / 3f64.ln().ln().sqrt()).powf(1.0 / b);
    let t3 = 2.0 * sqrt2 * b * u * 10f64.powf(b / 2.0);
    [t1, t2, t3]
}

/// `B_t = B₀ (t / λ(t))^{1/b}`.
pub fn truncation_bound(t: u64, cfg: &HeavyTailTestConfig) -> f64 {
    cfg.b0 * (t as f64 / lambda_t(t, cfg.b, cfg.p_check)).powf(1.0 / cfg.b)
}

fn truncation_penalty(t: u64, cfg: &HeavyTailTestConfig) -> f64 {
    cfg.u / truncation_bound(t, cfg).powf(cfg.b - 1.0)
}

fn heavytail_band(s: u64, cfg: &HeavyTailTestConfig) -> f64 {
    let b = cfg.b;
    let sf = s as f64;
    let log_term = (12.0 * sf.ln() / (b * cfg.p_check.0.sqrt())).ln();
    (cfg.b0 * cfg.b0 / 2.0 * sf.powf((2.0 - 2.0 * b) / b) * log_term).sqrt()
}

/// Heavy-tailed threshold at sample count `s`, summing the truncation penalty
/// `Σ_{t≤s} u / B_t^{b-1}` from scratch. Sessions keep that sum incrementally.
pub fn heavytail_threshold(s: u64, cfg: &HeavyTailTestConfig) -> Result<f64> {
    check_min_samples(s)?;
    let penalty: f64 = (1..=s).map(|t| truncation_penalty(t, cfg)).sum();
    Ok(heavytail_band(s, cfg) + penalty / s as f64)
}

fn check_min_samples(s: u64) -> Result<()> {
    if s < MIN_SAMPLES {
        Err(Error::param(
            "s",
            format!("threshold needs at least {MIN_SAMPLES} samples, got {s}"),
        ))
    } else {
        Ok(())
    }
}

/// Running state of one sequential test.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TestSession {
    count: u64,
    sum: f64,
    penalty_sum: f64,
    verdict: Option<Verdict>,
}

impl TestSession {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Running (truncated, for heavy tails) sum of samples.
    pub fn sum(&self) -> f64 {
        self.sum
    }

    pub fn verdict(&self) -> Option<Verdict> {
        self.verdict
    }

    pub fn is_running(&self) -> bool {
        self.verdict.is_none()
    }

    /// Feeds one sample; returns the verdict if this sample ended the test.
    pub fn step(&mut self, sample: f64, cfg: &TestConfig) -> Result<Option<Verdict>> {
        match cfg {
            TestConfig::SubGaussian(c) => self.subg_step(sample, c),
            TestConfig::HeavyTail(c) => self.ht_step(sample, c),
        }
    }

    pub fn subg_step(&mut self, sample: f64, cfg: &SubGaussianTestConfig) -> Result<Option<Verdict>> {
        if self.verdict.is_some() {
            return Err(Error::SessionTerminated);
        }
        self.count += 1;
        self.sum += sample;
        if self.count >= MIN_SAMPLES {
            let band = subgaussian_threshold_unchecked(self.count, cfg);
            self.decide(band);
        }
        Ok(self.verdict)
    }

    pub fn ht_step(&mut self, sample: f64, cfg: &HeavyTailTestConfig) -> Result<Option<Verdict>> {
        if self.verdict.is_some() {
            return Err(Error::SessionTerminated);
        }
        self.count += 1;
        let t = self.count;
        let bt = truncation_bound(t, cfg);
        if sample.abs() <= bt {
            self.sum += sample;
        }
        self.penalty_sum += cfg.u / bt.powf(cfg.b - 1.0);
        if self.count >= MIN_SAMPLES {
            let band = heavytail_band(t, cfg) + self.penalty_sum / t as f64;
            self.decide(band);
        }
        Ok(self.verdict)
    }

    /// Current heavy-tail threshold, `band(s) + penalty_sum / s`.
    pub fn heavytail_threshold(&self, cfg: &HeavyTailTestConfig) -> f64 {
        heavytail_band(self.count, cfg) + self.penalty_sum / self.count as f64
    }

    fn decide(&mut self, band: f64) {
        let mean = self.sum / self.count as f64;
        if mean > band {
            self.verdict = Some(Verdict::Plus);
        } else if mean < -band {
            self.verdict = Some(Verdict::Minus);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestOutcome {
    Decided(Verdict),
    /// The sample budget ran out before the band excluded zero.
    Exhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TestRun {
    pub outcome: TestOutcome,
    /// Samples drawn; they occupy consecutive time steps.
    pub samples: u64,
}

/// Verdicts fixed by convention at the domain endpoints, without sampling.
pub fn endpoint_verdict(point: &DyadicPoint) -> Option<Verdict> {
    if point.is_zero() {
        Some(Verdict::Minus)
    } else if point.is_one() {
        Some(Verdict::Plus)
    } else {
        None
    }
}

/// Runs a full test at `point`, drawing at most `budget` samples from `sample`.
pub fn run_test<F>(point: &DyadicPoint, mut sample: F, cfg: &TestConfig, budget: u64) -> TestRun
where
    F: FnMut() -> f64,
{
    if let Some(v) = endpoint_verdict(point) {
        return TestRun {
            outcome: TestOutcome::Decided(v),
            samples: 0,
        };
    }
    let mut session = TestSession::new();
    while session.count() < budget {
        if let Some(v) = session
            .step(sample(), cfg)
            .expect("session is running until a verdict is returned")
        {
            return TestRun {
                outcome: TestOutcome::Decided(v),
                samples: session.count(),
            };
        }
    }
    TestRun {
        outcome: TestOutcome::Exhausted,
        samples: session.count(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p02() -> ConfidenceParam {
        ConfidenceParam::new(0.2).unwrap()
    }

    fn subg(sigma_sq: f64) -> SubGaussianTestConfig {
        SubGaussianTestConfig::new(sigma_sq, p02()).unwrap()
    }

    fn ht() -> HeavyTailTestConfig {
        HeavyTailTestConfig::new(1.5, 2.0, p02()).unwrap()
    }

    #[test]
    fn confidence_param_range() {
        assert!(ConfidenceParam::new(0.0).is_err());
        assert!(ConfidenceParam::new(0.21).is_err());
        assert!(ConfidenceParam::new(ConfidenceParam::upper_limit()).is_err());
        assert!(ConfidenceParam::new(0.2062).is_ok());
        assert!(p02().walk_bias() > 0.5);
    }

    // Reference values were computed independently with mpmath.
    #[test]
    fn subgaussian_threshold_values() {
        assert_relative_eq!(subgaussian_threshold(100, &subg(1.0)).unwrap(), 0.4540737, max_relative = 1e-5);
        assert_relative_eq!(subgaussian_threshold(3, &subg(1.0)).unwrap(), 2.1175954, max_relative = 1e-5);
        let one = subgaussian_threshold(100, &subg(1.0)).unwrap();
        let four = subgaussian_threshold(100, &subg(4.0)).unwrap();
        assert_relative_eq!(four, 2.0 * one, max_relative = 1e-14);
        assert!(subgaussian_threshold(2, &subg(1.0)).is_err());
    }

    #[test]
    fn subgaussian_verdicts() {
        let cfg = TestConfig::SubGaussian(subg(1.0));
        for (x, want) in [(10.0, Some(Verdict::Plus)), (-10.0, Some(Verdict::Minus)), (0.0, None)] {
            let mut s = TestSession::new();
            assert_eq!(s.step(x, &cfg).unwrap(), None);
            assert_eq!(s.step(x, &cfg).unwrap(), None);
            assert_eq!(s.step(x, &cfg).unwrap(), want);
        }
    }

    #[test]
    fn terminated_session_rejects_samples() {
        let cfg = TestConfig::SubGaussian(subg(1.0));
        let mut s = TestSession::new();
        for _ in 0..3 {
            s.step(10.0, &cfg).unwrap();
        }
        assert_eq!(s.verdict(), Some(Verdict::Plus));
        assert_eq!(s.step(1.0, &cfg), Err(Error::SessionTerminated));
    }

    #[test]
    fn lambda_values() {
        let l1 = lambda_t(1, 1.5, p02());
        assert_relative_eq!(l1, 113.1244, max_relative = 1e-5);
        assert_eq!(lambda_t(2, 1.5, p02()), l1);
        assert!(lambda_t(1_000_000, 1.5, p02()) > l1);
    }

    #[test]
    fn b0_is_the_max_of_three_terms() {
        let terms = b0_terms(1.5, 2.0, p02());
        // mpmath: 7.29750, 8.67969, 47.71624
        assert_relative_eq!(terms[0], 7.297500, max_relative = 1e-5);
        assert_relative_eq!(terms[1], 8.679687, max_relative = 1e-5);
        assert_relative_eq!(terms[2], 47.71624, max_relative = 1e-5);
        let b0 = compute_b0(1.5, 2.0, p02());
        assert_eq!(b0, terms[2]);
        assert!(compute_b0(1.5, 4.0, p02()) >= b0);
        for &(b, u) in &[(1.1, 0.3), (1.5, 2.0), (1.9, 10.0), (2.0, 0.01)] {
            let third = 2.0 * std::f64::consts::SQRT_2 * b * u * 10f64.powf(b / 2.0);
            assert!(compute_b0(b, u, p02()) >= third);
        }
    }

    #[test]
    fn truncation_bound_values() {
        let cfg = ht();
        let l1 = lambda_t(1, 1.5, p02());
        assert_relative_eq!(truncation_bound(1, &cfg), cfg.b0() * l1.powf(-1.0 / 1.5), max_relative = 1e-14);
        let mut prev = truncation_bound(8, &cfg);
        for t in 9..=10_000 {
            let bt = truncation_bound(t, &cfg);
            assert!(bt >= prev, "B_t decreased at t={t}");
            prev = bt;
        }
        assert_relative_eq!(truncation_bound(100, &cfg), 38.21958, max_relative = 1e-5);
    }

    #[test]
    fn heavytail_threshold_values() {
        let cfg = ht();
        let explicit = {
            let pen: f64 = (1..=3).map(|t| 2.0 / truncation_bound(t, &cfg).sqrt()).sum();
            let first = (cfg.b0().powi(2) / 2.0 * 3f64.powf(-2.0 / 3.0)
                * (12.0 * 3f64.ln() / (1.5 * 0.2f64.sqrt())).ln())
            .sqrt();
            first + pen / 3.0
        };
        let thr = heavytail_threshold(3, &cfg).unwrap();
        assert_relative_eq!(thr, explicit, max_relative = 1e-12);
        assert_relative_eq!(thr, 41.53362, max_relative = 1e-5);
        assert!(heavytail_threshold(1_000_000, &cfg).unwrap() < heavytail_threshold(1_000, &cfg).unwrap());
        assert!(heavytail_threshold(2, &cfg).is_err());
        assert_relative_eq!((2.0 - 2.0 * 1.5) / 1.5, -2.0 / 3.0);
    }

    #[test]
    fn session_penalty_matches_direct_threshold() {
        let cfg = ht();
        let tc = TestConfig::HeavyTail(cfg);
        let mut s = TestSession::new();
        for k in 1..=50u64 {
            s.step(0.0, &tc).unwrap();
            if k >= 3 {
                let direct = heavytail_threshold(k, &cfg).unwrap();
                let incremental = heavytail_band(k, &cfg) + s.penalty_sum / k as f64;
                assert_relative_eq!(direct, incremental, max_relative = 1e-12);
            }
        }
        assert!(s.is_running());
    }

    #[test]
    fn truncated_samples_still_count() {
        let cfg = ht();
        let tc = TestConfig::HeavyTail(cfg);
        let mut s = TestSession::new();
        let huge = 1e12;
        for _ in 0..3 {
            assert_eq!(s.step(huge, &tc).unwrap(), None);
        }
        assert_eq!(s.count(), 3);
        assert_eq!(s.sum(), 0.0);
        s.step(1.0, &tc).unwrap();
        assert_eq!(s.sum(), 1.0);
    }

    #[test]
    fn run_test_conventions() {
        let cfg = TestConfig::SubGaussian(subg(1.0));
        let never = || -> f64 { panic!("endpoints must not sample") };
        let r = run_test(&DyadicPoint::zero(), never, &cfg, 100);
        assert_eq!(r, TestRun { outcome: TestOutcome::Decided(Verdict::Minus), samples: 0 });
        let r = run_test(&DyadicPoint::one(), never, &cfg, 100);
        assert_eq!(r, TestRun { outcome: TestOutcome::Decided(Verdict::Plus), samples: 0 });
        let half = DyadicPoint::try_new(1u32, 1).unwrap();
        let r = run_test(&half, || 1.0, &cfg, 0);
        assert_eq!(r, TestRun { outcome: TestOutcome::Exhausted, samples: 0 });
        let r = run_test(&half, || 0.0, &cfg, 25);
        assert_eq!(r, TestRun { outcome: TestOutcome::Exhausted, samples: 25 });
        let r = run_test(&half, || 5.0, &cfg, 25);
        assert_eq!(r, TestRun { outcome: TestOutcome::Decided(Verdict::Plus), samples: 3 });
    }
}
