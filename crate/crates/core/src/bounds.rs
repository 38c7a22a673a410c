//! Closed-form regret and sample-complexity bounds.
//!
//! Natural logarithms throughout. Every evaluator returns
//! [`Error::OutOfDomain`] when a logarithm or root in its formula would be
//! taken of a non-positive argument, which happens for small `T`.

use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::problems::FunctionClass;
use crate::sequential_tests::{ConfidenceParam, HeavyTailTestConfig};

fn checked_ln(x: f64, what: &'static str) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x.ln())
    } else {
        Err(Error::OutOfDomain { what })
    }
}

fn checked_sqrt(x: f64, what: &'static str) -> Result<f64> {
    if x >= 0.0 && x.is_finite() {
        Ok(x.sqrt())
    } else {
        Err(Error::OutOfDomain { what })
    }
}

fn check_bias(p: f64) -> Result<()> {
    if p > 0.5 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::param("p", format!("walk bias {p} must lie in (1/2, 1]")))
    }
}

/// `(2^{-n(2p-1)/2}, exp(-n(2p-1)²/2))`: bound on the distance to the optimum
/// after `n` moves and the probability that it fails.
pub fn lemma1_tail(n: u64, p: f64) -> Result<(f64, f64)> {
    check_bias(p)?;
    if n == 0 {
        return Err(Error::param("n", "at least one step"));
    }
    let n = n as f64;
    let q = 2.0 * p - 1.0;
    Ok((2f64.powf(-n * q / 2.0), (-n * q * q / 2.0).exp()))
}

/// Expected sample count of the sub-Gaussian test at a point with `|g| = g_abs`.
pub fn lemma2_sample_bound(g_abs: f64, sigma_sq: f64, p_check: ConfidenceParam) -> Result<f64> {
    if !(g_abs > 0.0) {
        return Err(Error::OutOfDomain { what: "sample bound at g = 0" });
    }
    let sp = p_check.value().sqrt();
    let g2 = g_abs * g_abs;
    let inner = checked_ln(240.0 * sigma_sq / (sp * g2), "lemma 2 inner log")?;
    let outer = checked_ln(12.0 / sp * inner, "lemma 2 outer log")?;
    Ok(40.0 * sigma_sq / g2 * outer + 2.0)
}

/// `(b - 1)√p̌`.
pub fn c_b(b: f64, p_check: ConfidenceParam) -> f64 {
    (b - 1.0) * p_check.value().sqrt()
}

/// `Γ((2b-1)/(b-1)) ((u/3 + 1/8)/B₀)^{b/(b-1)} + 1`.
pub fn gamma_b(b: f64, u: f64, b0: f64) -> f64 {
    let e = b / (b - 1.0);
    gamma((2.0 * b - 1.0) / (b - 1.0)) * ((u / 3.0 + 0.125) / b0).powf(e) + 1.0
}

/// Expected sample count of the heavy-tail test at a point with `|g| = g_abs`.
pub fn lemma3_sample_bound(g_abs: f64, cfg: &HeavyTailTestConfig) -> Result<f64> {
    if !(g_abs > 0.0) {
        return Err(Error::OutOfDomain { what: "sample bound at g = 0" });
    }
    let (b, b0) = (cfg.b(), cfg.b0());
    let cb = c_b(b, cfg.p_check());
    let g2 = g_abs * g_abs;
    let inner = checked_ln(144.0 * b0 * b0 / (g2 * cb), "lemma 3 inner log")?;
    let outer = checked_ln(18.0 / cb * inner, "lemma 3 outer log")?;
    let base = 8.0 * b0 * b0 / g2 * outer;
    Ok(gamma_b(b, cfg.u(), b0) * (base.powf(b / (2.0 * (b - 1.0))) + 8.0))
}

/// Constants shared by the regret bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundInputs {
    pub p_check: f64,
    /// Walk bias; defaults to `(1 - p̌)³`.
    pub p: f64,
    pub sigma_sq: f64,
    pub b: f64,
    pub u: f64,
    pub b0: f64,
    pub gamma_b: f64,
    pub c_b: f64,
    pub g_max: f64,
}

impl BoundInputs {
    pub fn subgaussian(sigma_sq: f64, p_check: ConfidenceParam, g_max: f64) -> Self {
        BoundInputs {
            p_check: p_check.value(),
            p: p_check.walk_bias(),
            sigma_sq,
            b: 2.0,
            u: f64::NAN,
            b0: f64::NAN,
            gamma_b: f64::NAN,
            c_b: f64::NAN,
            g_max,
        }
    }

    pub fn heavy_tail(cfg: &HeavyTailTestConfig, g_max: f64) -> Self {
        BoundInputs {
            p_check: cfg.p_check().value(),
            p: cfg.p_check().walk_bias(),
            sigma_sq: f64::NAN,
            b: cfg.b(),
            u: cfg.u(),
            b0: cfg.b0(),
            gamma_b: gamma_b(cfg.b(), cfg.u(), cfg.b0()),
            c_b: c_b(cfg.b(), cfg.p_check()),
            g_max,
        }
    }

    /// Replaces the guaranteed bias with a measured one.
    pub fn with_bias(mut self, p: f64) -> Result<Self> {
        check_bias(p)?;
        self.p = p;
        Ok(self)
    }

    fn tail(&self, ln_t: f64) -> f64 {
        self.g_max * (ln_t + 4.0)
    }
}

fn check_horizon(t: u64) -> Result<f64> {
    if t < 3 {
        return Err(Error::param("T", format!("horizon {t} must be at least 3")));
    }
    Ok(t as f64)
}

/// Regret bound under sub-Gaussian noise for the given function class.
pub fn theorem1_regret_bound(fclass: &FunctionClass, inp: &BoundInputs, t: u64) -> Result<f64> {
    check_bias(inp.p)?;
    let tf = check_horizon(t)?;
    let ln_t = tf.ln();
    let q = 2.0 * inp.p - 1.0;
    let sp = inp.p_check.sqrt();
    let s2 = inp.sigma_sq;
    let loglog = || -> Result<f64> {
        let inner = checked_ln(2.0 * q * q * tf / (3.0 * ln_t * sp), "theorem 1 inner log")?;
        checked_ln(12.0 / sp * inner, "theorem 1 outer log")
    };
    let main = match *fclass {
        FunctionClass::Convex => {
            let root = checked_sqrt(10.0 * s2 * tf * ln_t * loglog()?, "theorem 1 root")?;
            6.0 / q * root + 3.0 * inp.g_max / q * (2.0 * tf * ln_t).sqrt()
        }
        FunctionClass::StronglyConvex { alpha } => {
            let den = 2.0 * alpha * q * q;
            360.0 * s2 * ln_t / den * loglog()? + 18.0 * inp.g_max * inp.g_max * ln_t / den
        }
        FunctionClass::NonDiffAtOpt { delta } => {
            let d2 = delta * delta;
            let inner = checked_ln(240.0 * s2 / (sp * d2), "theorem 1 inner log")?;
            let outer = checked_ln(12.0 / sp * inner, "theorem 1 outer log")?;
            9.0 * inp.g_max * ln_t / (q * q) * (40.0 * s2 / d2 * outer + 2.0)
        }
    };
    Ok(main + inp.tail(ln_t))
}

/// Regret bound under heavy-tailed noise with a bounded `b`-th moment.
pub fn theorem2_regret_bound(fclass: &FunctionClass, inp: &BoundInputs, t: u64) -> Result<f64> {
    check_bias(inp.p)?;
    let tf = check_horizon(t)?;
    let ln_t = tf.ln();
    let q = 2.0 * inp.p - 1.0;
    let (b, b0, gb, cb) = (inp.b, inp.b0, inp.gamma_b, inp.c_b);
    if !(b > 1.0 && b0 > 0.0 && gb > 0.0 && cb > 0.0) {
        return Err(Error::param("b", "heavy-tail constants are not set"));
    }
    let k = 9.0 * gb / (q * q);
    let loglog = || -> Result<f64> {
        let x = 18.0 / cb * (tf / (9.0 * gb * ln_t)).powf(2.0 * (b - 1.0) / b);
        let inner = checked_ln(x, "theorem 2 inner log")?;
        checked_ln(18.0 / cb * inner, "theorem 2 outer log")
    };
    let main = match *fclass {
        FunctionClass::Convex => {
            let e = (b - 1.0) / b;
            let scale = k.powf(e) * tf.powf(1.0 / b) * ln_t.powf(e);
            let root = checked_sqrt(loglog()?, "theorem 2 root")?;
            2.0 * 2f64.sqrt() * b0 * scale * root + 8.0 * scale * inp.g_max
        }
        FunctionClass::StronglyConvex { alpha } => {
            let e = 2.0 * (b - 1.0) / b;
            let scale = k.powf(e) * tf.powf((2.0 - b) / b) * ln_t.powf(e) / alpha;
            4.0 * b0 * b0 * scale * loglog()? + 4.0 * scale * inp.g_max * inp.g_max
        }
        FunctionClass::NonDiffAtOpt { delta } => {
            let d2 = delta * delta;
            let inner = checked_ln(36.0 * b0 * b0 / (d2 * cb), "theorem 2 inner log")?;
            let outer = checked_ln(18.0 / cb * inner, "theorem 2 outer log")?;
            let base = 2.0 * b0 * b0 / d2 * outer;
            inp.g_max * k * ln_t * (base.powf(b / (2.0 * (b - 1.0))) + 8.0)
        }
    };
    Ok(main + inp.tail(ln_t))
}
