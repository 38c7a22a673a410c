//! Objective families and noisy first-order feedback.
//!
//! Objectives are sums of power terms `f(x) = Σ aᵢ |x - x*|^{bᵢ}` on `[0, 1]`.
//! The family covers strongly convex, merely convex and kinked (non-differentiable
//! at the optimum) cases with exact gradients. An oracle adds zero-mean noise
//! to the exact gradient at the query point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Pareto, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One power term `coef · |x - x*|^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coef: f64,
    pub exponent: f64,
}

impl Term {
    pub fn new(coef: f64, exponent: f64) -> Self {
        Term { coef, exponent }
    }
}

/// Curvature class of an objective, with the parameter the regret bounds need.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum FunctionClass {
    Convex,
    StronglyConvex { alpha: f64 },
    NonDiffAtOpt { delta: f64 },
}

const GRID: usize = 401;

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec {
    terms: Vec<Term>,
    xstar: f64,
    fclass: FunctionClass,
    g_max: f64,
}

impl ObjectiveSpec {
    /// Builds and grid-checks an objective. With `fclass = None` the class is
    /// inferred: a single term with exponent in `(1, 2]` is strongly convex,
    /// a single term with exponent 1 is kinked at the optimum, anything else is
    /// treated as convex.
    pub fn new(terms: Vec<Term>, xstar: f64, fclass: Option<FunctionClass>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::param("terms", "at least one term is required"));
        }
        if !(0.0..=1.0).contains(&xstar) {
            return Err(Error::param("xstar", format!("{xstar} is outside [0, 1]")));
        }
        for t in &terms {
            if !(t.exponent >= 1.0 && t.exponent.is_finite()) {
                return Err(Error::param("exponent", format!("{} must be >= 1", t.exponent)));
            }
            if !t.coef.is_finite() || t.coef == 0.0 {
                return Err(Error::param("coef", format!("{} must be finite and nonzero", t.coef)));
            }
        }
        let fclass = match fclass {
            Some(c) => c,
            None => infer_class(&terms, xstar)?,
        };
        let mut obj = ObjectiveSpec {
            terms,
            xstar,
            fclass,
            g_max: 0.0,
        };
        obj.g_max = obj.g_value(0.0).abs().max(obj.g_value(1.0).abs());
        obj.check_shape()?;
        Ok(obj)
    }

    /// `a |x - x*|^b`.
    pub fn power(coef: f64, exponent: f64, xstar: f64) -> Result<Self> {
        Self::new(vec![Term::new(coef, exponent)], xstar, None)
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn xstar(&self) -> f64 {
        self.xstar
    }

    pub fn fclass(&self) -> FunctionClass {
        self.fclass
    }

    /// Largest gradient magnitude on `[0, 1]`, attained at an endpoint.
    pub fn g_max(&self) -> f64 {
        self.g_max
    }

    pub fn f_value(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::param("x", format!("{x} is outside [0, 1]")));
        }
        Ok(self.eval(x))
    }

    fn eval(&self, x: f64) -> f64 {
        let d = (x - self.xstar).abs();
        self.terms.iter().map(|t| t.coef * d.powf(t.exponent)).sum()
    }

    /// Instantaneous regret `f(x) - f(x*)`.
    pub fn regret_at(&self, x: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&x));
        self.eval(x) - self.eval(self.xstar)
    }

    /// Gradient, with subgradient 0 at the optimum.
    pub fn g_value(&self, x: f64) -> f64 {
        let diff = x - self.xstar;
        if diff == 0.0 {
            return 0.0;
        }
        let d = diff.abs();
        let mag: f64 = self
            .terms
            .iter()
            .map(|t| t.coef * t.exponent * d.powf(t.exponent - 1.0))
            .sum();
        mag * diff.signum()
    }

    fn check_shape(&self) -> Result<()> {
        let grid: Vec<f64> = (0..GRID).map(|i| i as f64 / (GRID - 1) as f64).collect();
        let vals: Vec<f64> = grid.iter().map(|&x| self.eval(x)).collect();
        let fstar = self.eval(self.xstar);
        let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-12 * scale;
        if let Some(i) = vals.iter().position(|&v| v < fstar - tol) {
            return Err(Error::param(
                "terms",
                format!("f({}) < f(x*): x* is not the minimiser", grid[i]),
            ));
        }
        for i in 0..GRID {
            for j in (i + 2..GRID).step_by(2) {
                let mid = self.eval((grid[i] + grid[j]) / 2.0);
                if mid > (vals[i] + vals[j]) / 2.0 + tol {
                    return Err(Error::param(
                        "terms",
                        format!("objective is not convex between {} and {}", grid[i], grid[j]),
                    ));
                }
            }
        }
        match self.fclass {
            FunctionClass::Convex => {}
            FunctionClass::StronglyConvex { alpha } => {
                if !(alpha > 0.0) {
                    return Err(Error::param("alpha", format!("{alpha} must be > 0")));
                }
                for (i, &x) in grid.iter().enumerate() {
                    let gx = self.g_value(x);
                    for (j, &y) in grid.iter().enumerate() {
                        let lower = vals[i] + gx * (y - x) + alpha / 2.0 * (y - x).powi(2);
                        if vals[j] < lower - tol {
                            return Err(Error::param(
                                "alpha",
                                format!("strong convexity with alpha={alpha} fails at ({x}, {y})"),
                            ));
                        }
                    }
                }
            }
            FunctionClass::NonDiffAtOpt { delta } => {
                if !(delta > 0.0) {
                    return Err(Error::param("delta", format!("{delta} must be > 0")));
                }
                let near = (3..=9).flat_map(|k| {
                    let h = 10f64.powi(-k);
                    [self.xstar - h, self.xstar + h]
                });
                let probes = grid.iter().copied().chain(near).filter(|x| (0.0..=1.0).contains(x));
                for x in probes.filter(|&x| x != self.xstar) {
                    if self.g_value(x).abs() < delta * (1.0 - 1e-12) {
                        return Err(Error::param(
                            "delta",
                            format!("|g({x})| < delta={delta}"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

fn infer_class(terms: &[Term], xstar: f64) -> Result<FunctionClass> {
    Ok(match terms {
        [t] if t.coef > 0.0 && t.exponent == 1.0 => FunctionClass::NonDiffAtOpt { delta: t.coef },
        [t] if t.coef > 0.0 && t.exponent > 1.0 && t.exponent <= 2.0 => FunctionClass::StronglyConvex {
            alpha: strong_convexity_alpha(t.coef, t.exponent, xstar)?,
        },
        _ => FunctionClass::Convex,
    })
}

/// `α = a b (b-1) (max{x*, 1-x*})^{b-2}` for `a|x - x*|^b`.
pub fn strong_convexity_alpha(a: f64, b: f64, xstar: f64) -> Result<f64> {
    if !(b > 1.0) {
        return Err(Error::param("b", format!("exponent {b} must be > 1")));
    }
    Ok(a * b * (b - 1.0) * xstar.max(1.0 - xstar).powf(b - 2.0))
}

/// Zero-mean additive gradient noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseModel {
    /// `N(0, σ²)`; `σ² = 0` gives exact gradients.
    Gaussian { sigma_sq: f64 },
    /// Random sign times a Pareto magnitude: `P(|ξ| > x) = (scale/x)^tail_index`
    /// for `x ≥ scale`. Moments of order below `tail_index` are finite; the
    /// variance is infinite when `tail_index ≤ 2`.
    SymmetricPareto { tail_index: f64, scale: f64 },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::Gaussian { sigma_sq } => {
                if !(sigma_sq >= 0.0 && sigma_sq.is_finite()) {
                    return Err(Error::param("sigma_sq", format!("{sigma_sq} must be >= 0")));
                }
            }
            NoiseModel::SymmetricPareto { tail_index, scale } => {
                if !(tail_index > 1.0 && tail_index.is_finite()) {
                    return Err(Error::param(
                        "tail_index",
                        format!("{tail_index} must be > 1 for a finite mean"),
                    ));
                }
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::param("scale", format!("{scale} must be > 0")));
                }
            }
        }
        Ok(())
    }

    /// `E|ξ|^b` in closed form.
    pub fn abs_moment(&self, b: f64) -> Result<f64> {
        match *self {
            NoiseModel::Gaussian { sigma_sq } => {
                let g = statrs::function::gamma::gamma((b + 1.0) / 2.0);
                Ok(sigma_sq.powf(b / 2.0) * 2f64.powf(b / 2.0) * g / std::f64::consts::PI.sqrt())
            }
            NoiseModel::SymmetricPareto { tail_index, scale } => {
                if b >= tail_index {
                    return Err(Error::param(
                        "b",
                        format!("moment order {b} must be below the tail index {tail_index}"),
                    ));
                }
                Ok(tail_index / (tail_index - b) * scale.powf(b))
            }
        }
    }

    pub fn has_finite_variance(&self) -> bool {
        match *self {
            NoiseModel::Gaussian { .. } => true,
            NoiseModel::SymmetricPareto { tail_index, .. } => tail_index > 2.0,
        }
    }
}

/// A `u` with `E|G(x, ξ)|^b ≤ u` for every `x`, from
/// `E|g + ξ|^b ≤ 2^{b-1} (g_max^b + E|ξ|^b)`.
pub fn moment_certificate(obj: &ObjectiveSpec, noise: &NoiseModel, b: f64) -> Result<f64> {
    if !(b > 1.0) {
        return Err(Error::param("b", format!("moment order {b} must be > 1")));
    }
    let noise_moment = noise.abs_moment(b)?;
    Ok(2f64.powf(b - 1.0) * (obj.g_max().powf(b) + noise_moment))
}

/// Deterministic generator for run `run` of an experiment seeded with `base_seed`.
pub fn run_rng(base_seed: u64, run: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(base_seed ^ run)
}

enum Sampler {
    Exact,
    Gaussian(f64),
    Pareto(Pareto<f64>),
}

/// Noisy gradient oracle `G(x, ξ) = g(x) + ξ` owning its random stream.
pub struct GradientOracle {
    objective: ObjectiveSpec,
    noise: NoiseModel,
    sampler: Sampler,
    rng: ChaCha8Rng,
}

impl GradientOracle {
    pub fn new(objective: ObjectiveSpec, noise: NoiseModel, rng: ChaCha8Rng) -> Result<Self> {
        noise.validate()?;
        let sampler = match noise {
            NoiseModel::Gaussian { sigma_sq: 0.0 } => Sampler::Exact,
            NoiseModel::Gaussian { sigma_sq } => Sampler::Gaussian(sigma_sq.sqrt()),
            NoiseModel::SymmetricPareto { tail_index, scale } => Sampler::Pareto(
                Pareto::new(scale, tail_index)
                    .map_err(|e| Error::param("noise", e.to_string()))?,
            ),
        };
        Ok(GradientOracle {
            objective,
            noise,
            sampler,
            rng,
        })
    }

    pub fn seeded(objective: ObjectiveSpec, noise: NoiseModel, seed: u64) -> Result<Self> {
        Self::new(objective, noise, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn objective(&self) -> &ObjectiveSpec {
        &self.objective
    }

    pub fn noise_model(&self) -> &NoiseModel {
        &self.noise
    }

    /// One noise draw.
    pub fn noise(&mut self) -> f64 {
        match &self.sampler {
            Sampler::Exact => 0.0,
            Sampler::Gaussian(sd) => {
                let z: f64 = self.rng.sample(StandardNormal);
                sd * z
            }
            Sampler::Pareto(p) => {
                let mag = p.sample(&mut self.rng);
                if self.rng.random::<bool>() {
                    mag
                } else {
                    -mag
                }
            }
        }
    }

    pub fn sample_gradient(&mut self, x: f64) -> f64 {
        self.objective.g_value(x) + self.noise()
    }

    /// Uniform draw on `[0, 1)` from the oracle's stream.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}
