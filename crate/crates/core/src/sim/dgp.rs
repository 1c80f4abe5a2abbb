//! Polynomial data-generating processes with a cutoff at 0.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::band::EffectLine;
use crate::error::{Error, Result};
use crate::math;
use crate::numerics::{normal_cdf, normal_quantile};
use crate::sample::Sample;

/// Points per side used to check first-stage probabilities.
const PROBABILITY_CHECK_POINTS: usize = 2001;

/// Coefficients in increasing order: `c[0] + c[1] x + c[2] x² + …`.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct Polynomial(pub Vec<f64>);

impl Polynomial {
    pub fn new(coefficients: Vec<f64>) -> Self {
        Polynomial(coefficients)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// `k`-th derivative at 0.
    pub fn derivative_at_zero(&self, k: usize) -> f64 {
        self.0.get(k).map_or(0.0, |&c| c * math::factorial(k))
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        let len = self.0.len().max(other.0.len());
        Polynomial(
            (0..len)
                .map(|k| self.0.get(k).copied().unwrap_or(0.0) - other.0.get(k).copied().unwrap_or(0.0))
                .collect(),
        )
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let neg = Polynomial(other.0.iter().map(|c| -c).collect());
        self.sub(&neg)
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        if self.0.is_empty() || other.0.is_empty() {
            return Polynomial(Vec::new());
        }
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial(out)
    }

    /// True when every coefficient of order two or higher is zero.
    pub fn is_affine(&self) -> bool {
        self.0.iter().skip(2).all(|&c| c == 0.0)
    }

    fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum RunningDist {
    Uniform { lo: f64, hi: f64 },
    TruncatedNormal { mean: f64, sd: f64, lo: f64, hi: f64 },
}

impl RunningDist {
    pub fn support(&self) -> (f64, f64) {
        match *self {
            RunningDist::Uniform { lo, hi } | RunningDist::TruncatedNormal { lo, hi, .. } => (lo, hi),
        }
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.support();
        if !(lo.is_finite() && hi.is_finite() && lo < 0.0 && 0.0 < hi) {
            return Err(Error::Domain(format!(
                "running-variable support [{lo}, {hi}] must be finite and straddle 0"
            )));
        }
        if let RunningDist::TruncatedNormal { mean, sd, .. } = *self {
            if !(mean.is_finite() && sd.is_finite() && sd > 0.0) {
                return Err(Error::Domain(format!(
                    "truncated normal needs finite mean and sd > 0, got ({mean}, {sd})"
                )));
            }
            let mass = normal_cdf((hi - mean) / sd) - normal_cdf((lo - mean) / sd);
            if !(mass > 1e-12) {
                return Err(Error::Domain("truncated normal has no mass on its support".into()));
            }
        }
        Ok(())
    }

    /// Inverse-transform draw from `u ∈ (0, 1)`.
    fn draw(&self, u: f64) -> f64 {
        match *self {
            RunningDist::Uniform { lo, hi } => lo + (hi - lo) * u,
            RunningDist::TruncatedNormal { mean, sd, lo, hi } => {
                let a = normal_cdf((lo - mean) / sd);
                let b = normal_cdf((hi - mean) / sd);
                let p = (a + u * (b - a)).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
                (mean + sd * normal_quantile(p)).clamp(lo, hi)
            }
        }
    }
}

/// Compliance probabilities `P(T = 1 | X = x)` on each side.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FirstStage {
    pub prob_left: Polynomial,
    pub prob_right: Polynomial,
}

/// Outcome model: `Y = μ₋(X) + T (μ₊(X) − μ₋(X)) + σ_side ε`, where
/// `T = 1{X ≥ 0}` in a sharp design and `T ~ Bernoulli(π_side(X))` in a fuzzy
/// one. `μ₋` and `μ₊` are the untreated and treated mean functions.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DgpSpec {
    pub mu_left: Polynomial,
    pub mu_right: Polynomial,
    pub noise_sd_left: f64,
    pub noise_sd_right: f64,
    pub x_dist: RunningDist,
    pub fuzzy: Option<FirstStage>,
    pub seed: u64,
}

impl DgpSpec {
    /// Cubic benchmark with different curvature on each side; `τ(0) = 1`,
    /// `τ′(0) = 0.3`.
    pub fn benchmark() -> Self {
        DgpSpec {
            mu_left: Polynomial::new(vec![0.0, 0.5, 0.25, -0.1]),
            mu_right: Polynomial::new(vec![1.0, 0.8, 0.45, 0.05]),
            noise_sd_left: 0.5,
            noise_sd_right: 0.5,
            x_dist: RunningDist::Uniform { lo: -1.0, hi: 1.0 },
            fuzzy: None,
            seed: 20_240_601,
        }
    }

    /// The benchmark with the quadratic and cubic terms shared across sides,
    /// so `τ(x) = 1 + 0.3 x` holds exactly.
    pub fn linear_effect_benchmark() -> Self {
        DgpSpec {
            mu_right: Polynomial::new(vec![1.0, 0.8, 0.25, -0.1]),
            ..Self::benchmark()
        }
    }

    pub fn is_fuzzy(&self) -> bool {
        self.fuzzy.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, sd) in [
            ("noise_sd_left", self.noise_sd_left),
            ("noise_sd_right", self.noise_sd_right),
        ] {
            if !(sd.is_finite() && sd >= 0.0) {
                return Err(Error::Domain(format!(
                    "{name} must be finite and nonnegative, got {sd}"
                )));
            }
        }
        if !(self.mu_left.is_finite() && self.mu_right.is_finite()) {
            return Err(Error::Domain("mean polynomials must have finite coefficients".into()));
        }
        self.x_dist.validate()?;
        if let Some(fs) = &self.fuzzy {
            let (lo, hi) = self.x_dist.support();
            for (name, poly, a, b) in [
                ("prob_left", &fs.prob_left, lo, 0.0),
                ("prob_right", &fs.prob_right, 0.0, hi),
            ] {
                let m = PROBABILITY_CHECK_POINTS - 1;
                for k in 0..=m {
                    let x = a + (b - a) * k as f64 / m as f64;
                    let p = poly.eval(x);
                    if !(0.0..=1.0).contains(&p) {
                        return Err(Error::Domain(format!("{name} leaves [0, 1] at x = {x}: {p}")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Conditional means `E[Y | X]` and `E[T | X]` on each side, as
    /// `((y_left, y_right), (t_left, t_right))`.
    fn conditional_means(&self) -> ((Polynomial, Polynomial), (Polynomial, Polynomial)) {
        let (t_left, t_right) = match &self.fuzzy {
            Some(fs) => (fs.prob_left.clone(), fs.prob_right.clone()),
            None => (Polynomial::new(vec![0.0]), Polynomial::new(vec![1.0])),
        };
        let effect = self.mu_right.sub(&self.mu_left);
        let y_left = self.mu_left.add(&t_left.mul(&effect));
        let y_right = self.mu_left.add(&t_right.mul(&effect));
        ((y_left, y_right), (t_left, t_right))
    }

    /// Jumps at 0 of the conditional mean of `Y` and its first derivative.
    pub fn outcome_jumps(&self) -> (f64, f64) {
        let ((l, r), _) = self.conditional_means();
        (
            r.derivative_at_zero(0) - l.derivative_at_zero(0),
            r.derivative_at_zero(1) - l.derivative_at_zero(1),
        )
    }

    /// Jumps of the first-stage conditional mean and its derivative.
    pub fn first_stage_jumps(&self) -> (f64, f64) {
        let (_, (l, r)) = self.conditional_means();
        (
            r.derivative_at_zero(0) - l.derivative_at_zero(0),
            r.derivative_at_zero(1) - l.derivative_at_zero(1),
        )
    }

    /// The estimand `(τ, τ′)`: outcome jumps for a sharp design, ratios of
    /// outcome to first-stage jumps for a fuzzy one.
    pub fn true_effect(&self) -> EffectLine {
        let (ty, tpy) = self.outcome_jumps();
        if self.is_fuzzy() {
            let (tt, tpt) = self.first_stage_jumps();
            EffectLine {
                level: ty / tt,
                slope: tpy / tpt,
            }
        } else {
            EffectLine { level: ty, slope: tpy }
        }
    }

    /// Whether `μ₊ − μ₋` is exactly affine, so the extrapolated line is the
    /// true effect everywhere.
    pub fn effect_is_linear(&self) -> bool {
        self.mu_right.sub(&self.mu_left).is_affine()
    }
}

/// Uniform on the open interval `(0, 1)` from 53 random bits.
fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Generator for one replication: ChaCha8 keyed by `seed`, on stream
/// `seed_offset`, so distinct replications never share a keystream.
pub fn replication_rng(seed: u64, seed_offset: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(seed_offset);
    rng
}

/// Draws `n` observations. Per observation the generator is consumed in the
/// fixed order running variable, treatment (fuzzy only), noise.
pub fn generate_dgp(dgp: &DgpSpec, n: usize, seed_offset: u64) -> Result<Sample> {
    if n == 0 {
        return Err(Error::InvalidSample("n must be at least 1".into()));
    }
    dgp.validate()?;
    let mut rng = replication_rng(dgp.seed, seed_offset);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut t = dgp.fuzzy.as_ref().map(|_| Vec::with_capacity(n));
    for _ in 0..n {
        let xi = dgp.x_dist.draw(open_unit(&mut rng));
        let right = xi >= 0.0;
        let treated = match &dgp.fuzzy {
            Some(fs) => {
                let prob = if right {
                    fs.prob_right.eval(xi)
                } else {
                    fs.prob_left.eval(xi)
                };
                if !(0.0..=1.0).contains(&prob) {
                    return Err(Error::Domain(format!("first-stage probability {prob} at x = {xi}")));
                }
                open_unit(&mut rng) < prob
            }
            None => right,
        };
        let eps = normal_quantile(open_unit(&mut rng));
        let sd = if right { dgp.noise_sd_right } else { dgp.noise_sd_left };
        let mean = if treated {
            dgp.mu_right.eval(xi)
        } else {
            dgp.mu_left.eval(xi)
        };
        x.push(xi);
        y.push(mean + sd * eps);
        if let Some(t) = t.as_mut() {
            t.push(if treated { 1.0 } else { 0.0 });
        }
    }
    Sample::new(x, y, t, 0.0)
}
