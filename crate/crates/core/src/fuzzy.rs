//! Fuzzy designs: ratio estimands `τ_Y/τ_T` and `τ′_Y/τ′_T`, their
//! bias-corrected versions and the joint covariance.
//!
//! Each ratio is corrected by the first-order (delta-method) expansion of the
//! ratio around the raw estimates, with weights `1/τ̂_T` on the outcome
//! correction and `−τ̂_Y/τ̂_T²` on the first-stage correction. Variances come
//! from the same linearization: a ratio behaves like the weighted difference
//! `a τ̃_Y − b τ̃_T`, so its variance is the sharp sandwich evaluated at the
//! combined diagonal `a²Σ_Y − 2ab Σ_YT + b²Σ_T`.

use alloc::vec::Vec;

use crate::band::EffectLine;
use crate::error::{Error, Result};
use crate::locpoly::Outcome;
use crate::math;
use crate::sample::{FitSpec, Sample};
use crate::sharp::{estimate_sharp_for, nn_variance, sandwich_omega, JointEstimates, OmegaMatrix, VarianceDiagonals};

/// Floor on `|τ̂_T|`.
pub const WEAK_LEVEL_FLOOR: f64 = 1e-2;
/// `|τ̂′_T|` must exceed this many of its own standard errors.
pub const WEAK_DERIVATIVE_T_RATIO: f64 = 4.0;
/// Absolute floor on `|τ̂′_T|`, for first stages with no sampling noise.
pub const WEAK_DERIVATIVE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct FuzzyEstimates {
    /// Sharp estimates with the outcome as regressand.
    pub y_part: JointEstimates,
    /// Sharp estimates with the treatment as regressand (first stage).
    pub t_part: JointEstimates,
    pub tau_frd: f64,
    /// `None` when the first-stage slope jump is too weak to divide by.
    pub tau_prime_frd: Option<f64>,
    /// Raw first-stage jump `τ̂_T`.
    pub tau_t_hat: f64,
    /// Raw first-stage slope jump `τ̂′_T`.
    pub tau_prime_t_hat: f64,
    /// Standard error of the first-stage slope jump used by the weak check.
    pub tau_prime_t_se: f64,
}

impl FuzzyEstimates {
    pub fn tau_prime(&self) -> Result<f64> {
        self.tau_prime_frd.ok_or(Error::WeakFirstStageDerivative)
    }

    pub fn line(&self) -> Result<EffectLine> {
        Ok(EffectLine {
            level: self.tau_frd,
            slope: self.tau_prime()?,
        })
    }

    /// Linearization weights `(1/τ̂_T, τ̂_Y/τ̂_T²)` for the level.
    pub fn level_weights(&self) -> (f64, f64) {
        let t = self.tau_t_hat;
        (1.0 / t, self.y_part.tau_hat / (t * t))
    }

    /// Linearization weights `(1/τ̂′_T, τ̂′_Y/τ̂′_T²)` for the slope.
    pub fn slope_weights(&self) -> Result<(f64, f64)> {
        self.tau_prime()?;
        let t = self.tau_prime_t_hat;
        Ok((1.0 / t, self.y_part.tau_prime_hat / (t * t)))
    }
}

/// Ratio estimate corrected with the delta-method weights: equivalent to
/// `τ̂_Y/τ̂_T − (τ̂_Y − τ̃_Y)/τ̂_T + τ̂_Y (τ̂_T − τ̃_T)/τ̂_T²`.
fn corrected_ratio(y_hat: f64, y_tilde: f64, t_hat: f64, t_tilde: f64) -> f64 {
    let a = 1.0 / t_hat;
    let b = y_hat / (t_hat * t_hat);
    y_hat / t_hat - (a * (y_hat - y_tilde) - b * (t_hat - t_tilde))
}

pub fn estimate_fuzzy(sample: &Sample, spec: &FitSpec) -> Result<FuzzyEstimates> {
    spec.validate()?;
    if sample.treatment().is_none() {
        return Err(Error::MissingTreatment);
    }
    let y_part = estimate_sharp_for(sample, spec, Outcome::Y)?;
    let t_part = estimate_sharp_for(sample, spec, Outcome::T)?;

    let tau_t_hat = t_part.tau_hat;
    if !(tau_t_hat.abs() >= WEAK_LEVEL_FLOOR) {
        return Err(Error::WeakFirstStageLevel);
    }
    let tau_frd = corrected_ratio(y_part.tau_hat, y_part.tau_tilde, tau_t_hat, t_part.tau_tilde);

    let variances = nn_variance(sample, spec)?;
    let sigma_t = variances.t.as_ref().ok_or(Error::MissingTreatment)?;
    let t_omega = sandwich_omega(&t_part, sigma_t);
    let tau_prime_t_se = math::sqrt(t_omega.omega_h[1][1].max(0.0));
    let tau_prime_t_hat = t_part.tau_prime_hat;
    let threshold = (WEAK_DERIVATIVE_T_RATIO * tau_prime_t_se).max(WEAK_DERIVATIVE_FLOOR);
    let tau_prime_frd = (tau_prime_t_hat.abs() > threshold).then(|| {
        corrected_ratio(
            y_part.tau_prime_hat,
            y_part.tau_prime_tilde,
            tau_prime_t_hat,
            t_part.tau_prime_tilde,
        )
    });

    Ok(FuzzyEstimates {
        y_part,
        t_part,
        tau_frd,
        tau_prime_frd,
        tau_t_hat,
        tau_prime_t_hat,
        tau_prime_t_se,
    })
}

fn combined_diagonal(v: &VarianceDiagonals, a: f64, b: f64) -> Result<Vec<f64>> {
    let st = v.t.as_ref().ok_or(Error::MissingTreatment)?;
    let syt = v.yt.as_ref().ok_or(Error::MissingTreatment)?;
    Ok(v.y
        .iter()
        .zip(st.iter().zip(syt))
        .map(|(&y, (&t, &yt))| a * a * y - 2.0 * a * b * yt + b * b * t)
        .collect())
}

/// Variance of the bias-corrected fuzzy level `Var(τ̃_FRD)`. Available even
/// when the slope ratio is weakly identified.
pub fn fuzzy_level_variance(fz: &FuzzyEstimates, variances: &VarianceDiagonals) -> Result<f64> {
    let (a, b) = fz.level_weights();
    Ok(sandwich_omega(&fz.y_part, &combined_diagonal(variances, a, b)?).v)
}

/// Joint covariance of the fuzzy pair, in the same layout as the sharp one.
pub fn assemble_omega_fuzzy(fz: &FuzzyEstimates, variances: &VarianceDiagonals) -> Result<OmegaMatrix> {
    let (a, b) = fz.level_weights();
    let (ap, bp) = fz.slope_weights()?;
    let est = &fz.y_part;
    let v = sandwich_omega(est, &combined_diagonal(variances, a, b)?).v;
    let vp = sandwich_omega(est, &combined_diagonal(variances, ap, bp)?).vp;

    let st = variances.t.as_ref().ok_or(Error::MissingTreatment)?;
    let syt = variances.yt.as_ref().ok_or(Error::MissingTreatment)?;
    let c_y = sandwich_omega(est, &variances.y).c;
    let c_yt = sandwich_omega(est, syt).c;
    let c_t = sandwich_omega(est, st).c;
    let c = a * ap * c_y - b * ap * c_yt - a * bp * c_yt + b * bp * c_t;

    let omega = OmegaMatrix::from_scaled(v, vp, c, est.h);
    omega.ensure_positive_definite()?;
    Ok(omega)
}
