//! Joint Wald region for `(τ, τ′)` and marginal intervals.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{sym2_inverse, sym2_sqrt, Sym2};
use crate::math;
use crate::numerics::normal_quantile;
use crate::sharp::is_positive_definite;

/// `−2 ln(1 − prob)`, the closed-form quantile of a chi-square with two
/// degrees of freedom.
pub fn chi2_quantile_2df(prob: f64) -> Result<f64> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::Domain(format!("probability must lie in (0, 1), got {prob}")));
    }
    Ok(-2.0 * math::ln_1p(-prob))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// `estimate ± Ψ⁻¹(1 − α/2) √variance`.
pub fn rbc_marginal_interval(estimate: f64, variance: f64, alpha: f64) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::DegenerateCovariance);
    }
    let half = normal_quantile(1.0 - 0.5 * alpha) * math::sqrt(variance);
    Ok((estimate - half, estimate + half))
}

/// The ellipse `{(t, t′) : Δᵀ Ω_h⁻¹ Δ ≤ c₁₋α}` centered at the bias-corrected
/// estimates.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConfidenceRegion {
    pub center: (f64, f64),
    pub shape: Sym2,
    pub level: f64,
    pub chi2_crit: f64,
    inverse: Sym2,
}

impl ConfidenceRegion {
    pub fn new(center: (f64, f64), shape: Sym2, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !is_positive_definite(&shape) {
            return Err(Error::DegenerateCovariance);
        }
        let inverse = sym2_inverse(&shape).ok_or(Error::DegenerateCovariance)?;
        Ok(ConfidenceRegion {
            center,
            shape,
            level: 1.0 - alpha,
            chi2_crit: chi2_quantile_2df(1.0 - alpha)?,
            inverse,
        })
    }

    /// `Δᵀ shape⁻¹ Δ` with `Δ = center − (t, t′)`.
    pub fn wald_statistic(&self, t: f64, t_prime: f64) -> f64 {
        let d0 = self.center.0 - t;
        let d1 = self.center.1 - t_prime;
        let m = &self.inverse;
        d0 * (m[0][0] * d0 + m[0][1] * d1) + d1 * (m[1][0] * d0 + m[1][1] * d1)
    }

    pub fn contains(&self, t: f64, t_prime: f64) -> bool {
        self.wald_statistic(t, t_prime) <= self.chi2_crit
    }

    /// `n_points` boundary points at equally spaced angles, starting at angle 0.
    pub fn boundary(&self, n_points: usize) -> Result<Vec<(f64, f64)>> {
        if n_points < 8 {
            return Err(Error::Domain(format!(
                "boundary needs at least 8 points, got {n_points}"
            )));
        }
        let root = sym2_sqrt(&self.shape);
        let r = math::sqrt(self.chi2_crit);
        Ok((0..n_points)
            .map(|k| {
                let theta = 2.0 * PI * k as f64 / n_points as f64;
                let (c, s) = (math::cos(theta), math::sin(theta));
                (
                    self.center.0 + r * (root[0][0] * c + root[0][1] * s),
                    self.center.1 + r * (root[1][0] * c + root[1][1] * s),
                )
            })
            .collect())
    }

    /// `π c √det(shape)`.
    pub fn area(&self) -> f64 {
        let det = self.shape[0][0] * self.shape[1][1] - self.shape[0][1] * self.shape[1][0];
        PI * self.chi2_crit * math::sqrt(det.max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi2_closed_form() {
        assert!((chi2_quantile_2df(0.95).unwrap() - 5.991_464_547_107_979).abs() < 1e-12);
        assert!((chi2_quantile_2df(0.5).unwrap() - 1.386_294_361_119_890_6).abs() < 1e-12);
        assert!(chi2_quantile_2df(0.0).is_err());
        assert!(chi2_quantile_2df(1.0).is_err());
    }

    #[test]
    fn wald_basics() {
        let r = ConfidenceRegion::new((1.0, 2.0), [[1.0, 0.0], [0.0, 1.0]], 0.05).unwrap();
        assert_eq!(r.wald_statistic(1.0, 2.0), 0.0);
        assert!((r.wald_statistic(0.0, 1.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn identity_boundary_is_circle() {
        let r = ConfidenceRegion::new((0.0, 0.0), [[1.0, 0.0], [0.0, 1.0]], 0.05).unwrap();
        let pts = r.boundary(64).unwrap();
        let radius = 2.447_746_830_680_816;
        for (x, y) in pts {
            assert!((math::hypot(x, y) - radius).abs() < 1e-9);
        }
    }

    #[test]
    fn diagonal_shape_semi_axes() {
        let r = ConfidenceRegion::new((0.0, 0.0), [[4.0, 0.0], [0.0, 1.0]], 0.05).unwrap();
        let c = r.chi2_crit;
        let pts = r.boundary(360).unwrap();
        let max_x = pts.iter().fold(0.0f64, |a, p| a.max(p.0.abs()));
        let max_y = pts.iter().fold(0.0f64, |a, p| a.max(p.1.abs()));
        assert!((max_x - 2.0 * math::sqrt(c)).abs() < 1e-9);
        assert!((max_y - math::sqrt(c)).abs() < 1e-9);
    }

    #[test]
    fn marginal_interval() {
        let (lo, hi) = rbc_marginal_interval(0.0, 1.0, 0.05).unwrap();
        assert!((hi - 1.959_964).abs() < 1e-6 && (lo + 1.959_964).abs() < 1e-6);
        let (lo, hi) = rbc_marginal_interval(0.0, 1.0, 0.32).unwrap();
        let half = 0.5 * (hi - lo);
        assert!((0.994..=0.995).contains(&half));
        assert_eq!(
            rbc_marginal_interval(0.0, 0.0, 0.05).unwrap_err(),
            Error::DegenerateCovariance
        );
    }

    #[test]
    fn singular_shape_rejected() {
        assert!(ConfidenceRegion::new((0.0, 0.0), [[1.0, 1.0], [1.0, 1.0]], 0.05).is_err());
    }
}
