//! Linear extrapolation of the treatment effect away from the cutoff and its
//! simultaneous confidence band.
//!
//! Under local linearity, `τ(x) = τ + τ′ x` on `[-δ₁, δ₂]`. Standardizing the
//! estimation error along `(1, x)` gives a unit vector that sweeps an arc of
//! angle `ℓ` as `x` crosses the interval, and the supremum of the
//! standardized error over the interval is `R · sup_θ |cos(θ − φ)|` with `R`
//! Rayleigh and `φ` uniform. Its distribution function is
//!
//! ```text
//! P(s) = (ℓ/π)(1 − e^{−s²/2}) + (2/π) ∫₀^{π/2 − ℓ/2} 1 − e^{−s²/(2cos²u)} du
//! ```
//!
//! and the band's critical value solves `P(c*) = 1 − α`. At `ℓ = 0` this is the
//! two-sided normal quantile, at `ℓ = π` the Rayleigh quantile `√c₁₋α`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::inference::chi2_quantile_2df;
use crate::linalg::{sym2_gram, Sym2};
use crate::math;
use crate::numerics::{adaptive_simpson, bracketed_root, normal_quantile};
use crate::sharp::{is_positive_definite, OmegaMatrix};

/// Quadrature tolerance for `P(s)`.
pub const COVERAGE_QUAD_TOL: f64 = 1e-10;
/// Final bisection bracket width for `c*`.
pub const CRITICAL_VALUE_TOL: f64 = 1e-8;
pub const DEFAULT_GRID: usize = 101;

/// `level + slope · x`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EffectLine {
    pub level: f64,
    pub slope: f64,
}

impl EffectLine {
    pub fn at(&self, x: f64) -> f64 {
        self.level + self.slope * x
    }
}

/// Extrapolated effect `τ̃ + τ̃′ x`.
pub fn extrapolate_point(line: &EffectLine, x: f64) -> f64 {
    line.at(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum BandVariant {
    /// Critical value `c*` from the arc distribution.
    #[default]
    Uniform,
    /// Projection of the joint ellipse, critical value `√c₁₋α`.
    Envelope,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BandRequest {
    pub delta_lo: f64,
    pub delta_hi: f64,
    pub grid_size: usize,
    pub alpha: f64,
    pub variant: BandVariant,
}

impl BandRequest {
    pub fn new(delta_lo: f64, delta_hi: f64, alpha: f64) -> Self {
        BandRequest {
            delta_lo,
            delta_hi,
            grid_size: DEFAULT_GRID,
            alpha,
            variant: BandVariant::Uniform,
        }
    }

    pub fn with_variant(mut self, variant: BandVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_grid(mut self, grid_size: usize) -> Self {
        self.grid_size = grid_size;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_lo.is_finite() && self.delta_lo >= 0.0) || !(self.delta_hi.is_finite() && self.delta_hi >= 0.0)
        {
            return Err(Error::Domain(format!(
                "extrapolation reach must be nonnegative, got [{}, {}]",
                self.delta_lo, self.delta_hi
            )));
        }
        if self.grid_size < 2 {
            return Err(Error::Domain(format!(
                "grid needs at least 2 points, got {}",
                self.grid_size
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Domain(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }

    /// Equally spaced points on `[-δ₁, δ₂]`, with both endpoints and 0 always
    /// present. Collapses to `{0}` when both reaches are zero.
    pub fn grid(&self) -> Vec<f64> {
        let (lo, hi) = (-self.delta_lo, self.delta_hi);
        if lo == hi {
            return alloc::vec![0.0];
        }
        let m = self.grid_size.max(2);
        let mut xs: Vec<f64> = (0..m)
            .map(|k| {
                if k == m - 1 {
                    hi
                } else {
                    lo + (hi - lo) * k as f64 / (m - 1) as f64
                }
            })
            .collect();
        if !xs.contains(&0.0) {
            xs.push(0.0);
        }
        xs.sort_by(|a, b| a.total_cmp(b));
        xs.dedup();
        xs
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UniformBand {
    pub xs: Vec<f64>,
    pub center: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub c_star: f64,
    pub arc_angle: f64,
    pub variant: BandVariant,
}

impl UniformBand {
    pub fn covers(&self, truth: &EffectLine) -> bool {
        self.xs
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&x, (&lo, &hi))| {
                let t = truth.at(x);
                lo <= t && t <= hi
            })
    }

    pub fn mean_width(&self) -> f64 {
        let total: f64 = self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).sum();
        total / self.xs.len() as f64
    }

    /// Half-width at the grid point closest to `x`.
    pub fn half_width_near(&self, x: f64) -> f64 {
        let k = self
            .xs
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
            .map_or(0, |(k, _)| k);
        0.5 * (self.hi[k] - self.lo[k])
    }
}

/// Smallest angle between the standardized directions at `-δ₁` and `δ₂`,
/// computed from the Gram form `g(x, y) = (1, x) Ω_h (1, y)ᵀ`.
pub fn direction_angle(omega_h: &Sym2, delta_lo: f64, delta_hi: f64) -> Result<f64> {
    if !is_positive_definite(omega_h) {
        return Err(Error::DegenerateCovariance);
    }
    let a = -delta_lo;
    let b = delta_hi;
    let cross = sym2_gram(omega_h, a, b);
    let norm = math::sqrt(sym2_gram(omega_h, a, a) * sym2_gram(omega_h, b, b));
    let cos = (cross / norm).clamp(-1.0, 1.0);
    Ok(math::acos(cos).clamp(0.0, PI))
}

/// Distribution function `P(s)` of the supremum statistic for arc angle `ℓ`.
pub fn band_coverage_probability(s: f64, arc_angle: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let ell = arc_angle.clamp(0.0, PI);
    let s2 = s * s;
    let rayleigh = -math::exp_m1(-0.5 * s2);
    let upper = 0.5 * PI - 0.5 * ell;
    let integrand = |u: f64| {
        let c = math::cos(u);
        -math::exp_m1(-s2 / (2.0 * c * c))
    };
    let integral = if upper > 0.0 {
        adaptive_simpson(&integrand, 0.0, upper, COVERAGE_QUAD_TOL)
    } else {
        0.0
    };
    (ell / PI * rayleigh + 2.0 / PI * integral).clamp(0.0, 1.0)
}

/// `c*` solving `P(c*) = 1 − α`, bracketed by the normal and Rayleigh limits.
pub fn critical_value(alpha: f64, arc_angle: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(0.0..=PI).contains(&arc_angle) {
        return Err(Error::Domain(format!("arc angle must lie in [0, π], got {arc_angle}")));
    }
    let lo = normal_quantile(1.0 - 0.5 * alpha);
    let hi = math::sqrt(chi2_quantile_2df(1.0 - alpha)?);
    let target = 1.0 - alpha;
    Ok(bracketed_root(
        &|s| band_coverage_probability(s, arc_angle) - target,
        lo,
        hi,
        CRITICAL_VALUE_TOL,
    ))
}

/// Simultaneous band for the extrapolated line over the request's grid.
pub fn uniform_band(line: &EffectLine, omega: &OmegaMatrix, request: &BandRequest) -> Result<UniformBand> {
    request.validate()?;
    omega.ensure_positive_definite()?;
    let om = &omega.omega_h;
    let arc_angle = direction_angle(om, request.delta_lo, request.delta_hi)?;
    let c_star = match request.variant {
        BandVariant::Uniform => critical_value(request.alpha, arc_angle)?,
        BandVariant::Envelope => math::sqrt(chi2_quantile_2df(1.0 - request.alpha)?),
    };
    let xs = request.grid();
    let mut center = Vec::with_capacity(xs.len());
    let mut lo = Vec::with_capacity(xs.len());
    let mut hi = Vec::with_capacity(xs.len());
    for &x in &xs {
        let mid = line.at(x);
        let half = c_star * math::sqrt(sym2_gram(om, x, x));
        center.push(mid);
        lo.push(mid - half);
        hi.push(mid + half);
    }
    Ok(UniformBand {
        xs,
        center,
        lo,
        hi,
        c_star,
        arc_angle,
        variant: request.variant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extrapolation_is_affine() {
        let line = EffectLine { level: 1.0, slope: 0.5 };
        assert_eq!(extrapolate_point(&line, 0.0), 1.0);
        assert_eq!(extrapolate_point(&line, 2.0), 2.0);
        let l = EffectLine {
            level: 0.25,
            slope: -1.75,
        };
        assert_eq!(l.at(1.0) + l.at(-1.0), 2.0 * l.at(0.0));
    }

    #[test]
    fn angle_reference_cases() {
        let id = [[1.0, 0.0], [0.0, 1.0]];
        assert!((direction_angle(&id, 1.0, 1.0).unwrap() - PI / 2.0).abs() < 1e-15);
        assert_eq!(direction_angle(&id, 0.0, 0.0).unwrap(), 0.0);
        let d = [[4.0, 0.0], [0.0, 1.0]];
        assert!((direction_angle(&d, 1.0, 1.0).unwrap() - libm::acos(0.6)).abs() < 1e-15);
        assert!(direction_angle(&[[1.0, 1.0], [1.0, 1.0]], 1.0, 1.0).is_err());
    }

    #[test]
    fn coverage_limits() {
        assert_eq!(band_coverage_probability(0.0, 1.0), 0.0);
        let s = 2.447_747;
        assert!((band_coverage_probability(s, PI) - 0.95).abs() < 1e-6);
        // ℓ = 0 reduces to the distribution of |N(0, 1)|.
        for s in [0.5, 1.0, 1.959_963_984_540_054, 3.0] {
            let expected = 1.0 - 2.0 * crate::numerics::normal_cdf(-s);
            assert!((band_coverage_probability(s, 0.0) - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn critical_value_limits() {
        assert!((critical_value(0.05, PI).unwrap() - 2.447_747).abs() < 1e-4);
        assert!((critical_value(0.05, 0.0).unwrap() - 1.959_964).abs() < 1e-4);
        let mid = critical_value(0.05, PI / 2.0).unwrap();
        assert!(mid > 1.959_964 && mid < 2.447_747);
    }

    #[test]
    fn grid_includes_zero_and_endpoints() {
        let g = BandRequest::new(0.3, 0.7, 0.05).with_grid(4).grid();
        assert_eq!(g.first(), Some(&-0.3));
        assert_eq!(g.last(), Some(&0.7));
        assert!(g.contains(&0.0));
        assert_eq!(BandRequest::new(0.0, 0.0, 0.05).grid(), alloc::vec![0.0]);
        assert_eq!(BandRequest::new(0.5, 0.5, 0.05).grid().len(), 101);
    }
}
