//! Simplified plug-in bandwidths.
//!
//! Global polynomials of order `p + 2` on each side supply the pilot
//! derivatives and residual variances; a histogram estimate supplies the
//! density at the cutoff. `h` minimizes the asymptotic MSE of the raw jump
//! estimate (rate `n^{-1/(2p+3)}`), `b` the asymptotic MSE of the jump in the
//! `(p+1)`-th derivative estimated at order `p + 1`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernel::KernelFn;
use crate::linalg::{Matrix, PivotedQr};
use crate::locpoly::{basis, Side};
use crate::math;
use crate::numerics::adaptive_simpson;
use crate::sample::Sample;

/// Minimum observations per side.
pub const MIN_PER_SIDE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BandwidthWarning {
    /// The MSE formula for `h` was degenerate; `sd(X) n^{-1/(2p+3)}` was used.
    FallbackMain,
    /// Same for `b`, with rate `n^{-1/(2p+5)}`.
    FallbackBias,
    ClampedMain,
    ClampedBias,
}

impl BandwidthWarning {
    pub fn code(self) -> &'static str {
        match self {
            BandwidthWarning::FallbackMain => "bandwidth_fallback_h",
            BandwidthWarning::FallbackBias => "bandwidth_fallback_b",
            BandwidthWarning::ClampedMain => "bandwidth_clamped_h",
            BandwidthWarning::ClampedBias => "bandwidth_clamped_b",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bandwidths {
    pub h: f64,
    pub b: f64,
    pub warnings: Vec<BandwidthWarning>,
}

struct Pilot {
    /// Derivatives at the cutoff, index = order.
    derivs: Vec<f64>,
    sigma2: f64,
}

fn global_pilot(x: &[f64], y: &[f64], order: usize) -> Option<Pilot> {
    let scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 || x.len() <= order + 1 {
        return None;
    }
    let mut design = Matrix::zeros(x.len(), order + 1);
    for (i, &xi) in x.iter().enumerate() {
        for (k, r) in basis(xi / scale, order).into_iter().enumerate() {
            design[(i, k)] = r;
        }
    }
    let qr = PivotedQr::new(&design, 1e-10);
    if !qr.is_full_rank() {
        return None;
    }
    let coef = qr.solve_least_squares(y);
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let fit: f64 = basis(xi / scale, order).iter().zip(&coef).map(|(r, c)| r * c).sum();
            (yi - fit) * (yi - fit)
        })
        .sum();
    let derivs = (0..=order)
        .map(|k| math::factorial(k) * coef[k] / math::powi(scale, k as u32))
        .collect();
    Some(Pilot {
        derivs,
        sigma2: rss / (x.len() - order - 1) as f64,
    })
}

/// Continuum constants for estimating the `nu`-th derivative with a local
/// polynomial of order `order` on one side: `(bias, variance)` with
/// `bias = ν! e_νᵀ Γ⁻¹ ϑ` and `variance = (ν!)² e_νᵀ Γ⁻¹ Ψ Γ⁻¹ e_ν`.
fn kernel_constants<K: KernelFn>(kernel: &K, order: usize, nu: usize, side: Side) -> Option<(f64, f64)> {
    let top = 2 * order + 1;
    let moment = |k: usize, squared: bool| {
        let f = |u: f64| {
            let w = kernel.weight(u);
            math::powi(u, k as u32) * if squared { w * w } else { w }
        };
        adaptive_simpson(&f, 0.0, 1.0, 1e-13)
    };
    let sign = |k: usize| if side == Side::Left && k % 2 == 1 { -1.0 } else { 1.0 };
    let nu_m: Vec<f64> = (0..=top).map(|k| sign(k) * moment(k, false)).collect();
    let pi_m: Vec<f64> = (0..=2 * order).map(|k| sign(k) * moment(k, true)).collect();

    let dim = order + 1;
    let mut gamma = Matrix::zeros(dim, dim);
    let mut psi = Matrix::zeros(dim, dim);
    for a in 0..dim {
        for c in 0..dim {
            gamma[(a, c)] = nu_m[a + c];
            psi[(a, c)] = pi_m[a + c];
        }
    }
    let vartheta: Vec<f64> = (0..dim).map(|a| nu_m[a + order + 1]).collect();
    let qr = PivotedQr::new(&gamma, 1e-13);
    if !qr.is_full_rank() {
        return None;
    }
    let mut e = vec![0.0; dim];
    e[nu] = 1.0;
    let g_nu = qr.solve_least_squares(&e);
    let fact = math::factorial(nu);
    let bias = fact * crate::linalg::dot(&g_nu, &vartheta);
    let variance = fact * fact * psi.bilinear(&g_nu, &g_nu);
    Some((bias, variance))
}

fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    math::sqrt(v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0))
}

/// Plug-in `(h, b)` for order `p` with bias order `p + 1`.
pub fn rule_of_thumb_bandwidths<K: KernelFn>(sample: &Sample, p: usize, kernel: &K) -> Result<Bandwidths> {
    if p < 1 {
        return Err(Error::InvalidSpec(format!("p must be at least 1, got {p}")));
    }
    let xc = sample.centered();
    let y = sample.outcome();
    let split = |side: Side| -> (Vec<f64>, Vec<f64>) {
        xc.iter()
            .zip(y)
            .filter(|(&x, _)| side.contains(x))
            .map(|(&x, &v)| (x, v))
            .unzip()
    };
    let (xl, yl) = split(Side::Left);
    let (xr, yr) = split(Side::Right);
    for (side, count) in [(Side::Left, xl.len()), (Side::Right, xr.len())] {
        if count < MIN_PER_SIDE {
            return Err(Error::InvalidSample(format!(
                "bandwidth selection needs {MIN_PER_SIDE} observations per side, {} side has {count}",
                side.name()
            )));
        }
    }

    let n = xc.len() as f64;
    let range = xc.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let sd_x = std_dev(&xc);
    let sd_y = std_dev(y).max(f64::MIN_POSITIVE);
    let q = p + 1;
    let order = p + 2;

    // Histogram density at the cutoff.
    let h0 = 1.06 * sd_x * math::powf(n, -0.2);
    let near = xc.iter().filter(|x| x.abs() <= h0).count() as f64;
    let density = near / (2.0 * n * h0);

    let pilots = (global_pilot(&xl, &yl, order), global_pilot(&xr, &yr, order));

    let mut warnings = Vec::new();
    let mut h = None;
    let mut b = None;
    if let ((Some(pl), Some(pr)), true) = (&pilots, density > 0.0 && density.is_finite()) {
        let consts = |order, nu| {
            Some((
                kernel_constants(kernel, order, nu, Side::Left)?,
                kernel_constants(kernel, order, nu, Side::Right)?,
            ))
        };
        if let Some(((bl, vl), (br, vr))) = consts(p, 0) {
            let bias = (br * pr.derivs[p + 1] - bl * pl.derivs[p + 1]) / math::factorial(p + 1);
            let var = (pr.sigma2 * vr + pl.sigma2 * vl) / density;
            let scaled_bias = bias.abs() * math::powi(range, (p + 1) as u32);
            if scaled_bias > 1e-9 * sd_y && var > 0.0 {
                let rate = 1.0 / (2 * p + 3) as f64;
                h = Some(math::powf(var / (2.0 * (p + 1) as f64 * bias * bias * n), rate));
            }
        }
        let nu = p + 1;
        if let Some(((bl, vl), (br, vr))) = consts(q, nu) {
            let bias = (br * pr.derivs[q + 1] - bl * pl.derivs[q + 1]) / math::factorial(q + 1);
            let var = (pr.sigma2 * vr + pl.sigma2 * vl) / density;
            let scaled_bias = bias.abs() * math::powi(range, (q + 1) as u32);
            if scaled_bias > 1e-9 * sd_y && var > 0.0 {
                let rate = 1.0 / (2 * q + 3) as f64;
                let num = (2 * nu + 1) as f64 * var;
                let den = 2.0 * (q + 1 - nu) as f64 * bias * bias * n;
                b = Some(math::powf(num / den, rate));
            }
        }
    }

    let h = h.filter(|v| v.is_finite() && *v > 0.0).unwrap_or_else(|| {
        warnings.push(BandwidthWarning::FallbackMain);
        sd_x * math::powf(n, -1.0 / (2 * p + 3) as f64)
    });
    let b = b.filter(|v| v.is_finite() && *v > 0.0).unwrap_or_else(|| {
        warnings.push(BandwidthWarning::FallbackBias);
        sd_x * math::powf(n, -1.0 / (2 * p + 5) as f64)
    });
    let clamp = |v: f64, w: BandwidthWarning, warnings: &mut Vec<BandwidthWarning>| {
        if v > range {
            warnings.push(w);
            range
        } else {
            v
        }
    };
    let h = clamp(h, BandwidthWarning::ClampedMain, &mut warnings);
    let b = clamp(b, BandwidthWarning::ClampedBias, &mut warnings);
    Ok(Bandwidths { h, b, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Kernel;

    #[test]
    fn triangular_boundary_constants() {
        // Closed forms for the triangular kernel on [0, 1] at order 1:
        // bias constant -1/10, variance constant 24/5.
        let (b, v) = kernel_constants(&Kernel::Triangular, 1, 0, Side::Right).unwrap();
        assert!((b + 0.1).abs() < 1e-10, "{b}");
        assert!((v - 4.8).abs() < 1e-9, "{v}");
        let (bl, vl) = kernel_constants(&Kernel::Triangular, 1, 0, Side::Left).unwrap();
        assert!((bl - b).abs() < 1e-12 && (vl - v).abs() < 1e-9);
    }

    #[test]
    fn zero_curvature_falls_back() {
        let x: Vec<f64> = (0..200).map(|i| -1.0 + 2.0 * (i as f64 + 0.5) / 200.0).collect();
        let y = x
            .iter()
            .map(|&v| 1.0 + 2.0 * v + if v >= 0.0 { 0.5 } else { 0.0 })
            .collect();
        let s = Sample::new(x, y, None, 0.0).unwrap();
        let bw = rule_of_thumb_bandwidths(&s, 1, &Kernel::Triangular).unwrap();
        assert!(bw.warnings.contains(&BandwidthWarning::FallbackMain));
        assert!(bw.h > 0.0 && bw.h <= 1.0 && bw.b > 0.0 && bw.b <= 1.0);
    }

    #[test]
    fn too_few_points_per_side() {
        let x: Vec<f64> = (0..30).map(|i| i as f64 - 5.0).collect();
        let s = Sample::new(x.clone(), x, None, 0.0).unwrap();
        assert!(rule_of_thumb_bandwidths(&s, 1, &Kernel::Triangular).is_err());
    }
}
