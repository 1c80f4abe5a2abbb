//! One-sided kernel-weighted local polynomial regression at the cutoff.
//!
//! Fits are computed in the scaled basis `r_p(u) = (1, u, …, u^p)` with
//! `u = (X_i - c) / h`, so the `j`-th derivative estimate is
//! `j! · beta_scaled[j] / h^j`. The moment matrix `Γ = RᵀWR/n` and the vector
//! `ϑ = RᵀW S/n`, `S_i = u_i^{p+1}`, are kept on the fit because the bias
//! constants and the covariance sandwich are built from them.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernel::KernelFn;
use crate::linalg::{dot, Matrix, PivotedQr};
use crate::math;
use crate::sample::Sample;

/// Rank threshold on the weighted design, relative to its largest pivot.
const RANK_TOL: f64 = 1e-10;
/// Condition number of `Γ` above which a fit is flagged (not rejected).
pub const CONDITION_WARNING: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Side {
    /// Below the cutoff (control).
    Left,
    /// At or above the cutoff (treated).
    Right,
}

impl Side {
    /// Whether a centered running value belongs to this side.
    #[inline]
    pub fn contains(self, x_centered: f64) -> bool {
        match self {
            Side::Left => x_centered < 0.0,
            Side::Right => x_centered >= 0.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "control",
            Side::Right => "treated",
        }
    }
}

/// Which column of the sample is regressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Y,
    T,
}

/// `(1, u, …, u^degree)`.
pub fn basis(u: f64, degree: usize) -> Vec<f64> {
    let mut r = Vec::with_capacity(degree + 1);
    let mut p = 1.0;
    for _ in 0..=degree {
        r.push(p);
        p *= u;
    }
    r
}

#[derive(Debug, Clone)]
pub struct OneSidedFit {
    pub side: Side,
    pub degree: usize,
    pub bandwidth: f64,
    /// Total sample size `n` (both sides), the normalizer in `Γ` and `ϑ`.
    pub n_total: usize,
    /// Coefficients in the scaled basis.
    pub beta_scaled: Vec<f64>,
    pub gamma: Matrix,
    pub vartheta: Vec<f64>,
    /// `1{side} K(x/h) / h` for every observation.
    pub weights: Vec<f64>,
    /// `Y_i - fitted` inside the window, exactly zero outside.
    pub residuals: Vec<f64>,
    pub n_effective: usize,
    /// Estimated condition number of `Γ`.
    pub gamma_condition: f64,
    active: Vec<usize>,
    scaled: Vec<f64>,
    qr: PivotedQr,
}

impl OneSidedFit {
    /// `μ̂` at the cutoff.
    pub fn level(&self) -> f64 {
        self.beta_scaled[0]
    }

    /// `j`-th derivative estimate `j! β_j / h^j`.
    pub fn derivative(&self, j: usize) -> f64 {
        assert!(j <= self.degree, "derivative order exceeds fit degree");
        math::factorial(j) * self.beta_scaled[j] / math::powi(self.bandwidth, j as u32)
    }

    /// `Γ⁻¹ v`.
    pub fn gamma_solve(&self, v: &[f64]) -> Vec<f64> {
        let mut x = self.qr.solve_normal(v);
        let n = self.n_total as f64;
        x.iter_mut().for_each(|xi| *xi *= n);
        x
    }

    /// `Γ⁻¹ e_k`.
    pub fn gamma_inv_col(&self, k: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.degree + 1];
        e[k] = 1.0;
        self.gamma_solve(&e)
    }

    /// Bias constants `(B, B′) = (e₀ᵀΓ⁻¹ϑ, e₁ᵀΓ⁻¹ϑ)`.
    pub fn bias_constants(&self) -> (f64, f64) {
        let g = self.gamma_solve(&self.vartheta);
        (g[0], if self.degree >= 1 { g[1] } else { 0.0 })
    }

    pub fn is_ill_conditioned(&self) -> bool {
        self.gamma_condition > CONDITION_WARNING
    }

    /// Indices of positive-weight observations, in sample order.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    /// `r_degree(X_i / h)` for the `k`-th active observation.
    pub fn active_basis(&self, k: usize) -> Vec<f64> {
        basis(self.scaled[k], self.degree)
    }
}

/// Fits one side of a sample.
pub fn fit_one_sided<K: KernelFn>(
    sample: &Sample,
    outcome: Outcome,
    side: Side,
    degree: usize,
    bandwidth: f64,
    kernel: &K,
) -> Result<OneSidedFit> {
    let y = match outcome {
        Outcome::Y => sample.outcome(),
        Outcome::T => sample.treatment().ok_or(Error::MissingTreatment)?,
    };
    fit_centered(&sample.centered(), y, side, degree, bandwidth, kernel)
}

/// Fits one side given already-centered running values.
pub fn fit_centered<K: KernelFn>(
    x_centered: &[f64],
    y: &[f64],
    side: Side,
    degree: usize,
    bandwidth: f64,
    kernel: &K,
) -> Result<OneSidedFit> {
    fit_selected(x_centered, y, side, |x| side.contains(x), degree, bandwidth, kernel)
}

/// Core solver; `select` decides which observations may receive weight.
fn fit_selected<K: KernelFn, F: Fn(f64) -> bool>(
    x_centered: &[f64],
    y: &[f64],
    side: Side,
    select: F,
    degree: usize,
    bandwidth: f64,
    kernel: &K,
) -> Result<OneSidedFit> {
    assert_eq!(x_centered.len(), y.len(), "running and outcome lengths differ");
    if !(bandwidth.is_finite() && bandwidth > 0.0) {
        return Err(Error::InvalidSpec(alloc::format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    let n = x_centered.len();
    if !x_centered.iter().any(|&x| select(x)) {
        return Err(Error::empty(side));
    }

    let mut weights = vec![0.0; n];
    let mut active = Vec::new();
    let mut scaled = Vec::new();
    for (i, &x) in x_centered.iter().enumerate() {
        if !select(x) {
            continue;
        }
        let u = x / bandwidth;
        let w = kernel.weight(u) / bandwidth;
        if w > 0.0 {
            weights[i] = w;
            active.push(i);
            scaled.push(u);
        }
    }

    let mut distinct = scaled.clone();
    distinct.sort_by(|a, b| a.total_cmp(b));
    distinct.dedup();
    if distinct.len() < degree + 1 {
        return Err(Error::singular(side, degree));
    }

    let m = active.len();
    let k = degree + 1;
    let mut design = Matrix::zeros(m, k);
    let mut rhs = vec![0.0; m];
    let mut gamma = Matrix::zeros(k, k);
    let mut vartheta = vec![0.0; k];
    for (row, (&i, &u)) in active.iter().zip(&scaled).enumerate() {
        let w = weights[i];
        let sw = math::sqrt(w);
        let r = basis(u, degree + 1);
        for a in 0..k {
            design[(row, a)] = sw * r[a];
            for c in 0..k {
                gamma[(a, c)] += w * r[a] * r[c];
            }
            vartheta[a] += w * r[a] * r[k];
        }
        rhs[row] = sw * y[i];
    }
    let nf = n as f64;
    gamma.scale(1.0 / nf);
    vartheta.iter_mut().for_each(|v| *v /= nf);

    let qr = PivotedQr::new(&design, RANK_TOL);
    if !qr.is_full_rank() {
        return Err(Error::singular(side, degree));
    }
    let beta_scaled = qr.solve_least_squares(&rhs);
    let cond = qr.condition_estimate();

    let mut residuals = vec![0.0; n];
    for (&i, &u) in active.iter().zip(&scaled) {
        residuals[i] = y[i] - dot(&basis(u, degree), &beta_scaled);
    }

    Ok(OneSidedFit {
        side,
        degree,
        bandwidth,
        n_total: n,
        beta_scaled,
        gamma,
        vartheta,
        weights,
        residuals,
        n_effective: m,
        gamma_condition: cond * cond,
        active,
        scaled,
        qr,
    })
}
