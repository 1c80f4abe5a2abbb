//! Sharp-design estimation: raw and bias-corrected jumps in level and slope,
//! nearest-neighbor conditional variances, and the joint 2×2 covariance.
//!
//! With `p` the main order, `q` the pilot order and `B`, `B′` the bias
//! constants of the order-`p` fits, the corrected estimators are
//!
//! ```text
//! τ̃  = τ̂  − h^{p+1} (B₊ μ̂₊^{(p+1)} − B₋ μ̂₋^{(p+1)}) / (p+1)!
//! τ̃′ = τ̂′ − h^{p}   (B′₊ μ̂₊^{(p+1)} − B′₋ μ̂₋^{(p+1)}) / (p+1)!
//! ```
//!
//! and the covariance of `(τ̃, h τ̃′)` is the conditional-on-design sandwich
//! built from the four fits' moment matrices.

use alloc::vec;
use alloc::vec::Vec;

use crate::band::EffectLine;
use crate::error::{Error, Result, SideName};
use crate::linalg::{sym2_eigen, Matrix, Sym2};
use crate::locpoly::{fit_centered, OneSidedFit, Outcome, Side};
use crate::math;
use crate::sample::{FitSpec, Sample};

/// Order-`p` (bandwidth `h`) and order-`q` (bandwidth `b`) fits on one side.
#[derive(Debug, Clone)]
pub struct SideFits {
    pub main: OneSidedFit,
    pub pilot: OneSidedFit,
}

impl SideFits {
    /// `μ̂^{(p+1)}` from the pilot fit.
    pub fn curvature(&self) -> f64 {
        self.pilot.derivative(self.main.degree + 1)
    }
}

#[derive(Debug, Clone)]
pub struct JointEstimates {
    pub p: usize,
    pub q: usize,
    pub h: f64,
    pub b: f64,
    pub tau_hat: f64,
    pub tau_prime_hat: f64,
    /// `μ̂₊^{(p+1)}`.
    pub mu_p1_right: f64,
    /// `μ̂₋^{(p+1)}`.
    pub mu_p1_left: f64,
    pub tau_tilde: f64,
    pub tau_prime_tilde: f64,
    /// `(B₊, B′₊)`.
    pub bias_right: (f64, f64),
    /// `(B₋, B′₋)`.
    pub bias_left: (f64, f64),
    pub right: SideFits,
    pub left: SideFits,
}

impl JointEstimates {
    /// Bias-corrected line `τ̃ + τ̃′ x`.
    pub fn line(&self) -> EffectLine {
        EffectLine {
            level: self.tau_tilde,
            slope: self.tau_prime_tilde,
        }
    }

    pub fn side(&self, side: Side) -> &SideFits {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    /// True when any of the four moment matrices is badly conditioned.
    pub fn ill_conditioned(&self) -> bool {
        [&self.left, &self.right]
            .iter()
            .any(|s| s.main.is_ill_conditioned() || s.pilot.is_ill_conditioned())
    }
}

/// Sharp estimates for the outcome column.
pub fn estimate_sharp(sample: &Sample, spec: &FitSpec) -> Result<JointEstimates> {
    estimate_sharp_for(sample, spec, Outcome::Y)
}

/// Sharp estimates treating `outcome` as the regressand (the treatment column
/// gives the first stage of a fuzzy design).
pub fn estimate_sharp_for(sample: &Sample, spec: &FitSpec, outcome: Outcome) -> Result<JointEstimates> {
    spec.validate()?;
    let y = match outcome {
        Outcome::Y => sample.outcome(),
        Outcome::T => sample.treatment().ok_or(Error::MissingTreatment)?,
    };
    estimate_centered(&sample.centered(), y, spec)
}

pub(crate) fn estimate_centered(xc: &[f64], y: &[f64], spec: &FitSpec) -> Result<JointEstimates> {
    let (p, q, h, b) = (spec.p, spec.q, spec.h, spec.b);
    for side in [Side::Left, Side::Right] {
        if !xc.iter().any(|&x| side.contains(x)) {
            return Err(Error::empty(side));
        }
    }
    let fits = |side| -> Result<SideFits> {
        Ok(SideFits {
            main: fit_centered(xc, y, side, p, h, &spec.kernel)?,
            pilot: fit_centered(xc, y, side, q, b, &spec.kernel)?,
        })
    };
    let left = fits(Side::Left)?;
    let right = fits(Side::Right)?;

    let tau_hat = right.main.level() - left.main.level();
    let tau_prime_hat = right.main.derivative(1) - left.main.derivative(1);
    let mu_p1_right = right.curvature();
    let mu_p1_left = left.curvature();
    let bias_right = right.main.bias_constants();
    let bias_left = left.main.bias_constants();

    let fact = math::factorial(p + 1);
    let hp = math::powi(h, p as u32);
    let hp1 = hp * h;
    let tau_tilde = tau_hat - hp1 * (bias_right.0 * mu_p1_right - bias_left.0 * mu_p1_left) / fact;
    let tau_prime_tilde = tau_prime_hat - hp * (bias_right.1 * mu_p1_right - bias_left.1 * mu_p1_left) / fact;

    Ok(JointEstimates {
        p,
        q,
        h,
        b,
        tau_hat,
        tau_prime_hat,
        mu_p1_right,
        mu_p1_left,
        tau_tilde,
        tau_prime_tilde,
        bias_right,
        bias_left,
        right,
        left,
    })
}

/// Per-observation conditional variance estimates.
///
/// Entries are only computed for observations with positive weight in the
/// `h` or `b` window; all others are zero, which the sandwich forms ignore.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceDiagonals {
    pub y: Vec<f64>,
    pub t: Option<Vec<f64>>,
    pub yt: Option<Vec<f64>>,
}

/// Nearest-neighbor variance estimates with `J = spec.nn_neighbors` same-side
/// neighbors: `J/(J+1) · (Y_i − Ȳ_J)²`, and the analogous products for the
/// treatment column when present.
pub fn nn_variance(sample: &Sample, spec: &FitSpec) -> Result<VarianceDiagonals> {
    spec.validate()?;
    let xc = sample.centered();
    let j = spec.nn_neighbors;
    let n = xc.len();
    let y = sample.outcome();
    let t = sample.treatment();

    let mut var_y = vec![0.0; n];
    let mut var_t = t.map(|_| vec![0.0; n]);
    let mut cov_yt = t.map(|_| vec![0.0; n]);
    let scale = j as f64 / (j as f64 + 1.0);

    for side in [Side::Left, Side::Right] {
        let mut idx: Vec<usize> = (0..n).filter(|&i| side.contains(xc[i])).collect();
        if idx.len() <= j {
            return Err(Error::InsufficientNeighbors {
                side: SideName(side),
                needed: j,
            });
        }
        idx.sort_by(|&a, &b| xc[a].total_cmp(&xc[b]).then(a.cmp(&b)));
        let in_window = |x: f64| {
            use crate::kernel::KernelFn;
            spec.kernel.weight(x / spec.h) > 0.0 || spec.kernel.weight(x / spec.b) > 0.0
        };
        for (pos, &i) in idx.iter().enumerate() {
            if !in_window(xc[i]) {
                continue;
            }
            let neighbors = nearest(&idx, &xc, pos, j);
            let y_bar = neighbors.iter().map(|&k| y[k]).sum::<f64>() / j as f64;
            let ey = y[i] - y_bar;
            var_y[i] = scale * ey * ey;
            if let (Some(t), Some(vt), Some(cyt)) = (t, var_t.as_mut(), cov_yt.as_mut()) {
                let t_bar = neighbors.iter().map(|&k| t[k]).sum::<f64>() / j as f64;
                let et = t[i] - t_bar;
                vt[i] = scale * et * et;
                cyt[i] = scale * ey * et;
            }
        }
    }
    Ok(VarianceDiagonals {
        y: var_y,
        t: var_t,
        yt: cov_yt,
    })
}

/// The `j` nearest neighbors of `sorted[pos]` within `sorted`, excluding it.
/// Ties in distance go to the lower running value.
fn nearest(sorted: &[usize], xc: &[f64], pos: usize, j: usize) -> Vec<usize> {
    let x0 = xc[sorted[pos]];
    let mut lo = pos as isize - 1;
    let mut hi = pos + 1;
    let mut out = Vec::with_capacity(j);
    while out.len() < j {
        let dl = (lo >= 0).then(|| x0 - xc[sorted[lo as usize]]);
        let dh = (hi < sorted.len()).then(|| xc[sorted[hi]] - x0);
        match (dl, dh) {
            (Some(a), Some(b)) if a <= b => {
                out.push(sorted[lo as usize]);
                lo -= 1;
            }
            (_, Some(_)) => {
                out.push(sorted[hi]);
                hi += 1;
            }
            (Some(_), None) => {
                out.push(sorted[lo as usize]);
                lo -= 1;
            }
            (None, None) => break,
        }
    }
    out
}

/// Joint covariance of the bias-corrected pair.
///
/// `v`, `vp`, `c` are the variance of `τ̃`, the variance of `h τ̃′` and their
/// covariance; `omega_h` is the covariance of `(τ̃, τ̃′)` itself.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OmegaMatrix {
    pub v: f64,
    pub vp: f64,
    pub c: f64,
    pub h: f64,
    pub omega_h: Sym2,
}

impl OmegaMatrix {
    pub fn from_scaled(v: f64, vp: f64, c: f64, h: f64) -> Self {
        let ch = c / h;
        OmegaMatrix {
            v,
            vp,
            c,
            h,
            omega_h: [[v, ch], [ch, vp / (h * h)]],
        }
    }

    /// `Ω` in the `(τ̃, h τ̃′)` scaling.
    pub fn omega(&self) -> Sym2 {
        [[self.v, self.c], [self.c, self.vp]]
    }

    pub fn is_positive_definite(&self) -> bool {
        is_positive_definite(&self.omega_h)
    }

    pub fn ensure_positive_definite(&self) -> Result<()> {
        if self.is_positive_definite() {
            Ok(())
        } else {
            Err(Error::DegenerateCovariance)
        }
    }
}

/// Strict positive definiteness with a relative eigenvalue floor.
pub fn is_positive_definite(m: &Sym2) -> bool {
    if !m.iter().flatten().all(|v| v.is_finite()) {
        return false;
    }
    let (vals, _) = sym2_eigen(m);
    vals[1] > 0.0 && vals[0] > 1e-12 * vals[1]
}

/// Variance pieces for one side: `(V, V′, C)` for a given variance diagonal.
fn side_sandwich(fits: &SideFits, bias: (f64, f64), sigma: &[f64]) -> (f64, f64, f64) {
    let main = &fits.main;
    let pilot = &fits.pilot;
    let p = main.degree;
    let kp = p + 1;
    let kq = pilot.degree + 1;
    let n = main.n_total as f64;

    // RᵀWΣWR/n, ŘᵀW̌ΣW̌Ř/n and RᵀWΣW̌Ř/n.
    let mut m_pp = Matrix::zeros(kp, kp);
    let mut m_qq = Matrix::zeros(kq, kq);
    let mut m_pq = Matrix::zeros(kp, kq);
    let mut main_rows = vec![None; main.n_total];
    for (k, &i) in main.active().iter().enumerate() {
        let r = main.active_basis(k);
        let w = main.weights[i];
        let s = w * w * sigma[i];
        for a in 0..kp {
            for c in 0..kp {
                m_pp[(a, c)] += s * r[a] * r[c];
            }
        }
        main_rows[i] = Some(r);
    }
    for (k, &i) in pilot.active().iter().enumerate() {
        let r = pilot.active_basis(k);
        let w = pilot.weights[i];
        let s = w * w * sigma[i];
        for a in 0..kq {
            for c in 0..kq {
                m_qq[(a, c)] += s * r[a] * r[c];
            }
        }
        if let Some(rp) = &main_rows[i] {
            let s = main.weights[i] * w * sigma[i];
            for a in 0..kp {
                for c in 0..kq {
                    m_pq[(a, c)] += s * rp[a] * r[c];
                }
            }
        }
    }
    m_pp.scale(1.0 / n);
    m_qq.scale(1.0 / n);
    m_pq.scale(1.0 / n);

    let g0 = main.gamma_inv_col(0);
    let g1 = main.gamma_inv_col(1);
    let gq = pilot.gamma_inv_col(p + 1);
    let ratio = math::powi(main.bandwidth / pilot.bandwidth, (p + 1) as u32);
    let (bl, bd) = bias;

    let pure = m_qq.bilinear(&gq, &gq);
    let cross0 = m_pq.bilinear(&g0, &gq);
    let cross1 = m_pq.bilinear(&g1, &gq);

    let v = (m_pp.bilinear(&g0, &g0) + ratio * ratio * pure * bl * bl - 2.0 * ratio * cross0 * bl) / n;
    let vp = (m_pp.bilinear(&g1, &g1) + ratio * ratio * pure * bd * bd - 2.0 * ratio * cross1 * bd) / n;
    let c = (m_pp.bilinear(&g0, &g1) - ratio * cross0 * bd - ratio * cross1 * bl + ratio * ratio * pure * bl * bd) / n;
    (v, vp, c)
}

/// Sandwich covariance of `(τ̃, h τ̃′)` for an arbitrary variance diagonal,
/// without a definiteness check. Bilinear in nothing but `sigma`, so the
/// fuzzy covariance reuses it with cross-moment diagonals.
pub fn sandwich_omega(est: &JointEstimates, sigma: &[f64]) -> OmegaMatrix {
    assert_eq!(sigma.len(), est.right.main.n_total, "variance diagonal length");
    let (vr, vpr, cr) = side_sandwich(&est.right, est.bias_right, sigma);
    let (vl, vpl, cl) = side_sandwich(&est.left, est.bias_left, sigma);
    OmegaMatrix::from_scaled(vr + vl, vpr + vpl, cr + cl, est.h)
}

/// Covariance of the bias-corrected pair from the outcome variances. Fails
/// with [`Error::DegenerateCovariance`] unless `Ω_h` is positive definite.
pub fn assemble_omega(est: &JointEstimates, variances: &VarianceDiagonals) -> Result<OmegaMatrix> {
    let omega = sandwich_omega(est, &variances.y);
    omega.ensure_positive_definite()?;
    Ok(omega)
}
