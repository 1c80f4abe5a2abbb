//! Brute-force reference computations shared by the integration tests.
#![allow(dead_code)]

use rdjoint_core::{Kernel, KernelFn};

/// Solves `a x = rhs` by Gaussian elimination with partial pivoting and two
/// rounds of iterative refinement.
pub fn gauss_solve(a: Vec<Vec<f64>>, rhs: Vec<f64>) -> Vec<f64> {
    let mut x = gauss_once(a.clone(), rhs.clone());
    for _ in 0..2 {
        let resid: Vec<f64> = (0..rhs.len())
            .map(|i| rhs[i] - a[i].iter().zip(&x).map(|(a, x)| a * x).sum::<f64>())
            .collect();
        let dx = gauss_once(a.clone(), resid);
        for (x, d) in x.iter_mut().zip(dx) {
            *x += d;
        }
    }
    x
}

fn gauss_once(mut a: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Vec<f64> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (rhs[row] - s) / a[row][row];
    }
    x
}

/// Linear smoother weights on one side: row `k` of
/// `(RᵀWR)⁻¹RᵀW` for the scaled basis, as an n-vector per coefficient, plus
/// `Γ⁻¹ϑ`.
pub struct Smoother {
    pub rows: Vec<Vec<f64>>,
    pub gamma_inv_vartheta: Vec<f64>,
}

pub fn smoother(x: &[f64], right: bool, degree: usize, bw: f64, kernel: Kernel) -> Smoother {
    let n = x.len();
    let dim = degree + 1;
    let w: Vec<f64> = x
        .iter()
        .map(|&v| {
            let on_side = if right { v >= 0.0 } else { v < 0.0 };
            if on_side {
                kernel.weight(v / bw) / bw
            } else {
                0.0
            }
        })
        .collect();
    let basis = |v: f64| -> Vec<f64> { (0..=degree + 1).map(|k| (v / bw).powi(k as i32)).collect() };
    let mut gram = vec![vec![0.0; dim]; dim];
    let mut vartheta = vec![0.0; dim];
    for i in 0..n {
        let r = basis(x[i]);
        for a in 0..dim {
            for c in 0..dim {
                gram[a][c] += w[i] * r[a] * r[c] / n as f64;
            }
            vartheta[a] += w[i] * r[a] * r[dim] / n as f64;
        }
    }
    let mut rows = vec![vec![0.0; n]; dim];
    for i in 0..n {
        if w[i] == 0.0 {
            continue;
        }
        let r = basis(x[i]);
        let sol = gauss_solve(gram.clone(), r[..dim].to_vec());
        for k in 0..dim {
            rows[k][i] = sol[k] * w[i] / n as f64;
        }
    }
    Smoother {
        rows,
        gamma_inv_vartheta: gauss_solve(gram, vartheta),
    }
}

/// Influence vectors of `τ̃` and `h τ̃′` (right minus left) for a sharp fit.
pub fn influence(x: &[f64], p: usize, q: usize, h: f64, b: f64, kernel: Kernel) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let mut lvl = vec![0.0; n];
    let mut der = vec![0.0; n];
    let ratio = (h / b).powi(p as i32 + 1);
    for (right, sign) in [(true, 1.0), (false, -1.0)] {
        let main = smoother(x, right, p, h, kernel);
        let pilot = smoother(x, right, q, b, kernel);
        let bl = main.gamma_inv_vartheta[0];
        let bd = main.gamma_inv_vartheta[1];
        // The pilot curvature is (p+1)! β̌_{p+1}/b^{p+1}; after the
        // h^{p+1}/(p+1)! factor of the correction only (h/b)^{p+1} β̌_{p+1}
        // remains.
        for i in 0..n {
            let curv = pilot.rows[p + 1][i];
            lvl[i] += sign * (main.rows[0][i] - ratio * bl * curv);
            der[i] += sign * (main.rows[1][i] - ratio * bd * curv);
        }
    }
    (lvl, der)
}

pub fn quad(a: &[f64], sigma: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(sigma).zip(b).map(|((a, s), b)| a * s * b).sum()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Noisy sample with a jump and a kink at `cutoff`, `n` points uniform on
/// `[cutoff − 1, cutoff + 1]`, optionally with a fuzzy first stage.
pub fn noisy_sample(seed: u64, n: usize, cutoff: f64, fuzzy: bool) -> rdjoint_core::Sample {
    use rand::{Rng, SeedableRng};
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let xc: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let t: Vec<f64> = xc
        .iter()
        .map(|&v| {
            let p = if v >= 0.0 { 0.7 + 0.25 * v } else { 0.2 + 0.1 * v };
            f64::from(rng.random::<f64>() < p.clamp(0.0, 1.0))
        })
        .collect();
    let y: Vec<f64> = xc
        .iter()
        .zip(&t)
        .map(|(&v, &ti)| {
            let treated = if fuzzy { ti == 1.0 } else { v >= 0.0 };
            0.4 * v - 0.3 * v * v + if treated { 1.0 + 0.5 * v } else { 0.0 } + 0.3 * rng.random::<f64>()
        })
        .collect();
    let x = xc.iter().map(|v| v + cutoff).collect();
    rdjoint_core::Sample::new(x, y, fuzzy.then_some(t), cutoff).unwrap()
}

/// Draws of `sup_{θ∈[0,ℓ]} |cos(θ − φ)| · R` with `R` Rayleigh and `φ`
/// uniform on `[0, 2π)`: the polar form of the supremum of the standardized
/// band process.
pub fn polar_supremum_draws(arc: f64, draws: usize, seed: u64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    (0..draws)
        .map(|_| {
            let u: f64 = 1.0 - rng.random::<f64>();
            let r = (-2.0 * u.ln()).sqrt();
            let phi = 2.0 * PI * rng.random::<f64>();
            // The arc [0, ℓ] reaches a maximum of |cos| iff it contains φ mod π.
            let phase = phi % PI;
            let sup = if phase <= arc {
                1.0
            } else {
                phi.cos().abs().max((arc - phi).cos().abs())
            };
            r * sup
        })
        .collect()
}
