//! Covariance assembly against explicit influence-vector quadratic forms.

mod common;

use common::{influence, quad, rel_close};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rdjoint_core::fuzzy::fuzzy_level_variance;
use rdjoint_core::sharp::sandwich_omega;
use rdjoint_core::*;

const TOL: f64 = 1e-10;

fn random_design(rng: &mut StdRng, n: usize) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let left = x.iter().filter(|&&v| v < -0.05).count();
        if left >= 12 && n - left >= 12 {
            return x;
        }
    }
}

fn random_spec(rng: &mut StdRng, trial: usize, extra_order: usize) -> FitSpec {
    let kernel = Kernel::ALL[trial % 3];
    let p = 1 + trial % 2;
    let h = rng.random_range(0.7..1.0);
    // Every fourth trial uses b = h.
    let b = if trial % 4 == 0 { h } else { rng.random_range(0.8..1.0) };
    FitSpec::new(h, b)
        .with_orders(p, p + 1 + extra_order)
        .with_kernel(kernel)
}

#[test]
fn sharp_sandwich_matches_influence_oracle() {
    check_sharp(0, 25, TOL);
}

/// With q = p + 2 on twenty points per side the pilot Gram matrix has
/// condition numbers near 1e6, which bounds the attainable agreement.
#[test]
fn sharp_sandwich_higher_pilot_order() {
    check_sharp(1, 10, 1e-8);
}

fn check_sharp(extra_order: usize, trials: usize, tol: f64) {
    let mut rng = StdRng::seed_from_u64(11 + extra_order as u64);
    for trial in 0..trials {
        let n = 40;
        let x = random_design(&mut rng, n);
        let y: Vec<f64> = x
            .iter()
            .map(|&v| v.sin() + if v >= 0.0 { 1.0 } else { 0.0 } + rng.random_range(-0.3..0.3))
            .collect();
        let sigma: Vec<f64> = x.iter().map(|&v| 0.1 + v * v + rng.random_range(0.0..0.5)).collect();
        let spec = random_spec(&mut rng, trial, extra_order);
        let s = Sample::new(x.clone(), y.clone(), None, 0.0).unwrap();
        let est = estimate_sharp(&s, &spec).unwrap();
        let om = sandwich_omega(&est, &sigma);

        let (lvl, der) = influence(&x, spec.p, spec.q, spec.h, spec.b, spec.kernel);
        let ones = vec![1.0; n];
        // Linear forms can cancel; compare on the scale of Σ|w_i y_i|.
        let scale = |w: &[f64]| w.iter().zip(&y).map(|(w, y)| (w * y).abs()).sum::<f64>();
        assert!(
            (quad(&lvl, &ones, &y) - est.tau_tilde).abs() <= tol * scale(&lvl),
            "trial {trial}: level"
        );
        assert!(
            (quad(&der, &ones, &y) - spec.h * est.tau_prime_tilde).abs() <= tol * scale(&der),
            "trial {trial}: slope"
        );

        let v = quad(&lvl, &sigma, &lvl);
        let vp = quad(&der, &sigma, &der);
        let c = quad(&lvl, &sigma, &der);
        assert!(rel_close(om.v, v, tol), "trial {trial}: V {} vs {v}", om.v);
        assert!(rel_close(om.vp, vp, tol), "trial {trial}: V' {} vs {vp}", om.vp);
        assert!(rel_close(om.c, c, tol), "trial {trial}: C {} vs {c}", om.c);
        assert_eq!(om.omega_h[0][0], om.v);
        assert!(rel_close(om.omega_h[1][1], vp / (spec.h * spec.h), tol));
        assert!(rel_close(om.omega_h[0][1], c / spec.h, tol));
    }
}

/// Step-function first stage with a kink in its local trend, strong enough
/// that both ratios are published.
fn fuzzy_problem(rng: &mut StdRng, n: usize) -> Option<(Sample, FitSpec)> {
    let x = random_design(rng, n);
    let sl = rng.random_range(-0.8..-0.2);
    let sr = rng.random_range(0.15..0.6);
    let t: Vec<f64> = x
        .iter()
        .map(|&v| {
            if v >= 0.0 {
                f64::from(v >= sr)
            } else {
                f64::from(v >= sl)
            }
        })
        .collect();
    let y: Vec<f64> = x
        .iter()
        .zip(&t)
        .map(|(&v, &ti)| 0.5 * v + 2.0 * ti + rng.random_range(-0.3..0.3))
        .collect();
    let spec = FitSpec::new(rng.random_range(0.8..1.0), 1.0);
    let s = Sample::new(x, y, Some(t), 0.0).unwrap();
    let fz = estimate_fuzzy(&s, &spec).ok()?;
    fz.tau_prime_frd.map(|_| (s, spec))
}

#[test]
fn fuzzy_sandwich_matches_stacked_oracle() {
    let mut rng = StdRng::seed_from_u64(5);
    let mut done = 0;
    for _ in 0..2000 {
        let Some((s, spec)) = fuzzy_problem(&mut rng, 40) else {
            continue;
        };
        let n = s.len();
        let x = s.running().to_vec();
        let sy: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        let st: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.25)).collect();
        let syt: Vec<f64> = (0..n)
            .map(|i| rng.random_range(-0.9..0.9) * (sy[i] * st[i]).sqrt())
            .collect();
        let var = VarianceDiagonals {
            y: sy.clone(),
            t: Some(st.clone()),
            yt: Some(syt.clone()),
        };
        let fz = estimate_fuzzy(&s, &spec).unwrap();
        let om = assemble_omega_fuzzy(&fz, &var).unwrap();

        let (w0, w1) = influence(&x, spec.p, spec.q, spec.h, spec.b, spec.kernel);
        let (a, b) = (1.0 / fz.tau_t_hat, fz.y_part.tau_hat / fz.tau_t_hat.powi(2));
        let (ap, bp) = (
            1.0 / fz.tau_prime_t_hat,
            fz.y_part.tau_prime_hat / fz.tau_prime_t_hat.powi(2),
        );
        // Stacked influence (a w, −b w) over (Y, T) with block-diagonal
        // covariance [[Σ_Y, Σ_YT], [Σ_YT, Σ_T]].
        let stacked = |ca: f64, cb: f64, u: &[f64], da: f64, db: f64, v: &[f64]| {
            ca * da * quad(u, &sy, v) - ca * db * quad(u, &syt, v) - cb * da * quad(u, &syt, v)
                + cb * db * quad(u, &st, v)
        };
        let v = stacked(a, b, &w0, a, b, &w0);
        let vp = stacked(ap, bp, &w1, ap, bp, &w1);
        let c = stacked(a, b, &w0, ap, bp, &w1);
        assert!(rel_close(om.v, v, TOL), "V {} vs {v}", om.v);
        assert!(rel_close(om.vp, vp, TOL), "V' {} vs {vp}", om.vp);
        assert!(rel_close(om.c, c, TOL), "C {} vs {c}", om.c);
        assert!(rel_close(fuzzy_level_variance(&fz, &var).unwrap(), v, TOL));
        done += 1;
        if done == 25 {
            break;
        }
    }
    assert_eq!(done, 25, "not enough strongly identified fuzzy problems");
}

#[test]
fn deterministic_first_stage_scales_sharp_terms() {
    let mut rng = StdRng::seed_from_u64(8);
    let (s, spec) = loop {
        if let Some(p) = fuzzy_problem(&mut rng, 60) {
            break p;
        }
    };
    let n = s.len();
    let sy: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let var = VarianceDiagonals {
        y: sy.clone(),
        t: Some(vec![0.0; n]),
        yt: Some(vec![0.0; n]),
    };
    let fz = estimate_fuzzy(&s, &spec).unwrap();
    let om = assemble_omega_fuzzy(&fz, &var).unwrap();
    let sharp = sandwich_omega(&fz.y_part, &sy);
    assert!(rel_close(om.v, sharp.v / fz.tau_t_hat.powi(2), 1e-12));
    assert!(rel_close(om.c, sharp.c / (fz.tau_t_hat * fz.tau_prime_t_hat), 1e-12));
    let m = om.omega_h;
    assert_eq!(m[0][1], m[1][0]);
    assert!(m[0][0] >= 0.0 && m[1][1] >= 0.0 && m[0][0] * m[1][1] - m[0][1] * m[1][0] >= -1e-12);
}
