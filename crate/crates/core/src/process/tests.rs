use super::*;
use crate::exec::{sample_stream, std_error, tree_mean, Pool};
use crate::linalg::line_fit;
use std::sync::Arc;

#[test]
fn path_starts_at_initial_condition() {
    let spec = ProcessSpec::brownian(1);
    let mut rng = sample_stream(1, 0);
    let path = sample_path(&spec, &[3.0], 1.0, 16, &mut rng).unwrap();
    assert_eq!(path.position(0), &[3.0]);
    assert_eq!(path.times[0], 0.0);
    assert_eq!(path.times[16], 1.0);
}

#[test]
fn brownian_endpoint_variance() {
    let spec = ProcessSpec::brownian(1);
    let pool = Pool::serial();
    let ends = pool.map_indexed(100_000, |i| {
        let mut rng = sample_stream(2, i);
        let p = sample_path(&spec, &[0.0], 1.0, 8, &mut rng).unwrap();
        p.end_position()[0]
    });
    let sq: Vec<f64> = ends.iter().map(|x| x * x).collect();
    let var = tree_mean(&sq);
    let se = std_error(&sq);
    assert!((var - 1.0).abs() < 3.0 * se, "var = {var}, se = {se}");
}

#[test]
fn stable_characteristic_function_at_two() {
    // E e^{i xi X_t} = e^{-t |xi|^alpha} checked by averaging cosines
    let spec = ProcessSpec::isotropic_stable(1.0, 1);
    let pool = Pool::serial();
    let vals = pool.map_indexed(100_000, |i| {
        let mut rng = sample_stream(3, i);
        let p = sample_path(&spec, &[0.0], 1.0, 4, &mut rng).unwrap();
        (2.0 * p.end_position()[0]).cos()
    });
    let cf = tree_mean(&vals);
    assert!((cf - (-2.0f64).exp()).abs() < 0.01, "cf = {cf}");
}

#[test]
fn transition_density_closed_forms() {
    let b = ProcessSpec::brownian(1);
    let peak = b.transition_density(1.0, &[0.5], &[0.5]).unwrap();
    assert!((peak - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-14);

    let cauchy = ProcessSpec::isotropic_stable(1.0, 1);
    let v = cauchy.transition_density(1.0, &[0.0], &[0.0]).unwrap();
    assert!((v - 1.0 / std::f64::consts::PI).abs() < 1e-14);

    let b2 = ProcessSpec::brownian(2);
    let v2 = b2.transition_density(0.5, &[0.0, 0.0], &[1.0, 0.0]).unwrap();
    let exact = (1.0 / std::f64::consts::PI) * (-1.0f64).exp();
    assert!((v2 - exact).abs() < 1e-14);

    assert!(matches!(
        ProcessSpec::isotropic_stable(1.5, 1).transition_density(1.0, &[0.0], &[0.0]),
        Err(EngineError::DensityUnavailable)
    ));
}

#[test]
fn brownian_2d_density_matches_endpoint_histogram() {
    // MC cross-check of the d=2 closed form: count endpoints in a small
    // disc around |y - x| = 1 and compare with the density at its center
    let spec = ProcessSpec::brownian(2);
    let pool = Pool::serial();
    let t = 0.5;
    let r0 = 1.0;
    let dr = 0.05;
    let hits = pool.map_indexed(200_000, |i| {
        let mut rng = sample_stream(4, i);
        let p = sample_path(&spec, &[0.0, 0.0], t, 4, &mut rng).unwrap();
        let e = p.end_position();
        let r = (e[0] * e[0] + e[1] * e[1]).sqrt();
        if (r - r0).abs() < dr {
            1.0
        } else {
            0.0
        }
    });
    let frac = tree_mean(&hits);
    // annulus area 2 pi r0 * 2 dr times the density at radius r0
    let density = spec.transition_density(t, &[0.0, 0.0], &[r0, 0.0]).unwrap();
    let expected = density * 2.0 * std::f64::consts::PI * r0 * 2.0 * dr;
    assert!(
        (frac - expected).abs() < 0.05 * expected,
        "frac = {frac}, expected = {expected}"
    );
}

#[test]
fn domination_equality_for_levy() {
    let b = ProcessSpec::brownian(1);
    let r = heat_domination_check(&b, 1.0, 1.0, &[0.1, 1.0], &[0.5, 1.0, 4.0], 0, 9).unwrap();
    assert!(r.violations.is_empty());

    let s = ProcessSpec::isotropic_stable(1.5, 1);
    let r = heat_domination_check(&s, 1.0, 1.0, &[0.1, 1.0], &[0.5, 1.0, 4.0], 0, 9).unwrap();
    assert!(r.violations.is_empty());
}

#[test]
fn domination_flags_too_fast_bound() {
    // sigma sigma^T = 2 I so the true CF decays like e^{-t xi^2}; the
    // candidate bound e^{-2 t xi^2} decays too fast and must be flagged
    let spec = ProcessSpec::diffusion(
        1,
        Arc::new(|_x: &[f64], b: &mut [f64]| b[0] = 0.0),
        Arc::new(|_x: &[f64], s: &mut [f64]| s[0] = std::f64::consts::SQRT_2),
        1.9,
        HConstants { c0: 1.0, c1: 1.0, c2: 2.0 },
        PsiFn::Quadratic(1.0),
        None,
    );
    let xi: Vec<f64> = (1..=10).map(|i| 0.4 * i as f64).collect();
    let r = heat_domination_check(&spec, 1.0, 2.0, &[1.0], &xi, 100_000, 10).unwrap();
    assert!(
        !r.violations.is_empty(),
        "expected violations at moderate |xi|"
    );
}

#[test]
fn ellipticity_violation_detected() {
    let spec = ProcessSpec::diffusion(
        1,
        Arc::new(|_x: &[f64], b: &mut [f64]| b[0] = 0.0),
        // dispersion degenerates away from the origin
        Arc::new(|x: &[f64], s: &mut [f64]| s[0] = 1.0 / (1.0 + x[0] * x[0])),
        0.5,
        HConstants::default(),
        PsiFn::Quadratic(0.5),
        None,
    );
    let mut rng = sample_stream(5, 0);
    let r = sample_path(&spec, &[0.0], 4.0, 256, &mut rng);
    assert!(matches!(r, Err(EngineError::EllipticityViolation { .. })));
}

#[test]
fn markov_restart_consistency() {
    // sampling to s, restarting at X_s, and running to t must reproduce
    // the time-t marginal: two-sample KS below the 1% critical value
    let spec = ProcessSpec::brownian(1);
    let pool = Pool::serial();
    let n = 10_000;
    let mut direct: Vec<f64> = pool.map_indexed(n, |i| {
        let mut rng = sample_stream(6, i);
        sample_path(&spec, &[0.0], 1.0, 32, &mut rng)
            .unwrap()
            .end_position()[0]
    });
    let mut restarted: Vec<f64> = pool.map_indexed(n, |i| {
        let mut rng = sample_stream(7, i);
        let first = sample_path(&spec, &[0.0], 0.4, 16, &mut rng).unwrap();
        let mid = first.end_position()[0];
        sample_path(&spec, &[mid], 0.6, 16, &mut rng)
            .unwrap()
            .end_position()[0]
    });
    let d = ks_two_sample(&mut direct, &mut restarted);
    let critical = 1.6276 * ((2 * n) as f64 / (n * n) as f64).sqrt();
    assert!(d < critical, "KS = {d}, critical = {critical}");
}

#[test]
fn euler_maruyama_strong_order_half() {
    // multiplicative-noise SDE against a fine path driven by the same
    // Brownian increments; log2 error slope must sit in [0.35, 0.65]
    let drift: DriftFn = Arc::new(|x: &[f64], b: &mut [f64]| b[0] = -0.5 * x[0]);
    let disp: DispersionFn = Arc::new(|x: &[f64], s: &mut [f64]| s[0] = 0.6 + 0.3 * x[0].sin());
    let spec = ProcessSpec::diffusion(
        1,
        drift.clone(),
        disp.clone(),
        0.05,
        HConstants::default(),
        PsiFn::Quadratic(0.5),
        None,
    );
    let _ = &spec;
    let fine_n = 1 << 12;
    let levels = [1 << 5, 1 << 6, 1 << 7, 1 << 8];
    let n_paths = 400;
    let pool = Pool::serial();
    let errs: Vec<[f64; 4]> = pool.map_indexed(n_paths, |i| {
        let mut rng = sample_stream(8, i);
        let t = 1.0;
        let dt = t / fine_n as f64;
        let sdt = dt.sqrt();
        let dw: Vec<f64> = (0..fine_n)
            .map(|_| {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                sdt * z
            })
            .collect();
        let run = |n: usize| -> f64 {
            let stride = fine_n / n;
            let h = t / n as f64;
            let mut x = 0.3;
            let mut b = [0.0];
            let mut s = [0.0];
            for k in 0..n {
                let dwk: f64 = dw[k * stride..(k + 1) * stride].iter().sum();
                drift(&[x], &mut b);
                disp(&[x], &mut s);
                x += b[0] * h + s[0] * dwk;
            }
            x
        };
        let reference = run(fine_n);
        let mut out = [0.0; 4];
        for (j, &n) in levels.iter().enumerate() {
            out[j] = (run(n) - reference).abs();
        }
        out
    });
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (j, &n) in levels.iter().enumerate() {
        let level_err: Vec<f64> = errs.iter().map(|e| e[j]).collect();
        xs.push((1.0 / n as f64).ln());
        ys.push(tree_mean(&level_err).ln());
    }
    let (_, slope, _) = line_fit(&xs, &ys);
    assert!(
        (0.35..=0.65).contains(&slope),
        "strong-order slope = {slope}"
    );
}

#[test]
fn determinism_across_workers() {
    let spec = ProcessSpec::brownian(1);
    let gen = |i: u64| {
        let mut rng = sample_stream(77, i);
        sample_path(&spec, &[0.0], 1.0, 64, &mut rng).unwrap().positions_flat().to_vec()
    };
    let serial = Pool::serial().map_indexed(32, gen);
    let par = Pool::new(8).map_indexed(32, gen);
    assert_eq!(serial, par);
}

#[test]
fn two_point_path_is_allowed() {
    let spec = ProcessSpec::brownian(1);
    let mut rng = sample_stream(13, 0);
    let p = sample_path(&spec, &[1.0], 0.5, 1, &mut rng).unwrap();
    assert_eq!(p.n_steps, 1);
    assert_eq!(p.times.len(), 2);
}
