use super::*;
use crate::exec::{sample_stream, std_error, tree_mean};
use crate::hamiltonian::self_hamiltonian;
use crate::spectral::CovarianceKernel;

fn dirac_setup(beta0: f64, t: f64, n_steps: usize) -> SolverEngine {
    let noise = NoiseSpec::new(beta0, CovarianceKernel::Dirac { d: 1 }).unwrap();
    SolverEngine::new(
        &noise,
        &ProcessSpec::brownian(1),
        &InitialCondition::constant_one(),
        &Regularization::spatial(1e-3),
        t,
        n_steps,
    )
    .unwrap()
}

#[test]
fn lognormal_mean_one_at_k1() {
    // E exp(g sqrt(Q) - Q/2) = 1 for a standard normal g
    let engine = dirac_setup(0.0, 0.5, 128);
    let pool = Pool::default();
    let vals: Vec<f64> = pool.map_indexed(100_000, |i| {
        let mut rng = sample_stream(500, i);
        engine
            .sample_solution(&[0.0], SolutionMode::Skorohod, 1, &mut rng)
            .unwrap()
            .value
    });
    let mean = tree_mean(&vals);
    let se = std_error(&vals);
    assert!((mean - 1.0).abs() < 3.0 * se, "mean={mean}, se={se}");
}

#[test]
fn stratonovich_draws_strictly_positive() {
    let engine = dirac_setup(0.0, 0.5, 64);
    let pool = Pool::default();
    let draws = solution_draws(&engine, &[0.0], SolutionMode::Stratonovich, 2, 1000, 501, &pool)
        .unwrap();
    assert!(draws.iter().all(|s| s.value > 0.0));
}

#[test]
fn inner_path_averaging_reduces_variance() {
    // paired seeds: the K = 2 estimator has strictly smaller variance than
    // K = 1 over repeated draws
    let engine = dirac_setup(0.0, 0.5, 64);
    let pool = Pool::default();
    let n = 10_000;
    let v1: Vec<f64> = pool.map_indexed(n, |i| {
        let mut rng = sample_stream(502, i);
        engine
            .sample_solution(&[0.0], SolutionMode::Skorohod, 1, &mut rng)
            .unwrap()
            .value
    });
    let v2: Vec<f64> = pool.map_indexed(n, |i| {
        let mut rng = sample_stream(502, i);
        engine
            .sample_solution(&[0.0], SolutionMode::Skorohod, 2, &mut rng)
            .unwrap()
            .value
    });
    let var = |xs: &[f64]| {
        let m = tree_mean(xs);
        tree_mean(&xs.iter().map(|x| (x - m) * (x - m)).collect::<Vec<_>>())
    };
    assert!(var(&v2) < var(&v1), "{} !< {}", var(&v2), var(&v1));
}

#[test]
fn mode_ordering_exact_at_k1() {
    // shared randomness: log strat - log sko = Q/2 to 1e-12
    let engine = dirac_setup(0.0, 0.5, 64);
    for i in 0..200 {
        let mut r1 = paired_rng(503, i);
        let mut r2 = paired_rng(503, i);
        let st = engine
            .sample_solution(&[0.0], SolutionMode::Stratonovich, 1, &mut r1)
            .unwrap();
        let sk = engine
            .sample_solution(&[0.0], SolutionMode::Skorohod, 1, &mut r2)
            .unwrap();
        assert_eq!(st.gaussian_draw, sk.gaussian_draw);
        let lhs = st.value.ln() - sk.value.ln();
        let rhs = 0.5 * st.self_hamiltonians[0];
        assert!(
            (lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0),
            "i={i}: {lhs} vs {rhs}"
        );
    }
}

#[test]
fn skorohod_p1_moment_is_exactly_one() {
    let engine = dirac_setup(0.0, 0.5, 32);
    let est = moment_fk(&engine, 1, &[0.0], SolutionMode::Skorohod, 500, 504, &Pool::default())
        .unwrap();
    assert_eq!(est.mean, 1.0);
    assert_eq!(est.std_error, 0.0);
}

#[test]
fn stratonovich_p1_moment_exceeds_one() {
    // Jensen: E exp(H/2) > 1 in any nondegenerate case
    let engine = dirac_setup(0.0, 0.5, 64);
    let est =
        moment_fk(&engine, 1, &[0.0], SolutionMode::Stratonovich, 4000, 505, &Pool::default())
            .unwrap();
    assert!(est.mean > 1.0 + 3.0 * est.std_error, "mean = {}", est.mean);
}

#[test]
fn mixed_moment_equals_p2_at_same_point_exactly() {
    let engine = dirac_setup(0.0, 0.25, 32);
    let pool = Pool::serial();
    let a = moment_fk(&engine, 2, &[0.3], SolutionMode::Skorohod, 200, 506, &pool).unwrap();
    let b = mixed_moment(&engine, &[0.3], &[0.3], SolutionMode::Skorohod, 200, 506, &pool).unwrap();
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
}

#[test]
fn mixed_moment_decays_to_one_with_separation() {
    let noise = NoiseSpec::new(0.0, CovarianceKernel::riesz(0.5, 1)).unwrap();
    let engine = SolverEngine::new(
        &noise,
        &ProcessSpec::brownian(1),
        &InitialCondition::constant_one(),
        &Regularization::spatial_grid_coupled(),
        0.5,
        64,
    )
    .unwrap();
    let pool = Pool::default();
    let mut prev_excess = f64::INFINITY;
    for z in [10.0, 100.0, 1000.0] {
        let est =
            mixed_moment(&engine, &[0.0], &[z], SolutionMode::Skorohod, 2000, 507, &pool).unwrap();
        let excess = est.mean - 1.0;
        assert!(excess < prev_excess, "z={z}: {excess} !< {prev_excess}");
        prev_excess = excess;
    }
    assert!(prev_excess.abs() < 0.01);
}

#[test]
fn mixed_moment_cauchy_schwarz_direction() {
    // for a translation-invariant law, E[u(x1) u(x2)] <= E[u^2] within
    // combined error bars
    let noise = NoiseSpec::new(0.3, CovarianceKernel::riesz(0.5, 1)).unwrap();
    let engine = SolverEngine::new(
        &noise,
        &ProcessSpec::brownian(1),
        &InitialCondition::constant_one(),
        &Regularization::spatial_grid_coupled(),
        0.5,
        64,
    )
    .unwrap();
    let pool = Pool::default();
    let mixed =
        mixed_moment(&engine, &[0.0], &[0.7], SolutionMode::Skorohod, 4000, 508, &pool).unwrap();
    let p2 = moment_fk(&engine, 2, &[0.0], SolutionMode::Skorohod, 4000, 508, &pool).unwrap();
    let tol = 3.0 * (mixed.std_error.powi(2) + p2.std_error.powi(2)).sqrt();
    assert!(mixed.mean <= p2.mean + tol, "{} > {}", mixed.mean, p2.mean);
}

#[test]
fn moment_monotone_in_t() {
    // shared driving paths, Hamiltonians over nested squares: the p = 2
    // Skorohod moment is nondecreasing in t sample by sample
    let noise = NoiseSpec::new(0.0, CovarianceKernel::Dirac { d: 1 }).unwrap();
    let spec = ProcessSpec::brownian(1);
    let reg = Regularization::spatial(1e-3);
    let n = 128;
    let t_max = 1.0;
    let engines: Vec<HamiltonianEngine> = [32usize, 64, 128]
        .iter()
        .map(|&m| {
            HamiltonianEngine::new(&noise, &reg, t_max * m as f64 / n as f64, m).unwrap()
        })
        .collect();
    let pool = Pool::default();
    let rows: Vec<[f64; 3]> = pool.map_indexed(2000, |i| {
        let mut rng = sample_stream(509, i);
        let a = sample_path(&spec, &[0.0], t_max, n, &mut rng).unwrap();
        let b = sample_path(&spec, &[0.0], t_max, n, &mut rng).unwrap();
        let mut out = [0.0; 3];
        for (k, (&m, engine)) in [32usize, 64, 128].iter().zip(&engines).enumerate() {
            let h = engine
                .cross_hamiltonian(&a.prefix(m), &b.prefix(m))
                .unwrap()
                .value;
            out[k] = h.exp();
        }
        out
    });
    for k in 0..2 {
        let lo: Vec<f64> = rows.iter().map(|r| r[k]).collect();
        let hi: Vec<f64> = rows.iter().map(|r| r[k + 1]).collect();
        // exact samplewise monotonicity in this construction
        assert!(rows.iter().all(|r| r[k + 1] >= r[k]));
        assert!(tree_mean(&hi) >= tree_mean(&lo));
    }
}

#[test]
fn gaussian_conditional_identity_on_fixed_path() {
    // conditional on a path, E_W exp(V) = exp(Q/2)
    let noise = NoiseSpec::new(0.0, CovarianceKernel::Dirac { d: 1 }).unwrap();
    let reg = Regularization::spatial(1e-3);
    let mut rng = sample_stream(510, 0);
    let path = sample_path(&ProcessSpec::brownian(1), &[0.0], 1.0, 256, &mut rng).unwrap();
    let q = self_hamiltonian(&path, &noise, &reg).unwrap().value;
    let pool = Pool::default();
    let vals: Vec<f64> = pool.map_indexed(100_000, |i| {
        let mut rng = sample_stream(511, i);
        let g: f64 = rng.sample(rand_distr::StandardNormal);
        (g * q.sqrt()).exp()
    });
    let mean = tree_mean(&vals);
    let se = std_error(&vals);
    assert!(
        (mean - (0.5 * q).exp()).abs() < 3.0 * se,
        "mean={mean}, exact={}, se={se}",
        (0.5 * q).exp()
    );
}

#[test]
fn exp_moment_trivial_cases() {
    let engine = dirac_setup(0.0, 0.5, 64);
    let pool = Pool::default();
    let r0 = exp_moment(&engine, 0.0, &[0.0], 500, 512, &pool).unwrap();
    assert_eq!(r0.estimate.mean, 1.0);
    assert_eq!(r0.estimate.std_error, 0.0);

    let rneg = exp_moment(&engine, -0.7, &[0.0], 2000, 513, &pool).unwrap();
    assert!(rneg.estimate.mean > 0.0 && rneg.estimate.mean <= 1.0);
}

#[test]
fn exp_moment_jensen_lower_bound() {
    // E exp(beta H) >= 1 + beta E[H]; at t = 0.5 the mollified-Dirac mean
    // is close to (8/3)(2 pi)^{-1/2} 0.5^{3/2}
    let engine = dirac_setup(0.0, 0.5, 256);
    let pool = Pool::default();
    let beta = 0.5;
    let r = exp_moment(&engine, beta, &[0.0], 20_000, 514, &pool).unwrap();
    let eh = 8.0 / 3.0 / (2.0 * std::f64::consts::PI).sqrt() * 0.5f64.powf(1.5);
    assert!(
        r.estimate.mean >= 1.0 + beta * eh - 0.02,
        "mean = {} vs bound {}",
        r.estimate.mean,
        1.0 + beta * eh
    );
    assert!(!r.unstable, "half estimates {} vs {}", r.first_half, r.second_half);
}

#[test]
fn skorohod_mean_examples() {
    let b = ProcessSpec::brownian(1);
    let one = skorohod_mean(&b, &InitialCondition::constant_one(), 1.0, &[0.4]).unwrap();
    assert_eq!(one, 1.0);

    let half_line = InitialCondition::Indicator {
        lo: vec![0.0],
        hi: vec![1e9],
    };
    let half = skorohod_mean(&b, &half_line, 1.0, &[0.0]).unwrap();
    assert!((half - 0.5).abs() < 1e-9, "half = {half}");

    let box11 = InitialCondition::Indicator {
        lo: vec![-1.0],
        hi: vec![1.0],
    };
    let v = skorohod_mean(&b, &box11, 1.0, &[0.0]).unwrap();
    // Phi(1) - Phi(-1)
    assert!((v - 0.682689492137086).abs() < 1e-9, "v = {v}");
}

#[test]
fn fk_deterministic_constant_potential() {
    let b = ProcessSpec::brownian(1);
    let c = 0.8;
    let f: PotentialFn = Arc::new(move |_t, _x| c);
    let pool = Pool::default();
    let (est, clipped) = fk_deterministic(
        &b,
        &InitialCondition::constant_one(),
        &f,
        10.0,
        0.7,
        &[0.0],
        64,
        20_000,
        515,
        &pool,
    )
    .unwrap();
    assert!(!clipped);
    let exact = (c * 0.7f64).exp();
    assert!(
        (est.mean - exact).abs() < 3.0 * est.std_error.max(1e-12),
        "mean={}, exact={exact}",
        est.mean
    );
}

#[test]
fn fk_deterministic_zero_potential_is_semigroup() {
    let b = ProcessSpec::brownian(1);
    let f: PotentialFn = Arc::new(|_t, _x| 0.0);
    let u0 = InitialCondition::Indicator {
        lo: vec![-1.0],
        hi: vec![1.0],
    };
    let pool = Pool::default();
    let (est, _) =
        fk_deterministic(&b, &u0, &f, 1.0, 1.0, &[0.0], 64, 40_000, 516, &pool).unwrap();
    let exact = skorohod_mean(&b, &u0, 1.0, &[0.0]).unwrap();
    assert!(
        (est.mean - exact).abs() < 3.0 * est.std_error,
        "mean={}, exact={exact}",
        est.mean
    );
}

#[test]
fn dalang_precondition_enforced() {
    // beta0 = 0.9 with Riesz 0.5 violates the Stratonovich condition while
    // the Skorohod moments remain available
    let noise = NoiseSpec::new(0.9, CovarianceKernel::riesz(0.5, 1)).unwrap();
    let engine = SolverEngine::new(
        &noise,
        &ProcessSpec::brownian(1),
        &InitialCondition::constant_one(),
        &Regularization::spatial_grid_coupled(),
        0.5,
        32,
    )
    .unwrap();
    let mut rng = sample_stream(517, 0);
    let r = engine.sample_solution(&[0.0], SolutionMode::Skorohod, 1, &mut rng);
    match r {
        Err(EngineError::DalangViolated { condition, .. }) => {
            assert_eq!(condition, "dalang-stra")
        }
        other => panic!("expected DalangViolated, got {other:?}"),
    }
    let est = moment_fk(&engine, 2, &[0.0], SolutionMode::Skorohod, 100, 518, &Pool::serial());
    assert!(est.is_ok());
    let est = moment_fk(&engine, 2, &[0.0], SolutionMode::Stratonovich, 100, 518, &Pool::serial());
    assert!(matches!(est, Err(EngineError::DalangViolated { .. })));
}

#[test]
fn estimates_identical_across_worker_counts() {
    let engine = dirac_setup(0.2, 0.5, 32);
    let a = moment_fk(&engine, 2, &[0.0], SolutionMode::Skorohod, 400, 519, &Pool::serial())
        .unwrap();
    let b = moment_fk(&engine, 2, &[0.0], SolutionMode::Skorohod, 400, 519, &Pool::new(8))
        .unwrap();
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    assert_eq!(a.config_fingerprint, b.config_fingerprint);
}

#[test]
fn indicator_u0_gives_zero_samples_without_error() {
    let noise = NoiseSpec::new(0.0, CovarianceKernel::Dirac { d: 1 }).unwrap();
    let engine = SolverEngine::new(
        &noise,
        &ProcessSpec::brownian(1),
        &InitialCondition::Indicator {
            lo: vec![5.0],
            hi: vec![6.0],
        },
        &Regularization::spatial(1e-3),
        0.25,
        32,
    )
    .unwrap();
    let est = moment_fk(&engine, 1, &[0.0], SolutionMode::Skorohod, 2000, 520, &Pool::default())
        .unwrap();
    // essentially all paths miss the far-away box
    assert!(est.mean >= 0.0 && est.mean < 0.01);
}
