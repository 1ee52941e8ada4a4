use super::*;
use crate::exec::{sample_stream, std_error, tree_mean};
use crate::hamiltonian::{cross_hamiltonian, Regularization};
use crate::process::sample_path;
use crate::solver::InitialCondition;
use crate::spectral::CovarianceKernel;
use rand::Rng;

fn u1() -> InitialCondition {
    InitialCondition::constant_one()
}

#[test]
fn simplex_dirichlet_closed_forms() {
    assert!((simplex_dirichlet(&[0.5, 0.5], 1.0) - std::f64::consts::PI).abs() < 1e-12);
    assert!((simplex_dirichlet(&[0.0], 0.7) - 0.7).abs() < 1e-14);
    assert!((simplex_dirichlet(&[0.0, 0.0, 0.0], 1.0) - 1.0 / 6.0).abs() < 1e-14);
}

#[test]
fn simplex_dirichlet_against_monte_carlo() {
    // I = int_{0<t1<t2<1} (t2-t1)^{-1/2} (1-t2)^{-1/2}; the substitution
    // t2 = 1-w^2, t1 = t2(1-u^2) maps it to E[4 sqrt(1-w^2)] over the unit
    // square, a bounded integrand
    let mut rng = sample_stream(600, 0);
    let n = 2_000_000;
    let vals: Vec<f64> = (0..n)
        .map(|_| {
            let w: f64 = rng.gen();
            let _u: f64 = rng.gen();
            4.0 * (1.0 - w * w).sqrt()
        })
        .collect();
    let mc = tree_mean(&vals);
    let se = std_error(&vals);
    let exact = simplex_dirichlet(&[0.5, 0.5], 1.0);
    assert!((mc - exact).abs() < 3.0 * se);
    assert!((mc - exact).abs() < 0.005 * exact, "mc = {mc}");
}

#[test]
fn order_zero_is_squared_semigroup_term() {
    let noise = NoiseSpec::new(0.0, CovarianceKernel::Dirac { d: 1 }).unwrap();
    let p = ProcessSpec::brownian(1);
    let k = chaos_kernel_norm(0, 1.0, &noise, &p, &u1(), &ChaosBudget::default(), 1, &Pool::serial())
        .unwrap();
    assert_eq!(k.value, 1.0);
    assert_eq!(k.std_error, 0.0);
}

#[test]
fn order_one_dirac_brownian_closed_form() {
    // K_1 = int int (2 pi (2t - t1 - s1))^{-1/2} = (4/3)(2 sqrt2 - 2)/sqrt(2 pi)
    let noise = NoiseSpec::new(0.0, CovarianceKernel::Dirac { d: 1 }).unwrap();
    let p = ProcessSpec::brownian(1);
    let k = chaos_kernel_norm(1, 1.0, &noise, &p, &u1(), &ChaosBudget::default(), 1, &Pool::serial())
        .unwrap();
    let exact = (4.0 / 3.0) * (2.0 * std::f64::consts::SQRT_2 - 2.0)
        / (2.0 * std::f64::consts::PI).sqrt();
    assert!(
        (k.value - exact).abs() < 2e-4 * exact,
        "K1 = {} vs {exact}",
        k.value
    );
}

#[test]
fn order_one_identity_with_cross_hamiltonian() {
    // K_1 equals E[H_12] for independent copies, same mollified kernel
    let kernel = CovarianceKernel::Dirac { d: 1 }.mollify(1e-3).unwrap();
    let noise = NoiseSpec::new(0.0, kernel).unwrap();
    let p = ProcessSpec::brownian(1);
    let k1 = chaos_kernel_norm(1, 0.5, &noise, &p, &u1(), &ChaosBudget::default(), 1, &Pool::serial())
        .unwrap();
    let reg = Regularization::none(); // kernel already mollified
    let pool = Pool::default();
    let vals: Vec<f64> = pool.map_indexed(3000, |i| {
        let mut rng = sample_stream(601, i);
        let a = sample_path(&p, &[0.0], 0.5, 128, &mut rng).unwrap();
        let b = sample_path(&p, &[0.0], 0.5, 128, &mut rng).unwrap();
        cross_hamiltonian(&a, &b, &noise, &reg).unwrap().value
    });
    let mean = tree_mean(&vals);
    let se = std_error(&vals);
    assert!(
        (k1.value - mean).abs() < 3.0 * se + 2e-3 * k1.value,
        "K1 = {} vs E[H12] = {mean} +- {se}",
        k1.value
    );
}

#[test]
fn order_one_beta_half_dual_method() {
    // deterministic quadrature against the importance-sampled route, which
    // shares no code with it
    let noise = NoiseSpec::new(0.5, CovarianceKernel::Dirac { d: 1 }).unwrap();
    let p = ProcessSpec::brownian(1);
    let det = chaos_kernel_norm(1, 1.0, &noise, &p, &u1(), &ChaosBudget::default(), 1, &Pool::serial())
        .unwrap();
    let budget = ChaosBudget {
        is_samples: 200_000,
        ..ChaosBudget::default()
    };
    let (is_val, is_se) =
        sampled::order_n_sampled(1, 1.0, &noise, &p, &budget, 602, &Pool::default()).unwrap();
    assert!(
        (det.value - is_val).abs() < 3.0 * is_se + 1e-3 * det.value,
        "det = {} vs is = {is_val} +- {is_se}",
        det.value
    );
}

#[test]
fn order_two_gaussian_fast_path_matches_generic() {
    // mollified Dirac: closed-form Ghat vs the generic numeric table
    let kernel = CovarianceKernel::Dirac { d: 1 }.mollify(0.05).unwrap();
    let noise = NoiseSpec::new(0.0, kernel).unwrap();
    let p = ProcessSpec::brownian(1);
    let budget = ChaosBudget::default();
    let fast = order_two::order_two(0.5, &noise, &p, &budget).unwrap();
    // degrade to the generic path through a tabulated copy of the spectrum
    let mu_samples: Vec<(f64, f64)> = (0..4000)
        .map(|i| {
            let xi = 40.0 * (i as f64 + 0.5) / 4000.0;
            (xi, noise.kernel.spectral_density(&[xi]).unwrap())
        })
        .collect();
    let tab = CovarianceKernel::Tabulated(crate::spectral::TabulatedKernel {
        d: 1,
        gamma_samples: vec![(0.0, 0.0)],
        mu_samples,
        singular_at_zero: false,
    });
    let noise_tab = NoiseSpec::new(0.0, tab).unwrap();
    let generic = order_two::order_two(0.5, &noise_tab, &p, &budget).unwrap();
    assert!(
        (fast - generic).abs() < 0.05 * fast,
        "fast = {fast}, generic = {generic}"
    );
}

#[test]
fn second_moment_truncation_zero_is_one() {
    let noise = NoiseSpec::new(0.0, CovarianceKernel::Dirac { d: 1 }).unwrap();
    let p = ProcessSpec::brownian(1);
    let r = chaos_second_moment(0.25, 0, &noise, &p, &u1(), &ChaosBudget::default(), 1, &Pool::serial())
        .unwrap();
    assert_eq!(r.tail.partial_sum, 1.0);
    assert!(r.tail.tail_bound.is_finite() && r.tail.tail_bound >= 0.0);
}

#[test]
fn second_moment_partial_sums_nondecreasing_and_positive() {
    let noise = NoiseSpec::new(0.3, CovarianceKernel::Dirac { d: 1 }).unwrap();
    let p = ProcessSpec::brownian(1);
    let r = chaos_second_moment(0.5, 5, &noise, &p, &u1(), &ChaosBudget::default(), 7, &Pool::default())
        .unwrap();
    let mut acc = 0.0;
    for k in &r.norms {
        assert!(k.value >= 0.0, "order {} negative: {}", k.n, k.value);
        acc += k.value;
    }
    assert_eq!(acc, r.tail.partial_sum);
    // hypercontractivity bookkeeping: partial sums of 3^{n/2} sqrt(K_n)
    // are finite and nondecreasing
    let mut hyper = 0.0;
    for k in &r.norms {
        let prev = hyper;
        hyper += 3.0f64.powf(k.n as f64 / 2.0) * k.value.sqrt();
        assert!(hyper >= prev && hyper.is_finite());
    }
}

#[test]
fn second_moment_vanishing_t_powers() {
    // n >= 1 mass vanishes like a positive power of t as t -> 0
    let noise = NoiseSpec::new(0.0, CovarianceKernel::Dirac { d: 1 }).unwrap();
    let p = ProcessSpec::brownian(1);
    let ts = [0.1, 0.05, 0.025];
    let mut masses = Vec::new();
    for &t in &ts {
        let r = chaos_second_moment(t, 3, &noise, &p, &u1(), &ChaosBudget::default(), 7, &Pool::default())
            .unwrap();
        masses.push(r.tail.partial_sum - 1.0);
    }
    assert!(masses.windows(2).all(|w| w[1] < w[0]));
    let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = masses.iter().map(|m| m.ln()).collect();
    let (_, slope, _) = crate::linalg::line_fit(&xs, &ys);
    assert!(slope > 1.0, "t-power slope = {slope}");
}

#[test]
fn maximal_principle_invariant() {
    // shifted spectral energy never exceeds the unshifted one
    let p = ProcessSpec::brownian(1);
    let kernels = [
        CovarianceKernel::riesz(0.5, 1),
        CovarianceKernel::Poisson { d: 1 },
        CovarianceKernel::ornstein_uhlenbeck(1.0, 1),
    ];
    let mut rng = sample_stream(603, 0);
    for k in &kernels {
        let noise = NoiseSpec::new(0.0, k.clone()).unwrap();
        for &t in &[0.1, 0.5, 1.0] {
            let base = shifted_spectral_energy(&noise, &p, t, 0.0).unwrap();
            for _ in 0..4 {
                let a: f64 = rng.gen::<f64>() * 6.0 - 3.0;
                let shifted = shifted_spectral_energy(&noise, &p, t, a).unwrap();
                assert!(
                    shifted <= base * (1.0 + 1e-6),
                    "{k:?} t={t} a={a}: {shifted} > {base}"
                );
            }
        }
    }
}

#[test]
fn order_above_budget_rejected() {
    let noise = NoiseSpec::new(0.0, CovarianceKernel::Dirac { d: 1 }).unwrap();
    let p = ProcessSpec::brownian(1);
    let r = chaos_kernel_norm(9, 0.5, &noise, &p, &u1(), &ChaosBudget::default(), 1, &Pool::serial());
    assert!(matches!(r, Err(EngineError::OrderTooHigh { .. })));
}

#[test]
fn tail_bound_search_contracts() {
    let noise = NoiseSpec::new(0.4, CovarianceKernel::riesz(0.5, 1)).unwrap();
    let p = ProcessSpec::brownian(1);
    let r = chaos_second_moment(0.5, 2, &noise, &p, &u1(), &ChaosBudget::default(), 7, &Pool::default())
        .unwrap();
    assert!(r.tail.tail_bound.is_finite());
    assert!(r.tail.split_radius >= 2.0);
    assert!(r.upper_estimate >= r.tail.partial_sum);
}
