//! Wiener chaos kernel norms and the truncated second-moment series, the
//! engine's deterministic cross-check for `E[u^2]`.
//!
//! For constant initial data and a Levy process with `p_hat_t = e^{-t Psi}`,
//! the order-n coefficient is evaluated in its Fourier representation over
//! two ordered time simplices and n frequencies,
//!
//! ```text
//! K_n = n! int int prod_j |t_j - s_j|^{-beta0}
//!        (2 pi)^{-nd} int prod_j p_hat_{t_{j+1}-t_j}(X_j) p_hat_{s_{j+1}-s_j}(X_j) mu_hat(xi_j) dxi
//! ```
//!
//! with partial sums `X_j = xi_1 + ... + xi_j` and `t_{n+1} = s_{n+1} = t`.
//! Orders 0-2 are deterministic quadrature; higher orders are importance
//! sampled: times uniform on the simplex with the singular weight removed by
//! the exact inverse-CDF transform of `|t_j - s|^{-beta0}`, frequencies from
//! normalized proposals proportional to `mu_hat e^{-c Psi}` (Gamma in
//! `|xi|^{psi power}`), so every draw is exactly reweighted.
//!
//! Tail bound: Cauchy-Schwarz in the `mu_hat` pairing decouples the partial
//! sums into squares, the maximal principle removes the shifts, and a
//! per-coordinate split at radius `N` yields
//!
//! ```text
//! K_n <= A_t^n sum_k C(n,k) (t^k / k!) mtilde_N^k (C0 etilde_N)^{n-k},
//! ```
//!
//! where `mtilde_N, etilde_N` are the `(2 pi)^{-d}`-scaled split masses of
//! [`crate::spectral::tail_split`] and `C0 = Psi(N)^{-beta0} / 2` converts the
//! `Psi^{-1}` damping integral into the `Psi^{-(1-beta0)}` tail mass.  The
//! constant is admissible but deliberately loose.

use crate::error::{EngineError, Result};
use crate::exec::Pool;
use crate::process::{ProcessSpec, ProcessVariant};
use crate::quad;
use crate::spectral::{dalang_verdict, tail_split, DalangMode, DalangVerdict, NoiseSpec};
use rand::Rng;
use statrs::function::gamma::{gamma as gamma_fn, ln_gamma};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormMethod {
    Deterministic,
    ImportanceSampled,
}

/// `n! || f~_n ||^2` for one chaos order.
#[derive(Clone, Debug)]
pub struct ChaosKernelNorm {
    pub n: usize,
    pub value: f64,
    /// zero for deterministic quadrature
    pub std_error: f64,
    pub method: NormMethod,
}

/// Truncation bookkeeping for the second-moment series.
#[derive(Clone, Debug)]
pub struct SeriesTail {
    pub n_trunc: usize,
    pub partial_sum: f64,
    pub tail_bound: f64,
    /// spectral split radius at which the bound contracts
    pub split_radius: f64,
}

#[derive(Clone, Debug)]
pub struct ChaosSecondMoment {
    pub norms: Vec<ChaosKernelNorm>,
    pub tail: SeriesTail,
    /// partial sum plus tail bound
    pub upper_estimate: f64,
}

/// Evaluation budget.
#[derive(Clone, Copy, Debug)]
pub struct ChaosBudget {
    pub max_order: usize,
    /// time grid per axis for the deterministic orders
    pub time_grid: usize,
    /// importance samples for orders >= 3
    pub is_samples: usize,
}

impl Default for ChaosBudget {
    fn default() -> Self {
        ChaosBudget {
            max_order: 8,
            time_grid: 160,
            is_samples: 60_000,
        }
    }
}

fn require_levy(process: &ProcessSpec) -> Result<()> {
    match process.variant {
        ProcessVariant::Brownian | ProcessVariant::IsotropicStable { .. } => Ok(()),
        ProcessVariant::DiffusionSde { .. } => Err(EngineError::DensityUnavailable),
    }
}

fn u0_constant(u0: &crate::solver::InitialCondition) -> f64 {
    match u0 {
        crate::solver::InitialCondition::Constant(c) => *c,
        _ => panic!("chaos norms require a constant initial condition"),
    }
}

/// `n! ||f~_n||^2`; deterministic for `n <= 2`, importance sampled above.
#[allow(clippy::too_many_arguments)]
pub fn chaos_kernel_norm(
    n: usize,
    t: f64,
    noise: &NoiseSpec,
    process: &ProcessSpec,
    u0: &crate::solver::InitialCondition,
    budget: &ChaosBudget,
    seed: u64,
    pool: &Pool,
) -> Result<ChaosKernelNorm> {
    require_levy(process)?;
    if n > budget.max_order {
        return Err(EngineError::OrderTooHigh {
            order: n,
            max: budget.max_order,
        });
    }
    let c0 = u0_constant(u0);
    let scale = c0 * c0;
    match n {
        0 => Ok(ChaosKernelNorm {
            n: 0,
            value: scale,
            std_error: 0.0,
            method: NormMethod::Deterministic,
        }),
        1 => Ok(ChaosKernelNorm {
            n: 1,
            value: scale * order_one(t, noise, process)?,
            std_error: 0.0,
            method: NormMethod::Deterministic,
        }),
        2 => Ok(ChaosKernelNorm {
            n: 2,
            value: scale * order_two(t, noise, process, budget)?,
            std_error: 0.0,
            method: NormMethod::Deterministic,
        }),
        _ => {
            let (value, se) = order_n_sampled(n, t, noise, process, budget, seed, pool)?;
            Ok(ChaosKernelNorm {
                n,
                value: scale * value,
                std_error: scale * se,
                method: NormMethod::ImportanceSampled,
            })
        }
    }
}

/// Damped spectral mass `g(a) = (2 pi)^{-d} int e^{-a Psi(xi)} mu_hat dxi`.
fn damped_mass(noise: &NoiseSpec, process: &ProcessSpec, a: f64) -> Result<f64> {
    let d = noise.dim() as f64;
    let kernel = &noise.kernel;
    let f = |rho: f64| {
        let w = kernel.radial_spectral_weight(rho).unwrap_or(0.0);
        w * (-a * process.psi_radial(rho)).exp()
    };
    // truncate where the damping envelope is negligible
    let rho_max = psi_inverse(process, 42.0 / a.max(1e-300)).max(2.0);
    let p = kernel.radial_weight_power_at_zero();
    let v = if p != 0.0 {
        quad::integrate_power_weighted(
            &|rho: f64| if rho == 0.0 { 0.0 } else { f(rho) / rho.powf(p) },
            p,
            rho_max,
            1e-12,
            1e-9,
        )?
    } else {
        quad::integrate(&f, 0.0, rho_max, 1e-12, 1e-9, 20_000)?
    };
    Ok(v * TWO_PI.powf(-d))
}

/// Radius where `Psi` reaches `level` (catalog `Psi` are monotone).
fn psi_inverse(process: &ProcessSpec, level: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = 1.0;
    while process.psi_radial(hi) < level && hi < 1e12 {
        hi *= 2.0;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if process.psi_radial(mid) < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Order 1 reduces to one radial integral: with `p = (t-t_1) + (t-s_1)`,
/// `K_1 = int_0^{2t} g(p) min(p, 2t-p)^{1-beta0} / (1-beta0) dp`.
fn order_one(t: f64, noise: &NoiseSpec, process: &ProcessSpec) -> Result<f64> {
    let beta0 = noise.beta0();
    let f = |p: f64| -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        let g = damped_mass(noise, process, p).unwrap_or(f64::NAN);
        g * p.min(2.0 * t - p).powf(1.0 - beta0) / (1.0 - beta0)
    };
    // g(p) ~ p^{-kappa} at the origin
    let kappa = corner_exponent(noise, process);
    let p_weight = (1.0 - beta0 - kappa).min(0.0).max(-0.999);
    let v = if p_weight < 0.0 {
        quad::integrate_power_weighted(
            &|p: f64| if p == 0.0 { 0.0 } else { f(p) / p.powf(p_weight) },
            p_weight,
            2.0 * t,
            1e-10,
            1e-7,
        )?
    } else {
        quad::integrate(&f, 0.0, 2.0 * t, 1e-10, 1e-7, 4000)?
    };
    if !v.is_finite() {
        return Err(EngineError::QuadratureFailure("order-1 chaos norm".into()));
    }
    Ok(v)
}

/// Exponent of the `a -> 0` blowup of the damped mass: for a power
/// spectral tail `mu_hat ~ rho^e` and `Psi ~ rho^p`,
/// `g(a) ~ a^{-(d + e)/p}`; exponential-tail kernels stay bounded.
fn corner_exponent(noise: &NoiseSpec, process: &ProcessSpec) -> f64 {
    use crate::spectral::SpectralTail;
    match (noise.kernel.spectral_tail(), process.psi_growth_exponent()) {
        (Some(SpectralTail::Power { exponent }), Some(p)) if p > 0.0 => {
            ((noise.dim() as f64 + exponent) / p).max(0.0)
        }
        _ => 0.0,
    }
}

mod order_two;
mod sampled;

use order_two::order_two;
use sampled::order_n_sampled;

/// Truncated series plus its spectral tail bound.
#[allow(clippy::too_many_arguments)]
pub fn chaos_second_moment(
    t: f64,
    n_trunc: usize,
    noise: &NoiseSpec,
    process: &ProcessSpec,
    u0: &crate::solver::InitialCondition,
    budget: &ChaosBudget,
    seed: u64,
    pool: &Pool,
) -> Result<ChaosSecondMoment> {
    if dalang_verdict(noise, process, DalangMode::Skorohod) != DalangVerdict::Finite {
        return Err(EngineError::DalangViolated {
            condition: DalangMode::Skorohod.name().into(),
            verdict: "not Finite".into(),
        });
    }
    let mut norms = Vec::new();
    for n in 0..=n_trunc {
        norms.push(chaos_kernel_norm(
            n, t, noise, process, u0, budget, seed ^ (n as u64) << 32, pool,
        )?);
    }
    let partial_sum: f64 = norms.iter().map(|k| k.value).sum();
    let tail = series_tail_bound(t, n_trunc, noise, process)?;
    let u0c = u0_constant(u0);
    let tail = SeriesTail {
        partial_sum,
        tail_bound: tail.tail_bound * u0c * u0c,
        ..tail
    };
    Ok(ChaosSecondMoment {
        upper_estimate: partial_sum + tail.tail_bound,
        norms,
        tail,
    })
}

/// Searches a split radius with `2 A_t C0 etilde_N < 1` and sums the bound
/// over orders `n > n_trunc`.
fn series_tail_bound(
    t: f64,
    n_trunc: usize,
    noise: &NoiseSpec,
    process: &ProcessSpec,
) -> Result<SeriesTail> {
    let beta0 = noise.beta0();
    let a_t = noise.a_t(t);
    let d = noise.dim() as f64;
    let mut split = None;
    let mut radius = 2.0;
    for _ in 0..40 {
        let s = tail_split(noise, process, radius)?;
        let m_tilde = s.m_n * TWO_PI.powf(-d);
        let e_tilde = s.eps_n * TWO_PI.powf(-d);
        let c0 = 0.5 * process.psi_radial(radius).powf(-beta0).max(f64::MIN_POSITIVE);
        if 2.0 * a_t * c0 * e_tilde < 0.5 {
            split = Some((radius, m_tilde, c0 * e_tilde));
            break;
        }
        radius *= 2.0;
    }
    let (radius, m_tilde, ce) = split.ok_or(EngineError::TailBoundUnavailable)?;
    // sum_{n > n_trunc} A_t^n sum_k C(n,k) (t^k/k!) m^k ce^{n-k}
    let mut tail = 0.0;
    for n in (n_trunc + 1)..(n_trunc + 400) {
        let mut term = 0.0;
        for k in 0..=n {
            let log_c = ln_gamma((n + 1) as f64) - ln_gamma((k + 1) as f64)
                - ln_gamma((n - k + 1) as f64);
            let log_term = (n as f64) * a_t.ln()
                + log_c
                + (k as f64) * (t.max(f64::MIN_POSITIVE)).ln()
                - ln_gamma((k + 1) as f64)
                + (k as f64) * m_tilde.max(f64::MIN_POSITIVE).ln()
                + ((n - k) as f64) * ce.max(f64::MIN_POSITIVE).ln();
            term += log_term.exp();
        }
        tail += term;
        if term < 1e-16 * tail.max(1e-300) {
            break;
        }
    }
    Ok(SeriesTail {
        n_trunc,
        partial_sum: 0.0,
        tail_bound: tail,
        split_radius: radius,
    })
}

/// `int_{0<t_1<...<t_n<t} prod (t_{i+1}-t_i)^{-alpha_i} dt
///   = prod Gamma(1-alpha_i) / Gamma(n - sum alpha + 1) * t^{n - sum alpha}`
/// (the ordered Dirichlet integral; `t_{n+1} = t`).
pub fn simplex_dirichlet(alphas: &[f64], t: f64) -> f64 {
    assert!(alphas.iter().all(|a| *a < 1.0));
    let n = alphas.len() as f64;
    let sum: f64 = alphas.iter().sum();
    let num: f64 = alphas.iter().map(|a| gamma_fn(1.0 - a)).product();
    num / gamma_fn(n - sum + 1.0) * t.powf(n - sum)
}

/// Shifted spectral energy `int |p_hat_t(xi + a)|^2 mu_hat(xi) dxi` (d = 1):
/// the maximal principle asserts it is largest at `a = 0`.
pub fn shifted_spectral_energy(
    noise: &NoiseSpec,
    process: &ProcessSpec,
    t: f64,
    shift: f64,
) -> Result<f64> {
    assert_eq!(noise.dim(), 1);
    let f = |xi: f64| {
        let m = noise.kernel.spectral_density(&[xi]).unwrap_or(0.0);
        m * (-2.0 * t * process.psi_radial((xi + shift).abs())).exp()
    };
    let p = noise.kernel.spectral_power_at_zero();
    let cut = psi_inverse(process, 60.0 / (2.0 * t)).max(shift.abs() + 10.0);
    let near = if p < 0.0 {
        let half = |sgn: f64| {
            quad::integrate_power_weighted(
                &|r: f64| if r == 0.0 { 0.0 } else { f(sgn * r) / r.powf(p) },
                p,
                1.0,
                1e-12,
                1e-9,
            )
        };
        half(1.0)? + half(-1.0)?
    } else {
        quad::integrate(&f, -1.0, 1.0, 1e-12, 1e-9, 8000)?
    };
    let far = quad::integrate(&f, 1.0, cut, 1e-12, 1e-9, 20_000)?
        + quad::integrate(&f, -cut, -1.0, 1e-12, 1e-9, 20_000)?;
    Ok(near + far)
}

/// Uniform split of `|t_j - s|^{-beta0}` into an exactly invertible CDF:
/// draws `s` on `[0, upper]` with density proportional to the weight and
/// returns `(s, normalizer Z_j)`.
pub(crate) fn draw_singular_neighbor<R: Rng>(
    tj: f64,
    upper: f64,
    beta0: f64,
    rng: &mut R,
) -> (f64, f64) {
    let p = 1.0 - beta0;
    let mass_left = tj.powf(p) / p;
    let mass_right = (upper - tj).powf(p) / p;
    let z = mass_left + mass_right;
    let u: f64 = rng.gen::<f64>() * z;
    let s = if u <= mass_left {
        // CDF from t_j leftwards: w = ((1-beta0) m)^{1/(1-beta0)}
        tj - (p * (mass_left - u)).powf(1.0 / p)
    } else {
        tj + (p * (u - mass_left)).powf(1.0 / p)
    };
    (s.clamp(0.0, upper), z)
}

#[cfg(test)]
mod tests;
