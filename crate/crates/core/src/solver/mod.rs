//! Feynman-Kac estimators.
//!
//! A solution draw averages `u0(X_t) exp(V - correction)` over `K` inner
//! paths, where `V` is one joint Gaussian vector with the paths' Hamiltonian
//! Gram matrix as covariance: no correction in the Stratonovich reading,
//! `correction_i = Q_ii / 2` in the Skorohod reading.  Moments integrate the
//! noise out analytically and reduce to exponentials of pair Hamiltonians
//! over independent path copies: all ordered pairs at weight 1/2 for
//! Stratonovich, strictly off-diagonal pairs for Skorohod.

use crate::error::{EngineError, Result};
use crate::exec::{self, Pool};
use crate::hamiltonian::{HamiltonianEngine, Regularization};
use crate::process::{sample_path, PathGrid, ProcessSpec};
use crate::quad;
use crate::spectral::{dalang_verdict, DalangMode, DalangVerdict, NoiseSpec};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

pub type FieldFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type PotentialFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

/// Bounded measurable initial condition.
#[derive(Clone)]
pub enum InitialCondition {
    Constant(f64),
    /// Indicator of the axis-aligned box `[lo_i, hi_i]`.
    Indicator { lo: Vec<f64>, hi: Vec<f64> },
    /// User function with a declared sup bound, spot-checked on evaluation.
    Tabulated { f: FieldFn, bound: f64 },
}

impl InitialCondition {
    pub fn constant_one() -> Self {
        InitialCondition::Constant(1.0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            InitialCondition::Constant(c) => *c,
            InitialCondition::Indicator { lo, hi } => {
                let inside = x
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .all(|(xi, (l, h))| *l <= *xi && *xi <= *h);
                if inside {
                    1.0
                } else {
                    0.0
                }
            }
            InitialCondition::Tabulated { f, bound } => {
                let v = f(x);
                debug_assert!(v.abs() <= *bound * (1.0 + 1e-12), "u0 exceeds its bound");
                v.clamp(-*bound, *bound)
            }
        }
    }

    pub fn bound(&self) -> f64 {
        match self {
            InitialCondition::Constant(c) => c.abs(),
            InitialCondition::Indicator { .. } => 1.0,
            InitialCondition::Tabulated { bound, .. } => *bound,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolutionMode {
    Stratonovich,
    Skorohod,
}

/// Monte Carlo estimate with provenance.
#[derive(Clone, Debug)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub config_fingerprint: String,
}

/// One solution draw.
#[derive(Clone, Debug)]
pub struct SolutionSample {
    pub value: f64,
    pub mode: SolutionMode,
    pub inner_paths: usize,
    /// the joint Gaussian vector `V` over the inner paths
    pub gaussian_draw: Vec<f64>,
    /// diagonal Hamiltonians `Q_ii` of the inner paths
    pub self_hamiltonians: Vec<f64>,
}

/// Everything a Feynman-Kac run needs, resolved once: the Hamiltonian
/// quadrature context plus process, initial condition, and seed policy.
pub struct SolverEngine {
    noise: NoiseSpec,
    process: ProcessSpec,
    u0: InitialCondition,
    ham: HamiltonianEngine,
    t: f64,
    n_steps: usize,
}

fn require(noise: &NoiseSpec, process: &ProcessSpec, mode: DalangMode) -> Result<()> {
    let verdict = dalang_verdict(noise, process, mode);
    if verdict != DalangVerdict::Finite {
        return Err(EngineError::DalangViolated {
            condition: mode.name().into(),
            verdict: format!("{verdict:?}"),
        });
    }
    Ok(())
}

impl SolverEngine {
    pub fn new(
        noise: &NoiseSpec,
        process: &ProcessSpec,
        u0: &InitialCondition,
        reg: &Regularization,
        t: f64,
        n_steps: usize,
    ) -> Result<Self> {
        assert_eq!(noise.dim(), process.dim());
        Ok(SolverEngine {
            noise: noise.clone(),
            process: process.clone(),
            u0: u0.clone(),
            ham: HamiltonianEngine::new(noise, reg, t, n_steps)?,
            t,
            n_steps,
        })
    }

    pub fn hamiltonian(&self) -> &HamiltonianEngine {
        &self.ham
    }

    fn draw_paths<R: Rng>(&self, starts: &[&[f64]], rng: &mut R) -> Result<Vec<PathGrid>> {
        starts
            .iter()
            .map(|x0| sample_path(&self.process, x0, self.t, self.n_steps, rng))
            .collect()
    }

    /// One Feynman-Kac solution draw at `(t, x)` with `K` inner paths.
    ///
    /// Both modes require the Stratonovich Dalang condition: the Gaussian
    /// draw needs a finite conditional variance, and the Skorohod correction
    /// is that same quantity.
    pub fn sample_solution<R: Rng>(
        &self,
        x: &[f64],
        mode: SolutionMode,
        k_inner: usize,
        rng: &mut R,
    ) -> Result<SolutionSample> {
        assert!(k_inner >= 1);
        require(&self.noise, &self.process, DalangMode::Stratonovich)?;
        let starts: Vec<&[f64]> = (0..k_inner).map(|_| x).collect();
        let paths = self.draw_paths(&starts, rng)?;
        let q = self.ham.covariance_matrix(&paths, 0.0, &Pool::serial())?;
        let v = q.draw_gaussian(rng);
        let self_hams: Vec<f64> = (0..k_inner).map(|i| q.raw[i * k_inner + i]).collect();
        let mut acc = 0.0;
        for i in 0..k_inner {
            let correction = match mode {
                SolutionMode::Stratonovich => 0.0,
                SolutionMode::Skorohod => 0.5 * self_hams[i],
            };
            let u = self.u0.eval(paths[i].end_position());
            acc += u * (v[i] - correction).exp();
        }
        let value = acc / k_inner as f64;
        if !value.is_finite() {
            return Err(EngineError::NonFinite {
                context: "sample_solution".into(),
                detail: format!("draw {v:?}"),
            });
        }
        Ok(SolutionSample {
            value,
            mode,
            inner_paths: k_inner,
            gaussian_draw: v,
            self_hamiltonians: self_hams,
        })
    }

    /// Log-value of one moment sample over path copies started at the given
    /// points, with the mode's pair set:
    /// `(sign, log |prod u0| + sum_{pairs} w H)`.
    fn moment_sample_log<R: Rng>(
        &self,
        starts: &[&[f64]],
        mode: SolutionMode,
        rng: &mut R,
    ) -> Result<(f64, f64)> {
        let paths = self.draw_paths(starts, rng)?;
        let p = paths.len();
        // explicit pair set and weights shared by both modes
        let mut exponent = 0.0;
        for i in 0..p {
            for j in i..p {
                let weight = match (mode, i == j) {
                    (SolutionMode::Stratonovich, true) => 0.5,
                    (SolutionMode::Stratonovich, false) => 1.0,
                    (SolutionMode::Skorohod, true) => 0.0,
                    (SolutionMode::Skorohod, false) => 1.0,
                };
                if weight == 0.0 {
                    continue;
                }
                let h = if i == j {
                    self.ham.self_hamiltonian(&paths[i])?.value
                } else {
                    self.ham.cross_hamiltonian(&paths[i], &paths[j])?.value
                };
                exponent += weight * h;
            }
        }
        let mut sign = 1.0;
        let mut log_u = 0.0;
        for path in &paths {
            let u = self.u0.eval(path.end_position());
            if u == 0.0 {
                return Ok((0.0, f64::NEG_INFINITY));
            }
            sign *= u.signum();
            log_u += u.abs().ln();
        }
        let log_v = log_u + exponent;
        if log_v.is_nan() || log_v == f64::INFINITY {
            return Err(EngineError::NonFinite {
                context: "moment_fk".into(),
                detail: format!("exponent {exponent}, log u0 {log_u}"),
            });
        }
        Ok((sign, log_v))
    }
}

/// Combines signed log-samples into a mean with max-shifted exponentials;
/// the error bar comes from `n_batches` contiguous batch means.
fn mean_from_logs(samples: &[(f64, f64)], n_batches: usize) -> (f64, f64) {
    let m = samples
        .iter()
        .map(|(_, l)| *l)
        .filter(|l| l.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return (0.0, 0.0);
    }
    let shifted: Vec<f64> = samples
        .iter()
        .map(|(s, l)| if *l == f64::NEG_INFINITY { 0.0 } else { s * (l - m).exp() })
        .collect();
    let mean = exec::tree_mean(&shifted);
    let se = exec::batch_std_error(&shifted, n_batches);
    (mean * m.exp(), se * m.exp())
}

/// `E[u(t,x)^p]` by the moment Feynman-Kac formula over `p` i.i.d. path
/// copies.  Stratonovich requires the strong Dalang condition; Skorohod
/// only the weak one.
#[allow(clippy::too_many_arguments)]
pub fn moment_fk(
    engine: &SolverEngine,
    p: usize,
    x: &[f64],
    mode: SolutionMode,
    n_samples: usize,
    seed: u64,
    pool: &Pool,
) -> Result<McEstimate> {
    assert!(p >= 1);
    let starts = vec![x.to_vec(); p];
    moment_fk_multi(engine, &starts, mode, n_samples, seed, pool)
}

/// Shared implementation for equal and mixed start points.
pub fn moment_fk_multi(
    engine: &SolverEngine,
    starts: &[Vec<f64>],
    mode: SolutionMode,
    n_samples: usize,
    seed: u64,
    pool: &Pool,
) -> Result<McEstimate> {
    let condition = match mode {
        SolutionMode::Stratonovich => DalangMode::Stratonovich,
        SolutionMode::Skorohod => DalangMode::Skorohod,
    };
    require(&engine.noise, &engine.process, condition)?;
    let start_refs: Vec<&[f64]> = starts.iter().map(|s| s.as_slice()).collect();
    let samples: Vec<Result<(f64, f64)>> = pool.map_indexed(n_samples, |i| {
        let mut rng = exec::sample_stream(seed, i);
        engine.moment_sample_log(&start_refs, mode, &mut rng)
    });
    let samples: Result<Vec<(f64, f64)>> = samples.into_iter().collect();
    let samples = samples?;
    let (mean, std_error) = mean_from_logs(&samples, 100);
    Ok(McEstimate {
        mean,
        std_error,
        n_samples,
        seed,
        config_fingerprint: exec::fnv_fingerprint(&[
            ("op", "moment_fk".into()),
            ("p", starts.len().to_string()),
            ("mode", format!("{mode:?}")),
            ("t", engine.t.to_string()),
            ("n_steps", engine.n_steps.to_string()),
            ("n_samples", n_samples.to_string()),
        ]),
    })
}

/// `E[u(t,x1) u(t,x2)]`: the p = 2 moment with distinct start points.
#[allow(clippy::too_many_arguments)]
pub fn mixed_moment(
    engine: &SolverEngine,
    x1: &[f64],
    x2: &[f64],
    mode: SolutionMode,
    n_samples: usize,
    seed: u64,
    pool: &Pool,
) -> Result<McEstimate> {
    moment_fk_multi(
        engine,
        &[x1.to_vec(), x2.to_vec()],
        mode,
        n_samples,
        seed,
        pool,
    )
}

/// Exponential-moment estimate with a heavy-tail stability diagnostic.
#[derive(Clone, Debug)]
pub struct ExpMomentReport {
    pub estimate: McEstimate,
    pub first_half: f64,
    pub second_half: f64,
    /// half-sample estimates disagree beyond 5 combined standard errors
    pub unstable: bool,
}

/// `E exp(beta * H)` for the self-Hamiltonian `H` of one path.
pub fn exp_moment(
    engine: &SolverEngine,
    beta: f64,
    x: &[f64],
    n_samples: usize,
    seed: u64,
    pool: &Pool,
) -> Result<ExpMomentReport> {
    if beta > 0.0 {
        require(&engine.noise, &engine.process, DalangMode::Stratonovich)?;
    }
    let samples: Vec<Result<(f64, f64)>> = pool.map_indexed(n_samples, |i| {
        let mut rng = exec::sample_stream(seed, i);
        let path = sample_path(&engine.process, x, engine.t, engine.n_steps, &mut rng)?;
        let h = engine.ham.self_hamiltonian(&path)?.value;
        let log_v = beta * h;
        if log_v.is_nan() || log_v == f64::INFINITY {
            return Err(EngineError::NonFinite {
                context: "exp_moment".into(),
                detail: format!("beta * H = {log_v} with H = {h}"),
            });
        }
        Ok((1.0, log_v))
    });
    let samples: Result<Vec<(f64, f64)>> = samples.into_iter().collect();
    let samples = samples?;
    let (mean, std_error) = mean_from_logs(&samples, 100);
    let half = samples.len() / 2;
    let (m1, s1) = mean_from_logs(&samples[..half], 50);
    let (m2, s2) = mean_from_logs(&samples[half..], 50);
    let combined = (s1 * s1 + s2 * s2).sqrt();
    Ok(ExpMomentReport {
        estimate: McEstimate {
            mean,
            std_error,
            n_samples,
            seed,
            config_fingerprint: exec::fnv_fingerprint(&[
                ("op", "exp_moment".into()),
                ("beta", beta.to_string()),
                ("t", engine.t.to_string()),
                ("n_samples", n_samples.to_string()),
            ]),
        },
        first_half: m1,
        second_half: m2,
        unstable: (m1 - m2).abs() > 5.0 * combined.max(f64::MIN_POSITIVE),
    })
}

/// `int p_t^{(x)}(y) u0(y) dy`, the semigroup term; equals `E[u(t,x)]` in
/// the Skorohod reading since all higher chaos terms are mean zero.
pub fn skorohod_mean(
    process: &ProcessSpec,
    u0: &InitialCondition,
    t: f64,
    x: &[f64],
) -> Result<f64> {
    let d = x.len();
    match u0 {
        // the density integrates to one
        InitialCondition::Constant(c) => {
            process.transition_density(t, x, x)?;
            Ok(*c)
        }
        InitialCondition::Indicator { lo, hi } => {
            if d == 1 {
                let f = |y: f64| process.transition_density(t, x, &[y]).unwrap_or(0.0);
                integrate_against_density(&f, process, t, x[0], lo[0], hi[0])
            } else {
                // Brownian factorizes across axes
                match process.variant {
                    crate::process::ProcessVariant::Brownian => {
                        let mut v = 1.0;
                        for k in 0..d {
                            let p1 = ProcessSpec::brownian(1);
                            let f = |y: f64| p1.transition_density(t, &[x[k]], &[y]).unwrap_or(0.0);
                            v *= quad::integrate(&f, lo[k], hi[k], 1e-12, 1e-10, 8000)?;
                        }
                        Ok(v)
                    }
                    _ => Err(EngineError::DensityUnavailable),
                }
            }
        }
        InitialCondition::Tabulated { f, .. } => {
            if d != 1 {
                return Err(EngineError::DensityUnavailable);
            }
            let g = |y: f64| process.transition_density(t, x, &[y]).unwrap_or(0.0) * f(&[y]);
            integrate_against_density(&g, process, t, x[0], x[0] - 1e12, x[0] + 1e12)
        }
    }
}

/// Integrates `f` (a density times a bounded factor) over `[lo, hi]`.
/// The bulk near the start point gets one adaptive pass; far pieces are
/// walked in geometric panels so a wide interval cannot hide its mass from
/// the first coarse rule.
fn integrate_against_density<F: Fn(f64) -> f64>(
    f: &F,
    process: &ProcessSpec,
    t: f64,
    x: f64,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    let r = sweep_radius(process, t).max(1.0);
    let near_lo = lo.max(x - r);
    let near_hi = hi.min(x + r);
    let mut acc = if near_lo < near_hi {
        quad::integrate(f, near_lo, near_hi, 1e-12, 1e-10, 8000)?
    } else {
        0.0
    };
    let mut walk = |mut a: f64, b: f64, dir: f64| -> Result<f64> {
        let mut total = 0.0;
        let mut w = r.max(1e-6);
        while (b - a) * dir > 0.0 {
            let next = if dir > 0.0 { (a + w).min(b) } else { (a - w).max(b) };
            let (p, q) = if dir > 0.0 { (a, next) } else { (next, a) };
            let piece = quad::integrate(f, p, q, 1e-13, 1e-9, 4000)?;
            total += piece;
            if piece.abs() < 1e-13 * (1.0 + total.abs()) {
                break;
            }
            a = next;
            w *= 2.0;
        }
        Ok(total)
    };
    if near_hi < hi {
        acc += walk(near_hi.max(near_lo), hi, 1.0)?;
    }
    if near_lo > lo {
        acc += walk(near_lo.min(near_hi), lo, -1.0)?;
    }
    Ok(acc)
}

fn sweep_radius(process: &ProcessSpec, t: f64) -> f64 {
    match process.variant {
        crate::process::ProcessVariant::Brownian => 14.0 * t.sqrt(),
        crate::process::ProcessVariant::IsotropicStable { alpha } => {
            if (alpha - 2.0).abs() < 1e-12 {
                20.0 * t.sqrt()
            } else {
                // heavy polynomial tails are picked up by the geometric
                // far-panel walk beyond this bulk radius
                30.0 * t.powf(1.0 / alpha)
            }
        }
        crate::process::ProcessVariant::DiffusionSde { .. } => 20.0 * t.sqrt(),
    }
}

/// Feynman-Kac for the deterministic potential equation
/// `du/dt = L u + f(t, x) u`:
/// `u(t,x) = E[ u0(X_t) exp( int_0^t f(t-s, X_s) ds ) ]`,
/// the time integral by the trapezoid rule on the path grid, the potential
/// clipped at its declared bound.
#[allow(clippy::too_many_arguments)]
pub fn fk_deterministic(
    process: &ProcessSpec,
    u0: &InitialCondition,
    potential: &PotentialFn,
    potential_bound: f64,
    t: f64,
    x: &[f64],
    n_steps: usize,
    n_samples: usize,
    seed: u64,
    pool: &Pool,
) -> Result<(McEstimate, bool)> {
    let clipped = std::sync::atomic::AtomicBool::new(false);
    let vals: Vec<Result<f64>> = pool.map_indexed(n_samples, |i| {
        let mut rng = exec::sample_stream(seed, i);
        let path = sample_path(process, x, t, n_steps, &mut rng)?;
        let dt = path.dt();
        let mut integral = 0.0;
        for k in 0..=n_steps {
            let s = path.times[k];
            let mut v = potential(t - s, path.position(k));
            if v.abs() > potential_bound {
                clipped.store(true, std::sync::atomic::Ordering::Relaxed);
                v = v.clamp(-potential_bound, potential_bound);
            }
            let w = if k == 0 || k == n_steps { 0.5 } else { 1.0 };
            integral += w * v * dt;
        }
        let value = u0.eval(path.end_position()) * integral.exp();
        if !value.is_finite() {
            return Err(EngineError::NonFinite {
                context: "fk_deterministic".into(),
                detail: format!("integral {integral}"),
            });
        }
        Ok(value)
    });
    let vals: Result<Vec<f64>> = vals.into_iter().collect();
    let vals = vals?;
    let mean = exec::tree_mean(&vals);
    let std_error = exec::std_error(&vals);
    Ok((
        McEstimate {
            mean,
            std_error,
            n_samples,
            seed,
            config_fingerprint: exec::fnv_fingerprint(&[
                ("op", "fk_deterministic".into()),
                ("t", t.to_string()),
                ("n_steps", n_steps.to_string()),
                ("n_samples", n_samples.to_string()),
            ]),
        },
        clipped.into_inner(),
    ))
}

/// Repeated solution draws as an estimate stream (used by presets and the
/// positivity checks).
#[allow(clippy::too_many_arguments)]
pub fn solution_draws(
    engine: &SolverEngine,
    x: &[f64],
    mode: SolutionMode,
    k_inner: usize,
    n_draws: usize,
    seed: u64,
    pool: &Pool,
) -> Result<Vec<SolutionSample>> {
    let draws: Vec<Result<SolutionSample>> = pool.map_indexed(n_draws, |i| {
        let mut rng = exec::sample_stream(seed, i);
        engine.sample_solution(x, mode, k_inner, &mut rng)
    });
    draws.into_iter().collect()
}

/// Deterministic per-draw RNG for paired-mode comparisons.
pub fn paired_rng(seed: u64, index: u64) -> ChaCha8Rng {
    exec::sample_stream(seed, index)
}

#[cfg(test)]
mod tests;
