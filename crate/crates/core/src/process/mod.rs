//! Feller process trajectories on uniform time grids, transition densities,
//! and the spectral domination data of the driving semigroup.
//!
//! Generator conventions: Brownian motion uses `L = (1/2) Laplacian`, so
//! `Psi(xi) = |xi|^2 / 2` and `Var X_t = t` per coordinate.  The isotropic
//! stable process uses `Psi(xi) = |xi|^alpha`; at `alpha = 2` this is a
//! Gaussian with `Var X_t = 2t`, distinct from the Brownian convention.
//! Each spec stores its `Psi` explicitly, so either convention can be
//! selected where the distinction matters.

mod stable;

pub use stable::{sample_one_sided_stable, sample_symmetric_stable};

use crate::error::{EngineError, Result};
use crate::linalg::min_eigenvalue_symmetric;
use rand::Rng;
use rand_distr::StandardNormal;
use std::fmt;
use std::sync::Arc;

/// Radial characteristic exponent `Psi(|xi|)`.
#[derive(Clone)]
pub enum PsiFn {
    /// `coef * rho^2`
    Quadratic(f64),
    /// `coef * rho^exponent`
    Power { coef: f64, exponent: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl PsiFn {
    pub fn eval(&self, rho: f64) -> f64 {
        match self {
            PsiFn::Quadratic(c) => c * rho * rho,
            PsiFn::Power { coef, exponent } => coef * rho.powf(*exponent),
            PsiFn::Custom(f) => f(rho),
        }
    }

    fn growth_exponent(&self) -> Option<f64> {
        match self {
            PsiFn::Quadratic(_) => Some(2.0),
            PsiFn::Power { exponent, .. } => Some(*exponent),
            PsiFn::Custom(_) => None,
        }
    }
}

/// Constants of the heat-domination assumption
/// `p_t^{(x)}(y) <= c0 P_t(y-x)` with `P_t_hat(xi) <= c1 e^{-c2 t Psi(xi)}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HConstants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for HConstants {
    fn default() -> Self {
        // exact for symmetric Levy processes, where P_t_hat = e^{-t Psi}
        HConstants { c0: 1.0, c1: 1.0, c2: 1.0 }
    }
}

pub type DriftFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
pub type DispersionFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
pub type DensityHook = Arc<dyn Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum ProcessVariant {
    Brownian,
    IsotropicStable { alpha: f64 },
    DiffusionSde {
        drift: DriftFn,
        /// writes the d x d dispersion matrix row-major
        dispersion: DispersionFn,
        /// uniform ellipticity constant: `sigma sigma^T >= c I`, spot-checked
        ellipticity: f64,
        density_hook: Option<DensityHook>,
    },
}

#[derive(Clone)]
pub struct ProcessSpec {
    d: usize,
    pub variant: ProcessVariant,
    pub h_constants: HConstants,
    psi: PsiFn,
}

impl fmt::Debug for ProcessSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.variant {
            ProcessVariant::Brownian => write!(f, "Brownian(d={})", self.d),
            ProcessVariant::IsotropicStable { alpha } => {
                write!(f, "IsotropicStable(alpha={}, d={})", alpha, self.d)
            }
            ProcessVariant::DiffusionSde { ellipticity, .. } => {
                write!(f, "DiffusionSde(d={}, ellipticity={})", self.d, ellipticity)
            }
        }
    }
}

impl ProcessSpec {
    /// Brownian motion with generator `(1/2) Laplacian`: `Psi = |xi|^2/2`.
    pub fn brownian(d: usize) -> Self {
        ProcessSpec {
            d,
            variant: ProcessVariant::Brownian,
            h_constants: HConstants::default(),
            psi: PsiFn::Quadratic(0.5),
        }
    }

    /// Isotropic stable process, `Psi = |xi|^alpha`, `alpha in (0, 2]`.
    pub fn isotropic_stable(alpha: f64, d: usize) -> Self {
        assert!(alpha > 0.0 && alpha <= 2.0);
        ProcessSpec {
            d,
            variant: ProcessVariant::IsotropicStable { alpha },
            h_constants: HConstants::default(),
            psi: PsiFn::Power { coef: 1.0, exponent: alpha },
        }
    }

    /// Uniformly elliptic diffusion advanced by Euler-Maruyama.  The
    /// domination constants and `Psi` are asserted by the caller and only
    /// spot-checked empirically.
    pub fn diffusion(
        d: usize,
        drift: DriftFn,
        dispersion: DispersionFn,
        ellipticity: f64,
        h_constants: HConstants,
        psi: PsiFn,
        density_hook: Option<DensityHook>,
    ) -> Self {
        assert!(ellipticity > 0.0);
        ProcessSpec {
            d,
            variant: ProcessVariant::DiffusionSde {
                drift,
                dispersion,
                ellipticity,
                density_hook,
            },
            h_constants,
            psi,
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn psi_radial(&self, rho: f64) -> f64 {
        self.psi.eval(rho)
    }

    pub fn psi(&self, xi: &[f64]) -> f64 {
        self.psi.eval(norm(xi))
    }

    /// Growth exponent `p` with `Psi ~ c rho^p` at infinity, when known.
    pub fn psi_growth_exponent(&self) -> Option<f64> {
        self.psi.growth_exponent()
    }

    /// Whether `p_t^{(x)}(y) = p_t(y - x)`.
    pub fn translation_invariant(&self) -> bool {
        !matches!(self.variant, ProcessVariant::DiffusionSde { .. })
    }

    /// Fourier transform of the transition density, `e^{-t Psi}` for the
    /// Levy catalog.
    pub fn density_hat(&self, t: f64, rho: f64) -> Result<f64> {
        match self.variant {
            ProcessVariant::Brownian | ProcessVariant::IsotropicStable { .. } => {
                Ok((-t * self.psi_radial(rho)).exp())
            }
            ProcessVariant::DiffusionSde { .. } => Err(EngineError::DensityUnavailable),
        }
    }

    /// `p_t^{(x)}(y)`; closed forms for Brownian and stable with
    /// `alpha in {1, 2}`, user hook for diffusions.
    pub fn transition_density(&self, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
        assert!(t > 0.0);
        assert_eq!(x.len(), self.d);
        assert_eq!(y.len(), self.d);
        let d = self.d as f64;
        let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        match &self.variant {
            ProcessVariant::Brownian => {
                let c = (2.0 * std::f64::consts::PI * t).powf(-d / 2.0);
                Ok(c * (-r2 / (2.0 * t)).exp())
            }
            ProcessVariant::IsotropicStable { alpha } => {
                if (alpha - 2.0).abs() < 1e-12 {
                    // CF e^{-t |xi|^2}: Gaussian with variance 2t per axis
                    let c = (4.0 * std::f64::consts::PI * t).powf(-d / 2.0);
                    Ok(c * (-r2 / (4.0 * t)).exp())
                } else if (alpha - 1.0).abs() < 1e-12 {
                    // d-dimensional Cauchy kernel
                    let c = statrs::function::gamma::gamma((d + 1.0) / 2.0)
                        / std::f64::consts::PI.powf((d + 1.0) / 2.0);
                    Ok(c * t / (t * t + r2).powf((d + 1.0) / 2.0))
                } else {
                    Err(EngineError::DensityUnavailable)
                }
            }
            ProcessVariant::DiffusionSde { density_hook, .. } => match density_hook {
                Some(hook) => Ok(hook(t, x, y)),
                None => Err(EngineError::DensityUnavailable),
            },
        }
    }
}

/// One sampled trajectory on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PathGrid {
    d: usize,
    pub t_end: f64,
    pub n_steps: usize,
    pub times: Vec<f64>,
    /// row-major `(n_steps + 1) x d`
    positions: Vec<f64>,
}

impl PathGrid {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.n_steps as f64
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.d..(i + 1) * self.d]
    }

    pub fn positions_flat(&self) -> &[f64] {
        &self.positions
    }

    pub fn x0(&self) -> &[f64] {
        self.position(0)
    }

    pub fn end_position(&self) -> &[f64] {
        self.position(self.n_steps)
    }

    pub fn same_grid(&self, other: &PathGrid) -> bool {
        self.d == other.d && self.n_steps == other.n_steps && self.t_end == other.t_end
    }

    /// Keeps every `stride`-th point; `n_steps` must be divisible.
    pub fn subsample(&self, stride: usize) -> PathGrid {
        assert!(stride >= 1 && self.n_steps % stride == 0);
        let n = self.n_steps / stride;
        let mut times = Vec::with_capacity(n + 1);
        let mut positions = Vec::with_capacity((n + 1) * self.d);
        for i in 0..=n {
            times.push(self.times[i * stride]);
            positions.extend_from_slice(self.position(i * stride));
        }
        PathGrid {
            d: self.d,
            t_end: self.t_end,
            n_steps: n,
            times,
            positions,
        }
    }

    /// Restriction to the first `m` steps.
    pub fn prefix(&self, m: usize) -> PathGrid {
        assert!(m >= 1 && m <= self.n_steps);
        PathGrid {
            d: self.d,
            t_end: self.times[m],
            n_steps: m,
            times: self.times[..=m].to_vec(),
            positions: self.positions[..(m + 1) * self.d].to_vec(),
        }
    }

    pub fn from_parts(d: usize, t_end: f64, positions: Vec<f64>) -> PathGrid {
        assert!(positions.len() % d == 0 && positions.len() >= 2 * d);
        let n = positions.len() / d - 1;
        let times = (0..=n).map(|i| t_end * i as f64 / n as f64).collect();
        PathGrid {
            d,
            t_end,
            n_steps: n,
            times,
            positions,
        }
    }
}

/// Samples one trajectory.  Identical `(spec, x0, grid, rng state)` gives a
/// bitwise-identical path.
pub fn sample_path<R: Rng>(
    spec: &ProcessSpec,
    x0: &[f64],
    t_end: f64,
    n_steps: usize,
    rng: &mut R,
) -> Result<PathGrid> {
    assert!(t_end > 0.0, "t_end must be positive");
    assert!(n_steps >= 1, "need at least one step");
    assert_eq!(x0.len(), spec.d);
    let d = spec.d;
    let dt = t_end / n_steps as f64;
    let mut positions = Vec::with_capacity((n_steps + 1) * d);
    positions.extend_from_slice(x0);

    match &spec.variant {
        ProcessVariant::Brownian => {
            let s = dt.sqrt();
            for i in 0..n_steps {
                for k in 0..d {
                    let z: f64 = rng.sample(StandardNormal);
                    let prev = positions[i * d + k];
                    positions.push(prev + s * z);
                }
            }
        }
        ProcessVariant::IsotropicStable { alpha } => {
            if (alpha - 2.0).abs() < 1e-12 {
                // Gaussian path with variance 2 dt per axis
                let s = (2.0 * dt).sqrt();
                for i in 0..n_steps {
                    for k in 0..d {
                        let z: f64 = rng.sample(StandardNormal);
                        positions.push(positions[i * d + k] + s * z);
                    }
                }
            } else if d == 1 {
                let s = dt.powf(1.0 / alpha);
                for i in 0..n_steps {
                    let z = sample_symmetric_stable(*alpha, rng);
                    positions.push(positions[i] + s * z);
                }
            } else {
                // subordinated Gaussian: X_inc = sqrt(2 S) Z with S an
                // (alpha/2)-stable subordinator increment
                for i in 0..n_steps {
                    let s1 = sample_one_sided_stable(alpha / 2.0, rng);
                    let s = dt.powf(2.0 / alpha) * s1;
                    let scale = (2.0 * s).sqrt();
                    for k in 0..d {
                        let z: f64 = rng.sample(StandardNormal);
                        positions.push(positions[i * d + k] + scale * z);
                    }
                }
            }
        }
        ProcessVariant::DiffusionSde {
            drift,
            dispersion,
            ellipticity,
            ..
        } => {
            let s = dt.sqrt();
            let mut b = vec![0.0; d];
            let mut sigma = vec![0.0; d * d];
            let mut ssr = vec![0.0; d * d];
            let mut z = vec![0.0; d];
            for i in 0..n_steps {
                let x = positions[i * d..(i + 1) * d].to_vec();
                drift(&x, &mut b);
                dispersion(&x, &mut sigma);
                // spot-check sigma sigma^T >= c I
                for r in 0..d {
                    for c in 0..d {
                        let mut v = 0.0;
                        for k in 0..d {
                            v += sigma[r * d + k] * sigma[c * d + k];
                        }
                        ssr[r * d + c] = v;
                    }
                }
                let min_eig = min_eigenvalue_symmetric(&ssr, d);
                if min_eig < *ellipticity * (1.0 - 1e-9) {
                    return Err(EngineError::EllipticityViolation {
                        found: min_eig,
                        required: *ellipticity,
                    });
                }
                for zk in z.iter_mut() {
                    *zk = rng.sample(StandardNormal);
                }
                for r in 0..d {
                    let mut noise = 0.0;
                    for k in 0..d {
                        noise += sigma[r * d + k] * z[k];
                    }
                    positions.push(x[r] + b[r] * dt + s * noise);
                }
            }
        }
    }

    let times = (0..=n_steps).map(|i| dt * i as f64).collect();
    Ok(PathGrid {
        d,
        t_end,
        n_steps,
        times,
        positions,
    })
}

/// A point where the empirical or closed-form `P_t_hat` exceeds the claimed
/// bound `c1 e^{-c2 t Psi}` beyond tolerance.
#[derive(Clone, Debug)]
pub struct DominationViolation {
    pub t: f64,
    pub xi: f64,
    pub p_hat: f64,
    pub bound: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, Default)]
pub struct DominationReport {
    pub violations: Vec<DominationViolation>,
    pub max_relative_violation: f64,
}

/// Checks `P_t_hat(xi) <= c1 e^{-c2 t Psi(xi)}` on the grid.  Levy variants
/// use the closed form `P_t_hat = e^{-t Psi}`; diffusions estimate the
/// characteristic function from `n_samples` sampled increments, with a
/// 3-standard-error statistical tolerance.
pub fn heat_domination_check(
    spec: &ProcessSpec,
    c1: f64,
    c2: f64,
    t_list: &[f64],
    xi_list: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<DominationReport> {
    let mut report = DominationReport::default();
    for &t in t_list {
        // empirical endpoints for the diffusion case, one batch per t
        let empirical: Option<Vec<f64>> = match spec.variant {
            ProcessVariant::DiffusionSde { .. } => {
                let pool = crate::exec::Pool::serial();
                let xs = pool.map_indexed(n_samples, |i| {
                    let mut rng = crate::exec::sample_stream(seed ^ t.to_bits(), i);
                    let path = sample_path(spec, &vec![0.0; spec.d], t, 32, &mut rng).unwrap();
                    path.end_position()[0]
                });
                Some(xs)
            }
            _ => None,
        };
        for &xi in xi_list {
            let bound = c1 * (-c2 * t * spec.psi_radial(xi.abs())).exp();
            let (p_hat, tol) = match &empirical {
                None => ((-t * spec.psi_radial(xi.abs())).exp(), 1e-12),
                Some(xs) => {
                    let cos: Vec<f64> = xs.iter().map(|x| (xi * x).cos()).collect();
                    let sin: Vec<f64> = xs.iter().map(|x| (xi * x).sin()).collect();
                    let mc = crate::exec::tree_mean(&cos);
                    let ms = crate::exec::tree_mean(&sin);
                    let se = (crate::exec::std_error(&cos).powi(2)
                        + crate::exec::std_error(&sin).powi(2))
                    .sqrt();
                    ((mc * mc + ms * ms).sqrt(), 3.0 * se)
                }
            };
            if p_hat - bound > tol {
                report.violations.push(DominationViolation {
                    t,
                    xi,
                    p_hat,
                    bound,
                    tolerance: tol,
                });
                report.max_relative_violation = report
                    .max_relative_violation
                    .max((p_hat - bound) / bound.max(f64::MIN_POSITIVE));
            }
        }
    }
    Ok(report)
}

/// Two-sample Kolmogorov-Smirnov statistic (diagnostic helper).
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    d
}

fn norm(x: &[f64]) -> f64 {
    match x.len() {
        1 => x[0].abs(),
        _ => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
    }
}

#[cfg(test)]
mod tests;
