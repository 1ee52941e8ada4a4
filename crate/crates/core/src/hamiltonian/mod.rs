//! Singular double-time functionals over path ensembles:
//! `H(X, Y) = int_0^t int_0^t |r-s|^{-beta0} gamma(X_r - Y_s) dr ds`.
//!
//! Product integration: the kernel factor is taken piecewise constant per
//! grid cell (midpoint pairing of path values) while the singular time
//! weight is integrated exactly over each cell.  With
//! `F(u) = u^{2-beta0} / ((1-beta0)(2-beta0))` the exact cell weights on a
//! uniform grid with spacing `dt` are
//!
//! ```text
//! W_0 = 2 F(dt)                                  (diagonal band)
//! W_k = F((k+1) dt) - 2 F(k dt) + F((k-1) dt)    (band |i-j| = k >= 1)
//! ```
//!
//! which telescope to `2 F(t)`, the closed-form double integral, so a
//! constant path reproduces `gamma(0) * 2 t^{2-beta0}/((1-beta0)(2-beta0))`
//! to machine precision.

use crate::error::{EngineError, Result};
use crate::exec::Pool;
use crate::linalg;
use crate::process::PathGrid;
use crate::quad;
use crate::spectral::{CovarianceKernel, NoiseSpec, RadialEval};
use rand::Rng;
use rand_distr::StandardNormal;

/// How kernel singularities are tamed inside the quadrature.
#[derive(Clone, Debug, PartialEq)]
pub enum RegMode {
    /// No regularization; requires a bounded kernel.
    None,
    /// Gaussian mollification `gamma_eps = q_eps * gamma`; `None` couples
    /// `eps` to the grid as `eps = dt` (diffusive scaling).
    SpatialMollify { epsilon: Option<f64> },
    /// Frequency truncation of the spectral density at radius `n`.
    /// Diagnostic quality only: the truncated kernel oscillates and its
    /// interpolation table is windowed.
    SpectralCutoff { n: f64 },
    /// `gamma` truncated at `gamma(eta)`.  Biased; excluded from the
    /// acceptance presets.
    Cap { eta: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiagonalPolicy {
    /// Diagonal cells carry their exact time weight against the kernel at
    /// the cell's midpoint increment (zero for a self-pairing).
    ExactTimeWeight,
    /// Diagonal band omitted.
    SkipDiagonal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Regularization {
    pub mode: RegMode,
    pub diagonal_policy: DiagonalPolicy,
}

impl Regularization {
    pub fn spatial(epsilon: f64) -> Self {
        assert!(epsilon > 0.0);
        Regularization {
            mode: RegMode::SpatialMollify {
                epsilon: Some(epsilon),
            },
            diagonal_policy: DiagonalPolicy::ExactTimeWeight,
        }
    }

    /// Mollification coupled to the grid: `eps = dt`.
    pub fn spatial_grid_coupled() -> Self {
        Regularization {
            mode: RegMode::SpatialMollify { epsilon: None },
            diagonal_policy: DiagonalPolicy::ExactTimeWeight,
        }
    }

    pub fn none() -> Self {
        Regularization {
            mode: RegMode::None,
            diagonal_policy: DiagonalPolicy::ExactTimeWeight,
        }
    }
}

impl Default for Regularization {
    fn default() -> Self {
        Regularization::spatial_grid_coupled()
    }
}

/// `int_a^b u^{-beta0} du`, the exact cell integral of the time factor;
/// `(b^{1-beta0} - a^{1-beta0})/(1-beta0)`, with the `beta0 = 0` branch
/// returning `b - a` exactly.
pub fn singular_time_weight(a: f64, b: f64, beta0: f64) -> f64 {
    debug_assert!(0.0 <= a && a <= b);
    debug_assert!((0.0..1.0).contains(&beta0));
    if beta0 == 0.0 {
        b - a
    } else {
        let p = 1.0 - beta0;
        (b.powf(p) - a.powf(p)) / p
    }
}

/// Gaussian mollification of a kernel (see [`CovarianceKernel::mollify`]).
pub fn mollified_kernel(kernel: &CovarianceKernel, epsilon: f64) -> Result<CovarianceKernel> {
    kernel.mollify(epsilon)
}

/// One Hamiltonian evaluation.
#[derive(Clone, Debug)]
pub struct HamiltonianValue {
    pub value: f64,
    pub regularization: Regularization,
    pub n_steps: usize,
    /// `value - value_at_half_resolution` on the same path, when requested.
    pub discretization_indicator: Option<f64>,
}

/// Resolved quadrature context for one `(noise, regularization, grid)`
/// combination.  Building it once amortizes the kernel table and the cell
/// weights across an entire Monte Carlo run.
pub struct HamiltonianEngine {
    beta0: f64,
    dim: usize,
    dt: f64,
    n_steps: usize,
    t_end: f64,
    reg: Regularization,
    kernel: CovarianceKernel,
    weights: Vec<f64>,
    cap: Option<f64>,
}

impl HamiltonianEngine {
    pub fn new(
        noise: &NoiseSpec,
        reg: &Regularization,
        t_end: f64,
        n_steps: usize,
    ) -> Result<Self> {
        assert!(t_end > 0.0 && n_steps >= 1);
        let dt = t_end / n_steps as f64;
        let (kernel, cap) = match &reg.mode {
            RegMode::None => {
                if noise.kernel.singular_at_zero() {
                    return Err(EngineError::UnboundedKernel);
                }
                (noise.kernel.clone(), None)
            }
            RegMode::SpatialMollify { epsilon } => {
                let eps = epsilon.unwrap_or(dt);
                (noise.kernel.mollify(eps)?, None)
            }
            RegMode::SpectralCutoff { n } => (spectral_cutoff_kernel(&noise.kernel, *n)?, None),
            RegMode::Cap { eta } => {
                assert!(*eta > 0.0);
                let cap = noise.kernel.gamma_radial(*eta)?;
                (noise.kernel.clone(), Some(cap))
            }
        };
        let beta0 = noise.beta0();
        Ok(HamiltonianEngine {
            beta0,
            dim: noise.dim(),
            dt,
            n_steps,
            t_end,
            reg: reg.clone(),
            kernel,
            weights: cell_weights(beta0, dt, n_steps),
            cap,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    /// The kernel actually evaluated by the quadrature (mollified or
    /// truncated as requested).
    pub fn effective_kernel(&self) -> &CovarianceKernel {
        &self.kernel
    }

    /// Exact time weights `W_k` per band `|i-j| = k`.
    pub fn band_weights(&self) -> &[f64] {
        &self.weights
    }

    fn check_grid(&self, path: &PathGrid) -> Result<()> {
        if path.dim() != self.dim
            || path.n_steps != self.n_steps
            || (path.t_end - self.t_end).abs() > 1e-12 * self.t_end
        {
            return Err(EngineError::GridMismatch);
        }
        Ok(())
    }

    /// Midpoint-paired cell values of a path, flattened.
    fn midpoints(&self, path: &PathGrid) -> Vec<f64> {
        let d = self.dim;
        let n = self.n_steps;
        let pos = path.positions_flat();
        let mut m = Vec::with_capacity(n * d);
        for i in 0..n {
            for k in 0..d {
                m.push(0.5 * (pos[i * d + k] + pos[(i + 1) * d + k]));
            }
        }
        m
    }

    fn eval_kernel(&self) -> KernelEval<'_> {
        KernelEval {
            inner: self.kernel.radial_evaluator(),
            cap: self.cap,
        }
    }

    /// `int int |r-s|^{-beta0} gamma(X_r - X_s) dr ds` for a single path.
    pub fn self_hamiltonian(&self, path: &PathGrid) -> Result<HamiltonianValue> {
        self.check_grid(path)?;
        let m = self.midpoints(path);
        let value = self.quadrature_self(&m, &self.weights)?;
        Ok(HamiltonianValue {
            value,
            regularization: self.reg.clone(),
            n_steps: self.n_steps,
            discretization_indicator: None,
        })
    }

    /// Same, also evaluating the path coarsened to half resolution and
    /// reporting the difference.
    pub fn self_hamiltonian_with_indicator(&self, path: &PathGrid) -> Result<HamiltonianValue> {
        let mut out = self.self_hamiltonian(path)?;
        if self.n_steps % 2 == 0 && self.n_steps >= 2 {
            let coarse_engine = HamiltonianEngine {
                beta0: self.beta0,
                dim: self.dim,
                dt: 2.0 * self.dt,
                n_steps: self.n_steps / 2,
                t_end: self.t_end,
                reg: self.reg.clone(),
                kernel: self.kernel.clone(),
                weights: cell_weights(self.beta0, 2.0 * self.dt, self.n_steps / 2),
                cap: self.cap,
            };
            let coarse = coarse_engine.self_hamiltonian(&path.subsample(2))?;
            out.discretization_indicator = Some(out.value - coarse.value);
        }
        Ok(out)
    }

    /// Cross-path Hamiltonian; both paths must share the grid.
    pub fn cross_hamiltonian(&self, a: &PathGrid, b: &PathGrid) -> Result<HamiltonianValue> {
        self.check_grid(a)?;
        if !a.same_grid(b) {
            return Err(EngineError::GridMismatch);
        }
        let ma = self.midpoints(a);
        let mb = self.midpoints(b);
        let value = self.quadrature_cross(&ma, &mb, &self.weights)?;
        Ok(HamiltonianValue {
            value,
            regularization: self.reg.clone(),
            n_steps: self.n_steps,
            discretization_indicator: None,
        })
    }

    /// Gram matrix of the path ensemble in the noise inner product, with
    /// escalating-jitter Cholesky factorization.
    pub fn covariance_matrix(
        &self,
        paths: &[PathGrid],
        jitter: f64,
        pool: &Pool,
    ) -> Result<CovarianceMatrix> {
        assert!(jitter >= 0.0);
        let k = paths.len();
        assert!(k >= 1);
        for p in paths {
            self.check_grid(p)?;
        }
        // independent entries: (i, j) pairs with i <= j, each its own sum
        let mut pairs = Vec::new();
        for i in 0..k {
            for j in i..k {
                pairs.push((i, j));
            }
        }
        let entries: Vec<Result<f64>> = pool.map_indexed(pairs.len(), |idx| {
            let (i, j) = pairs[idx as usize];
            if i == j {
                self.self_hamiltonian(&paths[i]).map(|h| h.value)
            } else {
                self.cross_hamiltonian(&paths[i], &paths[j]).map(|h| h.value)
            }
        });
        let mut raw = vec![0.0; k * k];
        for (idx, (i, j)) in pairs.iter().enumerate() {
            let v = entries[idx].clone()?;
            raw[i * k + j] = v;
            raw[j * k + i] = v;
        }
        CovarianceMatrix::factorize(raw, k, jitter)
    }
}

/// Hot-loop kernel evaluation with optional cap.
struct KernelEval<'a> {
    inner: RadialEval<'a>,
    cap: Option<f64>,
}

impl KernelEval<'_> {
    #[inline(always)]
    fn eval(&self, r: f64) -> f64 {
        let v = self.inner.eval(r);
        match self.cap {
            Some(c) => v.min(c),
            None => v,
        }
    }

    fn at_zero(&self) -> f64 {
        let v = self.inner.at_zero();
        match self.cap {
            Some(c) => v.min(c),
            None => v,
        }
    }
}

impl HamiltonianEngine {
    fn quadrature_self(&self, m: &[f64], w: &[f64]) -> Result<f64> {
        let k = self.eval_kernel();
        let n = self.n_steps;
        let mut acc = 0.0;
        if self.dim == 1 {
            for band in 1..n {
                let wk = w[band];
                let mut s = 0.0;
                for j in 0..n - band {
                    s += k.eval((m[j + band] - m[j]).abs());
                }
                acc += wk * s;
            }
        } else {
            let d = self.dim;
            for band in 1..n {
                let wk = w[band];
                let mut s = 0.0;
                for j in 0..n - band {
                    s += k.eval(dist(&m[(j + band) * d..], &m[j * d..], d));
                }
                acc += wk * s;
            }
        }
        acc *= 2.0;
        if self.reg.diagonal_policy == DiagonalPolicy::ExactTimeWeight {
            let g0 = k.at_zero();
            if !g0.is_finite() {
                return Err(EngineError::UnboundedKernel);
            }
            acc += w[0] * g0 * n as f64;
        }
        if !acc.is_finite() {
            return Err(EngineError::NonFinite {
                context: "self_hamiltonian".into(),
                detail: format!("accumulated value {acc}"),
            });
        }
        Ok(acc)
    }

    fn quadrature_cross(&self, ma: &[f64], mb: &[f64], w: &[f64]) -> Result<f64> {
        let k = self.eval_kernel();
        let n = self.n_steps;
        let mut acc = 0.0;
        let skip_diag = self.reg.diagonal_policy == DiagonalPolicy::SkipDiagonal;
        if self.dim == 1 {
            for band in 0..n {
                if band == 0 && skip_diag {
                    continue;
                }
                let wk = w[band];
                let mut s = 0.0;
                if band == 0 {
                    for j in 0..n {
                        s += k.eval((ma[j] - mb[j]).abs());
                    }
                } else {
                    // the two off-band terms are added as one pair-sum so
                    // that swapping the paths reproduces the value exactly
                    for j in 0..n - band {
                        s += k.eval((ma[j + band] - mb[j]).abs())
                            + k.eval((ma[j] - mb[j + band]).abs());
                    }
                }
                acc += wk * s;
            }
        } else {
            let d = self.dim;
            for band in 0..n {
                if band == 0 && skip_diag {
                    continue;
                }
                let wk = w[band];
                let mut s = 0.0;
                if band == 0 {
                    for j in 0..n {
                        s += k.eval(dist(&ma[j * d..], &mb[j * d..], d));
                    }
                } else {
                    for j in 0..n - band {
                        s += k.eval(dist(&ma[(j + band) * d..], &mb[j * d..], d))
                            + k.eval(dist(&ma[j * d..], &mb[(j + band) * d..], d));
                    }
                }
                acc += wk * s;
            }
        }
        if !acc.is_finite() {
            return Err(EngineError::NonFinite {
                context: "cross_hamiltonian".into(),
                detail: format!("accumulated value {acc}"),
            });
        }
        Ok(acc)
    }
}

#[inline(always)]
fn dist(a: &[f64], b: &[f64], d: usize) -> f64 {
    let mut s = 0.0;
    for k in 0..d {
        let diff = a[k] - b[k];
        s += diff * diff;
    }
    s.sqrt()
}

/// `int_0^a int_0^b |r-s|^{-beta0} dr ds = F(a) + F(b) - F(|a-b|)`, so a
/// rectangle `[a0,a1] x [b0,b1]` integrates to the four-corner difference.
pub fn time_weight_cell(a0: f64, a1: f64, b0: f64, b1: f64, beta0: f64) -> f64 {
    let f = |u: f64| -> f64 {
        let u = u.abs();
        if u == 0.0 {
            0.0
        } else {
            u.powf(2.0 - beta0) / ((1.0 - beta0) * (2.0 - beta0))
        }
    };
    let g2 = |a: f64, b: f64| f(a) + f(b) - f(a - b);
    g2(a1, b1) - g2(a1, b0) - g2(a0, b1) + g2(a0, b0)
}

/// Exact band weights `W_k` (see module docs).
fn cell_weights(beta0: f64, dt: f64, n_steps: usize) -> Vec<f64> {
    let f = |u: f64| -> f64 {
        if u <= 0.0 {
            0.0
        } else {
            u.powf(2.0 - beta0) / ((1.0 - beta0) * (2.0 - beta0))
        }
    };
    let mut w = Vec::with_capacity(n_steps);
    w.push(2.0 * f(dt));
    for k in 1..n_steps {
        let kf = k as f64;
        w.push(f((kf + 1.0) * dt) - 2.0 * f(kf * dt) + f((kf - 1.0) * dt));
    }
    w
}

/// Sharp frequency truncation of the spectral density, tabulated on a
/// finite window (d = 1).
fn spectral_cutoff_kernel(kernel: &CovarianceKernel, n: f64) -> Result<CovarianceKernel> {
    assert!(n > 0.0);
    if kernel.dim() != 1 {
        return Err(EngineError::TableBuildFailure(
            "spectral cutoff implemented for d = 1".into(),
        ));
    }
    let p = kernel.spectral_power_at_zero();
    let gamma_n = |r: f64| -> f64 {
        let f = |xi: f64| kernel.spectral_density(&[xi]).unwrap_or(0.0) * (r * xi).cos();
        let v = if p < 0.0 {
            quad::integrate_power_weighted(
                &|xi: f64| {
                    if xi == 0.0 {
                        0.0
                    } else {
                        f(xi) / xi.powf(p)
                    }
                },
                p,
                n,
                1e-10,
                1e-8,
            )
        } else {
            quad::integrate(&f, 0.0, n, 1e-10, 1e-8, 100_000)
        };
        v.map_or(f64::NAN, |v| v / std::f64::consts::PI)
    };
    let r_window = 64.0;
    let mut samples = Vec::new();
    let m = 8192;
    for i in 0..=m {
        let r = r_window * i as f64 / m as f64;
        let v = gamma_n(r);
        if !v.is_finite() {
            return Err(EngineError::TableBuildFailure(
                "cutoff transform quadrature failed".into(),
            ));
        }
        samples.push((r, v));
    }
    // truncated spectrum, sampled away from a possible origin singularity
    let mm = 2048;
    let mu_samples: Vec<(f64, f64)> = (0..mm)
        .map(|i| {
            let xi = n * (i as f64 + 0.5) / mm as f64;
            (xi, kernel.spectral_density(&[xi]).unwrap_or(0.0))
        })
        .collect();
    Ok(CovarianceKernel::Tabulated(crate::spectral::TabulatedKernel {
        d: 1,
        gamma_samples: samples,
        mu_samples,
        singular_at_zero: false,
    }))
}

/// Symmetric covariance block with its Cholesky factor.
#[derive(Clone, Debug)]
pub struct CovarianceMatrix {
    pub k: usize,
    /// raw Gram entries, before jitter
    pub raw: Vec<f64>,
    /// final jitter added to the diagonal
    pub jitter: f64,
    chol: Vec<f64>,
}

impl CovarianceMatrix {
    fn factorize(raw: Vec<f64>, k: usize, jitter: f64) -> Result<CovarianceMatrix> {
        let trace: f64 = (0..k).map(|i| raw[i * k + i]).sum();
        let scale = (trace / k as f64).max(f64::MIN_POSITIVE);
        let bound = 1e-3 * scale;
        let mut j = jitter;
        loop {
            let mut q = raw.clone();
            for i in 0..k {
                q[i * k + i] += j;
            }
            if let Some(chol) = linalg::cholesky(&q, k) {
                return Ok(CovarianceMatrix {
                    k,
                    raw,
                    jitter: j,
                    chol,
                });
            }
            j = if j <= 0.0 { 1e-12 * scale } else { 10.0 * j };
            if j > bound {
                return Err(EngineError::NotPsd { max_jitter: bound });
            }
        }
    }

    /// Entry of the jittered matrix.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.raw[i * self.k + j] + if i == j { self.jitter } else { 0.0 }
    }

    /// One joint Gaussian draw `V ~ N(0, Q)` through the Cholesky factor.
    pub fn draw_gaussian<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.k).map(|_| rng.sample(StandardNormal)).collect();
        linalg::lower_tri_mul(&self.chol, self.k, &z)
    }

    /// Smallest eigenvalue of the raw (unjittered) matrix.
    pub fn min_eigenvalue_raw(&self) -> f64 {
        linalg::min_eigenvalue_symmetric(&self.raw, self.k)
    }
}

/// Convenience wrappers building a one-shot engine.
pub fn self_hamiltonian(
    path: &PathGrid,
    noise: &NoiseSpec,
    reg: &Regularization,
) -> Result<HamiltonianValue> {
    HamiltonianEngine::new(noise, reg, path.t_end, path.n_steps)?.self_hamiltonian(path)
}

pub fn cross_hamiltonian(
    a: &PathGrid,
    b: &PathGrid,
    noise: &NoiseSpec,
    reg: &Regularization,
) -> Result<HamiltonianValue> {
    HamiltonianEngine::new(noise, reg, a.t_end, a.n_steps)?.cross_hamiltonian(a, b)
}

pub fn covariance_matrix(
    paths: &[PathGrid],
    noise: &NoiseSpec,
    reg: &Regularization,
    jitter: f64,
) -> Result<CovarianceMatrix> {
    assert!(!paths.is_empty());
    HamiltonianEngine::new(noise, reg, paths[0].t_end, paths[0].n_steps)?.covariance_matrix(
        paths,
        jitter,
        &Pool::serial(),
    )
}
