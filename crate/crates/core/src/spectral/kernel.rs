//! The covariance kernel catalog.

use crate::error::{EngineError, Result};
use crate::quad;
use statrs::function::gamma::gamma as gamma_fn;

/// Surface area of the unit sphere in `R^d`.
pub(crate) fn sphere_surface(d: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / gamma_fn(d as f64 / 2.0)
}

/// `int e^{-i x xi} |x|^{-alpha} dx = c(alpha, d) |xi|^{alpha - d}` for
/// `0 < alpha < d`.
pub fn riesz_constant(alpha: f64, d: usize) -> f64 {
    let d = d as f64;
    2.0f64.powf(d - alpha) * std::f64::consts::PI.powf(d / 2.0) * gamma_fn((d - alpha) / 2.0)
        / gamma_fn(alpha / 2.0)
}

/// User-supplied kernel: radial samples of both `gamma` and `mu_hat`.
/// No Fourier inversion is attempted; consistency of the two tables is the
/// caller's responsibility.
#[derive(Clone, Debug)]
pub struct TabulatedKernel {
    pub d: usize,
    /// `(r, gamma(r))`, sorted by `r`, `r >= 0`; zero beyond the last node.
    pub gamma_samples: Vec<(f64, f64)>,
    /// `(|xi|, mu_hat(|xi|))`, sorted; zero beyond the last node.
    pub mu_samples: Vec<(f64, f64)>,
    pub singular_at_zero: bool,
}

fn interp_sorted(pts: &[(f64, f64)], r: f64) -> f64 {
    if pts.is_empty() || r > pts[pts.len() - 1].0 {
        return 0.0;
    }
    if r <= pts[0].0 {
        return pts[0].1;
    }
    let i = pts.partition_point(|p| p.0 < r);
    let (r0, v0) = pts[i - 1];
    let (r1, v1) = pts[i];
    v0 + (v1 - v0) * (r - r0) / (r1 - r0)
}

/// Uniform-grid radial interpolation table; the workhorse behind mollified
/// kernels on the O(n^2) Hamiltonian path.
#[derive(Clone, Debug)]
pub struct RadialTable {
    inv_h: f64,
    r_max: f64,
    values: Vec<f64>,
}

impl RadialTable {
    /// Linear interpolation; `None` past the table end.
    #[inline(always)]
    pub fn eval(&self, r: f64) -> Option<f64> {
        if r >= self.r_max {
            return None;
        }
        let u = r * self.inv_h;
        let i = u as usize;
        let frac = u - i as f64;
        // values carries one sentinel entry past the end
        Some(self.values[i] * (1.0 - frac) + self.values[i + 1] * frac)
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Builds a table for `f` on `[0, r_max]`, doubling resolution until the
    /// midpoint interpolation error is below `tol` relative to
    /// `max(|f|, floor)`.
    fn build<F: Fn(f64) -> f64>(f: &F, r_max: f64, tol: f64, floor: f64) -> Result<RadialTable> {
        let mut n = 1024usize;
        loop {
            let h = r_max / n as f64;
            let values: Vec<f64> = (0..=n + 1).map(|i| f((i as f64 * h).min(r_max))).collect();
            let table = RadialTable {
                inv_h: 1.0 / h,
                r_max,
                values,
            };
            let mut worst: f64 = 0.0;
            for i in 0..n.min(4096) {
                // probe mid-cells on a stride covering the whole range
                let idx = i * (n / n.min(4096)).max(1);
                let r = (idx as f64 + 0.5) * h;
                if r >= r_max {
                    break;
                }
                let exact = f(r);
                let approx = table.eval(r).unwrap();
                let scale = exact.abs().max(floor);
                worst = worst.max((approx - exact).abs() / scale);
            }
            if worst <= tol {
                return Ok(table);
            }
            n *= 2;
            if n > (1 << 18) {
                return Err(EngineError::TableBuildFailure(format!(
                    "interpolation error {worst:.2e} above {tol:.1e} at max resolution"
                )));
            }
        }
    }
}

/// Spatial covariance `gamma` with spectral density `mu_hat`.
#[derive(Clone, Debug)]
pub enum CovarianceKernel {
    /// White spatial noise: `mu_hat = 1`, no pointwise `gamma`.
    Dirac { d: usize },
    /// `gamma(x) = |x|^{-alpha}`, `0 < alpha < d`.
    Riesz { alpha: f64, d: usize },
    /// `mu_hat = prod |xi_i|^{1-2H_i}`, `H_i in (1/2, 1)`.
    FractionalProduct { h: Vec<f64> },
    /// `gamma(x) = prod (1 + x_i^2)^{-1}`.
    Cauchy { d: usize },
    /// `mu_hat = e^{-|xi|}`.
    Poisson { d: usize },
    /// `gamma(x) = e^{-|x|^alpha}`, `alpha in (0, 2]`.
    OrnsteinUhlenbeck { alpha: f64, d: usize },
    /// User-tabulated radial kernel.
    Tabulated(TabulatedKernel),
    /// `gamma_eps = q_eps * gamma`: Gaussian-mollified base kernel, stored as
    /// a radial interpolation table with the exact spectral factor
    /// `e^{-eps |xi|^2 / 2}`.
    Mollified {
        base: Box<CovarianceKernel>,
        epsilon: f64,
        table: RadialTable,
        /// value at the origin, `gamma_eps(0) < infinity`
        gamma0: f64,
    },
}

/// Spectral tail class used by the power-counting classifier.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpectralTail {
    /// `mu_hat ~ C |xi|^{e}` as `|xi| -> infinity` (angularly averaged).
    Power { exponent: f64 },
    /// Decays faster than any polynomial.
    Exponential,
}

impl CovarianceKernel {
    pub fn riesz(alpha: f64, d: usize) -> Self {
        assert!(
            alpha > 0.0 && alpha < d as f64,
            "Riesz exponent must lie in (0, d)"
        );
        CovarianceKernel::Riesz { alpha, d }
    }

    pub fn fractional_product(h: Vec<f64>) -> Self {
        assert!(
            h.iter().all(|&hi| hi > 0.5 && hi < 1.0),
            "Hurst indices must lie in (1/2, 1)"
        );
        CovarianceKernel::FractionalProduct { h }
    }

    pub fn ornstein_uhlenbeck(alpha: f64, d: usize) -> Self {
        assert!(alpha > 0.0 && alpha <= 2.0, "OU exponent must lie in (0, 2]");
        CovarianceKernel::OrnsteinUhlenbeck { alpha, d }
    }

    pub fn dim(&self) -> usize {
        match self {
            CovarianceKernel::Dirac { d }
            | CovarianceKernel::Riesz { d, .. }
            | CovarianceKernel::Cauchy { d }
            | CovarianceKernel::Poisson { d }
            | CovarianceKernel::OrnsteinUhlenbeck { d, .. } => *d,
            CovarianceKernel::FractionalProduct { h } => h.len(),
            CovarianceKernel::Tabulated(t) => t.d,
            CovarianceKernel::Mollified { base, .. } => base.dim(),
        }
    }

    pub fn singular_at_zero(&self) -> bool {
        match self {
            CovarianceKernel::Dirac { .. }
            | CovarianceKernel::Riesz { .. }
            | CovarianceKernel::FractionalProduct { .. } => true,
            CovarianceKernel::Tabulated(t) => t.singular_at_zero,
            CovarianceKernel::Mollified { .. } => false,
            _ => false,
        }
    }

    /// `gamma(x)`.
    pub fn gamma(&self, x: &[f64]) -> Result<f64> {
        assert_eq!(x.len(), self.dim());
        let r = norm(x);
        match self {
            CovarianceKernel::Dirac { .. } => Err(EngineError::DiracPointwiseEval),
            CovarianceKernel::FractionalProduct { h } => {
                let mut v = 1.0;
                for (xi, hi) in x.iter().zip(h) {
                    if *xi == 0.0 {
                        return Err(EngineError::SingularityHit);
                    }
                    let a = 2.0 - 2.0 * hi;
                    v *= xi.abs().powf(2.0 * hi - 2.0) / riesz_constant(a, 1);
                }
                Ok(v)
            }
            CovarianceKernel::Cauchy { .. } => {
                Ok(x.iter().map(|xi| 1.0 / (1.0 + xi * xi)).product())
            }
            _ => self.gamma_radial(r),
        }
    }

    /// `gamma` as a function of `r = |x|`; defined for radial variants.
    pub fn gamma_radial(&self, r: f64) -> Result<f64> {
        match self {
            CovarianceKernel::Dirac { .. } => Err(EngineError::DiracPointwiseEval),
            CovarianceKernel::Riesz { alpha, .. } => {
                if r == 0.0 {
                    Err(EngineError::SingularityHit)
                } else {
                    Ok(r.powf(-alpha))
                }
            }
            CovarianceKernel::FractionalProduct { h } if h.len() == 1 => {
                if r == 0.0 {
                    Err(EngineError::SingularityHit)
                } else {
                    let a = 2.0 - 2.0 * h[0];
                    Ok(r.powf(2.0 * h[0] - 2.0) / riesz_constant(a, 1))
                }
            }
            CovarianceKernel::FractionalProduct { .. } => Err(EngineError::QuadratureFailure(
                "fractional-product kernel is not radial for d > 1".into(),
            )),
            CovarianceKernel::Cauchy { d } if *d == 1 => Ok(1.0 / (1.0 + r * r)),
            CovarianceKernel::Cauchy { .. } => Err(EngineError::QuadratureFailure(
                "Cauchy kernel is not radial for d > 1".into(),
            )),
            CovarianceKernel::Poisson { d } => {
                let dd = *d as f64;
                let c = gamma_fn((dd + 1.0) / 2.0) / std::f64::consts::PI.powf((dd + 1.0) / 2.0);
                Ok(c * (1.0 + r * r).powf(-(dd + 1.0) / 2.0))
            }
            CovarianceKernel::OrnsteinUhlenbeck { alpha, .. } => Ok((-r.powf(*alpha)).exp()),
            CovarianceKernel::Tabulated(t) => {
                if t.singular_at_zero && r == 0.0 {
                    Err(EngineError::SingularityHit)
                } else {
                    Ok(interp_sorted(&t.gamma_samples, r))
                }
            }
            CovarianceKernel::Mollified { table, base, gamma0, .. } => {
                if r == 0.0 {
                    return Ok(*gamma0);
                }
                match table.eval(r) {
                    Some(v) => Ok(v),
                    None => match base.as_ref() {
                        CovarianceKernel::Dirac { .. } => Ok(0.0),
                        b => b.gamma_radial(r),
                    },
                }
            }
        }
    }

    /// `mu_hat(xi)`.
    pub fn spectral_density(&self, xi: &[f64]) -> Result<f64> {
        assert_eq!(xi.len(), self.dim());
        match self {
            CovarianceKernel::FractionalProduct { h } => {
                let mut v = 1.0;
                for (x, hi) in xi.iter().zip(h) {
                    if *x == 0.0 {
                        return Err(EngineError::SingularityHit);
                    }
                    v *= x.abs().powf(1.0 - 2.0 * hi);
                }
                Ok(v)
            }
            CovarianceKernel::Cauchy { .. } => {
                let s: f64 = xi.iter().map(|x| x.abs()).sum();
                Ok(std::f64::consts::PI.powi(self.dim() as i32) * (-s).exp())
            }
            _ => self.spectral_density_radial(norm(xi)),
        }
    }

    /// `mu_hat` as a function of `rho = |xi|`; defined for variants whose
    /// density is radial.
    pub fn spectral_density_radial(&self, rho: f64) -> Result<f64> {
        match self {
            CovarianceKernel::Dirac { .. } => Ok(1.0),
            CovarianceKernel::Riesz { alpha, d } => {
                if rho == 0.0 {
                    Err(EngineError::SingularityHit)
                } else {
                    Ok(riesz_constant(*alpha, *d) * rho.powf(alpha - *d as f64))
                }
            }
            CovarianceKernel::FractionalProduct { h } if h.len() == 1 => {
                if rho == 0.0 {
                    Err(EngineError::SingularityHit)
                } else {
                    Ok(rho.powf(1.0 - 2.0 * h[0]))
                }
            }
            CovarianceKernel::FractionalProduct { .. } => Err(EngineError::QuadratureFailure(
                "fractional-product density is not radial for d > 1".into(),
            )),
            CovarianceKernel::Cauchy { d } if *d == 1 => {
                Ok(std::f64::consts::PI * (-rho).exp())
            }
            CovarianceKernel::Cauchy { .. } => Err(EngineError::QuadratureFailure(
                "Cauchy density is not radial for d > 1".into(),
            )),
            CovarianceKernel::Poisson { .. } => Ok((-rho).exp()),
            CovarianceKernel::OrnsteinUhlenbeck { alpha, d } => {
                ou_spectral_density(*alpha, *d, rho)
            }
            CovarianceKernel::Tabulated(t) => Ok(interp_sorted(&t.mu_samples, rho)),
            CovarianceKernel::Mollified { base, epsilon, .. } => {
                Ok(base.spectral_density_radial(rho)? * (-epsilon * rho * rho / 2.0).exp())
            }
        }
    }

    /// Exponent `p` such that `mu_hat ~ C rho^p` as `rho -> 0` (angularly
    /// averaged for product kernels); `0` for densities regular at the
    /// origin.
    pub fn spectral_power_at_zero(&self) -> f64 {
        match self {
            CovarianceKernel::Riesz { alpha, d } => alpha - *d as f64,
            CovarianceKernel::FractionalProduct { h } => {
                h.iter().map(|hi| 1.0 - 2.0 * hi).sum()
            }
            CovarianceKernel::Mollified { base, .. } => base.spectral_power_at_zero(),
            _ => 0.0,
        }
    }

    pub fn spectrum_singular_at_zero(&self) -> bool {
        self.spectral_power_at_zero() < 0.0
    }

    /// Large-`|xi|` behaviour of the density; `None` when no analytic class
    /// is available (tabulated kernels).
    pub fn spectral_tail(&self) -> Option<SpectralTail> {
        match self {
            CovarianceKernel::Dirac { .. } => Some(SpectralTail::Power { exponent: 0.0 }),
            CovarianceKernel::Riesz { alpha, d } => Some(SpectralTail::Power {
                exponent: alpha - *d as f64,
            }),
            CovarianceKernel::FractionalProduct { h } => Some(SpectralTail::Power {
                exponent: h.iter().map(|hi| 1.0 - 2.0 * hi).sum(),
            }),
            CovarianceKernel::Cauchy { .. }
            | CovarianceKernel::Poisson { .. }
            | CovarianceKernel::Mollified { .. } => Some(SpectralTail::Exponential),
            CovarianceKernel::OrnsteinUhlenbeck { .. } => Some(SpectralTail::Exponential),
            CovarianceKernel::Tabulated(_) => None,
        }
    }

    /// Weight `w(rho)` such that `int g(|xi|) mu_hat(xi) dxi
    ///  = int_0^inf g(rho) w(rho) drho`.
    ///
    /// Exact for all radial variants and (by polar factorization of the
    /// product of axis powers) for fractional-product kernels in any
    /// dimension.  Not available for the non-radial Cauchy density in d > 1.
    pub fn radial_spectral_weight(&self, rho: f64) -> Result<f64> {
        let d = self.dim();
        match self {
            CovarianceKernel::FractionalProduct { h } => {
                let a: Vec<f64> = h.iter().map(|hi| 1.0 - 2.0 * hi).collect();
                let sum_a: f64 = a.iter().sum();
                // int_{S^{d-1}} prod |w_i|^{a_i} dsigma
                //  = 2 prod Gamma((a_i+1)/2) / Gamma((d + sum a_i)/2)
                let ang = 2.0 * a.iter().map(|ai| gamma_fn((ai + 1.0) / 2.0)).product::<f64>()
                    / gamma_fn((d as f64 + sum_a) / 2.0);
                if rho == 0.0 {
                    return Err(EngineError::SingularityHit);
                }
                Ok(ang * rho.powf(d as f64 - 1.0 + sum_a))
            }
            _ => Ok(sphere_surface(d) * rho.powf(d as f64 - 1.0) * self.spectral_density_radial(rho)?),
        }
    }

    /// Combined power of `rho` in `radial_spectral_weight` near the origin.
    pub fn radial_weight_power_at_zero(&self) -> f64 {
        self.dim() as f64 - 1.0 + self.spectral_power_at_zero()
    }

    /// Gaussian mollification `gamma_eps = q_eps * gamma` with
    /// `q_eps(x) = (2 pi eps)^{-d/2} e^{-|x|^2/(2 eps)}`.
    ///
    /// The result is bounded at the origin and carries the exact spectral
    /// factor `e^{-eps |xi|^2/2}`.  Pointwise values come from an adaptive
    /// radial table (interpolation error below 1e-4 relative); past the
    /// table the base kernel is used directly, the mollification correction
    /// being negligible there.  Convolution tables for non-Dirac kernels are
    /// implemented for d = 1.
    pub fn mollify(&self, epsilon: f64) -> Result<CovarianceKernel> {
        assert!(epsilon > 0.0);
        let d = self.dim();
        match self {
            CovarianceKernel::Mollified { .. } => Err(EngineError::TableBuildFailure(
                "kernel is already mollified".into(),
            )),
            CovarianceKernel::Dirac { .. } => {
                // delta * q_eps = q_eps
                let a = (2.0 * std::f64::consts::PI * epsilon).powf(-(d as f64) / 2.0);
                let inv2e = 1.0 / (2.0 * epsilon);
                let f = move |r: f64| a * (-r * r * inv2e).exp();
                let r_max = (2.0 * epsilon * 42.0).sqrt(); // e^{-42} tail
                let table = RadialTable::build(&f, r_max, 1e-4, a * 1e-8)?;
                Ok(CovarianceKernel::Mollified {
                    base: Box::new(self.clone()),
                    epsilon,
                    table,
                    gamma0: a,
                })
            }
            base => {
                if d != 1 {
                    return Err(EngineError::TableBuildFailure(
                        "convolution tables for non-Dirac kernels require d = 1".into(),
                    ));
                }
                let conv = |r: f64| convolve_1d(base, epsilon, r);
                let gamma0 = conv(0.0)?;
                // find the radius beyond which mollification is negligible
                let mut r_max = 16.0 * epsilon.sqrt();
                loop {
                    let exact = conv(r_max)?;
                    let plain = base.gamma_radial(r_max)?;
                    if (exact - plain).abs() <= 1e-4 * plain.abs().max(1e-8 * gamma0) {
                        break;
                    }
                    r_max *= 2.0;
                    if r_max > 1e6 * epsilon.sqrt() {
                        return Err(EngineError::TableBuildFailure(
                            "mollified kernel does not match base kernel at any radius".into(),
                        ));
                    }
                }
                let f = move |r: f64| conv(r).unwrap_or(f64::NAN);
                let table = RadialTable::build(&f, r_max, 1e-4, gamma0 * 1e-8)?;
                if table.values.iter().any(|v| !v.is_finite()) {
                    return Err(EngineError::TableBuildFailure(
                        "convolution quadrature failed".into(),
                    ));
                }
                Ok(CovarianceKernel::Mollified {
                    base: Box::new(base.clone()),
                    epsilon,
                    table,
                    gamma0,
                })
            }
        }
    }

    pub fn mollification_epsilon(&self) -> Option<f64> {
        match self {
            CovarianceKernel::Mollified { epsilon, .. } => Some(*epsilon),
            _ => None,
        }
    }

    /// Fast radial evaluator for the Hamiltonian inner loops.
    pub fn radial_evaluator(&self) -> RadialEval<'_> {
        match self {
            CovarianceKernel::Mollified { base, table, gamma0, .. } => match base.as_ref() {
                CovarianceKernel::Dirac { .. } => RadialEval::TableZeroTail {
                    table,
                    gamma0: *gamma0,
                },
                b => RadialEval::TableBaseTail {
                    table,
                    base: b,
                    gamma0: *gamma0,
                },
            },
            k => RadialEval::Direct(k),
        }
    }
}

/// `gamma_eps(r)` for a d=1 base kernel by direct convolution quadrature.
fn convolve_1d(base: &CovarianceKernel, epsilon: f64, r: f64) -> Result<f64> {
    let s = epsilon.sqrt();
    let q = |u: f64| (-(u * u) / (2.0 * epsilon)).exp() / ((2.0 * std::f64::consts::PI * epsilon).sqrt());
    if base.singular_at_zero() {
        // gamma(y) = y^{-p} v(y) near 0 with v smooth; integrate the
        // singular wedge with the power-weighted rule on both sides.
        let p = match base {
            CovarianceKernel::Riesz { alpha, .. } => *alpha,
            CovarianceKernel::FractionalProduct { h } => 2.0 - 2.0 * h[0],
            _ => {
                return Err(EngineError::TableBuildFailure(
                    "no singular exponent known for this kernel".into(),
                ))
            }
        };
        let y_cut = (10.0 * s).max(2.0 * r.abs());
        let wedge = quad::integrate_power_weighted(
            &|y: f64| {
                if y == 0.0 {
                    return 0.0;
                }
                let v = base.gamma_radial(y).unwrap_or(0.0) * y.powf(p);
                v * (q(r - y) + q(r + y))
            },
            -p,
            y_cut,
            1e-10,
            1e-7,
        )?;
        let far = quad::integrate(
            &|y: f64| base.gamma_radial(y).unwrap_or(0.0) * (q(r - y) + q(r + y)),
            y_cut,
            y_cut.max(r.abs() + 12.0 * s),
            1e-12,
            1e-8,
            4000,
        )?;
        Ok(wedge + far)
    } else {
        let lo = (r - 12.0 * s).min(-12.0 * s);
        let hi = (r + 12.0 * s).max(12.0 * s);
        quad::integrate(
            &|y: f64| base.gamma_radial(y.abs()).unwrap_or(0.0) * q(r - y),
            lo,
            hi,
            1e-12,
            1e-8,
            4000,
        )
    }
}

/// Direct convolution quadrature, kept as an independent reference for the
/// interpolation tables.
#[cfg(test)]
pub(crate) fn convolve_reference(base: &CovarianceKernel, epsilon: f64, r: f64) -> f64 {
    convolve_1d(base, epsilon, r).unwrap()
}

/// Numeric cosine transform for the Ornstein-Uhlenbeck kernel when no
/// closed form exists (d = 1 only).
fn ou_spectral_density(alpha: f64, d: usize, rho: f64) -> Result<f64> {
    if (alpha - 1.0).abs() < 1e-12 {
        // F[e^{-|x|}] = 2^d pi^{(d-1)/2} Gamma((d+1)/2) (1+|xi|^2)^{-(d+1)/2}
        let dd = d as f64;
        let c = 2.0f64.powi(d as i32)
            * std::f64::consts::PI.powf((dd - 1.0) / 2.0)
            * gamma_fn((dd + 1.0) / 2.0);
        return Ok(c * (1.0 + rho * rho).powf(-(dd + 1.0) / 2.0));
    }
    if (alpha - 2.0).abs() < 1e-12 {
        // F[e^{-|x|^2}] = pi^{d/2} e^{-|xi|^2/4}
        let dd = d as f64;
        return Ok(std::f64::consts::PI.powf(dd / 2.0) * (-rho * rho / 4.0).exp());
    }
    if d != 1 {
        return Err(EngineError::QuadratureFailure(
            "OU spectral density for alpha outside {1,2} requires d = 1".into(),
        ));
    }
    // 2 int_0^inf cos(rho r) e^{-r^alpha} dr, truncated where the envelope
    // is below 1e-14
    let r_end = (32.0f64).powf(1.0 / alpha).max(8.0);
    let v = quad::integrate(
        &|r: f64| (rho * r).cos() * (-r.powf(alpha)).exp(),
        0.0,
        r_end,
        1e-11,
        1e-9,
        100_000,
    )?;
    Ok(2.0 * v)
}

/// Specialized kernel evaluation for hot loops; `eval(r)` returns
/// `gamma(r)` for `r = |x|`.
pub enum RadialEval<'a> {
    /// Mollified Dirac: table with zero tail.
    TableZeroTail { table: &'a RadialTable, gamma0: f64 },
    /// Mollified kernel with base-kernel tail.
    TableBaseTail {
        table: &'a RadialTable,
        base: &'a CovarianceKernel,
        gamma0: f64,
    },
    /// Any other kernel, evaluated directly.
    Direct(&'a CovarianceKernel),
}

impl RadialEval<'_> {
    #[inline(always)]
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            RadialEval::TableZeroTail { table, gamma0 } => {
                if r == 0.0 {
                    *gamma0
                } else {
                    table.eval(r).unwrap_or(0.0)
                }
            }
            RadialEval::TableBaseTail { table, base, gamma0 } => {
                if r == 0.0 {
                    *gamma0
                } else {
                    match table.eval(r) {
                        Some(v) => v,
                        None => base.gamma_radial(r).unwrap_or(0.0),
                    }
                }
            }
            RadialEval::Direct(k) => k.gamma_radial(r).unwrap_or(f64::INFINITY),
        }
    }

    /// Value at the origin, infinite for unmollified singular kernels.
    pub fn at_zero(&self) -> f64 {
        match self {
            RadialEval::TableZeroTail { gamma0, .. }
            | RadialEval::TableBaseTail { gamma0, .. } => *gamma0,
            RadialEval::Direct(k) => k.gamma_radial(0.0).unwrap_or(f64::INFINITY),
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    match x.len() {
        1 => x[0].abs(),
        _ => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
    }
}
