//! Spatial covariance kernels, their spectral densities, and the
//! frequency-domain convergence analysis (Dalang conditions, spectral tail
//! splits, Hölder exponent bounds).
//!
//! Fourier convention: `F f(xi) = int e^{-i x.xi} f(x) dx`, no `2 pi` in the
//! forward transform.  The spectral density `mu_hat` of each catalog kernel
//! is the honest Fourier transform of `gamma` under this convention, so
//! `gamma(x) = (2 pi)^{-d} int e^{i xi.x} mu_hat(xi) dxi`.  Normalizations
//! per variant:
//!
//! * Dirac:      `mu_hat = 1`; pointwise `gamma` is refused.
//! * Riesz:      `gamma = |x|^{-alpha}`, `mu_hat = c(alpha,d) |xi|^{alpha-d}`
//!               with `c(alpha,d) = 2^{d-alpha} pi^{d/2} G((d-alpha)/2)/G(alpha/2)`.
//! * Fractional: `mu_hat = prod |xi_i|^{1-2H_i}` (unit constant on the
//!               spectral side), `gamma = prod |x_i|^{2H_i-2} / c(2-2H_i, 1)`.
//! * Cauchy:     `gamma = prod (1+x_i^2)^{-1}`, `mu_hat = pi^d e^{-sum|xi_i|}`.
//! * Poisson:    `mu_hat = e^{-|xi|}` (unit constant on the spectral side),
//!               `gamma = G((d+1)/2) pi^{-(d+1)/2} (1+|x|^2)^{-(d+1)/2}`.
//! * OrnsteinUhlenbeck: `gamma = e^{-|x|^alpha}`; closed-form `mu_hat` for
//!               `alpha in {1, 2}`, numeric cosine transform otherwise (d=1).

mod dalang;
mod kernel;

pub use dalang::{
    classify_improper_radial, dalang_integral, dalang_power_counting, dalang_verdict,
    default_cutoffs, holder_exponents, tail_split, DalangMode, DalangReport, DalangVerdict,
    ExponentBound, HolderExponents,
};
pub use kernel::{riesz_constant, CovarianceKernel, RadialEval, SpectralTail, TabulatedKernel};
pub(crate) use kernel::sphere_surface;

use crate::error::{EngineError, Result};

/// Temporal exponent plus spatial kernel: the noise covariance is
/// `|t-s|^{-beta0} gamma(x-y)`.
#[derive(Clone, Debug)]
pub struct NoiseSpec {
    beta0: f64,
    pub kernel: CovarianceKernel,
}

impl NoiseSpec {
    /// Rejects `beta0` outside `[0, 1)`: the weight `|t-s|^{-beta0}` must be
    /// locally integrable for `A_t` to be finite.
    pub fn new(beta0: f64, kernel: CovarianceKernel) -> Result<Self> {
        if !(0.0..1.0).contains(&beta0) {
            return Err(EngineError::NonFinite {
                context: "NoiseSpec".into(),
                detail: format!("beta0 = {beta0} outside [0, 1)"),
            });
        }
        Ok(NoiseSpec { beta0, kernel })
    }

    pub fn beta0(&self) -> f64 {
        self.beta0
    }

    /// `A_t = 2 int_0^t s^{-beta0} ds = 2 t^{1-beta0} / (1-beta0)`.
    pub fn a_t(&self, t: f64) -> f64 {
        2.0 * t.powf(1.0 - self.beta0) / (1.0 - self.beta0)
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }
}

/// Split of the spectral measure at radius `N`: mass inside and the
/// `Psi^{-(1-beta0)}`-weighted tail outside.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralSplit {
    pub n: f64,
    pub m_n: f64,
    pub eps_n: f64,
}

/// Numeric inverse transform of `mu_hat` in d=1 over the window `[-w, w]`,
/// with one integration-by-parts tail correction for slowly decaying
/// densities:
/// `gamma(x) ~ pi^{-1} [ int_0^w cos(xi x) mu_hat(xi) dxi + mu_hat(w) sin(w x)/x ]`.
pub fn inverse_transform_1d(kernel: &CovarianceKernel, x: f64, w: f64) -> Result<f64> {
    assert_eq!(kernel.dim(), 1);
    assert!(x != 0.0, "use a nonzero test point");
    let f = |xi: f64| {
        let m = kernel.spectral_density(&[xi]).unwrap_or(0.0);
        m * (xi * x).cos()
    };
    // split off a possible power singularity of mu_hat at 0
    let head = if kernel.spectrum_singular_at_zero() {
        let p = kernel.spectral_power_at_zero();
        crate::quad::integrate_power_weighted(
            &|xi: f64| {
                if xi == 0.0 {
                    return 0.0;
                }
                kernel.spectral_density(&[xi]).unwrap_or(0.0) / xi.powf(p) * (xi * x).cos()
            },
            p,
            1.0,
            1e-10,
            1e-8,
        )?
    } else {
        crate::quad::integrate(&f, 0.0, 1.0, 1e-10, 1e-8, 4000)?
    };
    let body = crate::quad::integrate(&f, 1.0, w, 1e-10, 1e-8, 200_000)?;
    // one integration by parts: int_w^inf mu cos = -mu(w) sin(wx)/x + O(mu'(w)/x^2)
    let tail = -kernel.spectral_density(&[w])? * (w * x).sin() / x;
    Ok((head + body + tail) / std::f64::consts::PI)
}
