//! Deterministic order-2 chaos coefficient.
//!
//! After the frequency substitution `eta_1 = xi_1`, `eta_2 = xi_1 + xi_2`
//! the inner integral depends on the times only through the two damping
//! spans `a_1 = (t_2-t_1) + (s_2-s_1)` and `a_2 = (t-t_2) + (t-s_2)`:
//!
//! ```text
//! Ghat(a1, a2) = (2 pi)^{-2d} int int e^{-a1 Psi(eta1) - a2 Psi(eta2)}
//!                 mu_hat(eta1) mu_hat(eta2 - eta1) deta1 deta2.
//! ```
//!
//! The time integral runs product-integrated cells over both ordered pairs;
//! `Ghat` is closed-form Gaussian for the (mollified) Dirac kernel with a
//! quadratic exponent and is otherwise interpolated from a table in
//! `(sqrt(a1), sqrt(a2))` filled by nested adaptive quadrature (d = 1).

use super::{psi_inverse, ChaosBudget};
use crate::error::{EngineError, Result};
use crate::hamiltonian::time_weight_cell;
use crate::process::ProcessSpec;
use crate::quad;
use crate::spectral::{CovarianceKernel, NoiseSpec};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

enum GhatEval {
    /// `(4 pi)^{-1} det(M)^{-1/2}` with
    /// `M = [[c a1 + eps, -eps/2], [-eps/2, c a2 + eps/2]]`
    GaussianClosedForm { c: f64, eps: f64 },
    Table(GhatTable),
}

impl GhatEval {
    fn eval(&self, a1: f64, a2: f64) -> f64 {
        match self {
            GhatEval::GaussianClosedForm { c, eps } => {
                let m11 = c * a1 + eps;
                let m22 = c * a2 + 0.5 * eps;
                let det = m11 * m22 - 0.25 * eps * eps;
                if det <= 0.0 {
                    return 0.0;
                }
                1.0 / (4.0 * std::f64::consts::PI * det.sqrt())
            }
            GhatEval::Table(t) => t.eval(a1, a2),
        }
    }
}

struct GhatTable {
    m: usize,
    s1_max: f64,
    s2_max: f64,
    values: Vec<f64>,
}

impl GhatTable {
    fn eval(&self, a1: f64, a2: f64) -> f64 {
        let u = (a1.max(0.0).sqrt() / self.s1_max * (self.m - 1) as f64).min((self.m - 1) as f64 - 1e-9);
        let v = (a2.max(0.0).sqrt() / self.s2_max * (self.m - 1) as f64).min((self.m - 1) as f64 - 1e-9);
        let (i, j) = (u as usize, v as usize);
        let (fu, fv) = (u - i as f64, v - j as f64);
        let m = self.m;
        let at = |i: usize, j: usize| self.values[i * m + j];
        at(i, j) * (1.0 - fu) * (1.0 - fv)
            + at(i + 1, j) * fu * (1.0 - fv)
            + at(i, j + 1) * (1.0 - fu) * fv
            + at(i + 1, j + 1) * fu * fv
    }
}

fn ghat_numeric(noise: &NoiseSpec, process: &ProcessSpec, a1: f64, a2: f64) -> Result<f64> {
    // nested 1-D adaptive quadrature; d = 1 only
    let kernel = &noise.kernel;
    let cut1 = psi_inverse(process, 42.0 / a1.max(1e-12)).max(2.0);
    let cut2 = psi_inverse(process, 42.0 / a2.max(1e-12)).max(2.0);
    let p0 = kernel.spectral_power_at_zero();
    let inner = |e1: f64| -> f64 {
        // int e^{-a2 Psi(eta2)} mu_hat(eta2 - e1) deta2, singular at eta2 = e1
        let g = |w: f64| {
            // w = eta2 - e1
            let damp = (-a2 * process.psi_radial((e1 + w).abs())).exp();
            kernel.spectral_density(&[w]).unwrap_or(0.0) * damp
        };
        let lim = cut2 + e1.abs() + 1.0;
        let v = if p0 < 0.0 {
            let half = |sgn: f64| {
                quad::integrate_power_weighted(
                    &|r: f64| if r == 0.0 { 0.0 } else { g(sgn * r) / r.powf(p0) },
                    p0,
                    lim,
                    1e-11,
                    1e-7,
                )
                .unwrap_or(f64::NAN)
            };
            half(1.0) + half(-1.0)
        } else {
            quad::integrate(&g, -lim, lim, 1e-11, 1e-7, 20_000).unwrap_or(f64::NAN)
        };
        v
    };
    let outer = |e1: f64| -> f64 {
        let m1 = kernel.spectral_density(&[e1]).unwrap_or(0.0);
        if m1 == 0.0 {
            return 0.0;
        }
        m1 * (-a1 * process.psi_radial(e1.abs())).exp() * inner(e1)
    };
    let v = if p0 < 0.0 {
        let half = |sgn: f64| {
            quad::integrate_power_weighted(
                &|r: f64| if r == 0.0 { 0.0 } else { outer(sgn * r) / r.powf(p0) },
                p0,
                cut1,
                1e-10,
                1e-6,
            )
        };
        half(1.0)? + half(-1.0)?
    } else {
        quad::integrate(&outer, -cut1, cut1, 1e-10, 1e-6, 8000)?
    };
    Ok(v * TWO_PI.powf(-2.0))
}

fn build_ghat(
    t: f64,
    noise: &NoiseSpec,
    process: &ProcessSpec,
) -> Result<GhatEval> {
    // closed form for flat or Gaussian-damped flat spectra with a
    // quadratic exponent
    let quad_coef = match process.psi_growth_exponent() {
        Some(p) if (p - 2.0).abs() < 1e-12 => match &process.variant {
            crate::process::ProcessVariant::Brownian => Some(0.5),
            crate::process::ProcessVariant::IsotropicStable { .. } => Some(1.0),
            _ => None,
        },
        _ => None,
    };
    if noise.dim() == 1 {
        if let Some(c) = quad_coef {
            match &noise.kernel {
                CovarianceKernel::Dirac { .. } => {
                    return Ok(GhatEval::GaussianClosedForm { c, eps: 0.0 })
                }
                CovarianceKernel::Mollified { base, epsilon, .. } => {
                    if matches!(base.as_ref(), CovarianceKernel::Dirac { .. }) {
                        return Ok(GhatEval::GaussianClosedForm { c, eps: *epsilon });
                    }
                }
                _ => {}
            }
        }
    }
    if noise.dim() != 1 {
        return Err(EngineError::QuadratureFailure(
            "deterministic order-2 norm requires d = 1 outside the Gaussian fast path".into(),
        ));
    }
    let m = 48;
    let s1_max = (2.0 * t).sqrt();
    let s2_max = (2.0 * t).sqrt();
    let mut values = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            let a1 = (i as f64 / (m - 1) as f64 * s1_max).powi(2);
            let a2 = (j as f64 / (m - 1) as f64 * s2_max).powi(2);
            // keep the corner finite: clamp the spans away from zero at the
            // scale of one table cell
            let floor1 = (s1_max / (m - 1) as f64).powi(2) * 0.25;
            let floor2 = (s2_max / (m - 1) as f64).powi(2) * 0.25;
            values[i * m + j] = ghat_numeric(noise, process, a1.max(floor1), a2.max(floor2))?;
        }
    }
    Ok(GhatEval::Table(GhatTable {
        m,
        s1_max,
        s2_max,
        values,
    }))
}

/// Deterministic tensor quadrature for `K_2`.
pub(super) fn order_two(
    t: f64,
    noise: &NoiseSpec,
    process: &ProcessSpec,
    budget: &ChaosBudget,
) -> Result<f64> {
    let ghat = build_ghat(t, noise, process)?;
    let beta0 = noise.beta0();
    let m = (budget.time_grid / 4).max(24);
    let h = t / m as f64;
    // product-integrated time weights for one (t_j, s_j) plane
    let cell = |i: usize, j: usize| -> f64 {
        time_weight_cell(
            i as f64 * h,
            (i + 1) as f64 * h,
            j as f64 * h,
            (j + 1) as f64 * h,
            beta0,
        )
    };
    let mut w = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            w[i * m + j] = cell(i, j);
        }
    }
    let mid = |i: usize| (i as f64 + 0.5) * h;
    // accumulate over (t1, s1) and (t2, s2) cells with the ordering
    // indicators evaluated at midpoints
    let mut acc = 0.0;
    for i1 in 0..m {
        for j1 in 0..m {
            let w1 = w[i1 * m + j1];
            if w1 == 0.0 {
                continue;
            }
            let (t1, s1) = (mid(i1), mid(j1));
            let mut inner = 0.0;
            for i2 in (i1 + 1)..m {
                let t2 = mid(i2);
                for j2 in (j1 + 1)..m {
                    let s2 = mid(j2);
                    let a1 = (t2 - t1) + (s2 - s1);
                    let a2 = (t - t2) + (t - s2);
                    inner += w[i2 * m + j2] * ghat.eval(a1, a2);
                }
            }
            acc += w1 * inner;
        }
    }
    // 2! times the ordered double-simplex integral
    Ok(2.0 * acc)
}
