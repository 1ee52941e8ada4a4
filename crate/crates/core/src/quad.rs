//! Adaptive Gauss-Kronrod quadrature.
//!
//! A 15-point Kronrod rule with embedded 7-point Gauss rule drives an
//! interval-splitting refinement loop.  Singular endpoint weights of the
//! form `u^p` with `p > -1` are removed by the power substitution
//! `u = v^{1/(1+p)}` before the adaptive rule is applied.

use crate::error::{EngineError, Result};

// 15-point Kronrod abscissae on [-1, 1] (positive half) and weights,
// with the embedded 7-point Gauss weights.
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// One Gauss-Kronrod panel: returns (kronrod value, |kronrod - gauss|).
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let fsum = f(c - x) + f(c + x);
        kronrod += WGK[j] * fsum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * fsum;
        }
    }
    (kronrod * h, (kronrod - gauss).abs() * h.abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

/// Adaptive integration of `f` over `[a, b]`.
///
/// Splits the panel with the largest error estimate until the total error
/// drops below `abs_tol + rel_tol * |integral|` or the panel budget is hit.
pub fn integrate<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (v, e) = gk15(f, a, b);
    let mut panels = vec![Panel {
        a,
        b,
        value: v,
        err: e,
    }];
    loop {
        let total: f64 = panels.iter().map(|p| p.value).sum();
        let err: f64 = panels.iter().map(|p| p.err).sum();
        if !total.is_finite() {
            return Err(EngineError::NonFinite {
                context: "quadrature".into(),
                detail: format!("integrand non-finite on [{a}, {b}]"),
            });
        }
        if err <= abs_tol + rel_tol * total.abs() {
            return Ok(total);
        }
        if panels.len() >= max_panels {
            return Err(EngineError::QuadratureFailure(format!(
                "error {err:.3e} above tolerance after {} panels on [{a}, {b}]",
                panels.len()
            )));
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .map(|(i, _)| i)
            .unwrap();
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        for (lo, hi) in [(p.a, mid), (mid, p.b)] {
            let (v, e) = gk15(f, lo, hi);
            panels.push(Panel {
                a: lo,
                b: hi,
                value: v,
                err: e,
            });
        }
    }
}

/// Default tolerances used by the spectral-side integrals.
pub const ABS_TOL: f64 = 1e-8;
pub const REL_TOL: f64 = 1e-6;

pub fn integrate_default<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<f64> {
    integrate(f, a, b, ABS_TOL, REL_TOL, 4000)
}

/// Integrates `u^p * g(u)` over `[0, b]` for `p > -1` via `u = v^{1/(1+p)}`,
/// which maps the weighted integral to `(1/(1+p)) * int_0^{b^{1+p}} g(v^{1/(1+p)}) dv`.
pub fn integrate_power_weighted<G: Fn(f64) -> f64>(
    g: &G,
    p: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    assert!(p > -1.0, "power weight must be integrable");
    if b <= 0.0 {
        return Ok(0.0);
    }
    if p == 0.0 {
        return integrate(g, 0.0, b, abs_tol, rel_tol, 4000);
    }
    let q = 1.0 + p;
    let inner = |v: f64| g(v.powf(1.0 / q));
    Ok(integrate(&inner, 0.0, b.powf(q), abs_tol, rel_tol, 4000)? / q)
}
