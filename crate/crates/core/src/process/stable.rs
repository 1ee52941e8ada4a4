//! Stable random variates by the Chambers-Mallows-Stuck transformation.

use rand::Rng;

/// Standard symmetric alpha-stable variate with characteristic function
/// `E e^{i xi X} = e^{-|xi|^alpha}`, `alpha in (0, 2]`.
///
/// Uses `X = sin(alpha V) / cos(V)^{1/alpha} * (cos((1-alpha) V) / E)^{(1-alpha)/alpha}`
/// with `V` uniform on `(-pi/2, pi/2)` and `E` standard exponential.  At
/// `alpha = 1` this degenerates to `tan V` (Cauchy); at `alpha = 2` to
/// `2 sin V sqrt(E)`, a normal with variance 2.
pub fn sample_symmetric_stable<R: Rng>(alpha: f64, rng: &mut R) -> f64 {
    debug_assert!(alpha > 0.0 && alpha <= 2.0);
    let v = std::f64::consts::FRAC_PI_2 * (2.0 * rng.gen::<f64>() - 1.0);
    if (alpha - 1.0).abs() < 1e-12 {
        return v.tan();
    }
    let e: f64 = -rng.gen::<f64>().ln();
    let num = (alpha * v).sin() / v.cos().powf(1.0 / alpha);
    num * (((1.0 - alpha) * v).cos() / e).powf((1.0 - alpha) / alpha)
}

/// One-sided (positive) beta-stable variate with Laplace transform
/// `E e^{-lambda S} = e^{-lambda^beta}`, `beta in (0, 1)` (Kanter's
/// representation).
pub fn sample_one_sided_stable<R: Rng>(beta: f64, rng: &mut R) -> f64 {
    debug_assert!(beta > 0.0 && beta < 1.0);
    let u = std::f64::consts::PI * rng.gen::<f64>();
    let e: f64 = -rng.gen::<f64>().ln();
    let a = ((beta * u).sin() / u.sin().powf(1.0 / beta))
        * (((1.0 - beta) * u).sin()).powf((1.0 - beta) / beta);
    a * e.powf(-(1.0 - beta) / beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::sample_stream;

    #[test]
    fn cauchy_case_is_tan() {
        // alpha = 1 must match the arctan inverse-CDF law: check the CF
        let mut rng = sample_stream(11, 0);
        let n = 200_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let x = sample_symmetric_stable(1.0, &mut rng);
            acc += (1.5 * x).cos();
        }
        let cf = acc / n as f64;
        assert!((cf - (-1.5f64).exp()).abs() < 0.01, "cf = {cf}");
    }

    #[test]
    fn one_sided_laplace_transform() {
        let mut rng = sample_stream(12, 0);
        let n = 200_000;
        let beta = 0.6;
        let mut acc = 0.0;
        for _ in 0..n {
            let s = sample_one_sided_stable(beta, &mut rng);
            acc += (-0.7 * s).exp();
        }
        let lt = acc / n as f64;
        let exact = (-0.7f64.powf(beta)).exp();
        assert!((lt - exact).abs() < 0.005, "lt = {lt}, exact = {exact}");
    }
}
