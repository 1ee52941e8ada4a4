//! Small dense symmetric-matrix helpers (K <= 32 covariance blocks) and
//! least-squares fits for log-log slope estimation.

/// Lower-triangular Cholesky factor of a symmetric matrix stored row-major.
/// Returns `None` if a pivot is not strictly positive.
pub fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// y = L * x for lower-triangular L.
pub fn lower_tri_mul(l: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..=i {
            s += l[i * n + j] * x[j];
        }
        y[i] = s;
    }
    y
}

/// Smallest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.
pub fn min_eigenvalue_symmetric(a: &[f64], n: usize) -> f64 {
    let mut m = a.to_vec();
    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[p * n + q] * m[p * n + q];
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + frobenius(&m, n)) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| m[i * n + i]).fold(f64::INFINITY, f64::min)
}

fn frobenius(m: &[f64], n: usize) -> f64 {
    m.iter().take(n * n).map(|x| x * x).sum::<f64>().sqrt()
}

/// Weighted least-squares line `y = a + b x`; weights are inverse variances.
/// Returns `(intercept, slope, slope_std_error)`.
pub fn weighted_line_fit(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    assert_eq!(x.len(), w.len());
    let sw: f64 = w.iter().sum();
    let sx: f64 = x.iter().zip(w).map(|(x, w)| x * w).sum();
    let sy: f64 = y.iter().zip(w).map(|(y, w)| y * w).sum();
    let xbar = sx / sw;
    let ybar = sy / sw;
    let sxx: f64 = x.iter().zip(w).map(|(x, w)| w * (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((x, y), w)| w * (x - xbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    // residual-scaled slope error
    let n = x.len() as f64;
    let mut chi2 = 0.0;
    for i in 0..x.len() {
        let r = y[i] - intercept - slope * x[i];
        chi2 += w[i] * r * r;
    }
    let dof = (n - 2.0).max(1.0);
    let se = (chi2 / dof / sxx).sqrt();
    (intercept, slope, se)
}

/// Unweighted convenience wrapper.
pub fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let w = vec![1.0; x.len()];
    weighted_line_fit(x, y, &w)
}
