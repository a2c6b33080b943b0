//! Small dense symmetric-matrix routines for the K x K SODDC eigenproblem.

/// Eigenvalues of a symmetric `n x n` matrix (row-major) via cyclic Jacobi
/// rotations.
///
/// Iterates full sweeps until the off-diagonal Frobenius norm drops below
/// `1e-12` times the initial Frobenius norm. Deterministic: fixed sweep
/// order, no pivot search.
pub fn sym_eigenvalues(n: usize, mat: &[f64]) -> Vec<f64> {
    assert_eq!(mat.len(), n * n);
    let mut a = mat.to_vec();
    let frob: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let tol = 1e-12 * frob.max(f64::MIN_POSITIVE);
    for _sweep in 0..50 {
        let off: f64 = {
            let mut s = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    s += a[p * n + q] * a[p * n + q];
                }
            }
            (2.0 * s).sqrt()
        };
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // update rows/columns p and q
                for i in 0..n {
                    if i == p || i == q {
                        continue;
                    }
                    let aip = a[i * n + p];
                    let aiq = a[i * n + q];
                    a[i * n + p] = c * aip - s * aiq;
                    a[p * n + i] = a[i * n + p];
                    a[i * n + q] = s * aip + c * aiq;
                    a[q * n + i] = a[i * n + q];
                }
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}

/// Determinant of a symmetric matrix via LDL^T factorization without
/// pivoting; returns 0 when a pivot vanishes.
pub fn sym_det_ldlt(n: usize, mat: &[f64]) -> f64 {
    assert_eq!(mat.len(), n * n);
    let mut a = mat.to_vec();
    let mut det = 1.0;
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            let l = a[j * n + k];
            d -= l * l * a[k * n + k];
        }
        a[j * n + j] = d;
        if d == 0.0 {
            return 0.0;
        }
        det *= d;
        for i in (j + 1)..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k] * a[k * n + k];
            }
            a[i * n + j] = v / d;
        }
    }
    det
}
