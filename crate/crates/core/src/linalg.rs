//! Small dense linear algebra on row-major slices.

use nalgebra::{DMatrix, DVector};

use crate::jet::Scalar;

/// Inverse of an `n × n` matrix over any scalar, by Gauss–Jordan elimination
/// with partial pivoting on the leading values. `None` if a pivot vanishes.
pub fn invert<S: Scalar>(a: &[S], n: usize) -> Option<Vec<S>> {
    assert_eq!(a.len(), n * n);
    let one = a[0].lift(1.0);
    let zero = a[0].zero_like();
    let mut m: Vec<S> = a.to_vec();
    let mut inv: Vec<S> = (0..n * n)
        .map(|k| if k / n == k % n { one.clone() } else { zero.clone() })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| m[r * n + col].value().abs().total_cmp(&m[s * n + col].value().abs()))?;
        if m[pivot * n + col].value() == 0.0 || !m[pivot * n + col].value().is_finite() {
            return None;
        }
        if pivot != col {
            for c in 0..n {
                m.swap(pivot * n + c, col * n + c);
                inv.swap(pivot * n + c, col * n + c);
            }
        }
        let r = m[col * n + col].recip();
        for c in 0..n {
            m[col * n + c] = m[col * n + c].clone() * r.clone();
            inv[col * n + c] = inv[col * n + c].clone() * r.clone();
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = m[row * n + col].clone();
            for c in 0..n {
                let mc = m[col * n + c].clone();
                let ic = inv[col * n + c].clone();
                m[row * n + c] = m[row * n + c].clone() - f.clone() * mc;
                inv[row * n + c] = inv[row * n + c].clone() - f.clone() * ic;
            }
        }
    }
    Some(inv)
}

/// Determinant of an `n × n` f64 matrix (LU with partial pivoting).
pub fn det(a: &[f64], n: usize) -> f64 {
    let mut m = a.to_vec();
    let mut d = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| m[r * n + col].abs().total_cmp(&m[s * n + col].abs()))
            .expect("nonempty");
        let p = m[pivot * n + col];
        if p == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for c in 0..n {
                m.swap(pivot * n + c, col * n + c);
            }
            d = -d;
        }
        d *= p;
        for row in col + 1..n {
            let f = m[row * n + col] / p;
            if f != 0.0 {
                for c in col..n {
                    m[row * n + c] -= f * m[col * n + c];
                }
            }
        }
    }
    d
}

/// Determinant of the matrix whose columns are `cols`.
pub fn det_columns(cols: &[&[f64]]) -> f64 {
    let n = cols.len();
    let mut m = vec![0.0; n * n];
    for (c, col) in cols.iter().enumerate() {
        for r in 0..n {
            m[r * n + c] = col[r];
        }
    }
    det(&m, n)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &[f64], n: usize) -> f64 {
    let m = DMatrix::from_row_slice(n, n, a);
    m.symmetric_eigen().eigenvalues.min()
}

/// `true` when the symmetric matrix admits a Cholesky factorization.
pub fn is_positive_definite(a: &[f64], n: usize) -> bool {
    DMatrix::from_row_slice(n, n, a).cholesky().is_some()
}

/// Least-squares solution of `A x = b` with its residual norm and the
/// 2-norm condition number of `A`.
pub fn solve_least_squares(a: &[f64], rows: usize, cols: usize, b: &[f64]) -> (Vec<f64>, f64, f64) {
    let m = DMatrix::from_row_slice(rows, cols, a);
    let rhs = DVector::from_column_slice(b);
    let sv = m.clone().singular_values();
    let smax = sv.max();
    let smin = if rows >= cols { sv.min() } else { 0.0 };
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    // The SVD solve occasionally returns a visibly wrong answer on
    // well-conditioned inputs, so square systems go through pivoted LU with
    // one refinement step.
    let x = if rows == cols && condition.is_finite() {
        let lu = m.clone().full_piv_lu();
        match lu.solve(&rhs) {
            Some(mut x) => {
                if let Some(dx) = lu.solve(&(&rhs - &m * &x)) {
                    x += dx;
                }
                x
            }
            None => DVector::zeros(cols),
        }
    } else {
        m.clone()
            .svd(true, true)
            .solve(&rhs, smax * f64::EPSILON * rows.max(cols) as f64)
            .unwrap_or_else(|_| DVector::zeros(cols))
    };
    let residual = (&m * &x - rhs).norm();
    (x.iter().copied().collect(), residual, condition)
}

/// Row-major product of an `r × k` and a `k × c` matrix.
pub fn matmul(a: &[f64], b: &[f64], r: usize, k: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for l in 0..k {
            let x = a[i * k + l];
            if x == 0.0 {
                continue;
            }
            for j in 0..c {
                out[i * c + j] += x * b[l * c + j];
            }
        }
    }
    out
}

/// `exp(A)` of a square matrix.
pub fn expm(a: &[f64], n: usize) -> Vec<f64> {
    let m = DMatrix::from_row_slice(n, n, a).exp();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = m[(i, j)];
        }
    }
    out
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::Jet;

    #[test]
    fn inverse_times_matrix_is_identity() {
        let a = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];
        let inv = invert(&a, 3).unwrap();
        let id = matmul(&a, &inv, 3, 3, 3);
        for (k, v) in id.iter().enumerate() {
            let want = (k / 3 == k % 3) as u8 as f64;
            assert!((v - want).abs() < 1e-14);
        }
        assert!(invert(&[1.0, 2.0, 2.0, 4.0], 2).is_none());
    }

    #[test]
    fn jet_inverse_differentiates_like_minus_ainv_da_ainv() {
        let x = Jet::seed(&[0.4], 1);
        let t = x[0].clone();
        // A(t) = [[2 + t, t], [t, 1]]
        let a = vec![t.clone() + 2.0, t.clone(), t.clone(), t.lift(1.0)];
        let inv = invert(&a, 2).unwrap();
        let a0 = [2.4, 0.4, 0.4, 1.0];
        let i0 = invert(&a0, 2).unwrap();
        let da = [1.0, 1.0, 1.0, 0.0];
        let want = matmul(&matmul(&i0, &da, 2, 2, 2), &i0, 2, 2, 2);
        for k in 0..4 {
            assert!((inv[k].value() - i0[k]).abs() < 1e-14);
            assert!((inv[k].partial(&[0]).unwrap() + want[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn determinant_and_least_squares() {
        let a = [2.0, 0.0, 1.0, 1.0, 3.0, 0.0, 0.0, 1.0, 1.0];
        assert!((det(&a, 3) - 7.0).abs() < 1e-14);
        let (x, res, cond) = solve_least_squares(&a, 3, 3, &[3.0, 4.0, 2.0]);
        assert!(res < 1e-13);
        assert!(cond > 1.0 && cond.is_finite());
        assert!((x[0] - 1.0).abs() < 1e-13 && (x[1] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn expm_of_rotation_generator() {
        let t = 0.7f64;
        let r = expm(&[0.0, -t, t, 0.0], 2);
        assert!((r[0] - t.cos()).abs() < 1e-14 && (r[2] - t.sin()).abs() < 1e-14);
    }
}
