//! Small dense symmetric solvers used by the regression baselines.
//!
//! Matrices are row-major `n × n` slices. Problem sizes here are tiny (20
//! inputs), so the classical algorithms are plenty.

use crate::scalar::{compensated_sum, Scalar};

/// Lower Cholesky factor of a symmetric positive definite matrix, or `None`
/// when a pivot falls below `rel_tol` times the largest diagonal entry.
pub fn cholesky<T: Scalar>(a: &[T], n: usize, rel_tol: T) -> Option<Vec<T>> {
    debug_assert_eq!(a.len(), n * n);
    let max_diag = (0..n).map(|i| a[i * n + i]).fold(T::zero(), T::max);
    let floor = rel_tol * max_diag.max(T::min_positive_value());
    let mut l = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let dot = compensated_sum((0..j).map(|k| l[i * n + k] * l[j * n + k]));
            let v = a[i * n + j] - dot;
            if i == j {
                if v <= floor || !v.is_finite() {
                    return None;
                }
                l[i * n + i] = v.sqrt();
            } else {
                l[i * n + j] = v / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solves `L Lᵀ x = b` given the factor from [`cholesky`].
pub fn cholesky_solve<T: Scalar>(l: &[T], n: usize, b: &[T]) -> Vec<T> {
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let dot = compensated_sum((0..i).map(|k| l[i * n + k] * y[k]));
        y[i] = (b[i] - dot) / l[i * n + i];
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let dot = compensated_sum((i + 1..n).map(|k| l[k * n + i] * x[k]));
        x[i] = (y[i] - dot) / l[i * n + i];
    }
    x
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` where eigenvector `k` is column `k`
/// of the row-major `n × n` result.
pub fn symmetric_eigen<T: Scalar>(a: &[T], n: usize) -> (Vec<T>, Vec<T>) {
    let mut m = a.to_vec();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let two = T::of(2.0);
    for _sweep in 0..100 {
        let off = compensated_sum((0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i * n + j] * m[i * n + j]));
        let scale = compensated_sum((0..n).map(|i| m[i * n + i] * m[i * n + i]));
        if off <= T::epsilon() * T::epsilon() * scale.max(T::min_positive_value()) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| m[i * n + i]).collect(), v)
}

/// `Xᵀ X` for a row-major `rows × cols` matrix.
pub fn gram<T: Scalar>(x: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut g = vec![T::zero(); cols * cols];
    for i in 0..cols {
        for j in i..cols {
            let s = compensated_sum((0..rows).map(|r| x[r * cols + i] * x[r * cols + j]));
            g[i * cols + j] = s;
            g[j * cols + i] = s;
        }
    }
    g
}

/// `Xᵀ y`.
pub fn xt_y<T: Scalar>(x: &[T], rows: usize, cols: usize, y: &[T]) -> Vec<T> {
    (0..cols).map(|j| compensated_sum((0..rows).map(|r| x[r * cols + j] * y[r]))).collect()
}
