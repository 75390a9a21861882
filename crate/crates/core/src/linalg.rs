//! Dense symmetric eigen-decomposition for the small covariance matrices
//! CMA-ES maintains (d ≤ a few dozen).

use crate::Scalar;

/// Row-major square matrix.
pub type Matrix<S> = Vec<Vec<S>>;

pub fn identity<S: Scalar>(n: usize) -> Matrix<S> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { S::one() } else { S::zero() }).collect())
        .collect()
}

/// Eigenvalues and eigenvectors of a symmetric matrix by cyclic Jacobi rotations.
/// Column `k` of the returned matrix is the eigenvector of `values[k]`.
pub fn symmetric_eigen<S: Scalar>(m: &Matrix<S>) -> (Vec<S>, Matrix<S>) {
    let n = m.len();
    let mut a = m.clone();
    let mut v = identity::<S>(n);
    let eps = S::epsilon();
    for _sweep in 0..100 {
        let off: S = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let diag: S = (0..n).map(|i| a[i][i] * a[i][i]).sum();
        if off <= eps * eps * diag || off == S::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q] == S::zero() {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (S::lit(2.0) * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + S::one()).sqrt());
                let c = S::one() / (t * t + S::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

/// `B diag(values) Bᵀ`.
pub fn compose<S: Scalar>(values: &[S], vectors: &Matrix<S>) -> Matrix<S> {
    let n = values.len();
    let mut out = vec![vec![S::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            out[i][j] = (0..n).map(|k| vectors[i][k] * values[k] * vectors[j][k]).sum();
        }
    }
    out
}

pub fn mat_vec<S: Scalar>(m: &Matrix<S>, v: &[S]) -> Vec<S> {
    m.iter().map(|row| row.iter().zip(v).map(|(&a, &b)| a * b).sum()).collect()
}

pub fn norm<S: Scalar>(v: &[S]) -> S {
    v.iter().map(|&x| x * x).sum::<S>().sqrt()
}
