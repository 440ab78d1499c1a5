//! Dense symmetric eigensolver (cyclic Jacobi) plus a few helpers built on it.
//!
//! The matrices in this crate are small (structure matrices of a few hundred
//! nodes, design matrices of a handful of dimensions), so an O(n^3) Jacobi
//! sweep with full eigenvector accumulation is plenty.

use nalgebra::DMatrix;

/// Convergence threshold on the off-diagonal Frobenius norm.
pub const JACOBI_TOL: f64 = 1e-12;

const MAX_SWEEPS: usize = 64;

/// Eigendecomposition of a real symmetric matrix.
///
/// `vectors` holds orthonormal eigenvectors as columns, `values[k]` is the
/// eigenvalue of column `k`. No ordering is imposed.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Cyclic Jacobi eigensolver for symmetric matrices.
///
/// Sweeps over all (p, q) pairs applying Givens rotations until the
/// off-diagonal Frobenius norm drops below [`JACOBI_TOL`].
///
/// Panics if the matrix is not square or fails to converge within the sweep
/// budget (does not happen for symmetric input).
pub fn symmetric_eigen(m: &DMatrix<f64>) -> SymEigen {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "eigensolver needs a square matrix");
    let mut a = m.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    if n <= 1 {
        return SymEigen {
            values: a.diagonal().iter().copied().collect(),
            vectors: v,
        };
    }

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) < JACOBI_TOL {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                // Rotation angle that annihilates a[(p, q)].
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                let app = a[(p, p)];
                let aqq = a[(q, q)];
                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    if k != p && k != q {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(p, k)] = a[(k, p)];
                        a[(k, q)] = s * akp + c * akq;
                        a[(q, k)] = a[(k, q)];
                    }
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    assert!(
        converged || off_diagonal_norm(&a) < JACOBI_TOL,
        "Jacobi eigensolver did not converge; input likely not symmetric"
    );

    SymEigen {
        values: a.diagonal().iter().copied().collect(),
        vectors: v,
    }
}

/// Frobenius norm of the off-diagonal part.
pub fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[(i, j)] * a[(i, j)];
            }
        }
    }
    sum.sqrt()
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    let n = m.nrows();
    if n != m.ncols() {
        return false;
    }
    for i in 0..n {
        for j in i + 1..n {
            if (m[(i, j)] - m[(j, i)]).abs() > tol {
                return false;
            }
        }
    }
    true
}

/// Spectral norm (largest absolute eigenvalue) of a symmetric matrix.
pub fn spectral_norm_symmetric(m: &DMatrix<f64>) -> f64 {
    symmetric_eigen(m)
        .values
        .iter()
        .fold(0.0, |acc, &v| acc.max(v.abs()))
}

/// Inverse square root of a symmetric positive-definite matrix.
///
/// Panics if an eigenvalue is not strictly positive; callers only pass
/// ridge-regularized design matrices, which are positive definite by
/// construction.
pub fn inverse_sqrt_spd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = symmetric_eigen(m);
    let n = m.nrows();
    let mut scaled = eig.vectors.clone();
    for (k, &val) in eig.values.iter().enumerate() {
        assert!(
            val > 0.0,
            "matrix is not positive definite (eigenvalue {val})"
        );
        let f = 1.0 / val.sqrt();
        for i in 0..n {
            scaled[(i, k)] *= f;
        }
    }
    &scaled * eig.vectors.transpose()
}
