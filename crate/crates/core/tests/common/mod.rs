//! Independent oracles for the verification suites.
//!
//! Shared across several test targets, each of which uses a subset.
//!
//! Everything here deliberately avoids the crate's own numerical paths:
//! eigendecompositions go through nalgebra's tridiagonalization-based
//! `SymmetricEigen` (the production code uses cyclic Jacobi), and
//! characteristic polynomials are assembled by Faddeev-LeVerrier and solved
//! with Durand-Kerner.

#![allow(dead_code)]

use nalgebra::linalg::SymmetricEigen;
use nalgebra::{Complex, DMatrix, DVector};

/// Scalar Chebyshev polynomial of the first kind via the three-term
/// recurrence.
pub fn cheb(q: usize, x: f64) -> f64 {
    match q {
        0 => 1.0,
        1 => x,
        _ => {
            let mut t0 = 1.0;
            let mut t1 = x;
            for _ in 2..=q {
                let t2 = 2.0 * x * t1 - t0;
                t0 = t1;
                t1 = t2;
            }
            t1
        }
    }
}

/// `T_q(W / lambda2) / T_q(1 / lambda2)` assembled from an eigendecomposition.
pub fn chebyshev_matrix_via_eigen(w: &DMatrix<f64>, lambda2: f64, q: usize) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(w.clone());
    let norm = cheb(q, 1.0 / lambda2);
    let scaled = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| cheb(q, l / lambda2) / norm),
    );
    &eig.eigenvectors * DMatrix::from_diagonal(&scaled) * eig.eigenvectors.transpose()
}

/// Spectral norm via the independent eigensolver.
pub fn spectral_norm_via_eigen(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Second-largest absolute eigenvalue via the independent eigensolver.
pub fn lambda2_via_eigen(w: &DMatrix<f64>) -> f64 {
    let mut vals: Vec<f64> = SymmetricEigen::new(w.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    let top = vals
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 1.0).abs().partial_cmp(&(b.1 - 1.0).abs()).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    vals.remove(top);
    vals.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Coefficients of the characteristic polynomial (monic, ascending powers)
/// by the Faddeev-LeVerrier recursion.
pub fn charpoly_coefficients(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut coeffs = vec![0.0; n + 1];
    coeffs[n] = 1.0;
    let mut m = DMatrix::<f64>::identity(n, n);
    for k in 1..=n {
        m = a * &m;
        let c = -m.trace() / k as f64;
        coeffs[n - k] = c;
        for i in 0..n {
            m[(i, i)] += c;
        }
    }
    coeffs
}

fn poly_eval(coeffs: &[f64], z: Complex<f64>) -> Complex<f64> {
    let mut acc = Complex::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        acc = acc * z + Complex::new(c, 0.0);
    }
    acc
}

/// Durand-Kerner root finder. Accurate for simple roots; callers must not
/// feed it polynomials with (near-)multiple roots.
pub fn durand_kerner(coeffs: &[f64]) -> Vec<f64> {
    let n = coeffs.len() - 1;
    let seed = Complex::new(0.4, 0.9);
    let mut roots: Vec<Complex<f64>> = (0..n).map(|i| seed.powu(i as u32 + 1)).collect();
    for _ in 0..600 {
        let mut max_step: f64 = 0.0;
        for i in 0..n {
            let mut denom = Complex::new(1.0, 0.0);
            for j in 0..n {
                if j != i {
                    denom *= roots[i] - roots[j];
                }
            }
            let step = poly_eval(coeffs, roots[i]) / denom;
            roots[i] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_step < 1e-14 {
            break;
        }
    }
    roots.iter().map(|r| r.re).collect()
}

/// Second-largest absolute eigenvalue from characteristic-polynomial roots.
pub fn lambda2_via_charpoly(w: &DMatrix<f64>) -> f64 {
    let mut roots = durand_kerner(&charpoly_coefficients(w));
    let top = roots
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 1.0).abs().partial_cmp(&(b.1 - 1.0).abs()).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    roots.remove(top);
    roots.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Brute-force optimum of the optimistic objective on the hypercube:
/// max over theta on the boundary of the confidence ellipsoid, and over all
/// sign vectors x, of `<x, theta>` (which is `||theta||_1` at the best x).
/// Only implemented for dimension 2 where the boundary is a circle in the
/// whitened coordinates.
pub fn hypercube_grid_optimum(
    center: &DVector<f64>,
    design: &DMatrix<f64>,
    beta: f64,
    grid: usize,
) -> f64 {
    assert_eq!(center.len(), 2);
    let eig = SymmetricEigen::new(design.clone());
    let inv_sqrt_vals = DVector::from_iterator(2, eig.eigenvalues.iter().map(|&l| 1.0 / l.sqrt()));
    let v_inv_sqrt =
        &eig.eigenvectors * DMatrix::from_diagonal(&inv_sqrt_vals) * eig.eigenvectors.transpose();
    let mut best = f64::NEG_INFINITY;
    for k in 0..grid {
        let phi = 2.0 * std::f64::consts::PI * k as f64 / grid as f64;
        let u = DVector::from_vec(vec![phi.cos(), phi.sin()]);
        let theta = center + &v_inv_sqrt * u * beta;
        let value: f64 = theta.iter().map(|t| t.abs()).sum();
        best = best.max(value);
    }
    best
}
