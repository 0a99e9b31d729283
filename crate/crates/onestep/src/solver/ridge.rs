//! Weighted ridge regression by direct normal-equation solves; the inner
//! engine of the local quadratic approximation.

use nalgebra::{DMatrix, DVector};

use super::SolverError;
use crate::data::Dataset;

/// Minimizes `0.5 * ||y - X b||^2 + sum_j d_j b_j^2` exactly.
///
/// Entries of `diag` must be nonnegative; `+inf` drops the coordinate (its
/// coefficient is exactly zero and the rest are refit without it). Errors if
/// the regularized normal equations are singular, naming the null-space
/// dimension.
pub fn solve_ridge_weighted(data: &Dataset, diag: &DVector<f64>) -> Result<DVector<f64>, SolverError> {
    let p = data.p();
    if diag.len() != p {
        return Err(SolverError::Invalid(format!(
            "diag length {} does not match p = {}",
            diag.len(),
            p
        )));
    }
    for (j, &d) in diag.iter().enumerate() {
        if d.is_nan() || d < 0.0 {
            return Err(SolverError::Invalid(format!(
                "diag {j} must be >= 0 (or +inf), got {d}"
            )));
        }
    }
    let keep: Vec<usize> = (0..p).filter(|&j| diag[j].is_finite()).collect();
    let mut beta = DVector::zeros(p);
    if keep.is_empty() {
        return Ok(beta);
    }
    let x = data.x();
    let n = data.n();
    let xk = DMatrix::from_fn(n, keep.len(), |i, c| x[(i, keep[c])]);
    let mut a = xk.transpose() * &xk;
    for (c, &j) in keep.iter().enumerate() {
        a[(c, c)] += 2.0 * diag[j];
    }
    let b = xk.transpose() * data.y();
    let solved = match a.clone().cholesky() {
        Some(ch) => {
            let mut s = ch.solve(&b);
            // one step of iterative refinement tightens the residual
            let correction = ch.solve(&(&b - &a * &s));
            s += correction;
            s
        }
        None => {
            let eig = a.clone().symmetric_eigen();
            let max_ev = eig.eigenvalues.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
            let null_dim = eig
                .eigenvalues
                .iter()
                .filter(|&&v| v.abs() <= 1e-12 * max_ev.max(1.0))
                .count();
            return Err(SolverError::Singular { null_dim });
        }
    };
    let rel_residual = (&b - &a * &solved).norm() / b.norm().max(1.0);
    if rel_residual > 1e-10 {
        let eig = a.symmetric_eigen();
        let max_ev = eig.eigenvalues.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
        let null_dim = eig
            .eigenvalues
            .iter()
            .filter(|&&v| v.abs() <= 1e-10 * max_ev.max(1.0))
            .count()
            .max(1);
        return Err(SolverError::Singular { null_dim });
    }
    for (c, &j) in keep.iter().enumerate() {
        beta[j] = solved[c];
    }
    Ok(beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Family;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_diag_recovers_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = DMatrix::from_fn(30, 4, |_, _| rng.random::<f64>() - 0.5);
        let y = DVector::from_fn(30, |_, _| rng.random::<f64>() - 0.5);
        let ls = x.clone().svd(true, true).solve(&y, 1e-12).unwrap();
        let data = Dataset::new(x, y, Family::Gaussian, false).unwrap();
        let b = solve_ridge_weighted(&data, &DVector::zeros(4)).unwrap();
        for j in 0..4 {
            assert_abs_diff_eq!(b[j], ls[j], epsilon = 1e-10);
        }
    }

    #[test]
    fn orthonormal_shrinkage_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let raw = DMatrix::from_fn(25, 5, |_, _| rng.random::<f64>() - 0.5);
        let q = raw.qr().q();
        let x = DMatrix::from_fn(25, 5, |i, j| q[(i, j)]);
        let y = DVector::from_fn(25, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let diag = DVector::from_fn(5, |j, _| 0.3 * (j as f64 + 1.0));
        let data = Dataset::new(x.clone(), y.clone(), Family::Gaussian, false).unwrap();
        let b = solve_ridge_weighted(&data, &diag).unwrap();
        for j in 0..5 {
            let z = x.column(j).dot(&y);
            assert_abs_diff_eq!(b[j], z / (1.0 + 2.0 * diag[j]), epsilon = 1e-10);
        }
    }

    #[test]
    fn infinite_diag_drops_and_refits() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = DMatrix::from_fn(30, 3, |_, _| rng.random::<f64>() - 0.5);
        let y = DVector::from_fn(30, |_, _| rng.random::<f64>() - 0.5);
        let data = Dataset::new(x.clone(), y.clone(), Family::Gaussian, false).unwrap();
        let mut diag = DVector::zeros(3);
        diag[1] = f64::INFINITY;
        let b = solve_ridge_weighted(&data, &diag).unwrap();
        assert_eq!(b[1], 0.0);
        // remaining coordinates are the least squares on columns {0, 2}
        let xr = DMatrix::from_fn(30, 2, |i, c| x[(i, [0usize, 2][c])]);
        let ls = xr.svd(true, true).solve(&y, 1e-12).unwrap();
        assert_abs_diff_eq!(b[0], ls[0], epsilon = 1e-9);
        assert_abs_diff_eq!(b[2], ls[1], epsilon = 1e-9);
    }

    #[test]
    fn singular_unpenalized_system_errors_with_null_dimension() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let col = DVector::from_fn(20, |_, _| rng.random::<f64>() - 0.5);
        let mut x = DMatrix::zeros(20, 2);
        x.set_column(0, &col);
        x.set_column(1, &col);
        let y = DVector::from_fn(20, |_, _| rng.random::<f64>() - 0.5);
        let data = Dataset::new(x, y, Family::Gaussian, false).unwrap();
        match solve_ridge_weighted(&data, &DVector::zeros(2)) {
            Err(SolverError::Singular { null_dim }) => assert_eq!(null_dim, 1),
            other => panic!("expected Singular, got {other:?}"),
        }
    }
}
