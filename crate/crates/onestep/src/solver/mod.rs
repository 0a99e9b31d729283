//! Solvers for the subproblems every estimator in this crate reduces to:
//! coordinate descent and a LARS-style path for weighted-L1, direct solves for
//! weighted ridge, and IRLS for the binomial likelihood.
//!
//! Objective convention throughout: `0.5 * ||y - X b||^2 + lambda * sum_j w_j |b_j|`
//! (no `1/n` factor). A weight of `+inf` pins its coordinate to exactly zero.

use nalgebra::DVector;
use thiserror::Error;

use crate::data::{Dataset, Family};

mod irls;
mod lars;
mod ridge;

pub use irls::{irls_penalized, IrlsFit, IrlsOptions};
pub use lars::{lars_path, PathEvent, PathEventKind, SolutionPath};
pub use ridge::solve_ridge_weighted;

/// Default KKT tolerance for coordinate descent.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Default sweep budget for coordinate descent.
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Error)]
pub enum SolverError {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("coordinate descent did not converge after {sweeps} sweeps (KKT residual {kkt:.3e})")]
    NonConvergence {
        sweeps: usize,
        kkt: f64,
        /// Last iterate, for diagnosis.
        beta: DVector<f64>,
    },
    #[error("singular system: null space dimension {null_dim}")]
    Singular { null_dim: usize },
    #[error("separation detected (|linear predictor| > {max_eta}); refit with a stronger lambda")]
    Separation { max_eta: f64 },
    #[error("solution path did not terminate: {0}")]
    PathDegenerate(String),
}

/// A weighted-L1 penalized regression problem over a fixed dataset.
///
/// Minimizes the likelihood loss plus `lambda * sum_j weights_j * |beta_j]`.
/// Coordinates with infinite weight are excluded (held at exactly zero).
#[derive(Debug, Clone)]
pub struct WeightedL1Problem<'a> {
    data: &'a Dataset,
    lambda: f64,
    weights: DVector<f64>,
}

impl<'a> WeightedL1Problem<'a> {
    pub fn new(
        data: &'a Dataset,
        lambda: f64,
        weights: DVector<f64>,
    ) -> Result<Self, SolverError> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(SolverError::Invalid(format!(
                "lambda must be finite and >= 0, got {lambda}"
            )));
        }
        if weights.len() != data.p() {
            return Err(SolverError::Invalid(format!(
                "weights length {} does not match p = {}",
                weights.len(),
                data.p()
            )));
        }
        for (j, &w) in weights.iter().enumerate() {
            if w.is_nan() || w < 0.0 {
                return Err(SolverError::Invalid(format!(
                    "weight {j} must be >= 0 (or +inf), got {w}"
                )));
            }
        }
        Ok(Self {
            data,
            lambda,
            weights,
        })
    }

    /// Uniform unit weights (the plain lasso at `lambda`).
    pub fn unweighted(data: &'a Dataset, lambda: f64) -> Result<Self, SolverError> {
        Self::new(data, lambda, DVector::from_element(data.p(), 1.0))
    }

    pub fn data(&self) -> &Dataset {
        self.data
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// Effective threshold `lambda * w_j`, with the 0 * inf ambiguity resolved
    /// to exclusion (a pinned coordinate stays pinned at any lambda).
    fn threshold(&self, j: usize) -> f64 {
        let w = self.weights[j];
        if w.is_infinite() {
            f64::INFINITY
        } else {
            self.lambda * w
        }
    }

    /// Penalty part of the objective at `beta`. Pinned coordinates at zero
    /// contribute nothing; a pinned coordinate that is nonzero yields `+inf`.
    pub fn penalty_at(&self, beta: &DVector<f64>) -> f64 {
        let mut acc = 0.0;
        for j in 0..beta.len() {
            if beta[j] != 0.0 {
                acc += self.threshold(j) * beta[j].abs();
            }
        }
        acc
    }

    /// Full penalized objective at `beta` (loss per the dataset family, no
    /// intercept).
    pub fn objective(&self, beta: &DVector<f64>) -> f64 {
        let eta = self.data.x() * beta;
        let loss = match self.data.family() {
            Family::Gaussian => {
                let r = self.data.y() - &eta;
                0.5 * r.dot(&r)
            }
            Family::Binomial => negative_log_likelihood(self.data.y(), &eta),
        };
        loss + self.penalty_at(beta)
    }
}

/// `sign(z) * (|z| - a)_+`.
pub fn soft_threshold(z: f64, a: f64) -> f64 {
    if z > a {
        z - a
    } else if z < -a {
        z + a
    } else {
        0.0
    }
}

/// Binomial deviance-scale loss `sum_i log(1 + exp(eta_i)) - y_i * eta_i`.
pub(crate) fn negative_log_likelihood(y: &DVector<f64>, eta: &DVector<f64>) -> f64 {
    let mut acc = 0.0;
    for i in 0..y.len() {
        acc += softplus(eta[i]) - y[i] * eta[i];
    }
    acc
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Maximum KKT stationarity violation of `beta` for the weighted-L1 problem.
///
/// With `g_j = -x_j' r` (`r` the Gaussian residual, or `y - sigmoid(X beta)`
/// for the binomial working analogue): active coordinates contribute
/// `|g_j + lambda w_j sign(beta_j)|`, inactive ones `(|g_j| - lambda w_j)_+`.
/// Pinned coordinates contribute zero while at zero and `+inf` otherwise.
pub fn kkt_check(prob: &WeightedL1Problem<'_>, beta: &DVector<f64>) -> f64 {
    let x = prob.data.x();
    let eta = x * beta;
    let r = match prob.data.family() {
        Family::Gaussian => prob.data.y() - &eta,
        Family::Binomial => {
            DVector::from_iterator(eta.len(), eta.iter().zip(prob.data.y().iter()).map(|(&e, &y)| y - sigmoid(e)))
        }
    };
    let mut worst = 0.0_f64;
    for j in 0..prob.data.p() {
        let t = prob.threshold(j);
        let viol = if t.is_infinite() {
            if beta[j] != 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        } else {
            let g = -x.column(j).dot(&r);
            if beta[j] != 0.0 {
                (g + t * beta[j].signum()).abs()
            } else {
                (g.abs() - t).max(0.0)
            }
        };
        worst = worst.max(viol);
    }
    worst
}

/// Smallest lambda at which the all-zero vector is optimal:
/// `max_j |x_j' y| / w_j` over non-pinned coordinates. Infinite if some
/// coordinate is unpenalized (`w_j = 0`) and correlated with `y`.
pub fn lambda_max(data: &Dataset, weights: &DVector<f64>) -> f64 {
    let mut out = 0.0_f64;
    for j in 0..data.p() {
        let w = weights[j];
        if w.is_infinite() {
            continue;
        }
        let c = data.x().column(j).dot(data.y()).abs();
        if w == 0.0 {
            if c > 1e-12 {
                return f64::INFINITY;
            }
        } else {
            out = out.max(c / w);
        }
    }
    out
}

/// Result of a coordinate-descent solve.
#[derive(Debug, Clone)]
pub struct CdFit {
    pub beta: DVector<f64>,
    pub sweeps: usize,
    pub kkt: f64,
}

/// Solves the weighted-L1 problem by cyclic coordinate descent with
/// active-set iteration, certifying the result with [`kkt_check`].
///
/// Gaussian family only; an initial iterate of zeros is the usual choice.
/// Coordinates with infinite weight end at exactly zero; all other zeros are
/// exact soft-threshold zeros, not epsilon-small values.
pub fn solve_weighted_lasso_cd(
    prob: &WeightedL1Problem<'_>,
    init: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<CdFit, SolverError> {
    if prob.data.family() != Family::Gaussian {
        return Err(SolverError::Invalid(
            "coordinate descent expects a Gaussian problem; use irls_penalized".into(),
        ));
    }
    cd_core(prob, init, 0.0, tol, max_iter)
}

/// Coordinate descent with an extra uniform quadratic term
/// `l2 * sum_j beta_j^2` (used by elastic-net style initial estimators).
pub(crate) fn cd_core(
    prob: &WeightedL1Problem<'_>,
    init: &DVector<f64>,
    l2: f64,
    tol: f64,
    max_iter: usize,
) -> Result<CdFit, SolverError> {
    if !(tol > 0.0) {
        return Err(SolverError::Invalid("tol must be positive".into()));
    }
    let x = prob.data.x();
    let y = prob.data.y();
    let p = prob.data.p();
    let mut beta = init.clone();
    for j in 0..p {
        if prob.weights[j].is_infinite() {
            beta[j] = 0.0;
        }
    }
    let col_sq: Vec<f64> = (0..p).map(|j| x.column(j).dot(&x.column(j))).collect();
    let mut residual = y - x * &beta;

    // A start that already satisfies the certificate is returned unchanged;
    // this makes fixpoints (the L1 case) exact.
    if l2 == 0.0 {
        let kkt = kkt_check(prob, &beta);
        if kkt <= tol {
            return Ok(CdFit {
                beta,
                sweeps: 0,
                kkt,
            });
        }
    }

    let mut sweeps = 0usize;
    loop {
        // one full sweep
        sweep(prob, &col_sq, l2, &mut beta, &mut residual, None);
        sweeps += 1;
        // active-set sweeps until stable
        loop {
            if sweeps >= max_iter {
                break;
            }
            let active: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
            if active.is_empty() {
                break;
            }
            let delta = sweep(prob, &col_sq, l2, &mut beta, &mut residual, Some(&active));
            sweeps += 1;
            if delta < tol {
                break;
            }
        }
        if l2 > 0.0 {
            // no exact certificate for the blended objective; rely on the
            // coefficient-change criterion of the last full sweep
            let delta = sweep(prob, &col_sq, l2, &mut beta, &mut residual, None);
            sweeps += 1;
            if delta < tol {
                return Ok(CdFit {
                    beta,
                    sweeps,
                    kkt: f64::NAN,
                });
            }
        } else {
            let kkt = kkt_check(prob, &beta);
            if kkt <= tol {
                return Ok(CdFit { beta, sweeps, kkt });
            }
        }
        if sweeps >= max_iter {
            let kkt = kkt_check(prob, &beta);
            return Err(SolverError::NonConvergence {
                sweeps,
                kkt,
                beta,
            });
        }
    }
}

/// One coordinate sweep; returns the max absolute coefficient change.
fn sweep(
    prob: &WeightedL1Problem<'_>,
    col_sq: &[f64],
    l2: f64,
    beta: &mut DVector<f64>,
    residual: &mut DVector<f64>,
    subset: Option<&[usize]>,
) -> f64 {
    let x = prob.data.x();
    let p = beta.len();
    let mut max_delta = 0.0_f64;
    let indices: Box<dyn Iterator<Item = usize>> = match subset {
        Some(s) => Box::new(s.iter().copied()),
        None => Box::new(0..p),
    };
    for j in indices {
        let t = prob.threshold(j);
        if t.is_infinite() || col_sq[j] == 0.0 {
            continue;
        }
        let old = beta[j];
        let z = x.column(j).dot(residual) + col_sq[j] * old;
        let new = soft_threshold(z, t) / (col_sq[j] + 2.0 * l2);
        if new != old {
            residual.axpy(old - new, &x.column(j).into_owned(), 1.0);
            beta[j] = new;
            max_delta = max_delta.max((new - old).abs());
        }
    }
    max_delta
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn orthonormal_design(n: usize, p: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let raw = DMatrix::from_fn(n, p, |_, _| rng.random::<f64>() - 0.5);
        let qr = raw.qr();
        let q = qr.q();
        DMatrix::from_fn(n, p, |i, j| q[(i, j)])
    }

    fn gaussian_dataset(x: DMatrix<f64>, y: DVector<f64>) -> Dataset {
        Dataset::new(x, y, Family::Gaussian, false).unwrap()
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(-4.0, 1.5), -2.5);
        assert_eq!(soft_threshold(0.0, 0.0), 0.0);
    }

    /// Brute-force per-coordinate minimizer on a dense grid; the independent
    /// oracle for the orthonormal-design coordinate solution.
    fn grid_argmin_univariate(z: f64, thresh: f64) -> f64 {
        let lo = -z.abs() - 1.0;
        let hi = z.abs() + 1.0;
        let steps = 400_000;
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..=steps {
            let b = lo + (hi - lo) * k as f64 / steps as f64;
            let obj = 0.5 * b * b - z * b + thresh * b.abs();
            if obj < best.0 {
                best = (obj, b);
            }
        }
        best.1
    }

    #[test]
    fn cd_matches_grid_oracle_on_orthonormal_design() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = orthonormal_design(40, 6, &mut rng);
        let y = DVector::from_fn(40, |_, _| rng.random::<f64>() * 4.0 - 2.0);
        let weights =
            DVector::from_fn(6, |j, _| 0.5 + 0.5 * j as f64);
        let data = gaussian_dataset(x.clone(), y.clone());
        let lambda = 0.3;
        let prob = WeightedL1Problem::new(&data, lambda, weights.clone()).unwrap();
        let fit =
            solve_weighted_lasso_cd(&prob, &DVector::zeros(6), 1e-10, 10_000).unwrap();
        for j in 0..6 {
            let z = x.column(j).dot(&y);
            let expect = soft_threshold(z, lambda * weights[j]);
            assert_abs_diff_eq!(fit.beta[j], expect, epsilon = 1e-8);
            let grid = grid_argmin_univariate(z, lambda * weights[j]);
            assert_abs_diff_eq!(fit.beta[j], grid, epsilon = 2e-5);
        }
        assert!(kkt_check(&prob, &fit.beta) <= 1e-10);
    }

    #[test]
    fn cd_with_zero_lambda_recovers_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = DMatrix::from_fn(30, 4, |_, _| rng.random::<f64>() - 0.5);
        let beta_true = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let y = &x * &beta_true
            + DVector::from_fn(30, |_, _| 0.05 * (rng.random::<f64>() - 0.5));
        let ls = x.clone().svd(true, true).solve(&y, 1e-12).unwrap();
        let data = gaussian_dataset(x, y);
        let prob = WeightedL1Problem::unweighted(&data, 0.0).unwrap();
        let fit =
            solve_weighted_lasso_cd(&prob, &DVector::zeros(4), 1e-10, 10_000).unwrap();
        for j in 0..4 {
            assert_abs_diff_eq!(fit.beta[j], ls[j], epsilon = 1e-7);
        }
    }

    #[test]
    fn lambda_at_or_above_lambda_max_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = DMatrix::from_fn(25, 5, |_, _| rng.random::<f64>() - 0.5);
        let y = DVector::from_fn(25, |_, _| rng.random::<f64>() - 0.5);
        let data = gaussian_dataset(x, y);
        let weights = DVector::from_element(5, 1.0);
        let lmax = lambda_max(&data, &weights);
        let prob = WeightedL1Problem::new(&data, lmax, weights.clone()).unwrap();
        let fit =
            solve_weighted_lasso_cd(&prob, &DVector::zeros(5), 1e-10, 1000).unwrap();
        assert!(fit.beta.iter().all(|&b| b == 0.0));
        assert_eq!(kkt_check(&prob, &fit.beta), 0.0);
        // halfway to lambda_max the zero vector is certifiably suboptimal
        let prob2 = WeightedL1Problem::new(&data, 0.5 * lmax, weights).unwrap();
        assert!(kkt_check(&prob2, &DVector::zeros(5)) > 0.0);
    }

    #[test]
    fn pinned_coordinates_stay_exactly_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let x = DMatrix::from_fn(30, 4, |_, _| rng.random::<f64>() - 0.5);
        let y = x.column(0).into_owned() * 3.0 + x.column(1).into_owned() * 2.0;
        let data = gaussian_dataset(x, y);
        let mut weights = DVector::from_element(4, 1.0);
        weights[1] = f64::INFINITY;
        let prob = WeightedL1Problem::new(&data, 0.01, weights).unwrap();
        let init = DVector::from_vec(vec![0.0, 5.0, 0.0, 0.0]);
        let fit = solve_weighted_lasso_cd(&prob, &init, 1e-10, 10_000).unwrap();
        assert_eq!(fit.beta[1], 0.0);
        assert!(fit.beta[0].abs() > 1.0);
    }

    #[test]
    fn fixpoint_start_is_returned_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let x = DMatrix::from_fn(30, 4, |_, _| rng.random::<f64>() - 0.5);
        let y = DVector::from_fn(30, |_, _| rng.random::<f64>() - 0.5);
        let data = gaussian_dataset(x, y);
        let prob = WeightedL1Problem::unweighted(&data, 0.4).unwrap();
        let fit =
            solve_weighted_lasso_cd(&prob, &DVector::zeros(4), 1e-10, 10_000).unwrap();
        let again = solve_weighted_lasso_cd(&prob, &fit.beta, 1e-10, 10_000).unwrap();
        assert_eq!(again.sweeps, 0);
        assert_eq!(fit.beta, again.beta);
    }

    #[test]
    fn nonconvergence_carries_last_iterate() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let x = DMatrix::from_fn(40, 8, |_, _| rng.random::<f64>() - 0.5);
        let y = DVector::from_fn(40, |_, _| rng.random::<f64>() - 0.5);
        let data = gaussian_dataset(x, y);
        let prob = WeightedL1Problem::unweighted(&data, 1e-6).unwrap();
        match solve_weighted_lasso_cd(&prob, &DVector::zeros(8), 1e-14, 2) {
            Err(SolverError::NonConvergence { sweeps, beta, .. }) => {
                assert!(sweeps >= 2);
                assert_eq!(beta.len(), 8);
            }
            other => panic!("expected NonConvergence, got {other:?}"),
        }
    }
}
