//! Penalized logistic regression by iteratively reweighted least squares:
//! each outer step solves a weighted-L1 problem on the working response, with
//! step-halving to keep the penalized objective nonincreasing.

use nalgebra::{DMatrix, DVector};

use super::{cd_core, negative_log_likelihood, sigmoid, SolverError, WeightedL1Problem};
use crate::data::{Dataset, Family};

#[derive(Debug, Clone)]
pub struct IrlsOptions {
    /// Max-norm coefficient change declaring outer convergence.
    pub outer_tol: f64,
    pub max_outer: usize,
    /// Tolerance handed to the inner coordinate-descent solve.
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    /// Linear predictors beyond this magnitude are treated as separation.
    pub max_eta: f64,
    /// Floor for the working variance weights.
    pub weight_floor: f64,
    /// Step-halving attempts per outer iteration.
    pub max_halvings: usize,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        Self {
            outer_tol: 1e-8,
            max_outer: 200,
            inner_tol: 1e-9,
            inner_max_iter: 50_000,
            max_eta: 30.0,
            weight_floor: 1e-5,
            max_halvings: 20,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IrlsFit {
    pub beta: DVector<f64>,
    pub intercept: f64,
    /// Penalized objective: negative log-likelihood plus the weighted-L1 term.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Fits the binomial weighted-L1 problem. The intercept (when the dataset
/// declares one) is unpenalized and estimated jointly.
pub fn irls_penalized(
    prob: &WeightedL1Problem<'_>,
    init: &DVector<f64>,
    opts: &IrlsOptions,
) -> Result<IrlsFit, SolverError> {
    let data = prob.data();
    if data.family() != Family::Binomial {
        return Err(SolverError::Invalid(
            "irls_penalized expects a binomial dataset".into(),
        ));
    }
    if init.len() != data.p() {
        return Err(SolverError::Invalid(format!(
            "init length {} does not match p = {}",
            init.len(),
            data.p()
        )));
    }
    if init.iter().any(|b| !b.is_finite()) {
        return Err(SolverError::Invalid("init must be finite".into()));
    }
    let (n, p) = (data.n(), data.p());
    let x = data.x();
    let y = data.y();
    let with_intercept = data.has_intercept();

    let mut beta = init.clone();
    for j in 0..p {
        if prob.weights()[j].is_infinite() {
            beta[j] = 0.0;
        }
    }
    let mut intercept = if with_intercept {
        let ybar = (y.sum() / n as f64).clamp(1e-6, 1.0 - 1e-6);
        (ybar / (1.0 - ybar)).ln()
    } else {
        0.0
    };

    let eta_of = |b: &DVector<f64>, b0: f64| -> DVector<f64> {
        let mut eta = x * b;
        if with_intercept {
            eta.add_scalar_mut(b0);
        }
        eta
    };
    let objective_of = |b: &DVector<f64>, b0: f64| -> f64 {
        negative_log_likelihood(y, &eta_of(b, b0)) + prob.penalty_at(b)
    };

    let mut objective = objective_of(&beta, intercept);
    let mut iterations = 0usize;
    let mut converged = false;

    while iterations < opts.max_outer {
        iterations += 1;
        let eta = eta_of(&beta, intercept);
        let worst_eta = eta.iter().fold(0.0_f64, |m, &e| m.max(e.abs()));
        if worst_eta > opts.max_eta {
            return Err(SolverError::Separation {
                max_eta: opts.max_eta,
            });
        }

        // Working response and weights for the quadratic approximation.
        let mut sw = DVector::zeros(n);
        let mut z = DVector::zeros(n);
        for i in 0..n {
            let mu = sigmoid(eta[i]);
            let v = (mu * (1.0 - mu)).max(opts.weight_floor);
            sw[i] = v.sqrt();
            z[i] = eta[i] + (y[i] - mu) / v;
        }

        // Weighted least-squares subproblem in (intercept, beta) coordinates,
        // with the intercept column unpenalized.
        let extra = usize::from(with_intercept);
        let xw = DMatrix::from_fn(n, p + extra, |i, j| {
            if with_intercept && j == 0 {
                sw[i]
            } else {
                sw[i] * x[(i, j - extra)]
            }
        });
        let yw = DVector::from_fn(n, |i, _| sw[i] * z[i]);
        let sub_data = Dataset::new(xw, yw, Family::Gaussian, false)
            .map_err(|e| SolverError::Invalid(format!("working dataset: {e}")))?;
        let mut sub_weights = DVector::zeros(p + extra);
        for j in 0..p {
            sub_weights[j + extra] = prob.weights()[j];
        }
        let sub_prob = WeightedL1Problem::new(&sub_data, prob.lambda(), sub_weights)?;
        let mut warm = DVector::zeros(p + extra);
        if with_intercept {
            warm[0] = intercept;
        }
        for j in 0..p {
            warm[j + extra] = beta[j];
        }
        let inner = cd_core(&sub_prob, &warm, 0.0, opts.inner_tol, opts.inner_max_iter)?;

        let cand_intercept = if with_intercept { inner.beta[0] } else { 0.0 };
        let cand_beta = DVector::from_fn(p, |j, _| inner.beta[j + extra]);

        // Step halving toward the current iterate until the penalized
        // objective does not increase.
        let mut accepted = false;
        let mut step = 1.0;
        for _ in 0..=opts.max_halvings {
            let trial_beta = &beta + (&cand_beta - &beta) * step;
            let trial_intercept = intercept + (cand_intercept - intercept) * step;
            let trial_obj = objective_of(&trial_beta, trial_intercept);
            if trial_obj <= objective + 1e-12 {
                let delta = (&trial_beta - &beta)
                    .iter()
                    .fold((trial_intercept - intercept).abs(), |m, d| m.max(d.abs()));
                beta = trial_beta;
                intercept = trial_intercept;
                objective = trial_obj;
                accepted = true;
                if delta < opts.outer_tol {
                    converged = true;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted || converged {
            // no descent step exists within the halving budget: numerically
            // stationary
            converged = converged || !accepted;
            break;
        }
    }

    // exact zeros for pinned coordinates survive by construction
    Ok(IrlsFit {
        beta,
        intercept,
        objective,
        iterations,
        converged,
    })
}
