//! Maximum-likelihood logistic regression by Newton's method.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::calibrate::sigmoid;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::Model;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticOptions {
    /// L2 penalty on all coefficients, intercept included, on the mean-loss scale.
    pub ridge: f64,
    /// Stop when the gradient norm of the mean loss falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        Self { ridge: 0.0, tol: 1e-8, max_iter: 100 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub gradient_norm: f64,
    pub iterations: usize,
    /// Hessian of the mean loss at the solution, intercept first.
    pub hessian: DMatrix<f64>,
}

fn objective(x: &DMatrix<f64>, y: &[f64], beta: &DVector<f64>, ridge: f64) -> f64 {
    let eta = x * beta;
    let n = y.len() as f64;
    let nll: f64 = eta
        .iter()
        .zip(y)
        .map(|(&e, &t)| {
            // log(1 + exp(e)) - t e, computed stably
            let softplus = if e > 0.0 { e + (-e).exp().ln_1p() } else { e.exp().ln_1p() };
            softplus - t * e
        })
        .sum();
    nll / n + 0.5 * ridge * beta.norm_squared()
}

/// Fits `P(y = 1 | x) = sigmoid(b0 + b . x)` on a row-major design with `p`
/// columns (the intercept column is added here).
pub fn fit_logistic_design(x: &[f64], p: usize, y: &[f64], opts: &LogisticOptions) -> Result<LogisticFit> {
    let n = y.len();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if x.len() != n * p {
        return Err(Error::LengthMismatch { what: "design matrix", expected: n * p, found: x.len() });
    }
    if let Some(&v) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::NonBinaryLabel(v));
    }
    let design = DMatrix::from_fn(n, p + 1, |r, c| if c == 0 { 1.0 } else { x[r * p + c - 1] });
    let mut beta = DVector::zeros(p + 1);
    let mean = y.iter().sum::<f64>() / n as f64;
    if mean > 0.0 && mean < 1.0 {
        beta[0] = (mean / (1.0 - mean)).ln();
    }
    let nf = n as f64;
    let mut converged = false;
    let mut gnorm = f64::INFINITY;
    let mut iterations = 0;
    let mut hessian = DMatrix::zeros(p + 1, p + 1);
    let mut value = objective(&design, y, &beta, opts.ridge);
    for it in 0..=opts.max_iter {
        let eta = &design * &beta;
        let mu: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();
        let resid = DVector::from_iterator(n, mu.iter().zip(y).map(|(m, t)| m - t));
        let grad = design.transpose() * resid / nf + &beta * opts.ridge;
        let w = DVector::from_iterator(n, mu.iter().map(|m| m * (1.0 - m)));
        let weighted = DMatrix::from_fn(n, p + 1, |r, c| design[(r, c)] * w[r]);
        hessian = design.transpose() * weighted / nf + DMatrix::identity(p + 1, p + 1) * opts.ridge;
        gnorm = grad.norm();
        iterations = it;
        if gnorm <= opts.tol {
            converged = true;
            break;
        }
        if it == opts.max_iter {
            break;
        }
        let step = match hessian.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            // singular curvature: fall back to a damped gradient step
            None => match (hessian.clone() + DMatrix::identity(p + 1, p + 1) * 1e-8).cholesky() {
                Some(ch) => ch.solve(&grad),
                None => grad.clone(),
            },
        };
        // Armijo backtracking keeps every iteration a descent step
        let slope = grad.dot(&step);
        let mut t = 1.0;
        loop {
            let candidate = &beta - &step * t;
            let v = objective(&design, y, &candidate, opts.ridge);
            if v <= value - 1e-4 * t * slope {
                beta = candidate;
                value = v;
                break;
            }
            if t < 1e-10 {
                break;
            }
            t *= 0.5;
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Numerical("logistic coefficients diverged".into()));
        }
    }
    Ok(LogisticFit {
        intercept: beta[0],
        coefficients: beta.iter().skip(1).copied().collect(),
        converged,
        gradient_norm: gnorm,
        iterations,
        hessian,
    })
}

/// Penalty used when the unpenalised likelihood has no finite maximiser.
pub const FALLBACK_RIDGE: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl Model for LogisticModel {
    fn predict_row(&self, x: &[f64]) -> f64 {
        let eta = self.intercept + self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>();
        sigmoid(eta)
    }
}

/// Logistic regression of `y` on every predictor (never on `g`).
///
/// If Newton's method does not converge, which happens under complete or
/// quasi-complete separation, the fit is repeated with a small ridge
/// penalty and a warning is logged.
pub fn train_logistic(data: &Dataset) -> Result<LogisticModel> {
    let y = data.y();
    if let Some(&v) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::NonBinaryLabel(v));
    }
    let mut fit = fit_logistic_design(data.x(), data.n_features(), y, &LogisticOptions::default())?;
    let all_same = y.iter().all(|&v| v == y[0]);
    if !fit.converged || all_same {
        log::warn!(
            "logistic regression did not converge (gradient norm {:e}); refitting with ridge penalty {FALLBACK_RIDGE}",
            fit.gradient_norm
        );
        let opts = LogisticOptions { ridge: FALLBACK_RIDGE, ..LogisticOptions::default() };
        fit = fit_logistic_design(data.x(), data.n_features(), y, &opts)?;
    }
    Ok(LogisticModel { intercept: fit.intercept, coefficients: fit.coefficients })
}
