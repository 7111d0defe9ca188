//! Damped least squares (Levenberg–Marquardt) shared by the resonator,
//! tuning-curve and pickup-placement fits.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub struct LmOptions {
    pub max_iterations: usize,
    /// Convergence when the relative parameter step drops below this.
    pub step_tolerance: f64,
    pub initial_lambda: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            step_tolerance: 1e-10,
            initial_lambda: 1e-3,
        }
    }
}

#[derive(Debug)]
pub struct LmFit {
    pub params: Vec<f64>,
    /// Covariance σ²(JᵀJ)⁻¹ with σ² = SSR/(m − n); zero matrix if m ≤ n.
    pub covariance: DMatrix<f64>,
    pub ssr: f64,
    pub iterations: usize,
    /// Normal matrix could not be factorized at the solution.
    pub rank_deficient: bool,
}

impl LmFit {
    pub fn std_errors(&self) -> Vec<f64> {
        (0..self.params.len())
            .map(|i| self.covariance[(i, i)].max(0.0).sqrt())
            .collect()
    }
}

/// Minimize ‖r(p)‖² for a residual vector and its analytic Jacobian.
///
/// `model` fills residuals (length m) and the row-major Jacobian (m×n) for a
/// parameter vector. Damping uses the Marquardt diagonal scaling so parameters
/// of very different magnitude coexist.
pub fn levenberg_marquardt(
    mut model: impl FnMut(&[f64], &mut Vec<f64>, &mut Vec<Vec<f64>>),
    initial: &[f64],
    options: &LmOptions,
) -> Result<LmFit> {
    let n = initial.len();
    let mut params = initial.to_vec();
    let mut residuals = Vec::new();
    let mut jacobian = Vec::new();
    model(&params, &mut residuals, &mut jacobian);
    let m = residuals.len();
    if m < n {
        return Err(Error::Argument(format!(
            "least squares needs at least as many residuals ({m}) as parameters ({n})"
        )));
    }

    let mut ssr: f64 = residuals.iter().map(|r| r * r).sum();
    let mut lambda = options.initial_lambda;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        iterations += 1;
        let jac = DMatrix::from_fn(m, n, |i, j| jacobian[i][j]);
        let res = DVector::from_column_slice(&residuals);
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * res;

        let mut step = None;
        for _ in 0..30 {
            let mut damped = jtj.clone();
            for i in 0..n {
                let d = jtj[(i, i)];
                damped[(i, i)] = d + lambda * if d > 0.0 { d } else { 1.0 };
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let delta = chol.solve(&(-&jtr));
            let trial: Vec<f64> = params
                .iter()
                .zip(delta.iter())
                .map(|(p, d)| p + d)
                .collect();
            let mut trial_res = Vec::new();
            let mut trial_jac = Vec::new();
            model(&trial, &mut trial_res, &mut trial_jac);
            let trial_ssr: f64 = trial_res.iter().map(|r| r * r).sum();
            if trial_ssr.is_finite() && trial_ssr <= ssr {
                let rel_step = delta
                    .iter()
                    .zip(&trial)
                    .map(|(d, p)| (d / p.abs().max(1e-30)).abs())
                    .fold(0.0f64, f64::max);
                params = trial;
                residuals = trial_res;
                jacobian = trial_jac;
                ssr = trial_ssr;
                lambda = (lambda / 10.0).max(1e-14);
                step = Some(rel_step);
                break;
            }
            lambda *= 10.0;
        }

        match step {
            Some(rel_step) if rel_step < options.step_tolerance => {
                converged = true;
                break;
            }
            Some(_) => {}
            None => {
                // No downhill step found at any damping; treat as stationary.
                converged = true;
                break;
            }
        }
    }

    if !converged {
        return Err(Error::FitDiverged {
            iterations,
            ssr,
            best: params,
        });
    }

    let jac = DMatrix::from_fn(m, n, |i, j| jacobian[i][j]);
    let jtj = jac.transpose() * &jac;
    let (covariance, rank_deficient) = match jtj.clone().try_inverse() {
        Some(inv) => {
            let sigma2 = if m > n { ssr / (m - n) as f64 } else { 0.0 };
            (inv * sigma2, false)
        }
        None => (DMatrix::zeros(n, n), true),
    };

    Ok(LmFit {
        params,
        covariance,
        ssr,
        iterations,
        rank_deficient,
    })
}
