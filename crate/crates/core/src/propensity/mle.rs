use nalgebra::{DMatrix, DVector};

use super::{log_likelihood, score_and_information};
use crate::data::{Dataset, Design};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    /// Max-norm of the score at which the fit is accepted.
    pub tolerance: f64,
    /// Max-norm of the Newton step at which the fit is accepted.
    pub step_tolerance: f64,
    pub max_iterations: usize,
    /// Coefficients larger than this (max-norm) indicate perfect separation.
    pub separation_bound: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            step_tolerance: 1e-6,
            max_iterations: 100,
            separation_bound: 30.0,
        }
    }
}

/// Maximum-likelihood fit of the propensity model.
#[derive(Debug, Clone, PartialEq)]
pub struct PropensityFit {
    pub gamma: Vec<f64>,
    /// Inverse observed information at `gamma`.
    pub cov: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
}

impl PropensityFit {
    pub fn std_errors(&self) -> Vec<f64> {
        self.cov.diagonal().iter().map(|v| v.sqrt()).collect()
    }
}

pub fn fit_mle(data: &Dataset) -> Result<PropensityFit> {
    fit_mle_with(data.design(), data.treatment(), &MleOptions::default())
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Newton–Raphson with step halving.
///
/// Convergence requires both a small score and a small Newton step: under
/// separation the score vanishes while the step stays O(1), and the
/// coefficients eventually cross `separation_bound`.
pub fn fit_mle_with(x: &Design, z: &[bool], opts: &MleOptions) -> Result<PropensityFit> {
    if z.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: z.len(),
        });
    }
    let p = x.ncols();
    let mut gamma = DVector::<f64>::zeros(p);
    let mut ll = log_likelihood(x, z, gamma.as_slice());
    let mut last_grad = f64::INFINITY;

    for iteration in 0..opts.max_iterations {
        let (score, info) = score_and_information(x, z, gamma.as_slice());
        let chol = info.cholesky().ok_or(Error::SingularInformation)?;
        let step = chol.solve(&score);
        let grad_norm = max_abs(score.iter().copied());
        last_grad = grad_norm;

        if grad_norm < opts.tolerance && max_abs(step.iter().copied()) < opts.step_tolerance {
            // One last full step: inside the quadratic region it squares the error.
            gamma += step;
            let (_, info) = score_and_information(x, z, gamma.as_slice());
            let cov = info.cholesky().ok_or(Error::SingularInformation)?.inverse();
            return Ok(PropensityFit {
                gamma: gamma.iter().copied().collect(),
                cov,
                converged: true,
                iterations: iteration,
                log_likelihood: log_likelihood(x, z, gamma.as_slice()),
            });
        }

        let mut t = 1.0;
        let mut candidate = &gamma + &step;
        let mut cand_ll = log_likelihood(x, z, candidate.as_slice());
        // Near the optimum log-likelihood differences drop below rounding
        // noise, so allow a relative slack before halving.
        let slack = 1e-12 * (1.0 + ll.abs());
        while (cand_ll.is_nan() || cand_ll < ll - slack) && t > 1e-10 {
            t *= 0.5;
            candidate = &gamma + &step * t;
            cand_ll = log_likelihood(x, z, candidate.as_slice());
        }
        if !cand_ll.is_finite() {
            return Err(Error::SingularInformation);
        }
        gamma = candidate;
        ll = cand_ll.max(ll);

        let norm = max_abs(gamma.iter().copied());
        if norm > opts.separation_bound {
            return Err(Error::SeparationDetected {
                iteration: iteration + 1,
                norm,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: opts.max_iterations,
        grad_norm: last_grad,
    })
}
