//! Logistic propensity model `logit P(Z = 1 | X) = X γ`.

mod mcmc;
mod mle;

pub use mcmc::{fit_bayes, fit_bayes_with, McmcConfig, PosteriorDraws};
pub use mle::{fit_mle, fit_mle_with, MleOptions, PropensityFit};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::data::Design;
use crate::error::{Error, Result};
use crate::stats;

/// Numerically stable logistic function.
pub fn inv_logit(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn linear_predictor(row: &[f64], gamma: &[f64]) -> f64 {
    row.iter().zip(gamma).map(|(a, b)| a * b).sum()
}

/// Bernoulli log-likelihood of the treatment indicators.
pub fn log_likelihood(x: &Design, z: &[bool], gamma: &[f64]) -> f64 {
    x.rows()
        .zip(z)
        .map(|(row, &t)| {
            let eta = linear_predictor(row, gamma);
            if t {
                eta - softplus(eta)
            } else {
                -softplus(eta)
            }
        })
        .sum()
}

/// Score vector `X'(z - p)` and observed information `X' W X`.
pub fn score_and_information(
    x: &Design,
    z: &[bool],
    gamma: &[f64],
) -> (DVector<f64>, DMatrix<f64>) {
    let p = x.ncols();
    let mut score = DVector::zeros(p);
    let mut info = DMatrix::zeros(p, p);
    for (row, &t) in x.rows().zip(z) {
        let mu = inv_logit(linear_predictor(row, gamma));
        let resid = f64::from(u8::from(t)) - mu;
        let w = mu * (1.0 - mu);
        for a in 0..p {
            score[a] += row[a] * resid;
            let wa = w * row[a];
            for b in 0..=a {
                info[(a, b)] += wa * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            info[(b, a)] = info[(a, b)];
        }
    }
    (score, info)
}

/// Estimated scores for every unit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropensityScores {
    pub ps: Vec<f64>,
    pub eta: Vec<f64>,
}

impl PropensityScores {
    pub fn len(&self) -> usize {
        self.ps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ps.is_empty()
    }
}

pub fn predict(gamma: &[f64], x: &Design) -> Result<PropensityScores> {
    if gamma.len() != x.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            found: gamma.len(),
        });
    }
    if gamma.iter().any(|g| !g.is_finite()) {
        return Err(Error::InvalidData("non-finite coefficient".into()));
    }
    let eta: Vec<f64> = x.rows().map(|r| linear_predictor(r, gamma)).collect();
    let ps = eta.iter().map(|&e| inv_logit(e)).collect();
    Ok(PropensityScores { ps, eta })
}

/// Posterior summary of one unit's propensity score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsSummary {
    pub mean: f64,
    pub sd: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Per-unit mean, SD and 2.5 / 97.5 percentiles of the propensity score over
/// all posterior draws.
pub fn posterior_ps_summary(draws: &PosteriorDraws, x: &Design) -> Result<Vec<PsSummary>> {
    if draws.len() < 2 {
        return Err(Error::InsufficientDraws {
            required: 2,
            found: draws.len(),
        });
    }
    if draws.dim() != x.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            found: draws.dim(),
        });
    }
    let mut buf = vec![0.0; draws.len()];
    Ok(x.rows()
        .map(|row| {
            for (k, slot) in buf.iter_mut().enumerate() {
                *slot = inv_logit(linear_predictor(row, draws.draw(k)));
            }
            let mean = stats::mean(&buf);
            let sd = stats::sample_sd(&buf);
            let (lo, hi) = stats::central_interval(&buf);
            PsSummary { mean, sd, lo, hi }
        })
        .collect())
}
