use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::mle::{fit_mle_with, MleOptions};
use super::{log_likelihood, score_and_information};
use crate::data::{Dataset, Design};
use crate::error::{Error, Result};
use crate::seed;

/// Settings for the random-walk Metropolis–Hastings sampler.
///
/// Priors are independent `Normal(0, prior_variance)` on every coefficient.
/// The chain starts at the MLE and proposes `γ' = γ + L ξ`, where `L L'` is
/// `proposal_scale` times the inverse posterior curvature at the MLE
/// (observed information plus prior precision). The default scale is
/// `2.38² / p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    /// Number of saved draws (K).
    pub draws: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub prior_variance: f64,
    pub proposal_scale: Option<f64>,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            draws: 1000,
            burn_in: 2000,
            thin: 5,
            prior_variance: 100.0,
            proposal_scale: None,
            seed: 0,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.draws == 0 {
            return Err(Error::InvalidConfig("draws must be at least 1".into()));
        }
        if self.thin == 0 {
            return Err(Error::InvalidConfig("thin must be at least 1".into()));
        }
        if !(self.prior_variance > 0.0 && self.prior_variance.is_finite()) {
            return Err(Error::InvalidConfig(
                "prior_variance must be positive".into(),
            ));
        }
        if let Some(s) = self.proposal_scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidConfig(
                    "proposal_scale must be positive".into(),
                ));
            }
        }
        Ok(())
    }
}

/// `K × p` matrix of saved coefficient draws.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    values: Vec<f64>,
    p: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub acceptance_rate: f64,
}

impl PosteriorDraws {
    /// Wrap externally produced draws (all rows must have the same length).
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || p == 0 {
            return Err(Error::InsufficientDraws {
                required: 1,
                found: 0,
            });
        }
        if let Some(r) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: r.len(),
            });
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite posterior draw".into()));
        }
        Ok(Self {
            values: rows.into_iter().flatten().collect(),
            p,
            burn_in: 0,
            thin: 1,
            acceptance_rate: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.p
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn draw(&self, k: usize) -> &[f64] {
        &self.values[k * self.p..(k + 1) * self.p]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.p)
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.p];
        for d in self.iter() {
            for (a, v) in m.iter_mut().zip(d) {
                *a += v;
            }
        }
        let k = self.len() as f64;
        m.iter_mut().for_each(|a| *a /= k);
        m
    }

    pub fn sd(&self) -> Vec<f64> {
        let m = self.mean();
        let mut ss = vec![0.0; self.p];
        for d in self.iter() {
            for ((s, v), mu) in ss.iter_mut().zip(d).zip(&m) {
                *s += (v - mu) * (v - mu);
            }
        }
        let denom = (self.len().max(2) - 1) as f64;
        ss.into_iter().map(|s| (s / denom).sqrt()).collect()
    }
}

pub fn fit_bayes(data: &Dataset, cfg: &McmcConfig) -> Result<PosteriorDraws> {
    fit_bayes_with(data.design(), data.treatment(), cfg)
}

fn log_posterior(x: &Design, z: &[bool], gamma: &[f64], prior_variance: f64) -> f64 {
    let penalty: f64 = gamma.iter().map(|g| g * g).sum::<f64>() / (2.0 * prior_variance);
    log_likelihood(x, z, gamma) - penalty
}

pub fn fit_bayes_with(x: &Design, z: &[bool], cfg: &McmcConfig) -> Result<PosteriorDraws> {
    cfg.validate()?;
    let mle = fit_mle_with(x, z, &MleOptions::default())?;
    let p = x.ncols();

    let (_, info) = score_and_information(x, z, &mle.gamma);
    let precision = info + DMatrix::identity(p, p) / cfg.prior_variance;
    let curvature_cov = precision
        .cholesky()
        .ok_or(Error::SingularInformation)?
        .inverse();
    let scale = cfg.proposal_scale.unwrap_or(2.38 * 2.38 / p as f64);
    let proposal = (curvature_cov * scale)
        .cholesky()
        .ok_or(Error::SingularInformation)?
        .l();

    let mut rng = seed::stream(cfg.seed, &[seed::tag::MCMC]);
    let mut current = DVector::from_vec(mle.gamma);
    let mut current_lp = log_posterior(x, z, current.as_slice(), cfg.prior_variance);
    if !current_lp.is_finite() {
        return Err(Error::ChainDiverged { iteration: 0 });
    }

    let total = cfg.burn_in + cfg.draws * cfg.thin;
    let mut values = Vec::with_capacity(cfg.draws * p);
    let mut accepted = 0usize;
    let mut xi = DVector::<f64>::zeros(p);
    for it in 1..=total {
        for v in xi.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let candidate = &current + &proposal * &xi;
        let lp = log_posterior(x, z, candidate.as_slice(), cfg.prior_variance);
        if !lp.is_finite() {
            return Err(Error::ChainDiverged { iteration: it });
        }
        let u: f64 = rng.random();
        if u.ln() < lp - current_lp {
            current = candidate;
            current_lp = lp;
            accepted += 1;
        }
        if it > cfg.burn_in && (it - cfg.burn_in).is_multiple_of(cfg.thin) {
            values.extend(current.iter());
        }
    }

    Ok(PosteriorDraws {
        values,
        p,
        burn_in: cfg.burn_in,
        thin: cfg.thin,
        acceptance_rate: if total == 0 {
            0.0
        } else {
            accepted as f64 / total as f64
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propensity::inv_logit;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_cfg(seed: u64) -> McmcConfig {
        McmcConfig {
            draws: 200,
            burn_in: 200,
            thin: 2,
            seed,
            ..McmcConfig::default()
        }
    }

    #[test]
    fn same_seed_same_draws() {
        let x = Design::with_intercept(&[[0.0], [1.0], [2.0], [0.5], [1.5], [2.5]]).unwrap();
        let z = [false, true, false, true, true, false];
        let a = fit_bayes_with(&x, &z, &small_cfg(11)).unwrap();
        let b = fit_bayes_with(&x, &z, &small_cfg(11)).unwrap();
        let c = fit_bayes_with(&x, &z, &small_cfg(12)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 200);
        assert!((0.0..=1.0).contains(&a.acceptance_rate));
    }

    #[test]
    fn separation_propagates() {
        let x = Design::with_intercept(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let err = fit_bayes_with(&x, &[false, false, true, true], &small_cfg(1)).unwrap_err();
        assert!(matches!(err, Error::SeparationDetected { .. }));
    }

    #[test]
    fn invalid_config_rejected() {
        let x = Design::intercept_only(2);
        let cfg = McmcConfig {
            draws: 0,
            ..McmcConfig::default()
        };
        assert!(matches!(
            fit_bayes_with(&x, &[true, false], &cfg),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn strong_prior_dominates_two_points() {
        let x = Design::intercept_only(2);
        let cfg = McmcConfig {
            prior_variance: 1e-4,
            seed: 5,
            ..McmcConfig::default()
        };
        let draws = fit_bayes_with(&x, &[false, true], &cfg).unwrap();
        assert!(draws.mean().iter().all(|m| m.abs() < 0.05));
    }

    #[test]
    fn strong_prior_pulls_chain_away_from_mle() {
        // Data alone put the slope well away from zero; a tight prior must win.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<[f64; 1]> = (0..40).map(|_| [rng.random_range(-2.0..2.0)]).collect();
        let z: Vec<bool> = rows
            .iter()
            .map(|r| rng.random_bool(inv_logit(0.8 + 1.5 * r[0])))
            .collect();
        let x = Design::with_intercept(&rows).unwrap();
        let mle = fit_mle_with(&x, &z, &MleOptions::default()).unwrap();
        assert!(mle.gamma[1].abs() > 0.5);
        let cfg = McmcConfig {
            prior_variance: 1e-4,
            seed: 2,
            ..McmcConfig::default()
        };
        let draws = fit_bayes_with(&x, &z, &cfg).unwrap();
        assert!(
            draws.mean().iter().all(|m| m.abs() < 0.05),
            "{:?}",
            draws.mean()
        );
    }
}
