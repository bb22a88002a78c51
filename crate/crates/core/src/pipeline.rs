//! End-to-end PSM and BPSM runs on a dataset.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimator::{att_point_with, AttPoint, AttPosterior, ControlWeighting};
use crate::matcher::{
    match_frequency, match_sample, match_sample_among, trim_common_support, DistanceMeasure,
    MatchFrequency, MatchOptions, MatchSet,
};
use crate::propensity::{
    fit_bayes, fit_mle_with, predict, McmcConfig, MleOptions, PosteriorDraws, PropensityFit,
    PropensityScores,
};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub matching: MatchOptions,
    #[serde(skip)]
    pub mle: MleOptions,
    pub weighting: ControlWeighting,
    /// Recompute common support for every posterior draw. When false, the
    /// controls retained under the MLE scores are used for every draw.
    pub retrim_per_draw: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            matching: MatchOptions::default(),
            mle: MleOptions::default(),
            weighting: ControlWeighting::Multiplicity,
            retrim_per_draw: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PsmOutput {
    pub fit: PropensityFit,
    pub scores: PropensityScores,
    pub matchset: MatchSet,
    pub att: AttPoint,
}

impl PsmOutput {
    /// Percentage of units kept in the matched sample.
    pub fn pct_matched(&self) -> f64 {
        let n = self.scores.len();
        100.0 * self.matchset.n_kept(n) as f64 / n as f64
    }
}

/// Standard PSM: MLE fit, point scores, one matching pass.
pub fn run_psm<R: Rng + ?Sized>(
    data: &Dataset,
    cfg: &PipelineConfig,
    rng: &mut R,
) -> Result<PsmOutput> {
    let fit = fit_mle_with(data.design(), data.treatment(), &cfg.mle)?;
    let scores = predict(&fit.gamma, data.design())?;
    let matchset = match_sample(&scores, data.treatment(), &cfg.matching, rng)?;
    let att = att_point_with(&matchset, data, cfg.weighting)?;
    Ok(PsmOutput {
        fit,
        scores,
        matchset,
        att,
    })
}

#[derive(Debug, Clone)]
pub struct BpsmOutput {
    pub draws: PosteriorDraws,
    pub matchsets: Vec<MatchSet>,
    pub posterior: AttPosterior,
    pub frequency: MatchFrequency,
}

fn match_draw(
    data: &Dataset,
    cfg: &PipelineConfig,
    gamma: &[f64],
    allowed: Option<&[bool]>,
    master: u64,
    k: usize,
) -> Result<(MatchSet, AttPoint)> {
    let mut rng = seed::stream(master, &[seed::tag::DRAW_MATCH, k as u64]);
    let scores = predict(gamma, data.design())?;
    // A fixed support mask replaces per-draw trimming.
    let opts = MatchOptions {
        trim: cfg.matching.trim && allowed.is_none(),
        ..cfg.matching
    };
    let ms = match_sample_among(&scores, data.treatment(), &opts, allowed, &mut rng)?;
    let point = att_point_with(&ms, data, cfg.weighting).map_err(|e| match e {
        Error::EmptyMatchSet { .. } => Error::EmptyMatchSet { draw: Some(k) },
        other => other,
    })?;
    Ok((ms, point))
}

/// Bayesian PSM: posterior draws of the propensity coefficients, one
/// matching pass per draw, and the resulting posterior ATT sample.
///
/// Draw `k` uses its own generator derived from `(mcmc.seed, k)`, so the
/// result does not depend on thread scheduling.
pub fn run_bpsm(data: &Dataset, cfg: &PipelineConfig, mcmc: &McmcConfig) -> Result<BpsmOutput> {
    if mcmc.draws < 2 {
        return Err(Error::InsufficientDraws {
            required: 2,
            found: mcmc.draws,
        });
    }
    let draws = fit_bayes(data, mcmc)?;

    let allowed: Option<Vec<bool>> = if cfg.retrim_per_draw || !cfg.matching.trim {
        None
    } else {
        let fit = fit_mle_with(data.design(), data.treatment(), &cfg.mle)?;
        let scores = predict(&fit.gamma, data.design())?;
        let dist = match cfg.matching.distance {
            DistanceMeasure::Score => &scores.ps,
            DistanceMeasure::LinearPredictor => &scores.eta,
        };
        let mut mask = vec![false; data.len()];
        for i in trim_common_support(dist, data.treatment())? {
            mask[i] = true;
        }
        Some(mask)
    };
    let allowed = allowed.as_deref();

    #[cfg(feature = "parallel")]
    let results: Vec<Result<(MatchSet, AttPoint)>> = {
        use rayon::prelude::*;
        (0..draws.len())
            .into_par_iter()
            .map(|k| match_draw(data, cfg, draws.draw(k), allowed, mcmc.seed, k))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<(MatchSet, AttPoint)>> = (0..draws.len())
        .map(|k| match_draw(data, cfg, draws.draw(k), allowed, mcmc.seed, k))
        .collect();

    let (matchsets, points): (Vec<MatchSet>, Vec<AttPoint>) = results
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    let frequency = match_frequency(&matchsets, data.len())?;
    let posterior = AttPosterior::from_points(points)?;
    Ok(BpsmOutput {
        draws,
        matchsets,
        posterior,
        frequency,
    })
}
