//! Treatment-effect-on-the-treated estimates from matched samples.
//!
//! `P1` is the mean outcome over the treated units in the matched sample
//! (with replacement that is every treated unit), `P0` the mean outcome over
//! the matched controls, and `ATT = P1 - P0`.
//!
//! A control reused for several treated units is counted once per pairing by
//! default ([`ControlWeighting::Multiplicity`]), which makes the ATT the mean
//! of per-pair outcome differences. [`ControlWeighting::Unique`] counts each
//! matched control once instead.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matcher::MatchSet;
use crate::pipeline::{run_psm, PipelineConfig};
use crate::propensity::PropensityScores;
use crate::{seed, stats};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlWeighting {
    #[default]
    Multiplicity,
    Unique,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AttPoint {
    pub att: f64,
    pub p1: f64,
    pub p0: f64,
    pub n_treated: usize,
    pub n_matched_controls: usize,
}

pub fn att_point(ms: &MatchSet, data: &Dataset) -> Result<AttPoint> {
    att_point_with(ms, data, ControlWeighting::Multiplicity)
}

pub fn att_point_with(
    ms: &MatchSet,
    data: &Dataset,
    weighting: ControlWeighting,
) -> Result<AttPoint> {
    if ms.pairs.is_empty() {
        return Err(Error::EmptyMatchSet { draw: None });
    }
    let n = data.len();
    let z = data.treatment();
    let y = data.outcome();
    let mut treated_seen = vec![false; n];
    let mut control_seen = vec![false; n];
    let (mut sum1, mut n1) = (0.0, 0usize);
    let (mut sum0, mut n0) = (0.0, 0usize);
    for &(t, c) in &ms.pairs {
        if t >= n || c >= n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: t.max(c) + 1,
            });
        }
        if !z[t] || z[c] {
            return Err(Error::InvalidData(format!(
                "pair ({t}, {c}) does not join a treated unit to a control"
            )));
        }
        if !treated_seen[t] {
            treated_seen[t] = true;
            sum1 += y[t];
            n1 += 1;
        }
        let count_control = match weighting {
            ControlWeighting::Multiplicity => true,
            ControlWeighting::Unique => !control_seen[c],
        };
        control_seen[c] = true;
        if count_control {
            sum0 += y[c];
            n0 += 1;
        }
    }
    let p1 = sum1 / n1 as f64;
    let p0 = sum0 / n0 as f64;
    Ok(AttPoint {
        att: p1 - p0,
        p1,
        p0,
        n_treated: n1,
        n_matched_controls: n0,
    })
}

/// Posterior sample of the ATT, one value per matching pass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttPosterior {
    pub sample: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Per-draw components behind `sample`.
    pub points: Vec<AttPoint>,
}

impl AttPosterior {
    pub fn from_points(points: Vec<AttPoint>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InsufficientDraws {
                required: 2,
                found: points.len(),
            });
        }
        let sample: Vec<f64> = points.iter().map(|p| p.att).collect();
        let (ci_lo, ci_hi) = stats::central_interval(&sample);
        Ok(Self {
            mean: stats::mean(&sample),
            sd: stats::sample_sd(&sample),
            ci_lo,
            ci_hi,
            sample,
            points,
        })
    }
}

pub fn att_posterior(matchsets: &[MatchSet], data: &Dataset) -> Result<AttPosterior> {
    att_posterior_with(matchsets, data, ControlWeighting::Multiplicity)
}

pub fn att_posterior_with(
    matchsets: &[MatchSet],
    data: &Dataset,
    weighting: ControlWeighting,
) -> Result<AttPosterior> {
    if matchsets.len() < 2 {
        return Err(Error::InsufficientDraws {
            required: 2,
            found: matchsets.len(),
        });
    }
    let points = matchsets
        .iter()
        .enumerate()
        .map(|(k, ms)| {
            att_point_with(ms, data, weighting).map_err(|e| match e {
                Error::EmptyMatchSet { .. } => Error::EmptyMatchSet { draw: Some(k) },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    AttPosterior::from_points(points)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapSe {
    pub se: f64,
    /// Requested number of replicates.
    pub b: usize,
    /// ATT from each successful replicate, in replicate order.
    pub replicates: Vec<f64>,
    pub failed: usize,
}

fn bootstrap_replicate(data: &Dataset, cfg: &PipelineConfig, master: u64, b: usize) -> Result<f64> {
    let mut rng = seed::stream(master, &[seed::tag::BOOTSTRAP, b as u64]);
    let n = data.len();
    let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    let sample = data.resample(&idx)?;
    Ok(run_psm(&sample, cfg, &mut rng)?.att.att)
}

/// Nonparametric bootstrap of the full PSM pipeline (refit, trim, match,
/// estimate) over resampled units. Replicates that fail (separation, a
/// resample without controls, ...) are excluded; more than 10% failures is
/// an error.
pub fn bootstrap_se(
    data: &Dataset,
    cfg: &PipelineConfig,
    b: usize,
    seed: u64,
) -> Result<BootstrapSe> {
    if b < 2 {
        return Err(Error::InvalidConfig(format!(
            "bootstrap needs at least 2 replicates, got {b}"
        )));
    }
    #[cfg(feature = "parallel")]
    let results: Vec<Result<f64>> = {
        use rayon::prelude::*;
        (0..b)
            .into_par_iter()
            .map(|i| bootstrap_replicate(data, cfg, seed, i))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<f64>> = (0..b)
        .map(|i| bootstrap_replicate(data, cfg, seed, i))
        .collect();

    let replicates: Vec<f64> = results
        .iter()
        .filter_map(|r| r.as_ref().ok().copied())
        .collect();
    let failed = b - replicates.len();
    if failed * 10 > b || replicates.len() < 2 {
        return Err(Error::ReplicateFailed { failed, total: b });
    }
    Ok(BootstrapSe {
        se: stats::sample_sd(&replicates),
        b,
        replicates,
        failed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DropKeepRow {
    pub unit: usize,
    pub ps: f64,
    pub kept: bool,
    pub treated: bool,
}

/// One row per unit: its point score, whether it was kept, and its group.
pub fn drop_keep_export(
    scores: &PropensityScores,
    z: &[bool],
    ms: &MatchSet,
) -> Result<Vec<DropKeepRow>> {
    if scores.len() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: z.len(),
            found: scores.len(),
        });
    }
    if let Some(&(t, c)) = ms
        .pairs
        .iter()
        .find(|&&(t, c)| t >= z.len() || c >= z.len())
    {
        return Err(Error::DimensionMismatch {
            expected: z.len(),
            found: t.max(c) + 1,
        });
    }
    let kept = ms.kept(z.len());
    Ok((0..z.len())
        .map(|i| DropKeepRow {
            unit: i,
            ps: scores.ps[i],
            kept: kept[i],
            treated: z[i],
        })
        .collect())
}
