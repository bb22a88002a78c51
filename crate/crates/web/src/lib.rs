//! Browser demo. Each exported function simulates one dataset from the study
//! design, runs the requested analysis and returns a JSON string for the page
//! to plot. Errors come back as `{"error": "..."}`.

use bpsm::seed::{self, tag};
use bpsm::simulation::simulate_dataset;
use bpsm::{fit_bayes, fit_mle, posterior_ps_summary, predict, run_bpsm, run_psm, SimConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn demo_config(n: usize, beta: f64, seed: u64, draws: usize, caliper_sd: f64) -> SimConfig {
    SimConfig {
        n,
        beta,
        seed,
        draws,
        burn_in: 1000,
        thin: 2,
        with_replacement: caliper_sd <= 0.0,
        caliper_sd: (caliper_sd > 0.0).then_some(caliper_sd),
        ..SimConfig::default()
    }
}

fn to_json<T: Serialize>(r: Result<T, String>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| error_json(&e.to_string())),
        Err(e) => error_json(&e),
    }
}

fn error_json(msg: &str) -> String {
    serde_json::json!({ "error": msg }).to_string()
}

#[derive(Debug, Serialize)]
pub struct UnitInterval {
    pub z: bool,
    pub ps_mle: f64,
    pub ps_mean: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Serialize)]
pub struct Intervals {
    pub gamma_mle: Vec<f64>,
    pub acceptance_rate: f64,
    pub units: Vec<UnitInterval>,
}

pub fn ps_intervals_impl(n: usize, seed: u64, draws: usize) -> Result<Intervals, String> {
    let cfg = demo_config(n, 1.0, seed, draws, 0.0);
    cfg.validate().map_err(|e| e.to_string())?;
    let (data, _, _) = simulate_dataset(&cfg, 0).map_err(|e| e.to_string())?;
    let fit = fit_mle(&data).map_err(|e| e.to_string())?;
    let point = predict(&fit.gamma, data.design()).map_err(|e| e.to_string())?;
    let post = fit_bayes(&data, &cfg.mcmc(seed)).map_err(|e| e.to_string())?;
    let summary = posterior_ps_summary(&post, data.design()).map_err(|e| e.to_string())?;
    let units = summary
        .iter()
        .zip(&point.ps)
        .zip(data.treatment())
        .map(|((s, &ps), &z)| UnitInterval {
            z,
            ps_mle: ps,
            ps_mean: s.mean,
            lo: s.lo,
            hi: s.hi,
        })
        .collect();
    Ok(Intervals {
        gamma_mle: fit.gamma,
        acceptance_rate: post.acceptance_rate,
        units,
    })
}

/// Posterior mean and 95% interval of every unit's propensity score, next to
/// its maximum-likelihood score.
#[wasm_bindgen]
pub fn ps_intervals(n: usize, seed: u64, draws: usize) -> String {
    to_json(ps_intervals_impl(n, seed, draws))
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub true_att: f64,
    pub n_treated: usize,
    pub psm_att: f64,
    pub psm_pct_matched: f64,
    pub bpsm_mean: f64,
    pub bpsm_sd: f64,
    pub bpsm_ci: (f64, f64),
    pub bpsm_pct_matched: f64,
    pub bpsm_sample: Vec<f64>,
}

pub fn compare_impl(
    n: usize,
    beta: f64,
    seed: u64,
    draws: usize,
    caliper_sd: f64,
) -> Result<Comparison, String> {
    let cfg = demo_config(n, beta, seed, draws, caliper_sd);
    cfg.validate().map_err(|e| e.to_string())?;
    let (data, _, truth) = simulate_dataset(&cfg, 0).map_err(|e| e.to_string())?;
    let pipe = cfg.pipeline();
    let psm = run_psm(&data, &pipe, &mut seed::stream(seed, &[tag::PSM_MATCH]))
        .map_err(|e| e.to_string())?;
    let bpsm = run_bpsm(&data, &pipe, &cfg.mcmc(seed)).map_err(|e| e.to_string())?;
    Ok(Comparison {
        true_att: truth,
        n_treated: data.n_treated(),
        psm_att: psm.att.att,
        psm_pct_matched: psm.pct_matched(),
        bpsm_mean: bpsm.posterior.mean,
        bpsm_sd: bpsm.posterior.sd,
        bpsm_ci: (bpsm.posterior.ci_lo, bpsm.posterior.ci_hi),
        bpsm_pct_matched: bpsm.frequency.pct_at_least_once,
        bpsm_sample: bpsm.posterior.sample,
    })
}

/// PSM point estimate and BPSM posterior sample of the ATT on one dataset.
/// `caliper_sd <= 0` matches with replacement; otherwise without replacement
/// inside a caliper of that many standard deviations.
#[wasm_bindgen]
pub fn compare(n: usize, beta: f64, seed: u64, draws: usize, caliper_sd: f64) -> String {
    to_json(compare_impl(n, beta, seed, draws, caliper_sd))
}

#[derive(Debug, Serialize)]
pub struct FrequencyRow {
    pub z: bool,
    pub ps: f64,
    pub fraction: f64,
    pub psm_kept: bool,
}

pub fn match_frequency_impl(
    n: usize,
    seed: u64,
    draws: usize,
    caliper_sd: f64,
) -> Result<Vec<FrequencyRow>, String> {
    let cfg = demo_config(n, 1.0, seed, draws, caliper_sd);
    cfg.validate().map_err(|e| e.to_string())?;
    let (data, _, _) = simulate_dataset(&cfg, 0).map_err(|e| e.to_string())?;
    let pipe = cfg.pipeline();
    let psm = run_psm(&data, &pipe, &mut seed::stream(seed, &[tag::PSM_MATCH]))
        .map_err(|e| e.to_string())?;
    let bpsm = run_bpsm(&data, &pipe, &cfg.mcmc(seed)).map_err(|e| e.to_string())?;
    let kept = psm.matchset.kept(data.len());
    Ok((0..data.len())
        .map(|i| FrequencyRow {
            z: data.treatment()[i],
            ps: psm.scores.ps[i],
            fraction: bpsm.frequency.fraction[i],
            psm_kept: kept[i],
        })
        .collect())
}

/// Share of BPSM matchings in which each unit is kept, against its
/// estimated score and whether standard PSM kept it.
#[wasm_bindgen]
pub fn match_frequency(n: usize, seed: u64, draws: usize, caliper_sd: f64) -> String {
    to_json(match_frequency_impl(n, seed, draws, caliper_sd))
}
