//! Monte Carlo evaluation of PSM and BPSM on synthetic data with a known ATT.
//!
//! Data-generating process, per replication:
//!
//! 1. Latent `(u1, u2, u3)` are standard normal with pairwise correlation
//!    `rho`. `x1 = 1[u1 > 0]`; `x2` cuts the realised range of `u2` into six
//!    equal-length intervals (levels 1..=6); `x3` does the same for `u3` with
//!    ten levels and only enters the process in misspecified mode.
//! 2. `Z ~ Bernoulli(logit⁻¹(γ0 + γ1 x1 + γ2 x2 [+ γ3 x3]))`.
//! 3. `Y ~ Bernoulli(logit⁻¹(θ0 + β Z + θ1 x1 + θ2 x2 [+ θ3 x3]))`.
//!
//! The propensity model is always fitted on `(1, x1, x2)`, so in
//! misspecified mode the confounder `x3` is omitted.

use nalgebra::Matrix3;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Design, OutcomeKind};
use crate::error::{Error, Result};
use crate::estimator::{bootstrap_se, ControlWeighting};
use crate::matcher::{CaliperPool, DistanceMeasure, MatchOptions, Replacement};
use crate::pipeline::{run_bpsm, run_psm, PipelineConfig};
use crate::propensity::{inv_logit, McmcConfig};
use crate::{seed, stats};

/// Units over which individual treatment effects are averaged for the truth.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttPopulation {
    #[default]
    Treated,
    AllUnits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n: usize,
    /// Number of Monte Carlo replications (J).
    pub replications: usize,
    pub gamma_true: Vec<f64>,
    pub beta: f64,
    pub theta0: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub rho: f64,
    pub misspecified: bool,
    /// Effect of the omitted confounder on treatment assignment.
    pub confounder_ps_coef: f64,
    /// Effect of the omitted confounder on the outcome.
    pub confounder_outcome_coef: f64,
    pub with_replacement: bool,
    /// Caliper in SD units; only used without replacement (default 0.5).
    pub caliper_sd: Option<f64>,
    pub caliper_pool: CaliperPool,
    pub distance: DistanceMeasure,
    pub control_weighting: ControlWeighting,
    pub true_att_over: AttPopulation,
    pub retrim_per_draw: bool,
    pub seed: u64,
    /// Saved posterior draws per replication (K).
    pub draws: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub prior_variance: f64,
    /// Bootstrap replicates for a per-replication PSM standard error (0 = off).
    pub bootstrap: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        let mcmc = McmcConfig::default();
        Self {
            n: 500,
            replications: 1000,
            gamma_true: vec![-6.0, 2.0, 1.0],
            beta: 1.0,
            theta0: 0.0,
            theta1: 2.0,
            theta2: -2.0,
            rho: 0.25,
            misspecified: false,
            confounder_ps_coef: 0.5,
            confounder_outcome_coef: 0.5,
            with_replacement: true,
            caliper_sd: None,
            caliper_pool: CaliperPool::Retained,
            distance: DistanceMeasure::Score,
            control_weighting: ControlWeighting::Multiplicity,
            true_att_over: AttPopulation::Treated,
            retrim_per_draw: true,
            seed: 0,
            draws: mcmc.draws,
            burn_in: mcmc.burn_in,
            thin: mcmc.thin,
            prior_variance: mcmc.prior_variance,
            bootstrap: 0,
        }
    }
}

impl SimConfig {
    /// Treatment effect preset `β = 1`.
    pub fn preset_large_effect() -> Self {
        Self::default()
    }

    /// Treatment effect preset `β = 0.25`.
    pub fn preset_small_effect() -> Self {
        Self {
            beta: 0.25,
            ..Self::default()
        }
    }

    /// Every violated constraint, as `field: message`.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.n < 50 {
            v.push(format!("n: must be at least 50, got {}", self.n));
        }
        if self.replications < 1 {
            v.push("replications: must be at least 1".to_string());
        }
        if self.gamma_true.len() != 3 {
            v.push(format!(
                "gamma_true: expected 3 coefficients (intercept, x1, x2), got {}",
                self.gamma_true.len()
            ));
        }
        // Three equicorrelated variables need rho > -1/2 to be positive definite.
        if !(self.rho > -0.5 && self.rho < 1.0) {
            v.push(format!("rho: must lie in (-0.5, 1), got {}", self.rho));
        }
        if let Some(c) = self.caliper_sd {
            if !(c > 0.0 && c.is_finite()) {
                v.push(format!("caliper_sd: must be positive, got {c}"));
            } else if self.with_replacement {
                v.push("caliper_sd: only applies when with_replacement is false".to_string());
            }
        }
        if self.draws < 2 {
            v.push(format!("draws: must be at least 2, got {}", self.draws));
        }
        if self.thin < 1 {
            v.push("thin: must be at least 1".to_string());
        }
        if !(self.prior_variance > 0.0 && self.prior_variance.is_finite()) {
            v.push(format!(
                "prior_variance: must be positive, got {}",
                self.prior_variance
            ));
        }
        if self.bootstrap == 1 {
            v.push("bootstrap: must be 0 (off) or at least 2".to_string());
        }
        let coefs = [
            ("beta", self.beta),
            ("theta0", self.theta0),
            ("theta1", self.theta1),
            ("theta2", self.theta2),
            ("confounder_ps_coef", self.confounder_ps_coef),
            ("confounder_outcome_coef", self.confounder_outcome_coef),
        ];
        for (name, value) in coefs {
            if !value.is_finite() {
                v.push(format!("{name}: must be finite"));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(v.join("; ")))
        }
    }

    pub fn outcome_model(&self) -> OutcomeModel {
        OutcomeModel {
            theta0: self.theta0,
            beta: self.beta,
            theta1: self.theta1,
            theta2: self.theta2,
            theta3: if self.misspecified {
                self.confounder_outcome_coef
            } else {
                0.0
            },
        }
    }

    /// Assignment coefficients of the data-generating process.
    pub fn assignment_coefficients(&self) -> Vec<f64> {
        let mut g = self.gamma_true.clone();
        if self.misspecified {
            g.push(self.confounder_ps_coef);
        }
        g
    }

    pub fn pipeline(&self) -> PipelineConfig {
        let replacement = if self.with_replacement {
            Replacement::With
        } else {
            Replacement::Without {
                caliper_sd: self.caliper_sd.unwrap_or(0.5),
            }
        };
        PipelineConfig {
            matching: MatchOptions {
                replacement,
                distance: self.distance,
                caliper_pool: self.caliper_pool,
                trim: true,
            },
            weighting: self.control_weighting,
            retrim_per_draw: self.retrim_per_draw,
            ..PipelineConfig::default()
        }
    }

    pub fn mcmc(&self, seed: u64) -> McmcConfig {
        McmcConfig {
            draws: self.draws,
            burn_in: self.burn_in,
            thin: self.thin,
            prior_variance: self.prior_variance,
            proposal_scale: None,
            seed,
        }
    }
}

/// Simulated covariates. `latent` holds `(u1, u2, u3)` per unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariates {
    pub latent: Vec<[f64; 3]>,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub x3: Option<Vec<f64>>,
}

impl Covariates {
    pub fn len(&self) -> usize {
        self.x1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x1.is_empty()
    }

    /// `(1, x1, x2)`: the covariates the propensity model is fitted on.
    pub fn fitted_design(&self) -> Design {
        let rows: Vec<[f64; 2]> = self
            .x1
            .iter()
            .zip(&self.x2)
            .map(|(&a, &b)| [a, b])
            .collect();
        Design::with_intercept(&rows).expect("rows have equal length")
    }

    /// `(1, x1, x2[, x3])`: the covariates that drive assignment.
    pub fn true_design(&self) -> Design {
        match &self.x3 {
            None => self.fitted_design(),
            Some(x3) => {
                let rows: Vec<[f64; 3]> = (0..self.len())
                    .map(|i| [self.x1[i], self.x2[i], x3[i]])
                    .collect();
                Design::with_intercept(&rows).expect("rows have equal length")
            }
        }
    }

    fn x3_at(&self, i: usize) -> f64 {
        self.x3.as_ref().map_or(0.0, |x| x[i])
    }
}

/// Equal-length binning of the realised range into levels `1..=levels`.
fn ordinal(values: &[f64], levels: usize) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let width = hi - lo;
    values
        .iter()
        .map(|&v| {
            if width.is_nan() || width <= 0.0 {
                return 1.0;
            }
            let bin = ((v - lo) / width * levels as f64).floor() as usize;
            (bin.min(levels - 1) + 1) as f64
        })
        .collect()
}

pub fn gen_covariates<R: Rng + ?Sized>(
    n: usize,
    rho: f64,
    misspecified: bool,
    rng: &mut R,
) -> Covariates {
    let corr = Matrix3::new(1.0, rho, rho, rho, 1.0, rho, rho, rho, 1.0);
    let chol = corr
        .cholesky()
        .expect("equicorrelation matrix with rho in (-1/2, 1) is positive definite")
        .l();
    // Three normals are always drawn so (u1, u2) do not depend on the mode.
    let latent: Vec<[f64; 3]> = (0..n)
        .map(|_| {
            let e = nalgebra::Vector3::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            );
            let u = chol * e;
            [u[0], u[1], u[2]]
        })
        .collect();
    let u2: Vec<f64> = latent.iter().map(|u| u[1]).collect();
    let x1 = latent
        .iter()
        .map(|u| if u[0] > 0.0 { 1.0 } else { 0.0 })
        .collect();
    let x2 = ordinal(&u2, 6);
    let x3 = misspecified.then(|| {
        let u3: Vec<f64> = latent.iter().map(|u| u[2]).collect();
        ordinal(&u3, 10)
    });
    Covariates { latent, x1, x2, x3 }
}

pub fn gen_treatment<R: Rng + ?Sized>(x: &Design, gamma: &[f64], rng: &mut R) -> Result<Vec<bool>> {
    let scores = crate::propensity::predict(gamma, x)?;
    Ok(scores.ps.iter().map(|&p| rng.random::<f64>() < p).collect())
}

/// Outcome logistic model coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeModel {
    pub theta0: f64,
    pub beta: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
}

impl OutcomeModel {
    fn untreated_index(&self, x1: f64, x2: f64, x3: f64) -> f64 {
        self.theta0 + self.theta1 * x1 + self.theta2 * x2 + self.theta3 * x3
    }

    pub fn success_probability(&self, x1: f64, x2: f64, x3: f64, treated: bool) -> f64 {
        let shift = if treated { self.beta } else { 0.0 };
        inv_logit(self.untreated_index(x1, x2, x3) + shift)
    }
}

pub fn gen_outcome<R: Rng + ?Sized>(
    cov: &Covariates,
    z: &[bool],
    model: &OutcomeModel,
    rng: &mut R,
) -> Vec<f64> {
    (0..cov.len())
        .map(|i| {
            let p = model.success_probability(cov.x1[i], cov.x2[i], cov.x3_at(i), z[i]);
            if rng.random::<f64>() < p {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// Average of individual effects `logit⁻¹(index + β) − logit⁻¹(index)` over
/// the chosen population. Effects are computed once per covariate cell.
pub fn true_att(
    cov: &Covariates,
    z: &[bool],
    model: &OutcomeModel,
    over: AttPopulation,
) -> Result<f64> {
    if !z.iter().any(|&t| t) {
        return Err(Error::NoTreatedUnits);
    }
    let mut cells: std::collections::BTreeMap<(u64, u64, u64), usize> = Default::default();
    for (i, &zi) in z.iter().enumerate().take(cov.len()) {
        if over == AttPopulation::Treated && !zi {
            continue;
        }
        let key = (
            cov.x1[i].to_bits(),
            cov.x2[i].to_bits(),
            cov.x3_at(i).to_bits(),
        );
        *cells.entry(key).or_default() += 1;
    }
    let total: usize = cells.values().sum();
    let weighted: f64 = cells
        .iter()
        .map(|(&(a, b, c), &count)| {
            let (x1, x2, x3) = (f64::from_bits(a), f64::from_bits(b), f64::from_bits(c));
            let te = model.success_probability(x1, x2, x3, true)
                - model.success_probability(x1, x2, x3, false);
            te * count as f64
        })
        .sum();
    Ok(weighted / total as f64)
}

/// Unit-by-unit evaluation of the same quantity as [`true_att`], used as a
/// cross-check on every replication.
pub fn true_att_brute_force(
    cov: &Covariates,
    z: &[bool],
    model: &OutcomeModel,
    over: AttPopulation,
) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, &zi) in z.iter().enumerate().take(cov.len()) {
        if over == AttPopulation::Treated && !zi {
            continue;
        }
        let idx = model.theta0
            + model.theta1 * cov.x1[i]
            + model.theta2 * cov.x2[i]
            + model.theta3 * cov.x3_at(i);
        let treated = 1.0 / (1.0 + (-(idx + model.beta)).exp());
        let control = 1.0 / (1.0 + (-idx).exp());
        sum += treated - control;
        count += 1;
    }
    sum / count as f64
}

/// Outcome of one Monte Carlo replication (probability scale).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub j: usize,
    pub n_treated: usize,
    pub true_att: f64,
    pub psm_att: f64,
    pub psm_pct_matched: f64,
    pub psm_se: Option<f64>,
    pub bpsm_att: f64,
    pub bpsm_sd: f64,
    pub bpsm_ci_lo: f64,
    pub bpsm_ci_hi: f64,
    pub bpsm_pct_matched: f64,
    pub bpsm_acceptance_rate: f64,
}

/// Simulated dataset for replication `j`, with its true ATT.
pub fn simulate_dataset(cfg: &SimConfig, j: usize) -> Result<(Dataset, Covariates, f64)> {
    let mut rng = seed::stream(
        cfg.seed,
        &[seed::tag::REPLICATION, j as u64, seed::tag::DATA],
    );
    let cov = gen_covariates(cfg.n, cfg.rho, cfg.misspecified, &mut rng);
    let z = gen_treatment(&cov.true_design(), &cfg.assignment_coefficients(), &mut rng)?;
    let model = cfg.outcome_model();
    let y = gen_outcome(&cov, &z, &model, &mut rng);
    let truth = true_att(&cov, &z, &model, cfg.true_att_over)?;
    let check = true_att_brute_force(&cov, &z, &model, cfg.true_att_over);
    if (truth - check).abs() > 1e-12 {
        return Err(Error::InvalidData(format!(
            "true ATT cross-check failed: {truth} vs {check}"
        )));
    }
    let data = Dataset::from_parts(cov.fitted_design(), z, y, OutcomeKind::Binary)?;
    Ok((data, cov, truth))
}

pub fn run_replication(cfg: &SimConfig, j: usize) -> Result<ReplicationRecord> {
    let (data, _, truth) = simulate_dataset(cfg, j)?;
    let pipeline = cfg.pipeline();

    let mut psm_rng = seed::stream(
        cfg.seed,
        &[seed::tag::REPLICATION, j as u64, seed::tag::PSM_MATCH],
    );
    let psm = run_psm(&data, &pipeline, &mut psm_rng)?;

    let mcmc_seed = seed::derive(
        cfg.seed,
        &[seed::tag::REPLICATION, j as u64, seed::tag::MCMC],
    );
    let bpsm = run_bpsm(&data, &pipeline, &cfg.mcmc(mcmc_seed))?;

    let psm_se = if cfg.bootstrap >= 2 {
        let boot_seed = seed::derive(
            cfg.seed,
            &[seed::tag::REPLICATION, j as u64, seed::tag::BOOTSTRAP],
        );
        Some(bootstrap_se(&data, &pipeline, cfg.bootstrap, boot_seed)?.se)
    } else {
        None
    };

    Ok(ReplicationRecord {
        j,
        n_treated: data.n_treated(),
        true_att: truth,
        psm_att: psm.att.att,
        psm_pct_matched: psm.pct_matched(),
        psm_se,
        bpsm_att: bpsm.posterior.mean,
        bpsm_sd: bpsm.posterior.sd,
        bpsm_ci_lo: bpsm.posterior.ci_lo,
        bpsm_ci_hi: bpsm.posterior.ci_hi,
        bpsm_pct_matched: bpsm.frequency.pct_at_least_once,
        bpsm_acceptance_rate: bpsm.draws.acceptance_rate,
    })
}

/// Summary of one method across replications, on the ×100 scale.
///
/// `rmse` is the root of the mean squared error; the table this layout
/// mirrors labels a column "MSE" whose values are only consistent with RMSE.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodRow {
    pub method: String,
    pub pct_matched_at_least_once: f64,
    pub att_mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub bias: f64,
    pub mab: f64,
    pub rmse: f64,
    pub true_att_mean: f64,
}

impl MethodRow {
    fn from_estimates(method: &str, estimates: &[f64], truths: &[f64], pct: &[f64]) -> Self {
        let errors: Vec<f64> = estimates.iter().zip(truths).map(|(e, t)| e - t).collect();
        let (lo, hi) = stats::central_interval(estimates);
        let abs: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
        let sq: Vec<f64> = errors.iter().map(|e| e * e).collect();
        Self {
            method: method.to_string(),
            pct_matched_at_least_once: stats::mean(pct),
            att_mean: 100.0 * stats::mean(estimates),
            ci_lo: 100.0 * lo,
            ci_hi: 100.0 * hi,
            bias: 100.0 * stats::mean(&errors),
            mab: 100.0 * stats::mean(&abs),
            rmse: 100.0 * stats::mean(&sq).sqrt(),
            true_att_mean: 100.0 * stats::mean(truths),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimStudyReport {
    pub rows: Vec<MethodRow>,
    pub replications: usize,
    pub failed: usize,
}

impl SimStudyReport {
    pub fn row(&self, method: &str) -> Option<&MethodRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn from_records(records: &[ReplicationRecord], failed: usize) -> Self {
        let truths: Vec<f64> = records.iter().map(|r| r.true_att).collect();
        let col = |f: fn(&ReplicationRecord) -> f64| records.iter().map(f).collect::<Vec<_>>();
        let rows = vec![
            MethodRow::from_estimates(
                "PSM",
                &col(|r| r.psm_att),
                &truths,
                &col(|r| r.psm_pct_matched),
            ),
            MethodRow::from_estimates(
                "BPSM",
                &col(|r| r.bpsm_att),
                &truths,
                &col(|r| r.bpsm_pct_matched),
            ),
        ];
        Self {
            rows,
            replications: records.len(),
            failed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StudyOutput {
    pub report: SimStudyReport,
    pub records: Vec<ReplicationRecord>,
    /// `(j, cause)` for replications that failed and were excluded.
    pub failures: Vec<(usize, String)>,
}

/// Run `cfg.replications` independent replications and aggregate them.
///
/// Replication `j` draws all of its randomness from streams derived from
/// `(cfg.seed, j)`, so the output is identical for any thread count. Failed
/// replications are logged and excluded; more than 2% failures aborts.
pub fn run_study(cfg: &SimConfig) -> Result<StudyOutput> {
    cfg.validate()?;
    #[cfg(feature = "parallel")]
    let results: Vec<Result<ReplicationRecord>> = {
        use rayon::prelude::*;
        (0..cfg.replications)
            .into_par_iter()
            .map(|j| run_replication(cfg, j))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<ReplicationRecord>> = (0..cfg.replications)
        .map(|j| run_replication(cfg, j))
        .collect();

    let mut records = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (j, r) in results.into_iter().enumerate() {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => {
                log::warn!("replication {j} failed: {e}");
                failures.push((j, e.to_string()));
            }
        }
    }
    if failures.len() * 50 > cfg.replications || records.is_empty() {
        let (first, cause) = failures[0].clone();
        return Err(Error::ReplicationFailed {
            failed: failures.len(),
            total: cfg.replications,
            first,
            cause,
        });
    }
    let report = SimStudyReport::from_records(&records, failures.len());
    Ok(StudyOutput {
        report,
        records,
        failures,
    })
}
