//! Standard (PSM) and Bayesian (BPSM) propensity score matching for
//! estimating the average treatment effect on the treated.
//!
//! The crate is organised bottom-up:
//!
//! * [`propensity`] fits the logistic treatment-assignment model, either by
//!   Newton–Raphson maximum likelihood or by random-walk Metropolis–Hastings,
//!   and turns coefficients into propensity scores.
//! * [`matcher`] trims to common support and builds 1:1 nearest-neighbour
//!   matched samples, with replacement or without replacement inside a caliper.
//! * [`estimator`] computes the ATT from matched samples, bootstrap standard
//!   errors for PSM, and posterior ATT samples for BPSM.
//! * [`pipeline`] strings the above together into the two end-to-end methods.
//! * [`simulation`] generates synthetic studies with known treatment effects
//!   and aggregates bias / MAB / RMSE over Monte Carlo replications.

pub mod data;
pub mod error;
pub mod estimator;
pub mod matcher;
pub mod pipeline;
pub mod propensity;
pub mod seed;
pub mod simulation;
pub mod stats;

pub use data::{Dataset, Design, OutcomeKind};
pub use error::{Error, Result};
pub use estimator::{
    att_point, att_point_with, att_posterior, att_posterior_with, bootstrap_se, drop_keep_export,
    AttPoint, AttPosterior, BootstrapSe, ControlWeighting, DropKeepRow,
};
pub use matcher::{
    match_frequency, match_no_replacement_caliper, match_sample, match_sample_among,
    match_with_replacement, match_within_caliper, trim_common_support, CaliperPool,
    DistanceMeasure, MatchFrequency, MatchOptions, MatchSet, Replacement, Unit,
};
pub use pipeline::{run_bpsm, run_psm, BpsmOutput, PipelineConfig, PsmOutput};
pub use propensity::{
    fit_bayes, fit_mle, fit_mle_with, inv_logit, posterior_ps_summary, predict, McmcConfig,
    MleOptions, PosteriorDraws, PropensityFit, PropensityScores, PsSummary,
};
pub use simulation::{run_study, SimConfig, SimStudyReport, StudyOutput};
