use std::collections::BTreeSet;
use std::path::Path;

use bpsm::seed::{self, tag};
use bpsm::{
    bootstrap_se, posterior_ps_summary, run_bpsm, run_psm, run_study, stats, Dataset, Error,
    MatchSet, SimConfig,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{flag, sig6, write_json, Table};
use crate::CliError;

fn runtime(e: Error) -> CliError {
    match e {
        Error::InvalidData(_)
        | Error::InvalidConfig(_)
        | Error::DimensionMismatch { .. }
        | Error::NoTreatedUnits => CliError::Input(e.to_string()),
        other => CliError::Runtime(other.to_string()),
    }
}

fn out_path(dir: &Path, name: &str) -> std::path::PathBuf {
    dir.join(name)
}

#[derive(Serialize)]
struct SimulateJson<'a> {
    config: &'a SimConfig,
    report: &'a bpsm::SimStudyReport,
    failures: &'a [(usize, String)],
}

pub fn simulate(cfg: &SimConfig, out: &Path) -> Result<(), CliError> {
    let study = run_study(cfg).map_err(runtime)?;

    let mut report = Table::new(&[
        "method",
        "pct_matched_at_least_once",
        "att_mean",
        "ci_lo",
        "ci_hi",
        "bias",
        "mab",
        "rmse",
        "true_att_mean",
    ]);
    for r in &study.report.rows {
        report.push(vec![
            r.method.clone(),
            sig6(r.pct_matched_at_least_once),
            sig6(r.att_mean),
            sig6(r.ci_lo),
            sig6(r.ci_hi),
            sig6(r.bias),
            sig6(r.mab),
            sig6(r.rmse),
            sig6(r.true_att_mean),
        ]);
    }
    report.write(&out_path(out, "report.csv"))?;
    write_json(
        &out_path(out, "report.json"),
        &SimulateJson {
            config: cfg,
            report: &study.report,
            failures: &study.failures,
        },
    )?;

    let mut per_rep = Table::new(&["j", "method", "att_estimate", "true_att"]);
    for rec in &study.records {
        for (method, est) in [("PSM", rec.psm_att), ("BPSM", rec.bpsm_att)] {
            per_rep.push(vec![
                rec.j.to_string(),
                method.into(),
                sig6(est),
                sig6(rec.true_att),
            ]);
        }
    }
    per_rep.write(&out_path(out, "per_replication.csv"))?;

    for r in &study.report.rows {
        println!(
            "{:<5} matched {:>6}%  att {:>9}  bias {:>9}  mab {:>9}  rmse {:>9}",
            r.method,
            sig6(r.pct_matched_at_least_once),
            sig6(r.att_mean),
            sig6(r.bias),
            sig6(r.mab),
            sig6(r.rmse)
        );
    }
    if !study.failures.is_empty() {
        eprintln!(
            "{} of {} replications failed and were excluded",
            study.failures.len(),
            cfg.replications
        );
    }
    Ok(())
}

/// One row of `att.json`.
#[derive(Debug, Serialize)]
pub struct AttRow {
    pub method: &'static str,
    pub att: f64,
    pub se: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub pct_matched_at_least_once: f64,
}

#[derive(Serialize)]
struct PsmDump<'a> {
    att: f64,
    p1: f64,
    p0: f64,
    gamma: &'a [f64],
    pairs: &'a [(usize, usize)],
    /// ATT of each successful bootstrap replicate, in replicate order.
    bootstrap: Option<&'a [f64]>,
}

#[derive(Serialize)]
struct DrawDump<'a> {
    k: usize,
    gamma: &'a [f64],
    att: f64,
    p1: f64,
    p0: f64,
    pairs: &'a [(usize, usize)],
}

#[derive(Serialize)]
struct BpsmDump<'a> {
    acceptance_rate: f64,
    draws: Vec<DrawDump<'a>>,
}

/// Everything needed to recompute `att.json`. Unit indices are 0-based rows
/// of the input CSV.
#[derive(Serialize)]
struct PerDraw<'a> {
    seed: u64,
    n_units: usize,
    psm: PsmDump<'a>,
    bpsm: BpsmDump<'a>,
}

/// Percentage of units appearing in at least one pair of any matching.
pub fn pct_in_pairs<'a>(sets: impl IntoIterator<Item = &'a MatchSet>, n: usize) -> f64 {
    let units: BTreeSet<usize> = sets
        .into_iter()
        .flat_map(|ms| ms.pairs.iter().flat_map(|&(t, c)| [t, c]))
        .collect();
    100.0 * units.len() as f64 / n as f64
}

pub fn analyze(data: &Dataset, run: &RunConfig, out: &Path) -> Result<(), CliError> {
    let cfg = &run.sim;
    let pipe = cfg.pipeline();
    let n = data.len();

    let psm =
        run_psm(data, &pipe, &mut seed::stream(cfg.seed, &[tag::PSM_MATCH])).map_err(runtime)?;
    let boot = if run.analyze_bootstrap > 0 {
        Some(
            bootstrap_se(
                data,
                &pipe,
                run.analyze_bootstrap,
                seed::derive(cfg.seed, &[tag::BOOTSTRAP]),
            )
            .map_err(runtime)?,
        )
    } else {
        None
    };
    let bpsm = run_bpsm(data, &pipe, &cfg.mcmc(cfg.seed)).map_err(runtime)?;
    let ps_post = posterior_ps_summary(&bpsm.draws, data.design()).map_err(runtime)?;

    let boot_ci = boot
        .as_ref()
        .map(|b| stats::central_interval(&b.replicates));
    let rows = [
        AttRow {
            method: "PSM",
            att: psm.att.att,
            se: boot.as_ref().map(|b| b.se),
            ci_lo: boot_ci.map(|c| c.0),
            ci_hi: boot_ci.map(|c| c.1),
            pct_matched_at_least_once: pct_in_pairs([&psm.matchset], n),
        },
        AttRow {
            method: "BPSM",
            att: bpsm.posterior.mean,
            se: Some(bpsm.posterior.sd),
            ci_lo: Some(bpsm.posterior.ci_lo),
            ci_hi: Some(bpsm.posterior.ci_hi),
            pct_matched_at_least_once: bpsm.frequency.pct_at_least_once,
        },
    ];
    write_json(&out_path(out, "att.json"), &rows)?;

    let dump = PerDraw {
        seed: cfg.seed,
        n_units: n,
        psm: PsmDump {
            att: psm.att.att,
            p1: psm.att.p1,
            p0: psm.att.p0,
            gamma: &psm.fit.gamma,
            pairs: &psm.matchset.pairs,
            bootstrap: boot.as_ref().map(|b| b.replicates.as_slice()),
        },
        bpsm: BpsmDump {
            acceptance_rate: bpsm.draws.acceptance_rate,
            draws: bpsm
                .matchsets
                .iter()
                .zip(&bpsm.posterior.points)
                .enumerate()
                .map(|(k, (ms, pt))| DrawDump {
                    k,
                    gamma: bpsm.draws.draw(k),
                    att: pt.att,
                    p1: pt.p1,
                    p0: pt.p0,
                    pairs: &ms.pairs,
                })
                .collect(),
        },
    };
    write_json(&out_path(out, "per_draw.json"), &dump)?;

    let ids = data.ids();
    let z = data.treatment();
    let psm_kept = psm.matchset.kept(n);

    let mut post = Table::new(&["unit", "z", "ps_mean", "ps_lo", "ps_hi"]);
    for i in 0..n {
        let s = &ps_post[i];
        post.push(vec![
            ids[i].clone(),
            flag(z[i]),
            sig6(s.mean),
            sig6(s.lo),
            sig6(s.hi),
        ]);
    }
    post.write(&out_path(out, "ps_posterior.csv"))?;

    let mut freq = Table::new(&["unit", "z", "ps_mean", "bpsm_match_fraction", "psm_kept"]);
    for i in 0..n {
        freq.push(vec![
            ids[i].clone(),
            flag(z[i]),
            sig6(ps_post[i].mean),
            sig6(bpsm.frequency.fraction[i]),
            flag(psm_kept[i]),
        ]);
    }
    freq.write(&out_path(out, "match_frequency.csv"))?;

    let mut dk = Table::new(&["unit", "z", "ps", "kept"]);
    let drop_keep = bpsm::drop_keep_export(&psm.scores, z, &psm.matchset).map_err(runtime)?;
    for row in drop_keep {
        dk.push(vec![
            ids[row.unit].clone(),
            flag(row.treated),
            sig6(row.ps),
            flag(row.kept),
        ]);
    }
    dk.write(&out_path(out, "drop_keep.csv"))?;

    for r in &rows {
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), sig6);
        println!(
            "{:<5} att {:>9}  se {:>9}  95% [{}, {}]  matched {}%",
            r.method,
            sig6(r.att),
            opt(r.se),
            opt(r.ci_lo),
            opt(r.ci_hi),
            sig6(r.pct_matched_at_least_once)
        );
    }
    Ok(())
}
