use bpsm::simulation::{run_replication, simulate_dataset, true_att_brute_force};
use bpsm::{run_study, SimConfig};

fn small(seed: u64) -> SimConfig {
    SimConfig {
        n: 300,
        replications: 20,
        draws: 100,
        burn_in: 300,
        thin: 2,
        seed,
        ..SimConfig::default()
    }
}

#[test]
fn null_effect_is_centred() {
    let cfg = SimConfig {
        beta: 0.0,
        replications: 100,
        n: 500,
        draws: 200,
        ..small(3)
    };
    let out = run_study(&cfg).unwrap();
    assert!(out.records.iter().all(|r| r.true_att == 0.0));
    for row in &out.report.rows {
        assert!(row.bias.abs() < 2.0, "{}: bias {}", row.method, row.bias);
    }
}

#[test]
fn report_rows_satisfy_error_inequalities() {
    for cfg in [
        small(1),
        SimConfig {
            misspecified: true,
            ..small(2)
        },
        SimConfig {
            with_replacement: false,
            caliper_sd: Some(0.5),
            ..small(3)
        },
    ] {
        let report = run_study(&cfg).unwrap().report;
        assert_eq!(report.rows.len(), 2);
        for r in &report.rows {
            assert!(r.rmse >= r.mab, "{r:?}");
            assert!(r.mab >= r.bias.abs(), "{r:?}");
            assert!(r.ci_lo <= r.ci_hi);
        }
    }
}

#[test]
fn report_is_identical_for_any_thread_count() {
    let cfg = small(4);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let out = pool.install(|| run_study(&cfg)).unwrap();
        (
            serde_json::to_string(&out.report).unwrap(),
            serde_json::to_string(&out.records).unwrap(),
        )
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(1));
}

#[test]
fn every_replication_truth_matches_brute_force() {
    for misspecified in [false, true] {
        let cfg = SimConfig {
            misspecified,
            ..small(5)
        };
        for j in 0..cfg.replications {
            let (data, cov, truth) = simulate_dataset(&cfg, j).unwrap();
            let brute = true_att_brute_force(
                &cov,
                data.treatment(),
                &cfg.outcome_model(),
                cfg.true_att_over,
            );
            assert!((truth - brute).abs() < 1e-12);
        }
    }
}

#[test]
fn misspecified_fit_omits_confounder() {
    let cfg = SimConfig {
        misspecified: true,
        ..small(6)
    };
    let (data, cov, _) = simulate_dataset(&cfg, 0).unwrap();
    assert_eq!(data.design().ncols(), 3);
    assert_eq!(cov.true_design().ncols(), 4);
}

#[test]
fn caliper_study_records_drops() {
    let cfg = SimConfig {
        with_replacement: false,
        caliper_sd: Some(0.5),
        ..small(7)
    };
    let rec = run_replication(&cfg, 0).unwrap();
    assert!(rec.psm_pct_matched <= 100.0);
    assert!(rec.bpsm_pct_matched >= rec.psm_pct_matched * 0.5);
}

#[test]
fn invalid_config_is_rejected() {
    let cfg = SimConfig {
        rho: 1.0,
        ..small(0)
    };
    assert!(run_study(&cfg).is_err());
}
