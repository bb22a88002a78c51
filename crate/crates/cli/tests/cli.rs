use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bpsm::simulation::simulate_dataset;
use bpsm::{stats, SimConfig};
use serde_json::Value;
use tempfile::TempDir;

fn bpsm() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bpsm"));
    cmd.env_remove("UN_SEED");
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("spawn bpsm")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const MINIMAL: &str = r#"{
  "n": 500,
  "replications": 5,
  "draws": 50,
  "burn_in": 200,
  "seed": 9
}"#;

#[test]
fn version_prints_package_version() {
    let out = run(bpsm().arg("version"));
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn validate_config_accepts_valid_file() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", MINIMAL);
    let out = run(bpsm().arg("validate-config").arg(&cfg));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "OK");
}

#[test]
fn validate_config_names_bad_fields() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        "{\n  \"with_replacement\": false,\n  \"caliper_sd\": -1,\n  \"rho\": 2\n}",
    );
    let out = run(bpsm().arg("validate-config").arg(&cfg));
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("caliper_sd") && err.contains(":3"), "{err}");
    assert!(err.contains("rho"), "{err}");
}

#[test]
fn validate_config_suggests_nearest_key() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.json", "{\"calliper_sd\": 0.5}");
    let out = run(bpsm().arg("validate-config").arg(&cfg));
    assert_eq!(code(&out), 2);
    assert!(
        stderr(&out).contains("did you mean `caliper_sd`"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn missing_config_file_is_input_error() {
    let out = run(bpsm().args(["validate-config", "/nonexistent/c.json"]));
    assert_eq!(code(&out), 2);
}

fn simulate(dir: &Path, cfg: &Path, extra: &[&str], env_seed: Option<&str>) -> Output {
    let mut cmd = bpsm();
    cmd.arg("simulate")
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(dir)
        .args(extra);
    if let Some(s) = env_seed {
        cmd.env("UN_SEED", s);
    }
    run(&mut cmd)
}

fn outputs(dir: &Path) -> Vec<Vec<u8>> {
    ["report.csv", "report.json", "per_replication.csv"]
        .iter()
        .map(|f| fs::read(dir.join(f)).unwrap())
        .collect()
}

#[test]
fn simulate_writes_reports_deterministically() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.json", MINIMAL);
    let (a, b, c) = (
        tmp.path().join("a"),
        tmp.path().join("b"),
        tmp.path().join("c"),
    );

    let out = simulate(&a, &cfg, &["--workers", "1"], None);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = simulate(&b, &cfg, &["--workers", "3"], None);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(outputs(&a), outputs(&b));
    let out = simulate(&c, &cfg, &[], None);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(outputs(&a), outputs(&c));

    let report = fs::read_to_string(a.join("report.csv")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("method,pct_matched_at_least_once"));
    assert!(lines[1].starts_with("PSM,"));
    assert!(lines[2].starts_with("BPSM,"));

    let per_rep = fs::read_to_string(a.join("per_replication.csv")).unwrap();
    assert_eq!(
        per_rep.lines().next(),
        Some("j,method,att_estimate,true_att")
    );
    assert_eq!(per_rep.lines().count(), 1 + 2 * 5);

    let json: Value = serde_json::from_slice(&fs::read(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["report"]["rows"].as_array().unwrap().len(), 2);
    assert_eq!(json["config"]["seed"], 9);
    for row in json["report"]["rows"].as_array().unwrap() {
        let (bias, mab, rmse) = (
            row["bias"].as_f64().unwrap(),
            row["mab"].as_f64().unwrap(),
            row["rmse"].as_f64().unwrap(),
        );
        assert!(rmse >= mab && mab >= bias.abs());
    }
}

#[test]
fn seed_precedence_is_flag_then_env_then_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.json", MINIMAL);
    let dirs: Vec<_> = ["config", "env", "flag", "flag_over_env"]
        .iter()
        .map(|d| tmp.path().join(d))
        .collect();
    assert_eq!(code(&simulate(&dirs[0], &cfg, &[], None)), 0);
    assert_eq!(code(&simulate(&dirs[1], &cfg, &[], Some("123"))), 0);
    assert_eq!(code(&simulate(&dirs[2], &cfg, &["--seed", "123"], None)), 0);
    assert_eq!(
        code(&simulate(&dirs[3], &cfg, &["--seed", "9"], Some("123"))),
        0
    );

    assert_ne!(outputs(&dirs[0]), outputs(&dirs[1]));
    assert_eq!(outputs(&dirs[1]), outputs(&dirs[2]));
    assert_eq!(outputs(&dirs[0]), outputs(&dirs[3]));
    let json: Value =
        serde_json::from_slice(&fs::read(dirs[1].join("report.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["seed"], 123);
}

#[test]
fn failing_replications_exit_3() {
    let tmp = TempDir::new().unwrap();
    // Assignment probabilities this small leave no treated units.
    let cfg = write(
        tmp.path(),
        "c.json",
        r#"{"n": 60, "replications": 3, "draws": 10, "burn_in": 10, "gamma_true": [-60, 0, 0]}"#,
    );
    let out = simulate(&tmp.path().join("o"), &cfg, &[], None);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

fn analyze(data: &Path, cfg: Option<&Path>, out: &Path) -> Output {
    let mut cmd = bpsm();
    cmd.arg("analyze")
        .arg("--data")
        .arg(data)
        .arg("--out")
        .arg(out);
    if let Some(c) = cfg {
        cmd.arg("--config").arg(c);
    }
    run(&mut cmd)
}

#[test]
fn analyze_rejects_data_without_controls() {
    let tmp = TempDir::new().unwrap();
    let data = write(
        tmp.path(),
        "d.csv",
        "id,z,y,x1\n1,1,0,0.5\n2,1,1,0.7\n3,1,0,0.1\n",
    );
    let out = analyze(&data, None, &tmp.path().join("o"));
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("`z`"), "{}", stderr(&out));
}

#[test]
fn analyze_rejects_bad_header() {
    let tmp = TempDir::new().unwrap();
    let data = write(tmp.path(), "d.csv", "z,y,x1\n1,0,0.5\n0,1,0.7\n");
    let out = analyze(&data, None, &tmp.path().join("o"));
    assert_eq!(code(&out), 2);
}

/// Null-effect data from the simulation design, written as CSV.
fn null_effect_csv(dir: &Path) -> std::path::PathBuf {
    let cfg = SimConfig {
        n: 1000,
        beta: 0.0,
        seed: 4,
        ..SimConfig::default()
    };
    let (data, _, truth) = simulate_dataset(&cfg, 0).unwrap();
    assert_eq!(truth, 0.0);
    let mut text = String::from("id,z,y,x1,x2\n");
    for i in 0..data.len() {
        let row = data.design().row(i);
        text.push_str(&format!(
            "u{i},{},{},{},{}\n",
            u8::from(data.treatment()[i]),
            data.outcome()[i],
            row[1],
            row[2]
        ));
    }
    write(dir, "null.csv", &text)
}

fn analysis_config(dir: &Path) -> std::path::PathBuf {
    write(
        dir,
        "a.json",
        r#"{"draws": 300, "burn_in": 500, "thin": 2, "bootstrap": 200, "seed": 21}"#,
    )
}

#[test]
fn analyze_null_effect_and_recompute_from_dump() {
    let tmp = TempDir::new().unwrap();
    let data = null_effect_csv(tmp.path());
    let cfg = analysis_config(tmp.path());
    let out_dir = tmp.path().join("o");
    let out = analyze(&data, Some(&cfg), &out_dir);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let att: Value = serde_json::from_slice(&fs::read(out_dir.join("att.json")).unwrap()).unwrap();
    let rows = att.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for row in rows {
        let (lo, hi) = (
            row["ci_lo"].as_f64().unwrap(),
            row["ci_hi"].as_f64().unwrap(),
        );
        assert!(lo <= 0.0 && 0.0 <= hi, "{row}");
        assert!(row["se"].as_f64().unwrap() > 0.0);
    }

    // Recompute every att.json field from the per-draw dump.
    let dump: Value =
        serde_json::from_slice(&fs::read(out_dir.join("per_draw.json")).unwrap()).unwrap();
    let n = dump["n_units"].as_u64().unwrap() as usize;
    let y: Vec<f64> = fs::read_to_string(&data)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    let pairs = |v: &Value| -> Vec<(usize, usize)> {
        v.as_array()
            .unwrap()
            .iter()
            .map(|p| {
                (
                    p[0].as_u64().unwrap() as usize,
                    p[1].as_u64().unwrap() as usize,
                )
            })
            .collect()
    };
    let att_from_pairs = |p: &[(usize, usize)]| {
        let treated: BTreeSet<usize> = p.iter().map(|&(t, _)| t).collect();
        let p1 = treated.iter().map(|&t| y[t]).sum::<f64>() / treated.len() as f64;
        let p0 = p.iter().map(|&(_, c)| y[c]).sum::<f64>() / p.len() as f64;
        p1 - p0
    };
    let pct = |sets: &[Vec<(usize, usize)>]| {
        let units: BTreeSet<usize> = sets.iter().flatten().flat_map(|&(t, c)| [t, c]).collect();
        100.0 * units.len() as f64 / n as f64
    };

    let psm = &dump["psm"];
    let psm_pairs = pairs(&psm["pairs"]);
    assert!((att_from_pairs(&psm_pairs) - psm["att"].as_f64().unwrap()).abs() < 1e-12);
    let boot: Vec<f64> = psm["bootstrap"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let (lo, hi) = stats::central_interval(&boot);
    assert_eq!(rows[0]["method"], "PSM");
    assert_eq!(rows[0]["att"].as_f64(), psm["att"].as_f64());
    assert_eq!(rows[0]["se"].as_f64(), Some(stats::sample_sd(&boot)));
    assert_eq!(rows[0]["ci_lo"].as_f64(), Some(lo));
    assert_eq!(rows[0]["ci_hi"].as_f64(), Some(hi));
    assert_eq!(
        rows[0]["pct_matched_at_least_once"].as_f64(),
        Some(pct(&[psm_pairs]))
    );

    let draws = dump["bpsm"]["draws"].as_array().unwrap();
    assert_eq!(draws.len(), 300);
    let mut sample = Vec::new();
    let mut sets = Vec::new();
    for d in draws {
        let p = pairs(&d["pairs"]);
        let a = d["att"].as_f64().unwrap();
        assert!((att_from_pairs(&p) - a).abs() < 1e-12);
        assert_eq!(a, d["p1"].as_f64().unwrap() - d["p0"].as_f64().unwrap());
        sample.push(a);
        sets.push(p);
    }
    let (lo, hi) = stats::central_interval(&sample);
    assert_eq!(rows[1]["method"], "BPSM");
    assert_eq!(rows[1]["att"].as_f64(), Some(stats::mean(&sample)));
    assert_eq!(rows[1]["se"].as_f64(), Some(stats::sample_sd(&sample)));
    assert_eq!(rows[1]["ci_lo"].as_f64(), Some(lo));
    assert_eq!(rows[1]["ci_hi"].as_f64(), Some(hi));
    assert_eq!(
        rows[1]["pct_matched_at_least_once"].as_f64(),
        Some(pct(&sets))
    );

    // Plot tables: one row per unit plus header.
    for (file, header) in [
        ("ps_posterior.csv", "unit,z,ps_mean,ps_lo,ps_hi"),
        (
            "match_frequency.csv",
            "unit,z,ps_mean,bpsm_match_fraction,psm_kept",
        ),
        ("drop_keep.csv", "unit,z,ps,kept"),
    ] {
        let text = fs::read_to_string(out_dir.join(file)).unwrap();
        assert_eq!(text.lines().next(), Some(header), "{file}");
        assert_eq!(text.lines().count(), n + 1, "{file}");
    }
    let post = fs::read_to_string(out_dir.join("ps_posterior.csv")).unwrap();
    for line in post.lines().skip(1) {
        let f: Vec<f64> = line
            .split(',')
            .skip(2)
            .map(|v| v.parse().unwrap())
            .collect();
        assert!(f[1] <= f[0] + 1e-6 && f[0] <= f[2] + 1e-6, "{line}");
    }
}

#[test]
fn analyze_is_deterministic_across_workers() {
    let tmp = TempDir::new().unwrap();
    let data = null_effect_csv(tmp.path());
    let cfg = write(
        tmp.path(),
        "a.json",
        r#"{"draws": 60, "burn_in": 100, "bootstrap": 40, "seed": 2}"#,
    );
    let read_all = |dir: &Path| {
        [
            "att.json",
            "per_draw.json",
            "match_frequency.csv",
            "ps_posterior.csv",
            "drop_keep.csv",
        ]
        .iter()
        .map(|f| fs::read(dir.join(f)).unwrap())
        .collect::<Vec<_>>()
    };
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let mut cmd = bpsm();
    cmd.args(["--workers", "1", "analyze", "--data"])
        .arg(&data)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&a);
    assert_eq!(code(&run(&mut cmd)), 0);
    let mut cmd = bpsm();
    cmd.args(["analyze", "--workers", "4", "--data"])
        .arg(&data)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&b);
    assert_eq!(code(&run(&mut cmd)), 0);
    assert_eq!(read_all(&a), read_all(&b));
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let out = run(bpsm().arg("validate-config").arg(&path));
            assert_eq!(code(&out), 0, "{}: {}", path.display(), stderr(&out));
            seen += 1;
        }
    }
    assert!(seen >= 4);
}
