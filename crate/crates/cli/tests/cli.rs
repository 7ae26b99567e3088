use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kylelab_cli::output::{parse_csv, CONFIG_PREFIX, HASH_PREFIX};
use kylelab_cli::{config_hash, ExperimentConfig, Summary};

fn kylelab(args: &[&str]) -> Output {
    kylelab_env(args, None)
}

fn kylelab_env(args: &[&str], threads: Option<usize>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kylelab"));
    cmd.args(args);
    if let Some(n) = threads {
        cmd.env("RAYON_NUM_THREADS", n.to_string());
    }
    cmd.output().expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn summary(out: &Output) -> Summary {
    assert_eq!(out.status.code(), Some(0), "{}", stderr(out));
    serde_json::from_slice(&out.stdout).expect("summary JSON")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn static_kyle_reports_half_lambda() {
    let s = summary(&kylelab(&["static-kyle", "--sigma-v", "1", "--sigma-n", "1"]));
    assert_eq!(s.scenario, "static-kyle");
    assert_eq!(s.stats["lambda"].as_f64(), Some(0.5));
    assert_eq!(s.stats["beta"].as_f64(), Some(1.0));
    assert!(s.checks.iter().all(|c| c.pass));
    assert!(s.wall_time_s.is_none());
}

#[test]
fn kyle_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let outs: Vec<PathBuf> = (0..2).map(|i| dir.path().join(format!("run{i}.json"))).collect();
    for out in &outs {
        let o = kylelab(&[
            "kyle",
            "--f",
            "phi",
            "--z",
            "0.5",
            "--paths",
            "5000",
            "--steps",
            "2000",
            "--seed",
            "1",
            "--out",
            path_str(out),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let a = std::fs::read(&outs[0]).unwrap();
    assert_eq!(a, std::fs::read(&outs[1]).unwrap());
    let s: Summary = serde_json::from_slice(&a).unwrap();
    assert!(s.stats["psi_bound"].as_f64().unwrap() > 0.0);
    assert!(s.checks.iter().all(|c| c.pass), "{:?}", s.checks);
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let args = [
        "kyle", "--paths", "300", "--steps", "200", "--stride", "10", "--format", "csv", "--seed", "9",
    ];
    let one = kylelab_env(&args, Some(1));
    let four = kylelab_env(&args, Some(4));
    assert_eq!(one.status.code(), Some(0), "{}", stderr(&one));
    assert_eq!(one.stdout, four.stdout);
}

fn stored_ensemble(dir: &Path, strategy: &str) -> PathBuf {
    let file = dir.join(format!("{strategy}.csv"));
    let o = kylelab(&[
        "kyle",
        "--strategy",
        strategy,
        "--paths",
        "2000",
        "--steps",
        "500",
        "--stride",
        "5",
        "--series",
        "Y,S",
        "--format",
        "csv",
        "--seed",
        "4",
        "--out",
        path_str(&file),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    file
}

#[test]
fn diagnose_passes_a_stored_equilibrium_ensemble() {
    let dir = tempfile::tempdir().unwrap();
    let file = stored_ensemble(dir.path(), "equilibrium");
    for test in ["bm", "martingale"] {
        let s = summary(&kylelab(&["diagnose", "--input", path_str(&file), "--test", test]));
        assert_eq!(s.stats["suite_pass"].as_bool(), Some(true), "{test}: {:?}", s.stats);
        assert!(s.checks.iter().any(|c| c.name == "input record intact" && c.pass));
    }
}

#[test]
fn diagnose_fails_a_drifting_ensemble_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    let file = stored_ensemble(dir.path(), "constant");
    let o = kylelab(&["diagnose", "--input", path_str(&file), "--test", "bm"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let s: Summary = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(s.stats["suite_pass"].as_bool(), Some(false));
}

#[test]
fn csv_layout() {
    let o = kylelab(&[
        "bridge", "--paths", "3", "--steps", "100", "--target", "1", "--format", "csv",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "t,X.0,X.1,X.2");
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 101);
    assert_eq!(rows[100].split(',').nth(1), Some("1.0000000000000000e0"));
    let single = kylelab(&["kyle", "--paths", "1", "--steps", "100", "--format", "csv"]);
    let text = String::from_utf8(single.stdout).unwrap();
    assert!(text.lines().any(|l| l == "t,B,Z,theta,Y,S,W"));
}

#[test]
fn result_files_reproduce_their_hash() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("f.json");
    let csv = dir.path().join("f.csv");
    let base = ["filter", "--model", "particle", "--particles", "500", "--steps", "200"];
    for (out, fmt) in [(&json, "summary"), (&csv, "csv")] {
        let mut args = base.to_vec();
        args.extend(["--format", fmt, "--out", path_str(out)]);
        let o = kylelab(&args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let s: Summary = serde_json::from_slice(&std::fs::read(&json).unwrap()).unwrap();
    assert_eq!(config_hash(&s.config), s.config_hash);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with(HASH_PREFIX));
    assert!(text.lines().nth(1).unwrap().starts_with(CONFIG_PREFIX));
    let parsed = parse_csv(&text, &csv).unwrap();
    assert_eq!(parsed.config_hash.as_deref(), Some(s.config_hash.as_str()));
    assert_eq!(config_hash(&parsed.config.unwrap()), s.config_hash);
    assert_eq!(parsed.table.n_rows(), 201);
    assert_eq!(parsed.table.names[..5], ["t", "X", "Y", "mean", "variance"]);
}

#[test]
fn equal_configs_hash_equally() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("c.toml");
    std::fs::write(&file, "seed = 7\n[static-kyle]\nsigma_v = 2\nsigma_n = 3.0\n").unwrap();
    let from_file = summary(&kylelab(&["static-kyle", "--config", path_str(&file), "--paths", "10"]));
    let from_flags = summary(&kylelab(&[
        "static-kyle",
        "--seed",
        "7",
        "--sigma-v",
        "2.0",
        "--sigma-n",
        "3",
        "--paths",
        "10",
    ]));
    assert_eq!(from_file.config_hash, from_flags.config_hash);
    assert_eq!(from_file.stats, from_flags.stats);
    let other = summary(&kylelab(&[
        "static-kyle",
        "--config",
        path_str(&file),
        "--paths",
        "10",
        "--seed",
        "8",
    ]));
    assert_ne!(other.config_hash, from_file.config_hash);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("c.toml");
    std::fs::write(&file, "paths = 0\n[static-kyle]\nsigma_v = 4\n").unwrap();
    let s = summary(&kylelab(&[
        "static-kyle",
        "--config",
        path_str(&file),
        "--sigma-v",
        "1",
    ]));
    assert_eq!(s.stats["lambda"].as_f64(), Some(0.5));
    assert!(s.stats.get("mean_profit").is_none());
}

#[test]
fn reference_file_matches_the_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("reference.toml");
    assert_eq!(ExperimentConfig::from_file(&path).unwrap(), ExperimentConfig::default());
}

#[test]
fn bad_config_exits_one_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.toml");
    std::fs::write(&file, "seed = 1\n\n[static-kyle]\nsigma_vv = 1.0\n").unwrap();
    let o = kylelab(&["static-kyle", "--config", path_str(&file)]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("line 4") && err.contains("sigma_vv"), "{err}");

    std::fs::write(&file, "[kyle]\nstride = \"two\"\n").unwrap();
    let o = kylelab(&["kyle", "--config", path_str(&file)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn invalid_parameters_exit_one() {
    for args in [
        &["static-kyle", "--sigma-v", "-1"][..],
        &["kyle", "--steps", "50"],
        &["kyle", "--steps", "200", "--stride", "7"],
        &["kyle", "--series", "Q", "--steps", "100", "--paths", "2"],
        &["dynamic", "--sigma", "1.5"],
        &["riskaverse", "--damping", "0"],
        &["static-kyle", "--format", "csv"],
        &["diagnose"],
        &["kyle", "--no-such-flag"],
    ] {
        let o = kylelab(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn missing_diagnose_input_names_the_file() {
    let o = kylelab(&["diagnose", "--input", "/nonexistent/ens.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/nonexistent/ens.csv"));
}

#[test]
fn timing_is_opt_in() {
    let s = summary(&kylelab(&["static-kyle", "--paths", "10", "--timing"]));
    assert!(s.wall_time_s.is_some());
}

#[test]
fn help_lists_every_scenario() {
    let o = kylelab(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    for name in [
        "static-kyle",
        "kyle",
        "dynamic",
        "bridge",
        "filter",
        "riskaverse",
        "diagnose",
    ] {
        assert!(text.contains(name), "{name}");
    }
}
