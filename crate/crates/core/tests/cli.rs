use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mcuq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcuq")).args(args).output().unwrap()
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn write_config(dir: &Path, value: serde_json::Value) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&value).unwrap()).unwrap();
    path
}

fn td_rate_config() -> serde_json::Value {
    serde_json::json!({
        "schema": 1,
        "kind": "td-rate",
        "model": {"file": fixture("two_state.json")},
        "t_grid": [100, 300, 1000, 3000],
        "replications": 40,
        "seed": 5,
        "n_bootstrap": 20
    })
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn chain_analyze_reports_stationary_law() {
    let out = mcuq(&["chain", "analyze", &fixture("two_state_chain.json")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    let mu = v["stationary"].as_array().unwrap();
    assert!((mu[0].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert!((v["lambda"].as_f64().unwrap() - 0.7).abs() < 1e-9);
}

#[test]
fn sweep_writes_tagged_csv_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), td_rate_config());
    let out_dir = dir.path().join("out");
    let out = mcuq(&["sweep", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    let hash = report["config_hash"].as_str().unwrap();
    let text = std::fs::read_to_string(out_dir.join("td-rate.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("seed,config_hash,"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.starts_with(&format!("5,{hash},"))));
    assert!(out_dir.join("td-rate.json").exists());
}

#[test]
fn worker_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), td_rate_config());
    let read = |workers: &str| {
        let out_dir = dir.path().join(format!("w{workers}"));
        let out = mcuq(&["sweep", cfg.to_str().unwrap(), "--workers", workers, "--out", out_dir.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
        (
            std::fs::read(out_dir.join("td-rate.csv")).unwrap(),
            std::fs::read(out_dir.join("td-rate-replications.csv")).unwrap(),
        )
    };
    assert_eq!(read("1"), read("3"));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), td_rate_config());
    let out_dir = dir.path().join("out");
    let out = mcuq(&["sweep", cfg.to_str().unwrap(), "--seed", "99", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["seed"], 99);
}

#[test]
fn operational_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut bad = td_rate_config();
    bad["schema"] = 2.into();
    let cfg = write_config(dir.path(), bad);
    let out = mcuq(&["sweep", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));

    let cfg = write_config(dir.path(), td_rate_config());
    let out = mcuq(&["verify-bounds", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let out = mcuq(&["chain", "analyze", "/nonexistent/chain.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_bounds_passes_on_hoeffding() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        serde_json::json!({
            "schema": 1,
            "kind": "hoeffding",
            "model": {"file": fixture("two_state.json")},
            "t_grid": [200, 2000],
            "replications": 200,
            "epsilons": [0.1, 0.3, 1.0],
            "seed": 3
        }),
    );
    let out = mcuq(&["verify-bounds", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_json(&out)["strict_violation"], false);
    let text = std::fs::read_to_string(dir.path().join("hoeffding.csv")).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with("dominates")));
}

#[test]
fn covariance_command_emits_all_matrices() {
    let out = mcuq(&["covariance", &fixture("two_state.json"), "--horizons", "64,256"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    for key in ["gamma_tilde", "lambda_star", "lyap_X", "truncation_K"] {
        assert!(!v[key].is_null(), "{key} missing");
    }
    assert_eq!(v["lambda_T"].as_object().unwrap().len(), 2);
}
