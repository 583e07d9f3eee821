use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use rotsym::format::read_table;

fn rotsym(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rotsym")).args(args).env_remove("ROTSYM_NMAX").output().expect("binary runs")
}

fn json_ok(args: &[&str]) -> Value {
    let out = rotsym(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

/// Exit code and the parsed one-line diagnostic.
fn failure(args: &[&str]) -> (i32, Value) {
    let out = rotsym(args);
    let stderr = String::from_utf8_lossy(&out.stderr);
    let lines: Vec<&str> = stderr.lines().collect();
    assert_eq!(lines.len(), 1, "diagnostic must be one line: {stderr}");
    (out.status.code().expect("exit code"), serde_json::from_str(lines[0]).expect("diagnostic is JSON"))
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn zero_reflectivity_reports_limit_state_of_zero_word() {
    let v = json_ok(&["run", "--squeeze-db", "10.63", "--reflectivity", "0", "--n1", "1", "--n2", "1", "--n3", "2"]);
    assert_eq!(v["probability"], 0.0);
    assert!(v["warning"].is_string());
    assert!(v["fidelity"]["zero_word"].as_f64().unwrap() >= 0.999);
}

#[test]
fn vacuum_run_has_unit_probability() {
    let v = json_ok(&["run", "--squeeze-db", "0", "--n1", "0", "--n2", "0", "--n3", "0"]);
    assert!((v["probability"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(v["mean_photon"].as_f64().unwrap().abs() < 1e-12);
    assert!(v.get("warning").is_none());
}

#[test]
fn odd_detection_gives_odd_four_fold_state() {
    let v = json_ok(&["run", "--squeeze-db", "8", "--n1", "1", "--n2", "1", "--n3", "3"]);
    assert_eq!(v["parity"], "odd");
    assert_eq!(v["symmetry_order"], 4);
    assert!(v["probability"].as_f64().unwrap() > 0.0);
}

#[test]
fn run_truncation_follows_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_rotsym"))
        .args(["run", "--squeeze-db", "6", "--n1", "1"])
        .env("ROTSYM_NMAX", "35")
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["n_max"], 35);
}

#[test]
fn lossy_zero_word_keeps_negative_wigner() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("w.csv");
    let o = rotsym(&["wigner", "--state", "0L", "--eta", "0.9", "--resolution", "61", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t = read_table(&std::fs::read(&out).unwrap()).unwrap();
    let min_w: f64 = t.comments.iter().find(|c| c.0 == "min_w").unwrap().1.parse().unwrap();
    assert!(min_w < 0.0);
    assert_eq!(t.rows.len(), 61 * 61);
    let hash = &t.comments[0];
    assert_eq!(hash.0, "manifest_hash");
    let manifest = read_json(&dir.path().join("w.csv.manifest.json"));
    assert_eq!(manifest["hash"].as_str().unwrap(), hash.1);
}

#[test]
fn single_source_mux_is_identity() {
    let v = json_ok(&["mux", "--p", "0.5", "--n", "1"]);
    assert_eq!(v["p_mux"], 0.5);
    let v = json_ok(&["mux", "--p", "0.01", "--delta", "0.01"]);
    assert_eq!(v["n_mux"], 459);
}

#[test]
fn table1_defaults_reproduce_reference_rows() {
    let reference = [
        (2, 1.21, 2.78, 1.39e-3, 8.46e-5),
        (3, 2.36, 4.22, 1.41e-3, 1.82e-4),
        (4, 3.47, 5.40, 1.51e-3, 3.08e-4),
        (5, 4.56, 6.44, 1.53e-3, 4.32e-4),
        (6, 5.62, 7.40, 1.72e-3, 6.28e-4),
        (7, 6.68, 8.30, 1.86e-3, 8.34e-4),
        (8, 7.72, 9.12, 1.94e-3, 1.03e-3),
    ];
    let out = rotsym(&["table1"]);
    assert!(out.status.success());
    let t = read_table(&out.stdout).unwrap();
    assert_eq!(t.rows.len(), 7);
    let col = |n| t.column(n).unwrap();
    let (m, n, db, p1, p2) = (col("m"), col("mean_photon"), col("squeezing_db"), col("p01"), col("p02"));
    for (i, &(rm, rn, rdb, rp1, rp2)) in reference.iter().enumerate() {
        let rel = |a: f64, b: f64| (a - b).abs() / b;
        assert_eq!(m[i], rm as f64);
        assert!(rel(n[i], rn) < 0.01 && rel(db[i], rdb) < 0.01);
        assert!(rel(p1[i], rp1) < 0.05 && rel(p2[i], rp2) < 0.05, "row {rm}");
    }
}

#[test]
fn binomial_code_passes_kl_and_cat_code_is_reported() {
    let v = json_ok(&["kl-check"]);
    assert_eq!(v["passed"], true);
    let v = json_ok(&["kl-check", "--code", "cat:5", "--errors", "I,a"]);
    assert!(v["max_defect"].as_f64().unwrap().is_finite());
    assert_eq!(v["blocks"].as_array().unwrap().len(), 4);
}

#[test]
fn codes_report_thresholds() {
    let v = json_ok(&["codes"]);
    let z = v["thresholds"]["zero_word"]["squeeze_db"].as_f64().unwrap();
    let o = v["thresholds"]["one_word"]["squeeze_db"].as_f64().unwrap();
    assert!((z - 10.63).abs() < 0.02 && (o - 6.08).abs() < 0.02);
}

#[test]
fn bad_flags_and_configs_exit_two() {
    let (code, d) = failure(&["run", "--squeeze-db", "ten"]);
    assert_eq!(code, 2);
    assert_eq!(d["error"], "usage");
    let (code, _) = failure(&["run", "--n1", "1"]);
    assert_eq!(code, 2);
    let (code, d) = failure(&["mux", "--p", "1.5", "--n", "2"]);
    assert_eq!((code, d["exit_code"].as_i64()), (2, Some(2)));
    let (code, _) = failure(&["sweep", "--squeeze-db", "6", "--reflectivity", "0.1", "--filter", "k:2"]);
    assert_eq!(code, 2);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "p = [unterminated").unwrap();
    let (code, d) = failure(&["mux", "--config", bad.to_str().unwrap()]);
    assert_eq!((code, d["error"].as_str()), (2, Some("config")));
    let unknown = dir.path().join("unknown.json");
    std::fs::write(&unknown, r#"{"p": 0.5, "n": 2, "bogus": 1}"#).unwrap();
    let (code, _) = failure(&["mux", "--config", unknown.to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn numerical_failures_exit_three() {
    // a cutoff of 10 photons cannot hold the TMSV at R = 3
    let (code, d) = failure(&["run", "--raw-r", "3", "--nmax", "10", "--n1", "1"]);
    assert_eq!(code, 3);
    assert_eq!(d["error"], "numerical");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    std::fs::write(
        &cfg,
        "squeeze_db = [6.0]\nreflectivity = [0.05]\nfilter = \"any-2fold\"\nvalidate_fraction = 0.0\n",
    )
    .unwrap();
    let out = dir.path().join("s.csv");
    let o =
        rotsym(&["sweep", "--config", cfg.to_str().unwrap(), "--filter", "any-4fold", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t = read_table(&std::fs::read(&out).unwrap()).unwrap();
    assert!(t.comments.contains(&("filter".into(), "any-4fold".into())));
    assert_eq!(t.rows.len(), 1);
    assert!(dir.path().join("s.validation.csv").exists());
    let manifest = read_json(&dir.path().join("s.csv.manifest.json"));
    assert_eq!(manifest["job"]["command"], "sweep");
    assert_eq!(manifest["truncation"], 400);
}

#[test]
fn replay_is_bit_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let o = rotsym(&[
        "--jobs",
        "3",
        "sweep",
        "--squeeze-db",
        "6,9",
        "--reflectivity",
        "0.02,0.1",
        "--filter",
        "any-2fold",
        "--validate-fraction",
        "0.5",
        "--seed",
        "11",
        "--out-dir",
        first.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let again = dir.path().join("again");
    let manifest = first.join("manifest.json");
    let v = json_ok(&["--jobs", "1", "replay", manifest.to_str().unwrap(), "--out-dir", again.to_str().unwrap()]);
    assert_eq!(v["identical"], true);
    for name in ["sweep.csv", "validation.csv"] {
        assert_eq!(std::fs::read(first.join(name)).unwrap(), std::fs::read(again.join(name)).unwrap());
    }
    let t = read_table(&std::fs::read(first.join("validation.csv")).unwrap()).unwrap();
    assert_eq!(t.rows.len(), 2);
    assert!(t.rows.iter().all(|r| r.last().unwrap() == "true"));
}

#[test]
fn tampered_manifest_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mux.json");
    assert!(rotsym(&["mux", "--p", "0.2", "--n", "3", "--out", out.to_str().unwrap()]).status.success());
    let path = dir.path().join("mux.json.manifest.json");
    let mut m = read_json(&path);
    m["job"]["n"] = 4.into();
    std::fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
    let (code, d) = failure(&["replay", path.to_str().unwrap()]);
    assert_eq!((code, d["error"].as_str()), (2, Some("config")));
}

#[test]
fn quick_figures_cover_every_panel() {
    let dir = tempfile::tempdir().unwrap();
    let o = rotsym(&["figures", "--quick", "--only", "fig3a,fig5b,fig6c", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names, ["fig3a.csv", "fig5b.csv", "fig6c.csv", "manifest.json"]);
    let t = read_table(&std::fs::read(dir.path().join("fig5b.csv")).unwrap()).unwrap();
    assert!(t.column("zero_word").unwrap().iter().all(|&w| w < 0.0));
    let (code, _) = failure(&["figures", "--only", "fig9z"]);
    assert_eq!(code, 2);
}
