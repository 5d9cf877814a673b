use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn run(config: &str, dir: &Path) -> (i32, String) {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, config).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_wilson-index"))
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .env("WILSON_INDEX_THREADS", "1")
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap(), text)
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("out/summary.json")).unwrap()).unwrap()
}

#[test]
fn index_of_unit_flux() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = run("pipeline = \"index\"\nbackground = \"u1_flux\"\ncharge = 1\nsize = 12\n", dir.path());
    assert_eq!(code, 0, "{text}");
    let s = summary(dir.path());
    let r = &s["results"][0];
    assert_eq!(r["index"], 1);
    assert_eq!(r["eta_minus"], -2);
    assert_eq!(r["method"], "wilson");

    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["mass_points"], 65);
    assert_eq!(manifest["config"]["charges"], serde_json::json!([1]));
    assert_eq!(manifest["threads"], 1);
    assert!(manifest["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert_eq!(manifest["schema_versions"]["summary"], 1);
}

#[test]
fn trivial_flow_is_symmetric() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = run("pipeline = \"flow\"\nsize = 8\n", dir.path());
    assert_eq!(code, 0, "{text}");
    let s = summary(dir.path());
    assert_eq!(s["results"][0]["sf"], 0);
    let csv = fs::read_to_string(dir.path().join("out/flow_q0_n8.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("m,index,lambda"));
    // the free spectrum at every mass is symmetric under λ → −λ; values at
    // the window edge (Λ₀ = 0.5 here) may be cut on one side only
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    assert!(!rows.is_empty());
    for &(m, _) in &rows {
        let mut v: Vec<f64> = rows.iter().filter(|r| r.0 == m && r.1.abs() < 0.45).map(|r| r.1).collect();
        v.sort_by(f64::total_cmp);
        for (x, y) in v.iter().zip(v.iter().rev()) {
            assert!((x + y).abs() < 1e-9, "m = {m}");
        }
    }
}

#[test]
fn summaries_are_deterministic() {
    let cfg = "pipeline = \"verify\"\nbackground = \"u1_flux\"\ncharge = -1\nsize = 8\na_priori_trials = 50\ngauge_transforms = 2\n";
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let (c1, t1) = run(cfg, d1.path());
    let (c2, _) = run(cfg, d2.path());
    assert_eq!((c1, c2), (0, 0), "{t1}");
    let s1 = fs::read(d1.path().join("out/summary.json")).unwrap();
    let s2 = fs::read(d2.path().join("out/summary.json")).unwrap();
    assert_eq!(s1, s2);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = run("pipeline = \"index\"\nunknown_key = 1\n", dir.path());
    assert_eq!(code, 2);
    assert!(text.contains("unknown_key"));
    let (code, _) = run("pipeline = \"nonsense\"\n", dir.path());
    assert_eq!(code, 2);
    let (code, _) = run("pipeline = \"flow\"\nmass_points = 3\n", dir.path());
    assert_eq!(code, 2);
}

#[test]
fn failed_checks_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // M = 0 puts the free operator's zero modes at the endpoint
    let (code, text) = run("pipeline = \"overlap\"\nsize = 4\nm_max = 1e-300\n", dir.path());
    assert_eq!(code, 1, "{text}");
    assert!(text.contains("FAIL q0_n4 sign_defined"));
    let s = summary(dir.path());
    assert_eq!(s["passed"], false);
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "pipeline = \"index\"\nsize = 4\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_wilson-index"))
        .arg(&cfg)
        .env("WILSON_INDEX_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
