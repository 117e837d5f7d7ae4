use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kirchhoff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kirchhoff"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn p(dir: &tempfile::TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_owned()
}

const TWO_WELL: &str = r#"{"composition":"product","wells":[
  {"x":[-1,0],"p":2,"model":"isotropic","params":{"c":1}},
  {"x":[1,0],"p":4,"model":"isotropic","params":{"c":1}}]}"#;

#[test]
fn oracle_reports_closed_form_energy() {
    let text = ok(&kirchhoff(&["oracle", "--a", "2astar", "--b", "0.01"]));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!((v["e_bar"].as_f64().unwrap() + 25.0).abs() < 1e-9);
    assert!((v["r_b"].as_f64().unwrap() - 100.0).abs() < 1e-9);
    assert_eq!(v["regime"], "supercritical");
}

#[test]
fn q_profile_feeds_well_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let q = p(&dir, "q.csv");
    ok(&kirchhoff(&["q", "solve", "--out", &q]));
    let constants = json(&dir.path().join("q.json"));
    assert!((constants["a_star"].as_f64().unwrap() - 11.700896524572).abs() < 1e-6);
    assert!(fs::read_to_string(&q).unwrap().starts_with("r,q,dq\n"));

    let pot = p(&dir, "pot.json");
    fs::write(&pot, TWO_WELL).unwrap();
    let wells = p(&dir, "wells.json");
    ok(&kirchhoff(&[
        "--q",
        &q,
        "wells",
        "--potential",
        &pot,
        "--out",
        &wells,
    ]));
    let w = json(Path::new(&wells));
    assert_eq!(w["z_bar"], serde_json::json!([1]));
    assert_eq!(w["z0"], serde_json::json!([1]));
    assert_eq!(w["p"].as_f64(), Some(4.0));
}

#[test]
fn version_hash_follows_the_profile() {
    let builtin = ok(&kirchhoff(&["--version"]));
    assert!(builtin.starts_with("kirchhoff "));
    assert!(builtin.contains("constants sha256 "));
    let dir = tempfile::tempdir().unwrap();
    let q = p(&dir, "q.csv");
    ok(&kirchhoff(&["q", "solve", "--out", &q, "--dr", "2e-3"]));
    let with_q = ok(&kirchhoff(&["--q", &q, "--version"]));
    assert_ne!(builtin.lines().nth(1), with_q.lines().nth(1));
}

#[test]
fn sweep_fit_and_report_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, diag) = (p(&dir, "sweep.csv"), p(&dir, "diag.json"));
    ok(&kirchhoff(&[
        "sweep",
        "--a",
        "2astar",
        "--b",
        "0.2,0.1,0.05",
        "--out",
        &csv,
        "--diag",
        &diag,
    ]));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("b,energy,theta,l4,v_integral,mu,z_x,z_y,eps_meas,eps_theory,l2_dist,h1_dist,iters,converged,resolution_ok\n"));
    assert_eq!(text.lines().count(), 4);

    let fit = ok(&kirchhoff(&[
        "fit",
        "--in",
        &csv,
        "--mode",
        "supercritical_energy",
        "--a",
        "2astar",
    ]));
    let fit: serde_json::Value = serde_json::from_str(&fit).unwrap();
    assert!((fit["slope"].as_f64().unwrap() + 1.0).abs() < 0.1);
    assert_eq!(fit["target_slope"].as_f64(), Some(-1.0));

    let report = p(&dir, "report.json");
    ok(&kirchhoff(&[
        "report", "--in", &csv, "--a", "2astar", "--diag", &diag, "--out", &report,
    ]));
    let r = json(Path::new(&report));
    let sandwich = r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "energy_sandwich")
        .unwrap();
    assert_eq!(sandwich["verdict"], "PASS");
}

#[test]
fn fit_needs_three_points() {
    let dir = tempfile::tempdir().unwrap();
    let csv = p(&dir, "sweep.csv");
    ok(&kirchhoff(&[
        "sweep", "--a", "2astar", "--b", "0.2,0.1", "--out", &csv,
    ]));
    let out = kirchhoff(&["fit", "--in", &csv, "--mode", "supercritical_energy"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(
        kirchhoff(&["oracle", "--a", "2astar", "--b", "0.1", "--bogus"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        kirchhoff(&["oracle", "--a", "-1", "--b", "0.1"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(kirchhoff(&[]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let cfg = p(&dir, "run.json");
    fs::write(
        &cfg,
        r#"{"a": 10, "b": 0.1, "grid": {"half_width": 4, "n": 64}, "colour": 3}"#,
    )
    .unwrap();
    assert_eq!(
        kirchhoff(&["minimize", "--config", &cfg, "--out", &p(&dir, "out.json")])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn blowup_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = p(&dir, "run.json");
    fs::write(
        &cfg,
        r#"{"a": "3astar", "b": 0.0, "grid": {"half_width": 4, "n": 64}}"#,
    )
    .unwrap();
    let out = kirchhoff(&["minimize", "--config", &cfg, "--out", &p(&dir, "out.json")]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn minimize_is_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = p(&dir, "run.json");
    fs::write(
        &cfg,
        r#"{"a": "2astar", "b": 0.1, "potential": {"composition":"single","wells":[{"x":[0,0],"p":2,"model":"isotropic","params":{"c":1}}]},
            "grid": {"half_width": 3, "n": 96}, "init": {"kind": "random", "seed": 7}}"#,
    )
    .unwrap();
    let run = |tag: &str| {
        let (out, field) = (
            p(&dir, &format!("{tag}-summary.json")),
            p(&dir, &format!("{tag}.csv")),
        );
        ok(&kirchhoff(&[
            "minimize", "--config", &cfg, "--out", &out, "--field", &field,
        ]));
        (
            fs::read(&out).unwrap(),
            fs::read(&field).unwrap(),
            fs::read(Path::new(&field).with_extension("json")).unwrap(),
        )
    };
    let first = run("one");
    let second = run("two");
    assert_eq!(first, second);
    let summary: serde_json::Value = serde_json::from_slice(&first.0).unwrap();
    assert_eq!(summary["converged"], true);
    let sidecar: serde_json::Value = serde_json::from_slice(&first.2).unwrap();
    assert_eq!(sidecar["n"], 96);
}
