use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use sparsenet_core::mobility::MobilityScenario;
use sparsenet_core::numerics::TimeGrid;
use sparsenet_core::rebalance::{discretize_reachability, BoundsMode, RebalanceInstance};
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_sparsenet");

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Output {
    let out = Command::new(BIN)
        .args(args)
        .env_remove("SPARSENET_OUT")
        .output()
        .unwrap();
    Output {
        code: out.status.code().unwrap(),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &Path, stations: &str, seed: &str) -> PathBuf {
    let r = run(&["gen-scenario", "--stations", stations, "--seed", seed, "--out", s(dir)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    dir.join("scenario.json")
}

#[test]
fn schedule_reference_instance() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("a");
    let r = run(&["schedule", s(&data("node_schedule_4x4.json")), "--baseline", "--out", s(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let report = json(&out.join("report.json"));
    assert!((report["objective"].as_f64().unwrap() - 1.8957).abs() < 0.01);
    assert!((report["baseline"]["objective"].as_f64().unwrap() - 2.1287).abs() < 0.01);
    assert!(report["discreteness"].as_f64().unwrap() < 1e-4);
    let gantt = json(&out.join("gantt.json"));
    assert_eq!(gantt["channels"].as_array().unwrap().len(), 4);

    // Same input, same artifacts.
    let again = tmp.path().join("b");
    run(&["schedule", s(&data("node_schedule_4x4.json")), "--baseline", "--out", s(&again)]);
    assert_eq!(
        json(&out.join("manifest.json"))["outputs"],
        json(&again.join("manifest.json"))["outputs"]
    );
}

#[test]
fn schedule_methods_are_selectable() {
    let r = run(&["schedule", "x.json", "--list-methods"]);
    assert_eq!(r.code, 0);
    for name in ["relaxed-lp", "dual", "top-slice"] {
        assert!(r.stdout.contains(name));
    }
    let tmp = TempDir::new().unwrap();
    let r = run(&[
        "schedule",
        s(&data("node_schedule_4x4.json")),
        "--method",
        "dual",
        "--grid",
        "200",
        "--out",
        s(tmp.path()),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(json(&tmp.path().join("report.json"))["dual"]["gamma"].is_array());
    let r = run(&["schedule", s(&data("node_schedule_4x4.json")), "--method", "nope", "--out", s(tmp.path())]);
    assert_eq!(r.code, 2);
}

#[test]
fn schedule_rejects_bad_input() {
    let tmp = TempDir::new().unwrap();
    let zero = tmp.path().join("zero.json");
    std::fs::write(&zero, r#"{"a":[[0.0]],"b":[[]],"horizon":1.0,"alpha":[],"beta":1}"#).unwrap();
    let r = run(&["schedule", s(&zero), "--out", s(tmp.path())]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("error"));
    let broken = tmp.path().join("broken.json");
    std::fs::write(&broken, "{").unwrap();
    assert_eq!(run(&["schedule", s(&broken), "--out", s(tmp.path())]).code, 2);
    assert_eq!(run(&["schedule", "/no/such/file", "--out", s(tmp.path())]).code, 2);
}

#[test]
fn rebalance_seeded_network() {
    let tmp = TempDir::new().unwrap();
    let scenario = gen(&tmp.path().join("g"), "10", "1");
    let out = tmp.path().join("r");
    let r = run(&["rebalance", s(&scenario), "--baseline", "--out", s(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let results = json(&out.join("results.json"));
    assert_eq!(results["status"], "Optimal");
    assert!(results["terminal_residual"].as_f64().unwrap() < 1e-4);
    let baseline = json(&out.join("baseline.json"));
    assert!(baseline["l0_sparse"].as_f64().unwrap() < baseline["l0_baseline"].as_f64().unwrap());
    let census = json(&out.join("census.json"));
    assert!(census["interior_mass"].as_f64().unwrap() < 1e-3);
    assert!(json(&out.join("assumption.json"))["flags"].as_array().unwrap().is_empty());
    let states = std::fs::read_to_string(out.join("states.csv")).unwrap();
    assert_eq!(states.lines().count(), 98);
}

fn with_target(path: &Path, state: Vec<f64>) {
    let mut v = json(path);
    v["target"] = serde_json::json!({ "kind": "exact", "state": state });
    std::fs::write(path, serde_json::to_string(&v).unwrap()).unwrap();
}

#[test]
fn rebalance_mass_mismatch_exits_infeasible() {
    let tmp = TempDir::new().unwrap();
    let scenario = gen(&tmp.path().join("g"), "3", "2");
    let sc = MobilityScenario::from_json(&std::fs::read_to_string(&scenario).unwrap()).unwrap();
    let mut target: Vec<f64> = sc.uniform_target().iter().copied().collect();
    target[0] += 5.0;
    with_target(&scenario, target);
    let r = run(&["rebalance", s(&scenario), "--out", s(&tmp.path().join("r"))]);
    assert_eq!(r.code, 4, "{}", r.stderr);
    assert!(r.stderr.contains("+5"));
}

#[test]
fn rebalance_drift_target_needs_no_control() {
    let tmp = TempDir::new().unwrap();
    let scenario = gen(&tmp.path().join("g"), "3", "2");
    let sc = MobilityScenario::from_json(&std::fs::read_to_string(&scenario).unwrap()).unwrap();
    let (inst, _) = RebalanceInstance::from_scenario(&sc, BoundsMode::NonNegative).unwrap();
    let grid = TimeGrid::new(sc.horizon_hours, 24).unwrap();
    let disc = discretize_reachability(&inst.system, &grid).unwrap();
    with_target(&scenario, (&disc.phi_total * &inst.x0).iter().copied().collect());
    let out = tmp.path().join("r");
    let r = run(&["rebalance", s(&scenario), "--grid", "24", "--out", s(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let results = json(&out.join("results.json"));
    assert!(results["costs"]["L1"].as_f64().unwrap() < 1e-9);
    assert_eq!(results["controls"].as_array().unwrap().len(), 0);
}

#[test]
fn simulate_fixture_and_controls() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    let args = |out: &Path| -> Vec<String> {
        ["simulate", s(&data("mean_field_s3.json")), "--runs", "300", "--record-every", "50", "--seed", "4", "--out", s(out)]
            .iter()
            .map(|x| x.to_string())
            .collect()
    };
    let r = run(&args(&a).iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("PASS"));
    let verdict = json(&a.join("verdict.json"));
    assert_eq!(verdict["pass"], true);
    assert_eq!(verdict["clamping_inactive"], true);
    let b = tmp.path().join("b");
    run(&args(&b).iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(
        std::fs::read(a.join("summary.csv")).unwrap(),
        std::fs::read(b.join("summary.csv")).unwrap()
    );

    let g = tmp.path().join("g");
    let r = run(&["gen-scenario", "--stations", "3", "--seed", "5", "--total", "20", "--out", s(&g)]);
    assert_eq!(r.code, 0);
    let scenario = g.join("scenario.json");
    let r = run(&["rebalance", s(&scenario), "--grid", "48", "--out", s(&tmp.path().join("r"))]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let controls = tmp.path().join("r/results.json");
    let r = run(&[
        "simulate",
        s(&scenario),
        "--controls",
        s(&controls),
        "--runs",
        "100",
        "--record-every",
        "100",
        "--out",
        s(&tmp.path().join("m")),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    // Controls only make sense with a scenario.
    let r = run(&["simulate", s(&data("mean_field_s3.json")), "--controls", s(&controls), "--out", s(&tmp.path().join("x"))]);
    assert_eq!(r.code, 2);
}

#[test]
fn simulate_zero_rates_is_constant() {
    let tmp = TempDir::new().unwrap();
    let input = tmp.path().join("zero.json");
    std::fs::write(
        &input,
        r#"{"parked":[3,4],"demand":[0.0,0.0],"gamma":[1.0,1.0],"horizon":1.0}"#,
    )
    .unwrap();
    let out = tmp.path().join("o");
    let r = run(&["simulate", s(&input), "--runs", "5", "--delta", "0.1", "--out", s(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let mut rd = csv::Reader::from_path(out.join("summary.csv")).unwrap();
    for rec in rd.records() {
        let rec = rec.unwrap();
        assert_eq!(&rec[5], "0");
    }
}

#[test]
fn gen_scenario_is_deterministic_and_verifies() {
    let tmp = TempDir::new().unwrap();
    let a = gen(&tmp.path().join("a"), "10", "1");
    let b = gen(&tmp.path().join("b"), "10", "1");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let r = run(&["verify", s(&a), "--out", s(&tmp.path().join("v"))]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(json(&tmp.path().join("v/verify.json"))["kind"], "assumption");
}

#[test]
fn verify_flags_static_instance() {
    let tmp = TempDir::new().unwrap();
    let input = tmp.path().join("static.json");
    std::fs::write(
        &input,
        r#"{"a":[[0,0],[0,0]],"b":[[1,0],[0,1]],"horizon":1,"alpha":[0.5,0.5],"beta":1}"#,
    )
    .unwrap();
    let r = run(&["verify", s(&input), "--out", s(&tmp.path().join("v"))]);
    assert_eq!(r.code, 5);
    let report = json(&tmp.path().join("v/verify.json"));
    assert_eq!(report["passed"], false);
    assert_eq!(report["constant_channels"].as_array().unwrap().len(), 2);
    let r = run(&["verify", s(&data("node_schedule_4x4.json")), "--out", s(&tmp.path().join("w"))]);
    assert_eq!(r.code, 0, "{}", r.stderr);
}

#[test]
fn output_directory_from_environment() {
    let tmp = TempDir::new().unwrap();
    let out = Command::new(BIN)
        .args(["gen-scenario", "--stations", "3", "--seed", "7"])
        .env("SPARSENET_OUT", tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(tmp.path().join("scenario.json").exists());
    assert!(tmp.path().join("manifest.json").exists());
}
