use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_backhaul-opt"));
    c.env_remove("BACKHAUL_OPT_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const CHAIN: &str = r#"{
  "stations": [
    {"id": 0, "kind": "macro", "radio_chains": 2},
    {"id": 1, "kind": "small", "radio_chains": 2},
    {"id": 2, "kind": "small", "radio_chains": 1}
  ],
  "links": [
    {"id": 1, "parent": 0, "child": 1, "hops": 2, "phy_rate_gbps": 13.3},
    {"id": 2, "parent": 1, "child": 2, "hops": 2, "phy_rate_gbps": 13.3}
  ]
}"#;

const STAR: &str = r#"{
  "stations": [
    {"id": 0, "kind": "macro", "radio_chains": 1},
    {"id": 1, "kind": "small", "radio_chains": 1},
    {"id": 2, "kind": "small", "radio_chains": 1}
  ],
  "links": [
    {"id": 1, "parent": 0, "child": 1, "hops": 1, "phy_rate_gbps": 13.3},
    {"id": 2, "parent": 0, "child": 2, "hops": 1, "phy_rate_gbps": 13.3}
  ]
}"#;

#[test]
fn generate_defaults_and_seeds() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (path(&dir, "a.json"), path(&dir, "b.json"));
    assert_eq!(code(&run(&["generate", "--out", s(&a)])), 0);
    assert_eq!(code(&run(&["generate", "--seed", "9", "--out", s(&b)])), 0);
    let (ja, jb) = (json(&a), json(&b));
    assert_ne!(ja, jb);
    for j in [&ja, &jb] {
        assert_eq!(j["stations"].as_array().unwrap().len(), 21);
        assert_eq!(j["links"].as_array().unwrap().len(), 20);
        assert!(j["links"][0].get("hops").is_some());
    }
    let parsed = backhaul_core::model::NetworkTopology::from_json(&fs::read_to_string(&a).unwrap()).unwrap();
    assert!(parsed.is_valid());
}

#[test]
fn generate_without_pairs() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "t.json");
    assert_eq!(code(&run(&["generate", "--pair-budget", "0", "--out", s(&out)])), 0);
    assert_eq!(json(&out)["interference"].as_array().map_or(0, |a| a.len()), 0);
}

#[test]
fn config_env_and_flag_precedence() {
    let dir = TempDir::new().unwrap();
    let cfg = path(&dir, "cfg.json");
    fs::write(&cfg, r#"{"seed": 5, "num_small_bs": 10, "macro_degree": 4}"#).unwrap();
    let (from_cfg, from_env, from_flag, direct) =
        (path(&dir, "1.json"), path(&dir, "2.json"), path(&dir, "3.json"), path(&dir, "4.json"));
    run(&["generate", "--config", s(&cfg), "--out", s(&from_cfg)]);
    bin()
        .args(["generate", "--config", s(&cfg), "--out", s(&from_env)])
        .env("BACKHAUL_OPT_SEED", "6")
        .output()
        .unwrap();
    bin()
        .args(["generate", "--config", s(&cfg), "--seed", "5", "--out", s(&from_flag)])
        .env("BACKHAUL_OPT_SEED", "6")
        .output()
        .unwrap();
    run(&["generate", "--seed", "6", "--num-small-bs", "10", "--macro-degree", "4", "--out", s(&direct)]);
    assert_eq!(json(&from_cfg)["links"].as_array().unwrap().len(), 10);
    assert_eq!(json(&from_env), json(&direct));
    assert_eq!(json(&from_flag), json(&from_cfg));
}

#[test]
fn solve_chain_example() {
    let dir = TempDir::new().unwrap();
    let topo = path(&dir, "chain.json");
    fs::write(&topo, CHAIN).unwrap();
    let out = path(&dir, "sol.json");
    let o =
        run(&["solve", "--topology", s(&topo), "--objective", "equal_demand", "--setting", "MI-ER", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let sol = json(&out);
    assert!((sol["d_b_gbps"].as_f64().unwrap() - 3.325).abs() < 1e-9);
    assert_eq!(sol["objective"], "equal_demand");
    assert_eq!(sol["jain_index"], 1.0);
    assert!(sol["min_radio_chains"].is_object());
}

#[test]
fn fair_and_limited_interference_on_minimal_file() {
    let dir = TempDir::new().unwrap();
    let topo = path(&dir, "star.json");
    fs::write(&topo, STAR).unwrap();
    let solve = |obj: &str, setting: &str| {
        let out = path(&dir, &format!("{obj}-{setting}.json"));
        assert_eq!(
            code(&run(&["solve", "--topology", s(&topo), "--objective", obj, "--setting", setting, "--out", s(&out)])),
            0
        );
        json(&out)
    };
    let mi = solve("equal_demand", "MI-LR");
    let li = solve("equal_demand", "LI-LR");
    assert_eq!(mi["d_b_gbps"], li["d_b_gbps"]);
    assert_eq!(mi["p_first"], li["p_first"]);
    let fair = solve("aggregate_fair", "MI-LR");
    assert!((fair["aggregate_gbps"].as_f64().unwrap() - 13.3).abs() < 1e-9);
}

#[test]
fn minimal_setting_rejects_pairs() {
    let dir = TempDir::new().unwrap();
    let topo = path(&dir, "t.json");
    run(&["generate", "--pair-budget", "3", "--out", s(&topo)]);
    assert_eq!(code(&run(&["solve", "--topology", s(&topo), "--setting", "MI-ER"])), 3);
    assert_eq!(code(&run(&["solve", "--topology", s(&topo), "--setting", "LI-ER"])), 0);
}

#[test]
fn star_end_to_end_and_tampering() {
    let dir = TempDir::new().unwrap();
    let topo = path(&dir, "star.json");
    fs::write(&topo, STAR).unwrap();
    let (sol, sched, report) = (path(&dir, "sol.json"), path(&dir, "sched.json"), path(&dir, "report.json"));
    assert_eq!(code(&run(&["solve", "--topology", s(&topo), "--setting", "MI-LR", "--out", s(&sol)])), 0);
    assert_eq!(code(&run(&["schedule", "--topology", s(&topo), "--solution", s(&sol), "--out", s(&sched)])), 0);
    let args =
        ["validate", "--topology", s(&topo), "--solution", s(&sol), "--schedule", s(&sched), "--out", s(&report)];
    assert_eq!(code(&run(&args)), 0);
    assert_eq!(json(&report)["violations"].as_array().unwrap().len(), 0);
    assert!((json(&report)["realized_d_b"].as_f64().unwrap() - 6.65).abs() < 1e-9);

    let mut tampered = json(&sched);
    tampered["links"][1]["parent_side"][0]["start"] = 0.4.into();
    tampered["links"][1]["parent_side"][0]["end"] = 0.9.into();
    fs::write(&sched, tampered.to_string()).unwrap();
    assert_eq!(code(&run(&args)), 1);
    let kinds: Vec<String> = json(&report)["violations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["kind"].as_str().unwrap().to_string())
        .collect();
    assert!(kinds.contains(&"ChainOverlap".to_string()));
}

#[test]
fn schedule_for_wrong_topology() {
    let dir = TempDir::new().unwrap();
    let (star, chain) = (path(&dir, "star.json"), path(&dir, "chain.json"));
    fs::write(&star, STAR).unwrap();
    fs::write(&chain, CHAIN).unwrap();
    let (sol, sched, report) = (path(&dir, "sol.json"), path(&dir, "sched.json"), path(&dir, "report.json"));
    run(&["solve", "--topology", s(&chain), "--out", s(&sol)]);
    run(&["schedule", "--topology", s(&chain), "--solution", s(&sol), "--out", s(&sched)]);
    let o =
        run(&["validate", "--topology", s(&star), "--solution", s(&sol), "--schedule", s(&sched), "--out", s(&report)]);
    assert_eq!(code(&o), 1);
    let r = json(&report);
    assert!(r["violations"].as_array().unwrap().iter().any(|v| v["kind"] == "FootprintMismatch"));
}

#[test]
fn usage_and_io_errors() {
    assert_eq!(code(&run(&["solve"])), 3);
    assert_eq!(code(&run(&["frobnicate"])), 3);
    assert_eq!(code(&run(&["solve", "--topology", "/nonexistent/t.json"])), 3);
    assert_eq!(code(&run(&["solve", "--topology", "/dev/null", "--setting", "XX-ER"])), 3);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn experiment_writes_csvs() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "exp");
    let o = run(&["experiment", "--trials", "3", "--out-dir", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for name in [
        "max_demand_by_setting.csv",
        "aggregate_by_objective.csv",
        "jain_by_objective.csv",
        "min_radio_chains_hist.csv",
    ] {
        let text = fs::read_to_string(out.join(name)).unwrap();
        assert_eq!(text.lines().count(), 4, "{name}");
    }
    let jain = fs::read_to_string(out.join("jain_by_objective.csv")).unwrap();
    let header: Vec<&str> = jain.lines().next().unwrap().split(',').collect();
    for line in jain.lines().skip(1) {
        for (h, v) in header.iter().zip(line.split(',')) {
            if h.ends_with("/equal_demand") {
                assert_eq!(v, "1");
            }
        }
    }
    // bit-for-bit reproducible
    let again = path(&dir, "again");
    run(&["experiment", "--trials", "3", "--out-dir", s(&again)]);
    for name in ["max_demand_by_setting.csv", "summary.csv"] {
        assert_eq!(fs::read(out.join(name)).unwrap(), fs::read(again.join(name)).unwrap());
    }
}

#[test]
fn experiment_spec_file() {
    let dir = TempDir::new().unwrap();
    let spec = path(&dir, "spec.json");
    fs::write(&spec, r#"{"settings": ["MI-ER", "LI-LR(1)"], "objectives": ["equal_demand"], "num_trials": 2, "generator": {"num_small_bs": 6, "macro_degree": 3}}"#)
        .unwrap();
    let out = path(&dir, "exp");
    assert_eq!(code(&run(&["experiment", "--spec", s(&spec), "--out-dir", s(&out)])), 0);
    let text = fs::read_to_string(out.join("max_demand_by_setting.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "trial,seed,MI-ER,LI-LR(1)");
    assert_eq!(text.lines().count(), 3);
    fs::write(&spec, r#"{"settings": []}"#).unwrap();
    assert_eq!(code(&run(&["experiment", "--spec", s(&spec), "--out-dir", s(&out)])), 3);
}
