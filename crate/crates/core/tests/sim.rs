use std::path::PathBuf;
use std::process::Command;

use dprhc::rhc::StepRecord;
use dprhc::sim::{load_scenario, run_batch, run_simulation, write_trajectories, Overrides, ScenarioConfig, SimError};
use serde_json::{json, Value};

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn small() -> Value {
    json!({
        "agents": 3,
        "dims": 2,
        "edges": [[1, 2], [2, 3]],
        "dynamics": {"a": 0.5, "b": 1.0, "c": 1.0, "u_min": -2.0, "u_max": 2.0},
        "initial_states": [[3.0, -3.0], [0.0, 1.0], [-2.0, 2.0]],
        "privacy": {"epsilon_range": [1.0, 2.0], "delta_range": [0.1, 0.3], "nu": 1.0},
        "error_bound": {"l1": 0.01, "l2": 0.01, "s_max": 1.0, "zeta_max": 1.0},
        "predicates": [
            {"name": "Big", "box": {"lo": [-40, -40], "hi": [40, 40]}},
            {"name": "Mid", "box": {"lo": [-5, -5], "hi": [5, 5]}}
        ],
        "phi_system": "G[0,2](Big)",
        "phi_agents": ["F[0,2](Mid)", "G[0,2](Mid)", "F[0,2](Mid)"],
        "r_min": 0.1,
        "gamma_min": 0.5,
        "tau": 10,
        "horizon": 3
    })
}

fn parse(v: &Value) -> Result<ScenarioConfig, SimError> {
    ScenarioConfig::from_json(&v.to_string())
}

fn csv_bytes(cfg: &ScenarioConfig, seed: u64, runs: usize) -> Vec<u8> {
    let (_, results) = run_batch(cfg, Overrides::default(), seed, runs).unwrap();
    let recs: Vec<(usize, &[StepRecord])> = results.iter().map(|r| (r.metrics.run, r.records.as_slice())).collect();
    let mut buf = Vec::new();
    write_trajectories(&mut buf, &recs).unwrap();
    buf
}

#[test]
fn same_seed_same_bytes() {
    let cfg = parse(&small()).unwrap();
    let a = csv_bytes(&cfg, 9, 2);
    let b = csv_bytes(&cfg, 9, 2);
    assert_eq!(a, b);
    assert_ne!(a, csv_bytes(&cfg, 10, 2));
}

#[test]
fn golden_header_and_empty_records() {
    let mut buf = Vec::new();
    write_trajectories(&mut buf, &[]).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "run,t,agent,kind,dim,value\n");
    let mut buf = Vec::new();
    write_trajectories(&mut buf, &[(0, &[])]).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "run,t,agent,kind,dim,value\n");
}

#[test]
fn one_agent_one_step_has_a_row_per_kind_and_dim() {
    for dims in 1..=3 {
        let rec = StepRecord {
            t: 0,
            states: vec![vec![1.0; dims]],
            eta: vec![1.0; dims],
            zeta: vec![vec![0.5; dims]],
            noisy_outputs: vec![vec![0.25; dims]],
            inputs: Some(vec![vec![0.0; dims]]),
            pair: None,
            plans: vec![],
        };
        let mut buf = Vec::new();
        write_trajectories(&mut buf, &[(0, std::slice::from_ref(&rec))]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count() - 1, 5 * dims);
        assert!(text.lines().nth(1).unwrap().starts_with("0,0,1,state,1,"));
        assert!(text.contains(",0,eta,"));
    }
}

#[test]
fn edge_outside_the_agent_range_is_reported_with_its_path() {
    let mut v = small();
    v["edges"] = json!([[1, 2], [2, 5]]);
    match parse(&v) {
        Err(SimError::Invalid { path, msg }) => {
            assert_eq!(path, "edges[1]");
            assert!(msg.contains('5'), "{msg}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn other_invalid_files_are_rejected() {
    let mut v = small();
    v["edges"] = json!([[1, 2]]);
    assert!(matches!(parse(&v), Err(SimError::Invalid { .. })));

    let mut v = small();
    v["phi_agents"] = json!(["F[0,2](Mid)"]);
    assert!(parse(&v).is_err());

    let mut v = small();
    v["phi_system"] = json!("G[0,2](Nowhere)");
    assert!(parse(&v).is_err());

    let mut v = small();
    v["unknown_field"] = json!(1);
    assert!(parse(&v).is_err());

    let mut v = small();
    v["dynamics"]["a"] = json!("fast");
    match parse(&v) {
        Err(SimError::Invalid { path, .. }) => assert!(path.starts_with("dynamics.a"), "{path}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn seed_and_runs_have_defaults() {
    let cfg = parse(&small()).unwrap();
    assert_eq!(cfg.seed, 0);
    assert_eq!(cfg.runs, 1);
    assert_eq!(cfg.big_m, 1000.0);
}

#[test]
fn bundled_scenarios_load() {
    let full = load_scenario(&scenario_path("case_study.json")).unwrap();
    assert_eq!(full.agents, 4);
    assert_eq!(full.tau, 500);
    assert_eq!(full.edges, vec![(1, 2), (1, 4), (2, 3), (3, 4)]);
    let res = full.resolve().unwrap();
    assert_eq!(res.horizon, 15);
    let eps: Vec<f64> = res.privacy.iter().map(|p| p.epsilon).collect();
    assert!((eps[0] - 6f64.ln()).abs() < 1e-12 && (eps[3] - 10f64.ln()).abs() < 1e-12);

    let ci = load_scenario(&scenario_path("case_study_ci.json")).unwrap();
    assert_eq!((ci.tau, ci.horizon, ci.runs), (60, Some(8), 20));
}

#[test]
fn single_run_batch_matches_the_run() {
    let cfg = parse(&small()).unwrap();
    let one = run_simulation(&cfg, Overrides::default(), 4, 0).unwrap();
    let (m, results) = run_batch(&cfg, Overrides::default(), 4, 1).unwrap();
    assert_eq!(results.len(), 1);
    let bytes = |recs: &[StepRecord]| {
        let mut buf = Vec::new();
        write_trajectories(&mut buf, &[(0, recs)]).unwrap();
        buf
    };
    assert_eq!(bytes(&results[0].records), bytes(&one.records));
    assert_eq!(m.per_run[0], one.metrics);
    assert_eq!(m.feasible_runs, usize::from(one.metrics.feasible));
}

#[test]
fn run_records_are_consistent() {
    let cfg = parse(&small()).unwrap();
    let r = run_simulation(&cfg, Overrides::default(), 1, 0).unwrap();
    assert!(r.metrics.feasible, "{}", r.metrics.termination);
    // plans at t = 0..=τ-H-1, records through τ-H
    assert_eq!(r.records.len(), 8);
    for rec in &r.records {
        let n = rec.states.len() as f64;
        for d in 0..2 {
            let avg: f64 = rec.states.iter().map(|s| s[d]).sum::<f64>() / n;
            assert!((avg - rec.eta[d]).abs() < 1e-12);
        }
    }
    for w in r.records.windows(2) {
        let u = w[0].inputs.as_ref().unwrap();
        for i in 0..3 {
            for d in 0..2 {
                assert!((w[1].states[i][d] - (0.5 * w[0].states[i][d] + u[i][d])).abs() < 1e-12);
            }
        }
    }
    assert!(r.records.last().unwrap().inputs.is_none());
    assert_eq!(r.metrics.phi_agents_satisfied, vec![Some(true); 3]);
}

fn simulate(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_simulate")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

#[test]
fn binary_exit_codes() {
    let dir = std::env::temp_dir().join(format!("simulate-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();

    let good = dir.join("good.json");
    std::fs::write(&good, small().to_string()).unwrap();
    let out = dir.join("out");
    let (code, err) = simulate(&["--config", good.to_str().unwrap(), "--out", out.to_str().unwrap(), "--runs", "2"]);
    assert_eq!(code, 0, "{err}");
    for f in ["trajectories.csv", "metrics.json", "solves.csv", "plots/run0_zeta_d1.csv", "plots/run1_states_d2.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(!out.join("solve_times.csv").exists());
    let metrics: Value = serde_json::from_str(&std::fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["runs"], 2);

    let mut v = small();
    v["edges"] = json!([[1, 5]]);
    let bad = dir.join("bad.json");
    std::fs::write(&bad, v.to_string()).unwrap();
    let (code, err) = simulate(&["--config", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("edges[0]"), "{err}");

    let mut v = small();
    v["predicates"][1]["box"] = json!({"lo": [30, 30], "hi": [31, 31]});
    let unreachable = dir.join("unreachable.json");
    std::fs::write(&unreachable, v.to_string()).unwrap();
    let (code, err) = simulate(&["--config", unreachable.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 3, "{err}");

    let (code, _) = simulate(&["--config", dir.join("missing.json").to_str().unwrap()]);
    assert_eq!(code, 2);
    std::fs::remove_dir_all(&dir).ok();
}
