use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use netpart::formats::{FsuDoc, PartitionDoc, SystemDoc};
use netpart_core::clock::FrozenClock;
use netpart_core::exact::{branch_and_bound, BnbOptions};
use netpart_core::fsu::select_fsus;
use netpart_core::generate::{gen_modular, gen_random_fsu, ModularSpec, RandomFsuSpec};
use netpart_core::graph::build_linear_graph;
use netpart_core::greedy::greedy_refined;
use netpart_core::metrics::{IndexConfig, Partition};
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn netpart(args: &[&str], stdin: Option<&[u8]>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_netpart"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    {
        let mut pipe = child.stdin.take().unwrap();
        if let Some(data) = stdin {
            pipe.write_all(data).unwrap();
        }
    }
    child.wait_with_output().unwrap()
}

fn ok(args: &[&str], stdin: Option<&[u8]>) -> Vec<u8> {
    let out = netpart(args, stdin);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).expect("valid JSON")
}

#[test]
fn modular_pipeline_matches_library() {
    let sys = ok(&["gen", "modular", "--levels", "3"], None);
    let fsus = ok(&["fsu"], Some(&sys));
    let part = ok(&["partition", "refined", "--alpha", "1"], Some(&fsus));
    let doc: PartitionDoc = serde_json::from_slice(&part).unwrap();

    let lib_sys = gen_modular(&ModularSpec::with_levels(3));
    let coll = select_fsus(&build_linear_graph(&lib_sys)).unwrap();
    let expected = greedy_refined(&coll, &IndexConfig::new(1.0).unwrap());
    assert_eq!(doc.partition().unwrap(), expected);
    assert_eq!(doc.engine, "refined");
    let src = doc.source.unwrap();
    assert_eq!(src.collection().unwrap(), coll);
    assert_eq!(
        src.system.unwrap().to_model().unwrap().as_linear().unwrap(),
        &lib_sys
    );
}

#[test]
fn partition_accepts_a_system_directly() {
    let sys = ok(&["gen", "modular", "--levels", "2"], None);
    let direct: PartitionDoc =
        serde_json::from_slice(&ok(&["partition", "greedy", "--alpha", "2"], Some(&sys))).unwrap();
    let fsus = ok(&["fsu"], Some(&sys));
    let staged: PartitionDoc =
        serde_json::from_slice(&ok(&["partition", "greedy", "--alpha", "2"], Some(&fsus))).unwrap();
    assert_eq!(direct, staged);
}

#[test]
fn brute_force_guard_exits_with_domain_error() {
    let sys = ok(&["gen", "random", "--fsus", "13"], None);
    let out = netpart(
        &["partition", "exact", "--engine", "brute", "--alpha", "1"],
        Some(&sys),
    );
    assert_eq!(out.status.code(), Some(1));
    let err = json(&out.stderr);
    assert_eq!(err["error"]["kind"], "partition");
    assert!(err["error"]["message"].as_str().unwrap().contains("12"));
}

#[test]
fn sys2_metrics_reproduce_hand_values() {
    let m = json(&ok(
        &["metrics", fixture("sys2_merged.json").to_str().unwrap()],
        None,
    ));
    let close = |v: &Value, x: f64| (v.as_f64().unwrap() - x).abs() < 1e-12;
    assert_eq!(m["level"], "node");
    assert!(close(&m["ratio"]["intra"], 3.1));
    assert!(close(&m["ratio"]["inter"], 0.0));
    assert!(close(&m["ratio"]["size"], 4.0));
    assert!(close(&m["ratio_value"], 3.3));
    assert!(close(&m["quadratic"]["intra"], 18.2));
    assert!(close(&m["quadratic"]["size"], 4.0));

    let s = json(&ok(
        &["metrics", fixture("sys2_split.json").to_str().unwrap()],
        None,
    ));
    assert!(close(&s["ratio"]["intra"], 3.0));
    assert!(close(&s["ratio"]["inter"], 0.2));
    assert!(close(&s["ratio"]["size"], 2.0));
    assert!(close(&s["ratio_value"], 3.0 / 1.2 + 1.0 / 3.0));
    assert!(close(&s["quadratic"]["intra"], 12.0));
    assert!(close(&s["quadratic"]["inter"], 0.2));
}

#[test]
fn metrics_csv_has_one_row() {
    let out = ok(
        &[
            "--format",
            "csv",
            "metrics",
            fixture("sys2_split.json").to_str().unwrap(),
            "--alpha",
            "4.5",
        ],
        None,
    );
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("alpha,blocks,level,intra"));
    assert!(lines[1].starts_with("4.5,2,node,3,"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = netpart(&["partition", "greedy", "--bogus"], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    let out = netpart(&["frobnicate"], None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_granularity_is_a_usage_error() {
    let sys = std::fs::read(fixture("sys2.json")).unwrap();
    let out = netpart(&["partition", "greedy"], Some(&sys));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_input_reports_json_error() {
    let out = netpart(&["fsu"], Some(b"{not json"));
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out.stderr)["error"]["kind"], "json");
    let out = netpart(&["--format", "csv", "fsu"], Some(b"{\"x\": 1}"));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: unrecognized document"));
}

#[test]
fn generation_follows_the_seed() {
    let a = ok(&["--seed", "5", "gen", "random", "--fsus", "8"], None);
    let b = ok(&["gen", "random", "--fsus", "8", "--seed", "5"], None);
    let c = ok(&["--seed", "6", "gen", "random", "--fsus", "8"], None);
    assert_eq!(a, b);
    assert_ne!(a, c);
    let doc: SystemDoc = serde_json::from_slice(&a).unwrap();
    let lib = gen_random_fsu(&RandomFsuSpec {
        n_fsus: 8,
        seed: 5,
        ..RandomFsuSpec::default()
    });
    assert_eq!(
        doc.to_model().unwrap().as_linear().unwrap(),
        lib.as_linear().unwrap()
    );
}

#[test]
fn pwa_systems_round_trip_and_select_per_mode() {
    let sys = ok(&["gen", "random", "--fsus", "5", "--pwa"], None);
    for mode in ["0", "1"] {
        let f: FsuDoc = serde_json::from_slice(&ok(&["fsu", "--mode", mode], Some(&sys))).unwrap();
        assert_eq!(f.mode, Some(mode.parse().unwrap()));
        assert_eq!(f.collection().unwrap().len(), 5);
    }
    let out = netpart(&["fsu", "--mode", "2"], Some(&sys));
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out.stderr)["error"]["kind"], "model");
}

#[test]
fn exact_engine_matches_library_and_reports_optimality() {
    let fsus = ok(
        &["fsu"],
        Some(&ok(&["gen", "modular", "--levels", "2"], None)),
    );
    let doc: PartitionDoc = serde_json::from_slice(&ok(
        &["partition", "exact", "--alpha", "3.1", "--trace"],
        Some(&fsus),
    ))
    .unwrap();
    assert_eq!(doc.optimal, Some(true));
    assert_eq!(doc.blocks.len(), 4);
    assert!(!doc.incumbents.is_empty());
    let coll = doc.source.as_ref().unwrap().collection().unwrap();
    let lib = branch_and_bound(
        &coll,
        &IndexConfig::new(3.1).unwrap(),
        BnbOptions::default(),
        &FrozenClock,
    );
    assert_eq!(doc.partition().unwrap(), lib.partition);
    assert!((doc.quadratic - lib.value).abs() < 1e-9);
}

#[test]
fn exhausted_time_budget_exits_with_anytime_code() {
    let fsus = ok(
        &["fsu"],
        Some(&ok(&["gen", "modular", "--levels", "3"], None)),
    );
    let out = netpart(
        &["partition", "exact", "--alpha", "3.1", "--time-limit", "0"],
        Some(&fsus),
    );
    assert_eq!(out.status.code(), Some(3));
    let doc: PartitionDoc = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc.optimal, Some(false));
    assert!(doc.gap.unwrap() > 0.0);
}

#[test]
fn partition_csv_lists_labels() {
    let sys = std::fs::read(fixture("sys2.json")).unwrap();
    let out = ok(
        &["--format", "csv", "partition", "greedy", "--alpha", "100"],
        Some(&sys),
    );
    assert_eq!(String::from_utf8(out).unwrap(), "fsu,block\n0,0\n1,1\n");
}

#[test]
fn sweep_reports_distinct_partitions() {
    let fsus = ok(
        &["fsu"],
        Some(&ok(&["gen", "modular", "--levels", "2"], None)),
    );
    let rows = json(&ok(
        &["sweep", "--engine", "bnb", "--alphas", "0.001,3.1,4.2"],
        Some(&fsus),
    ));
    let blocks: Vec<u64> = rows
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["blocks"].as_u64().unwrap())
        .collect();
    assert_eq!(blocks, vec![1, 4, 16]);
}

#[test]
fn simulate_writes_metrics_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let scen = dir.path().join("scen.json");
    std::fs::write(&scen, r#"{"horizon": 4, "steps": 6}"#).unwrap();
    let csv = dir.path().join("metrics.csv");
    let traces = dir.path().join("traces");
    let summary = json(&ok(
        &[
            "simulate",
            fixture("sys2_split.json").to_str().unwrap(),
            "--scenario",
            scen.to_str().unwrap(),
            "--out",
            csv.to_str().unwrap(),
            "--traces",
            traces.to_str().unwrap(),
        ],
        None,
    ));
    assert_eq!(summary["cores"], 2);
    assert_eq!(summary["steps"], 6);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("step,stage_cost,cum_cost,admm_iters,max_core_time,core_seconds_cum")
    );
    assert_eq!(lines.count(), 6);
    for f in ["residuals.csv", "trajectory.csv", "summary.json"] {
        assert!(traces.join(f).is_file(), "{f}");
    }
    let traj = std::fs::read_to_string(traces.join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("step,reference,x1,x2,u1,u2\n"));
    assert_eq!(traj.lines().count(), 8);
}

#[test]
fn simulate_rejects_unknown_scenario_fields() {
    let dir = tempfile::tempdir().unwrap();
    let scen = dir.path().join("scen.json");
    std::fs::write(&scen, r#"{"horizn": 4}"#).unwrap();
    let out = netpart(
        &[
            "simulate",
            fixture("sys2_split.json").to_str().unwrap(),
            "--scenario",
            scen.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn dot_export_clusters_csus() {
    let text = String::from_utf8(ok(
        &["export-dot", fixture("sys2_split.json").to_str().unwrap()],
        None,
    ))
    .unwrap();
    assert!(text.starts_with("digraph equivalent {"));
    assert!(text.contains("subgraph cluster_0"));
    assert!(text.contains("label=\"CSU 2\""));
    assert!(text.contains("x2 -> x1 [label=\"0.1\"]"));
    assert!(text.contains("u1 [shape=box]"));
    let plain = String::from_utf8(ok(
        &["export-dot", fixture("sys2.json").to_str().unwrap()],
        None,
    ))
    .unwrap();
    assert!(!plain.contains("cluster"));
}

#[test]
fn graph_command_lists_edges() {
    let g = json(&ok(
        &["graph", fixture("sys2.json").to_str().unwrap()],
        None,
    ));
    assert_eq!(g["edges"].as_array().unwrap().len(), 5);
    assert!((g["total_mass"].as_f64().unwrap() - 3.1).abs() < 1e-12);
    let csv = String::from_utf8(ok(
        &[
            "--format",
            "csv",
            "graph",
            fixture("sys2.json").to_str().unwrap(),
        ],
        None,
    ))
    .unwrap();
    assert!(csv.contains("x2,x1,0.1\n"));
}

#[test]
fn single_block_partition_round_trips_through_library() {
    let doc: PartitionDoc =
        serde_json::from_str(&std::fs::read_to_string(fixture("sys2_merged.json")).unwrap())
            .unwrap();
    assert_eq!(doc.partition().unwrap(), Partition::single_block(2));
}
