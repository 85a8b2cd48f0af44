use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn rgin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rgin")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn gen_data_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<String> = ["a.jsonl", "b.jsonl"]
        .iter()
        .map(|f| dir.path().join(f).display().to_string())
        .collect();
    let mut digests = Vec::new();
    for p in &paths {
        let out = rgin(&["gen-data", "--kind", "mds", "--graphs", "20", "--seed", "4", "--out", p]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        digests.push(json(&out)["config_digest"].clone());
    }
    assert_eq!(fs::read(&paths[0]).unwrap(), fs::read(&paths[1]).unwrap());
    assert_eq!(digests[0], digests[1]);
    let meta: Value = serde_json::from_str(&fs::read_to_string(format!("{}.meta.json", paths[0])).unwrap()).unwrap();
    assert_eq!(meta["config_digest"], digests[0]);
}

#[test]
fn ratio_violation_names_the_graphs() {
    let out = rgin(&[
        "ratio-bench",
        "--algo",
        "greedy-mds",
        "--graphs",
        "5",
        "--support-size",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("violated on graph id(s) [0, 1, 2, 3, 4]"), "{err}");
}

#[test]
fn ratio_bench_passes_with_large_support() {
    let out = rgin(&[
        "ratio-bench",
        "--algo",
        "greedy-mds",
        "--graphs",
        "20",
        "--support-size",
        "1000000",
    ]);
    assert!(out.status.success());
    assert_eq!(json(&out)["passed"], true);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(rgin(&["train", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(
        rgin(&["gen-data", "--kind", "triangle", "--graphs", "0"]).status.code(),
        Some(2)
    );
    assert_eq!(rgin(&["estimate", "--eps", "2"]).status.code(), Some(2));
}

#[test]
fn flags_beat_config_sections_beat_top_level() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, r#"{"depth": 1, "rounds": 4, "wl-demo": {"depth": 2}}"#).unwrap();
    let config = config.display().to_string();

    let from_file = json(&rgin(&["--config", &config, "wl-demo", "--json"]));
    assert_eq!(from_file["config"]["depth"], 2);
    assert_eq!(from_file["config"]["rounds"], 4);

    let from_flag = json(&rgin(&["--config", &config, "wl-demo", "--json", "--depth", "3"]));
    assert_eq!(from_flag["config"]["depth"], 3);
    assert_ne!(from_flag["config_digest"], from_file["config_digest"]);
}

#[test]
fn malformed_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, "[1, 2]").unwrap();
    let out = rgin(&["--config", &config.display().to_string(), "wl-demo"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn wl_demo_prints_one_class_and_digest() {
    let out = rgin(&["wl-demo"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("1 color class(es) over 9 nodes"), "{text}");
    assert!(text
        .lines()
        .any(|l| l.starts_with("config_digest ") && l.len() == "config_digest ".len() + 64));
}

#[test]
fn solve_and_hash_read_generated_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.jsonl").display().to_string();
    assert!(
        rgin(&["gen-data", "--kind", "triangle", "--graphs", "4", "--nodes", "10", "--out", &data])
            .status
            .success()
    );

    let mds = json(&rgin(&["solve-mds", "--in", &data, "--exact"]));
    assert!(mds["graphs"].as_array().unwrap().iter().all(|g| g["feasible"] == true));
    assert_eq!(mds["graphs"].as_array().unwrap().len(), 4);

    let mm = rgin(&["solve-mm", "--in", &data, "--exact"]);
    assert!(mm.status.success());

    let hashes = json(&rgin(&["hash-embed", "--in", &data, "--depth", "2"]));
    let graphs = hashes["graphs"].as_array().unwrap();
    assert_eq!(graphs.len(), 4);
    assert_eq!(graphs[0]["digests"].as_array().unwrap().len(), 10);
}

#[test]
fn grad_check_passes() {
    let out = rgin(&["grad-check"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["failed"], 0);
}
