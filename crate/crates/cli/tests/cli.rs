//! End-to-end tests of the `rollsim` binary: subcommands, report
//! stability, and exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn rollsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rollsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const MINI_SCENARIO: &str = r#"{
  "seed": 5,
  "workload": {"num_samples": 8, "group_size": 2},
  "policies": [
    {"name": "sequential", "reward_trigger": "batch_barrier"},
    {"name": "overlapped", "reward_trigger": "per_request_callback",
     "overlap_batch_with_transfer": true, "ref_prefetch": true}
  ],
  "reward": {
    "verifiers": [
      {"name": "rule", "kind": "rule", "latency_sec": 0.01,
       "score_fn": {"fn": "pass_rate", "p": 0.7}, "weight": 1.0}
    ],
    "aggregation": {"strategy": "weighted_sum"}
  }
}"#;

#[test]
fn gen_writes_a_loadable_deterministic_trace() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "mini.json", MINI_SCENARIO);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let run = rollsim(&["gen", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(run.status.success(), "gen failed: {run:?}");
    }
    let a = std::fs::read(out_a.join("trace.jsonl")).unwrap();
    let b = std::fs::read(out_b.join("trace.jsonl")).unwrap();
    assert_eq!(a, b, "same config + seed must give identical traces");
    let samples = rollsim_core::load_trace(&out_a.join("trace.jsonl")).unwrap();
    assert_eq!(samples.len(), 8);
}

#[test]
fn gen_with_zero_samples_writes_a_valid_empty_trace() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "empty.json",
        &MINI_SCENARIO.replace("\"num_samples\": 8", "\"num_samples\": 0"),
    );
    let out = dir.path().join("out");
    let run = rollsim(&["gen", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(run.status.success());
    let samples = rollsim_core::load_trace(&out.join("trace.jsonl")).unwrap();
    assert!(samples.is_empty());
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "mini.json", MINI_SCENARIO);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    rollsim(&["gen", "--config", config.to_str().unwrap(), "--out", out_a.to_str().unwrap()]);
    rollsim(&["gen", "--config", config.to_str().unwrap(), "--out", out_b.to_str().unwrap(), "--seed", "99"]);
    let a = std::fs::read(out_a.join("trace.jsonl")).unwrap();
    let b = std::fs::read(out_b.join("trace.jsonl")).unwrap();
    assert_ne!(a, b, "different seed must change the workload");
}

#[test]
fn simulate_reports_are_byte_identical_across_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let config = scenarios_dir().join("example.json");
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let run = rollsim(&[
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(run.status.success(), "simulate failed: {run:?}");
    }
    for name in ["report.json", "trace_sequential_iter0.jsonl", "timeline_overlapped_iter0.csv"] {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_a.join("report.json")).unwrap()).unwrap();
    let policies = report["policies"].as_object().unwrap();
    assert_eq!(policies.len(), 4, "one row per policy");
    assert!(report["config"]["resources"]["rollout_workers"].is_u64(),
        "resolved config must be logged in the report");
}

#[test]
fn simulate_supports_csv_format() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "mini.json", MINI_SCENARIO);
    let out = dir.path().join("out");
    let run = rollsim(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert!(run.status.success());
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(csv.starts_with("policy,iteration,makespan_sec"));
    assert_eq!(csv.lines().count(), 3, "header + one row per policy");
}

#[test]
fn pack_reports_oracle_ratio_on_the_adversarial_instance() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "pack.json",
        r#"{
  "seed": 1,
  "workload": {"num_samples": 4},
  "policies": [{"name": "sequential", "reward_trigger": "batch_barrier"}],
  "reward": {
    "verifiers": [{"name": "rule", "kind": "rule", "latency_sec": 0.0,
      "score_fn": {"fn": "const", "value": 1.0}, "weight": 1.0}],
    "aggregation": {"strategy": "weighted_sum"}
  },
  "packing": {
    "num_bins": 2,
    "run_oracle": true,
    "items": [
      {"id": 0, "seq_tokens": 10, "vit_tokens": 0},
      {"id": 1, "seq_tokens": 0, "vit_tokens": 10},
      {"id": 2, "seq_tokens": 5, "vit_tokens": 5},
      {"id": 3, "seq_tokens": 5, "vit_tokens": 5}
    ]
  }
}"#,
    );
    let out = dir.path().join("out");
    let run = rollsim(&["pack", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(run.status.success(), "pack failed: {run:?}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let pack = &report["pack"];
    assert!(pack["plan"]["objective"].is_f64());
    let ratio = pack["oracle"]["ratio"].as_f64().unwrap();
    assert!(ratio <= 2.0, "greedy/oracle ratio {ratio} > 2");
}

#[test]
fn partition_report_carries_plans_and_mtp_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = scenarios_dir().join("example.json");
    let run = rollsim(&["partition", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(run.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let p = &report["partition"];
    assert_eq!(p["plan"]["ranges"].as_array().unwrap().len(), 4);
    assert!(p["upstream_dispatch_bytes"].as_u64().unwrap() <= p["naive_gather_bytes"].as_u64().unwrap());
    assert_eq!(p["mtp"]["image_token"]["cross_stage_bytes"].as_u64().unwrap(), 0);
    assert!(p["mtp"]["pass_embeddings"]["cross_stage_bytes"].as_u64().unwrap() > 0);
}

#[test]
fn sweep_rows_are_ordered_and_stable_under_parallelism() {
    let dir = tempfile::tempdir().unwrap();
    let config = scenarios_dir().join("example.json");
    let out_serial = dir.path().join("serial");
    let out_parallel = dir.path().join("parallel");
    let a = rollsim(&["sweep", "--config", config.to_str().unwrap(), "--out", out_serial.to_str().unwrap()]);
    assert!(a.status.success(), "{a:?}");
    let b = rollsim(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_parallel.to_str().unwrap(),
        "--parallel",
        "4",
    ]);
    assert!(b.status.success(), "{b:?}");
    let serial = std::fs::read(out_serial.join("report.json")).unwrap();
    let parallel = std::fs::read(out_parallel.join("report.json")).unwrap();
    assert_eq!(serial, parallel, "parallel sweep must assemble rows in grid order");
    let report: serde_json::Value = serde_json::from_slice(&serial).unwrap();
    let rows = report["sweep"].as_array().unwrap();
    assert_eq!(rows.len(), 6, "3 deadlines x 2 capacities");
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row["grid_index"].as_u64().unwrap(), i as u64);
    }
}

#[test]
fn schema_violations_exit_2_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "bad.json",
        &MINI_SCENARIO.replace("\"group_size\": 2", "\"group_sizes\": 2"),
    );
    let out = dir.path().join("out");
    let run = rollsim(&["simulate", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&run.stderr);
    assert!(stderr.contains("workload"), "field path missing: {stderr}");
    assert!(!out.exists(), "no partial outputs on failure");
}

#[test]
fn both_workload_and_trace_is_a_schema_violation() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "bad.json",
        &MINI_SCENARIO.replace(
            "\"workload\": {\"num_samples\": 8, \"group_size\": 2},",
            "\"workload\": {\"num_samples\": 8}, \"trace_path\": \"x.jsonl\",",
        ),
    );
    let out = dir.path().join("out");
    let run = rollsim(&["simulate", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn runtime_validation_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    // Valid schema, but the referenced trace file does not exist.
    let config = write_config(
        dir.path(),
        "missing_trace.json",
        &MINI_SCENARIO.replace(
            "\"workload\": {\"num_samples\": 8, \"group_size\": 2},",
            "\"trace_path\": \"does_not_exist.jsonl\",",
        ),
    );
    let out = dir.path().join("out");
    let run = rollsim(&["simulate", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(3));
    assert!(!out.exists(), "no partial outputs on failure");
}

#[test]
fn malformed_trace_lines_are_runtime_errors_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("broken.jsonl"),
        "{\"id\":0,\"source_tag\":\"t\",\"group_id\":0,\"prompt_tokens\":5,\"response_tokens\":5,\"visuals\":[]}\nnot json\n",
    )
    .unwrap();
    let config = write_config(
        dir.path(),
        "broken.json",
        &MINI_SCENARIO.replace(
            "\"workload\": {\"num_samples\": 8, \"group_size\": 2},",
            "\"trace_path\": \"broken.jsonl\",",
        ),
    );
    let out = dir.path().join("out");
    let run = rollsim(&["simulate", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&run.stderr);
    assert!(stderr.contains("line 2"), "line number missing: {stderr}");
}
