//! Report assembly: stable JSON values and CSV tables.

use serde_json::{json, Map, Value};

use rollsim_core::balance::PackPlan;
use rollsim_core::partition::{DispatchPlan, PartitionPlan};
use rollsim_core::reward::SourceMetrics;
use rollsim_core::{IterationMetrics, SimOutcome, Stage};

use std::collections::BTreeMap;

pub fn metrics_to_value(m: &IterationMetrics) -> Value {
    let mut stages = Map::new();
    for (stage, t) in &m.stages {
        stages.insert(
            stage.name().to_string(),
            json!({"busy_sec": t.busy_sec, "idle_sec": t.idle_sec}),
        );
    }
    json!({
        "makespan_sec": m.makespan_sec,
        "stages": Value::Object(stages),
        "scheduled": m.scheduled,
        "completed": m.completed,
        "aborted_count": m.aborted_count,
        "carried": m.carried,
        "dropped": m.dropped,
        "reuse_hits": m.reuse_hits,
        "request_latency_p50_sec": m.request_latency_p50_sec,
        "request_latency_p99_sec": m.request_latency_p99_sec,
        "bubble_fraction": m.bubble_fraction,
    })
}

pub fn sources_to_value(sources: &BTreeMap<String, SourceMetrics>) -> Value {
    let mut out = Map::new();
    for (tag, m) in sources {
        let pass: Map<String, Value> = m
            .pass_at
            .iter()
            .map(|(k, v)| (format!("pass@{k}"), json!(v)))
            .collect();
        out.insert(
            tag.clone(),
            json!({
                "count": m.count,
                "mean_reward": m.mean_reward,
                "pass_at": Value::Object(pass),
                "skipped_groups": m.skipped_groups,
            }),
        );
    }
    Value::Object(out)
}

pub fn pack_plan_to_value(plan: &PackPlan, imbalance: (f64, f64)) -> Value {
    let assignment: Map<String, Value> = plan
        .assignment
        .iter()
        .map(|(id, bin)| (id.to_string(), json!(bin)))
        .collect();
    let loads: Vec<Value> = plan
        .loads
        .iter()
        .map(|&(s, v)| json!({"seq": s, "vit": v}))
        .collect();
    json!({
        "num_bins": plan.num_bins,
        "assignment": Value::Object(assignment),
        "loads": loads,
        "objective": plan.objective,
        "imbalance": {"seq_ratio": imbalance.0, "vit_ratio": imbalance.1},
    })
}

pub fn partition_plan_to_value(plan: &PartitionPlan) -> Value {
    let ranges: Vec<Value> = plan
        .shards
        .iter()
        .map(|s| {
            json!({
                "cp_rank": s.cp_rank,
                "tp_rank": s.tp_rank,
                "start": s.start,
                "end": s.end,
            })
        })
        .collect();
    json!({
        "ranges": ranges,
        "padding_tokens": plan.padding_tokens,
    })
}

pub fn dispatch_to_value(plan: &DispatchPlan) -> Value {
    let messages: Vec<Value> = plan
        .messages
        .iter()
        .map(|m| json!({"src_rank": m.src_rank, "dst_rank": m.dst_rank, "bytes": m.bytes}))
        .collect();
    json!({
        "messages": messages,
        "total_bytes": plan.total_bytes,
        "message_count": plan.message_count,
    })
}

/// Timeline CSV: one row per busy-interval edge, columns time,stage,busy.
pub fn timeline_csv(out: &SimOutcome) -> String {
    let mut rows: Vec<(f64, &'static str, u8)> = Vec::new();
    for stage in Stage::ALL {
        if let Some(intervals) = out.busy_intervals.get(&stage) {
            for &(start, end) in intervals {
                rows.push((start, stage.name(), 1));
                rows.push((end, stage.name(), 0));
            }
        }
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)).then(a.2.cmp(&b.2)));
    let mut csv = String::from("time,stage,busy\n");
    for (t, stage, busy) in rows {
        csv.push_str(&format!(
            "{},{},{}\n",
            rollsim_core::report::fmt_sig(t),
            stage,
            busy
        ));
    }
    csv
}

/// Flat CSV rows for `--format csv` simulate reports.
pub fn metrics_csv(rows: &[(String, usize, &IterationMetrics)]) -> String {
    let mut csv = String::from(
        "policy,iteration,makespan_sec,scheduled,completed,aborted_count,carried,dropped,reuse_hits,request_latency_p50_sec,request_latency_p99_sec,bubble_fraction\n",
    );
    for (policy, iteration, m) in rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            policy,
            iteration,
            rollsim_core::report::fmt_sig(m.makespan_sec),
            m.scheduled,
            m.completed,
            m.aborted_count,
            m.carried,
            m.dropped,
            m.reuse_hits,
            rollsim_core::report::fmt_sig(m.request_latency_p50_sec),
            rollsim_core::report::fmt_sig(m.request_latency_p99_sec),
            rollsim_core::report::fmt_sig(m.bubble_fraction),
        ));
    }
    csv
}
