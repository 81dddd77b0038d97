//! Event trace records.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::report::to_stable_line;

/// Pipeline stages, in tie-breaking priority order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Rollout,
    Reward,
    BatchBuild,
    WeightTransfer,
    RefForward,
    TrainStep,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Rollout,
        Stage::Reward,
        Stage::BatchBuild,
        Stage::WeightTransfer,
        Stage::RefForward,
        Stage::TrainStep,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Stage::Rollout => "rollout",
            Stage::Reward => "reward",
            Stage::BatchBuild => "batch_build",
            Stage::WeightTransfer => "weight_transfer",
            Stage::RefForward => "ref_forward",
            Stage::TrainStep => "train_step",
        }
    }
}

/// One simulator event, serialized as a single JSON line.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub time: f64,
    pub stage: Stage,
    pub kind: &'static str,
    /// `(sample, step)` for request-scoped events.
    pub request: Option<(u64, u32)>,
    pub detail: String,
}

impl TraceEvent {
    pub fn to_line(&self) -> String {
        let request = match self.request {
            Some((sample, step)) => json!(format!("{sample}/{step}")),
            None => json!(null),
        };
        to_stable_line(&json!({
            "time": self.time,
            "stage": self.stage.name(),
            "event_kind": self.kind,
            "request_id": request,
            "detail": self.detail,
        }))
    }
}

/// Render a whole trace as line-delimited JSON.
pub fn trace_to_string(events: &[TraceEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&e.to_line());
        out.push('\n');
    }
    out
}

const KIND_ORDER: [&str; 20] = [
    "request_ready",
    "request_start",
    "request_complete",
    "abort_fired",
    "request_aborted",
    "verify_planned",
    "verifier_start",
    "verifier_done",
    "reward_ready",
    "batch_start",
    "batch_done",
    "transfer_start",
    "transfer_done",
    "ref_transfer_start",
    "ref_transfer_done",
    "ref_start",
    "ref_done",
    "train_start",
    "train_done",
    "iteration_done",
];

pub(crate) fn kind_priority(kind: &str) -> usize {
    KIND_ORDER.iter().position(|k| *k == kind).unwrap_or(KIND_ORDER.len())
}

/// Canonical trace order: time, then stage priority, then event kind, then
/// request id. Makes same-seed traces byte-identical and causally sorted.
pub(crate) fn sort_trace(events: &mut [TraceEvent]) {
    events.sort_by(|a, b| {
        a.time
            .total_cmp(&b.time)
            .then(a.stage.cmp(&b.stage))
            .then(kind_priority(a.kind).cmp(&kind_priority(b.kind)))
            .then(a.request.cmp(&b.request))
            .then(a.detail.cmp(&b.detail))
    });
}
