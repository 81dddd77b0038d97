//! Deterministic discrete-event simulation of decoupled RL training
//! iterations.
//!
//! One iteration runs rollout inference on a pool of workers, triggers
//! verification per completed rollout (immediately via completion callbacks
//! or at a batch barrier), applies early-abort policies with optional
//! caching of partial generations, and then chains batch construction,
//! weight transfer, reference forward and the training step, overlapping
//! them as the policy allows. Everything is driven by simulated timestamps;
//! no wall-clock concurrency exists inside one simulation.

mod sim;
mod trace;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gym::Trajectory;
use crate::reward::{AggregationStrategy, RewardRecord, VerifierSpec};

pub use trace::{trace_to_string, Stage, TraceEvent};

/// Simulated resource pool and latency model.
///
/// Request service time is linear in tokens with three rates; stage
/// durations for the training tail come from configured byte sizes over
/// the transfer channel plus fixed costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Resources {
    pub rollout_workers: usize,
    /// Parallel judge executions; `null` means unlimited.
    pub judge_capacity: Option<usize>,
    /// Bytes per second on the CPU-GPU transfer channel.
    pub transfer_bandwidth: f64,
    pub prefill_tokens_per_sec: f64,
    pub decode_tokens_per_sec: f64,
    pub vit_tokens_per_sec: f64,
    /// Old-policy weights moved before each training step.
    pub weight_bytes: u64,
    /// Reference-model weights prefetched for the reference forward.
    pub ref_weight_bytes: u64,
    pub batch_fixed_sec: f64,
    pub batch_per_sample_sec: f64,
    pub ref_forward_sec: f64,
    pub train_step_sec: f64,
}

impl Default for Resources {
    fn default() -> Self {
        Resources {
            rollout_workers: 4,
            judge_capacity: None,
            transfer_bandwidth: 1e9,
            prefill_tokens_per_sec: 20_000.0,
            decode_tokens_per_sec: 500.0,
            vit_tokens_per_sec: 40_000.0,
            weight_bytes: 2_000_000_000,
            ref_weight_bytes: 2_000_000_000,
            batch_fixed_sec: 0.5,
            batch_per_sample_sec: 0.01,
            ref_forward_sec: 3.0,
            train_step_sec: 10.0,
        }
    }
}

impl Resources {
    pub fn validate(&self) -> Result<()> {
        if self.rollout_workers == 0 {
            return Err(Error::config("resources.rollout_workers", "must be >= 1"));
        }
        if self.judge_capacity == Some(0) {
            return Err(Error::config(
                "resources.judge_capacity",
                "must be >= 1 or unlimited",
            ));
        }
        for (name, rate) in [
            ("resources.transfer_bandwidth", self.transfer_bandwidth),
            ("resources.prefill_tokens_per_sec", self.prefill_tokens_per_sec),
            ("resources.decode_tokens_per_sec", self.decode_tokens_per_sec),
            ("resources.vit_tokens_per_sec", self.vit_tokens_per_sec),
        ] {
            if rate <= 0.0 || !rate.is_finite() {
                return Err(Error::config(name, "must be a finite rate > 0"));
            }
        }
        for (name, sec) in [
            ("resources.batch_fixed_sec", self.batch_fixed_sec),
            ("resources.batch_per_sample_sec", self.batch_per_sample_sec),
            ("resources.ref_forward_sec", self.ref_forward_sec),
            ("resources.train_step_sec", self.train_step_sec),
        ] {
            if sec < 0.0 || !sec.is_finite() {
                return Err(Error::config(name, "must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// When verification is triggered relative to rollout completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardTrigger {
    /// Verify each rollout the instant it completes.
    PerRequestCallback,
    /// Verify everything only after the whole batch has completed.
    BatchBarrier,
}

/// Early-abort mode for long-tail rollouts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AbortMode {
    None,
    /// Abort the rest once `complete_k` rollouts have finished.
    Count { complete_k: u64 },
    /// Abort unfinished rollouts at this simulated time.
    Time { deadline_sec: f64 },
}

/// Scheduling policy for one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Policy {
    pub name: String,
    pub reward_trigger: RewardTrigger,
    #[serde(default = "default_abort")]
    pub abort: AbortMode,
    /// Cache aborted rollouts and resume them next iteration.
    #[serde(default)]
    pub abort_reuse: bool,
    /// Run batch construction in parallel with the weight transfer.
    #[serde(default)]
    pub overlap_batch_with_transfer: bool,
    /// Prefetch reference weights during the preceding stage.
    #[serde(default)]
    pub ref_prefetch: bool,
    /// Resumed rollouts restart decoding from scratch instead of keeping
    /// their cached token progress.
    #[serde(default)]
    pub restart_resumed: bool,
}

fn default_abort() -> AbortMode {
    AbortMode::None
}

impl Policy {
    /// Fully serialized schedule: barrier trigger, no abort, no overlap.
    pub fn sequential(name: &str) -> Policy {
        Policy {
            name: name.to_string(),
            reward_trigger: RewardTrigger::BatchBarrier,
            abort: AbortMode::None,
            abort_reuse: false,
            overlap_batch_with_transfer: false,
            ref_prefetch: false,
            restart_resumed: false,
        }
    }

    /// Everything overlapped: callbacks, batch/transfer overlap, prefetch.
    pub fn overlapped(name: &str) -> Policy {
        Policy {
            name: name.to_string(),
            reward_trigger: RewardTrigger::PerRequestCallback,
            abort: AbortMode::None,
            abort_reuse: false,
            overlap_batch_with_transfer: true,
            ref_prefetch: true,
            restart_resumed: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.abort {
            AbortMode::Count { complete_k: 0 } => {
                Err(Error::config("policy.abort.complete_k", "must be >= 1"))
            }
            AbortMode::Time { deadline_sec } if deadline_sec <= 0.0 || !deadline_sec.is_finite() => {
                Err(Error::config("policy.abort.deadline_sec", "must be > 0"))
            }
            _ => Ok(()),
        }
    }
}

/// Verifier suite configuration shared by all policies of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardConfig {
    pub verifiers: Vec<VerifierSpec>,
    pub aggregation: AggregationStrategy,
    /// A rollout counts as a success when its reward is >= this threshold.
    #[serde(default = "default_threshold")]
    pub success_threshold: f64,
    /// k values for pass@k reporting.
    #[serde(default = "default_ks")]
    pub pass_ks: Vec<u64>,
}

fn default_threshold() -> f64 {
    0.5
}

fn default_ks() -> Vec<u64> {
    vec![1]
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if self.verifiers.is_empty() {
            return Err(Error::config("reward.verifiers", "must not be empty"));
        }
        for v in &self.verifiers {
            v.validate()?;
        }
        self.aggregation.validate(&self.verifiers)?;
        if !(0.0..=1.0).contains(&self.success_threshold) {
            return Err(Error::config("reward.success_threshold", "must be in [0, 1]"));
        }
        Ok(())
    }

    pub fn weights(&self) -> BTreeMap<String, f64> {
        self.verifiers
            .iter()
            .map(|v| (v.name.clone(), v.weight))
            .collect()
    }
}

/// Partial generations carried across iterations.
///
/// An entry records how far a rollout got before it was aborted: the number
/// of fully completed steps of its request chain and the decode tokens
/// already generated for the in-flight step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AbortCache {
    pub entries: BTreeMap<u64, CacheEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub completed_steps: u32,
    pub tokens_generated: u64,
}

impl AbortCache {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Busy and idle seconds of one stage over an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageTime {
    pub busy_sec: f64,
    pub idle_sec: f64,
}

/// Results of one simulated iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub makespan_sec: f64,
    pub stages: BTreeMap<Stage, StageTime>,
    /// Trajectories submitted this iteration.
    pub scheduled: u64,
    pub completed: u64,
    /// Trajectories cut by the abort (cached plus dropped).
    pub aborted_count: u64,
    /// Cut trajectories carried to the cache.
    pub carried: u64,
    /// Cut trajectories dropped outright.
    pub dropped: u64,
    /// Cache entries consumed by resumed trajectories.
    pub reuse_hits: u64,
    pub request_latency_p50_sec: f64,
    pub request_latency_p99_sec: f64,
    /// `1 - sum(busy) / (stages * makespan)`.
    pub bubble_fraction: f64,
}

impl IterationMetrics {
    /// Every scheduled trajectory is exactly one of completed, carried to
    /// the cache, or dropped.
    pub fn conserves_trajectories(&self) -> bool {
        self.completed + self.carried + self.dropped == self.scheduled
            && self.aborted_count == self.carried + self.dropped
    }
}

/// Everything one simulation produces.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub metrics: IterationMetrics,
    pub trace: Vec<TraceEvent>,
    pub records: Vec<RewardRecord>,
    pub cache: AbortCache,
    /// Merged busy windows per stage, for timeline export.
    pub busy_intervals: BTreeMap<Stage, Vec<(f64, f64)>>,
}

/// Simulate one training iteration.
///
/// Deterministic per `(trajectories, resources, policy, reward, seed,
/// cache)`: same inputs produce a byte-identical event trace. Judge
/// latencies and response lengths are keyed by sample id, never by policy
/// or dispatch time, so paired policy runs under one seed are directly
/// comparable.
pub fn simulate_iteration(
    trajectories: &[Trajectory],
    resources: &Resources,
    policy: &Policy,
    reward: &RewardConfig,
    seed: u64,
    cache: &AbortCache,
) -> Result<SimOutcome> {
    sim::run(trajectories, resources, policy, reward, seed, cache)
}

/// Fully serialized baseline: batch barrier, no abort, no overlap, no
/// prefetch. The comparison floor for every overlap policy.
pub fn sequential_baseline(
    trajectories: &[Trajectory],
    resources: &Resources,
    reward: &RewardConfig,
    seed: u64,
) -> Result<SimOutcome> {
    sim::run(
        trajectories,
        resources,
        &Policy::sequential("sequential"),
        reward,
        seed,
        &AbortCache::default(),
    )
}

/// Per-policy results of a comparison run.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRun {
    pub policy: Policy,
    /// One outcome per iteration, cache chained between them.
    pub iterations: Vec<SimOutcome>,
}

/// Run every policy on the same workload and seed.
///
/// All policies see identical trajectories (hence identical response
/// lengths); rows come back in input policy order.
pub fn compare_policies(
    trajectories: &[Trajectory],
    resources: &Resources,
    policies: &[Policy],
    reward: &RewardConfig,
    seed: u64,
    iterations: usize,
) -> Result<Vec<PolicyRun>> {
    if policies.is_empty() {
        return Err(Error::config("policies", "must not be empty"));
    }
    let mut names = std::collections::BTreeSet::new();
    for p in policies {
        if !names.insert(p.name.as_str()) {
            return Err(Error::config(
                "policies",
                format!("duplicate policy name `{}`", p.name),
            ));
        }
    }
    let iterations = iterations.max(1);
    let mut runs = Vec::with_capacity(policies.len());
    for policy in policies {
        let mut cache = AbortCache::default();
        let mut outs = Vec::with_capacity(iterations);
        for _ in 0..iterations {
            let out = simulate_iteration(trajectories, resources, policy, reward, seed, &cache)?;
            cache = out.cache.clone();
            outs.push(out);
        }
        runs.push(PolicyRun {
            policy: policy.clone(),
            iterations: outs,
        });
    }
    Ok(runs)
}
