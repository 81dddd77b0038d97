//! Scenario configuration: one JSON document describing the workload,
//! topology, resources, policies, reward suite and the per-command
//! sections.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rollsim_core::balance::{ItemCost, PackPolicy};
use rollsim_core::error::{Error, Result};
use rollsim_core::gym::TaskSpec;
use rollsim_core::memory::{BufferEntry, MemConfig};
use rollsim_core::partition::TopologySpec;
use rollsim_core::workload::{RolloutSample, VisualInput, WorkloadSpec};
use rollsim_core::{gen_workload, load_trace, Policy, Resources, RewardConfig};

/// A full scenario. Exactly one of `workload` / `trace_path` provides the
/// samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default)]
    pub workload: Option<WorkloadSpec>,
    #[serde(default)]
    pub trace_path: Option<PathBuf>,
    #[serde(default = "default_task")]
    pub task: TaskSpec,
    #[serde(default)]
    pub topology: TopologySpec,
    #[serde(default)]
    pub resources: Resources,
    #[serde(default = "default_policies")]
    pub policies: Vec<Policy>,
    #[serde(default = "default_reward")]
    pub reward: RewardConfig,
    #[serde(default)]
    pub memory: Option<MemorySection>,
    #[serde(default)]
    pub packing: Option<PackingSection>,
    #[serde(default)]
    pub partition: Option<PartitionSection>,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

fn default_iterations() -> usize {
    1
}

fn default_task() -> TaskSpec {
    TaskSpec::SingleStep
}

fn default_policies() -> Vec<Policy> {
    vec![Policy::sequential("sequential"), Policy::overlapped("overlapped")]
}

fn default_reward() -> RewardConfig {
    use rollsim_core::reward::{ScoreFn, VerifierKind, VerifierSpec};
    RewardConfig {
        verifiers: vec![VerifierSpec {
            name: "rule".into(),
            kind: VerifierKind::Rule {
                latency_sec: 0.05,
                score_fn: ScoreFn::PassRate { p: 0.7 },
            },
            weight: 1.0,
        }],
        aggregation: rollsim_core::AggregationStrategy::WeightedSum,
        success_threshold: 0.5,
        pass_ks: vec![1],
    }
}

/// Memory model inputs plus the buffer-registry scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemorySection {
    #[serde(default)]
    pub model: Option<MemConfig>,
    #[serde(default)]
    pub buffers: Vec<BufferEntry>,
    /// Buffer names to migrate from the GPU path to the host path.
    #[serde(default)]
    pub migrate_to_host: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackingSection {
    pub num_bins: usize,
    #[serde(default = "default_pack_policy")]
    pub policy: PackPolicy,
    /// Compare against the brute-force optimum when the instance is small
    /// enough.
    #[serde(default = "default_true")]
    pub run_oracle: bool,
    /// Explicit items; otherwise derived from the workload's trajectories.
    #[serde(default)]
    pub items: Option<Vec<ItemCost>>,
    /// Payload proxy for DP-balance dispatch planning.
    #[serde(default = "default_bytes_per_token")]
    pub bytes_per_token: u64,
}

fn default_pack_policy() -> PackPolicy {
    PackPolicy::GreedyMinimax
}

fn default_true() -> bool {
    true
}

fn default_bytes_per_token() -> u64 {
    2
}

/// Which rank loads each shard before the all-to-all dispatch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "assign", rename_all = "snake_case")]
pub enum ProducerAssignment {
    /// Every consumer loads its own shard: no traffic.
    Colocated,
    /// One loader rank produces everything.
    Single { rank: usize },
    /// Producer of consumer `r` is rank `(r + offset) % ranks`.
    Cycle { offset: usize },
}

impl ProducerAssignment {
    pub fn producers(&self, ranks: usize) -> Vec<usize> {
        match self {
            ProducerAssignment::Colocated => (0..ranks).collect(),
            ProducerAssignment::Single { rank } => vec![*rank; ranks],
            ProducerAssignment::Cycle { offset } => {
                (0..ranks).map(|r| (r + offset) % ranks).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSection {
    /// Visual to shard; defaults to the first visual in the workload.
    #[serde(default)]
    pub visual: Option<VisualInput>,
    #[serde(default = "default_producers")]
    pub producers: ProducerAssignment,
    /// Sample whose layout feeds the MMTP comparison; defaults to the
    /// first sample.
    #[serde(default)]
    pub layout_sample: Option<u64>,
}

fn default_producers() -> ProducerAssignment {
    ProducerAssignment::Single { rank: 0 }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameters: Vec<SweepParam>,
}

/// One sweep axis: a config path (dot notation, array indices as numbers,
/// e.g. `policies.0.abort.deadline_sec`) and the values to grid over.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParam {
    pub path: String,
    pub values: Vec<serde_json::Value>,
}

impl Scenario {
    /// Parse a scenario document, reporting the offending field path on
    /// schema violations.
    pub fn from_json(raw: &str) -> Result<Scenario> {
        let de = &mut serde_json::Deserializer::from_str(raw);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            Error::Config {
                field: e.path().to_string(),
                message: e.inner().to_string(),
            }
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Parse an already-loaded JSON value (used by sweep points).
    pub fn from_value(value: serde_json::Value) -> Result<Scenario> {
        let scenario: Scenario =
            serde_path_to_error::deserialize(value).map_err(|e| Error::Config {
                field: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.workload, &self.trace_path) {
            (Some(_), Some(_)) => {
                return Err(Error::config(
                    "workload",
                    "exactly one of `workload` and `trace_path` may be set",
                ))
            }
            (None, None) => {
                return Err(Error::config(
                    "workload",
                    "one of `workload` or `trace_path` is required",
                ))
            }
            _ => {}
        }
        if let Some(w) = &self.workload {
            w.validate()?;
        }
        self.task.validate()?;
        self.topology.validate()?;
        self.resources.validate()?;
        self.reward.validate()?;
        for p in &self.policies {
            p.validate()?;
        }
        if self.iterations == 0 {
            return Err(Error::config("iterations", "must be >= 1"));
        }
        if let Some(p) = &self.packing {
            if p.num_bins == 0 {
                return Err(Error::config("packing.num_bins", "must be >= 1"));
            }
        }
        if let Some(m) = &self.memory {
            if let Some(model) = &m.model {
                model.validate()?;
            }
        }
        if let Some(s) = &self.sweep {
            if s.parameters.is_empty() {
                return Err(Error::config("sweep.parameters", "must not be empty"));
            }
            for p in &s.parameters {
                if p.values.is_empty() {
                    return Err(Error::config(
                        format!("sweep.parameters.{}", p.path),
                        "needs at least one value",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Produce the samples: generated from the spec (seeded by the
    /// scenario's master seed) or loaded from the trace. `base_dir`
    /// resolves relative trace paths.
    pub fn samples(&self, base_dir: &Path) -> Result<Vec<RolloutSample>> {
        if let Some(spec) = &self.workload {
            let mut spec = spec.clone();
            spec.seed = self.seed;
            return gen_workload(&spec);
        }
        let path = self.trace_path.as_ref().expect("validated");
        let resolved = if path.is_absolute() {
            path.clone()
        } else {
            base_dir.join(path)
        };
        load_trace(&resolved)
    }
}
