//! Scheduling and discrete-event simulation toolkit for multimodal RL
//! training pipelines.
//!
//! The crate models the load and dependency structure of a multimodal RL
//! training iteration without touching GPUs, tensors or real models:
//!
//! - [`workload`]: rollout samples with visual inputs, synthetic
//!   heavy-tailed workload generation, and the line-delimited trace format;
//! - [`gym`]: expansion of a sample into a chain of dependent inference
//!   requests for single-step and multi-step tasks;
//! - [`reward`]: rule and judge verifier orchestration, score aggregation,
//!   pass@k and per-source metrics;
//! - [`partition`]: downsample-group-aligned sharding of visual inputs,
//!   all-to-all dispatch planning, communication volumes, and
//!   multi-token-prediction head-input layouts;
//! - [`balance`]: joint bin-packing over sequence and ViT tokens with a
//!   brute-force optimal oracle, and DP-group balancing;
//! - [`memory`]: closed-form activation-memory model under recomputation
//!   and offloading, and communication-buffer accounting;
//! - [`engine`]: the deterministic discrete-event simulator of decoupled,
//!   overlappable pipeline stages with early aborts and abort caching.

pub mod balance;
pub mod engine;
pub mod error;
pub mod gym;
pub mod memory;
pub mod partition;
pub mod report;
pub mod reward;
pub mod rng;
pub mod workload;

pub use balance::{
    balance_dp, brute_force_pack, imbalance, pack_joint, BinNorm, ItemCost, PackPlan, PackPolicy,
};
pub use engine::{
    compare_policies, sequential_baseline, simulate_iteration, AbortCache, AbortMode, CacheEntry,
    IterationMetrics, Policy, PolicyRun, Resources, RewardConfig, RewardTrigger, SimOutcome,
    Stage, StageTime, TraceEvent,
};
pub use error::{Error, Result};
pub use gym::{expand_trajectory, trajectory_load, InferenceRequest, TaskSpec, Trajectory};
pub use memory::{
    comm_buffer_bytes, peak_activation, BufferEntry, BufferPath, BufferRegistry, MemConfig,
};
pub use partition::{
    build_dispatch, mtp_cross_stage_bytes, mtp_head_input, naive_gather_volume, partition_compat,
    plan_shards, upstream_dispatch_volume, CompatReport, DispatchMessage, DispatchPlan, HeadInput,
    HeadSlot, MtpLayout, MtpOption, PartitionPlan, ShardRange, Slot, TopologySpec,
};
pub use reward::{
    aggregate, pass_at_k, plan_verification, source_report, AggregationStrategy, RewardRecord,
    SourceMetrics, VerifierKind, VerifierSpec,
};
pub use workload::{
    gen_workload, load_trace, read_trace, save_trace, vit_token_count, write_trace, CountDist,
    ResponseLen, RolloutSample, VisualInput, WorkloadSpec,
};
