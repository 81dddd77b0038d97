//! Topology-aware sharding of visual inputs and MMTP head-input layouts.
//!
//! Sharding happens at data-loading time over *merged* tokens, so every
//! shard boundary lands on a downsample-group edge and no rank ever needs
//! the full raw patch tensor. The naive baseline models forward-pass-time
//! partitioning, where each rank all-gathers the raw tensor before
//! redistribution. MMTP layouts model the three ways of feeding visual
//! positions to a multi-token-prediction head and their cross-stage
//! communication costs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::workload::{RolloutSample, VisualInput};

/// Parallel topology and link model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologySpec {
    pub dp: usize,
    pub cp: usize,
    pub tp: usize,
    pub pp: usize,
    /// Embedding width in elements.
    pub hidden_size: u64,
    /// Raw patch feature width in elements.
    pub patch_dim: u64,
    pub bytes_per_element: u64,
    /// Bytes per second per link.
    pub link_bandwidth: f64,
    /// Seconds per message.
    pub link_latency: f64,
}

impl Default for TopologySpec {
    fn default() -> Self {
        TopologySpec {
            dp: 1,
            cp: 1,
            tp: 1,
            pp: 1,
            hidden_size: 1024,
            patch_dim: 1176,
            bytes_per_element: 2,
            link_bandwidth: 25e9,
            link_latency: 5e-6,
        }
    }
}

impl TopologySpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("topology.dp", self.dp),
            ("topology.cp", self.cp),
            ("topology.tp", self.tp),
            ("topology.pp", self.pp),
        ] {
            if v == 0 {
                return Err(Error::config(name, "must be >= 1"));
            }
        }
        if ![1, 2, 4, 8].contains(&self.bytes_per_element) {
            return Err(Error::config(
                "topology.bytes_per_element",
                "must be one of 1, 2, 4, 8",
            ));
        }
        if self.link_bandwidth <= 0.0 {
            return Err(Error::config("topology.link_bandwidth", "must be > 0"));
        }
        if self.link_latency < 0.0 {
            return Err(Error::config("topology.link_latency", "must be >= 0"));
        }
        Ok(())
    }
}

/// One rank's contiguous slice of the merged-token sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardRange {
    pub cp_rank: usize,
    pub tp_rank: usize,
    /// Half-open range over merged-token indices.
    pub start: u64,
    pub end: u64,
}

impl ShardRange {
    pub fn merged_tokens(&self) -> u64 {
        self.end - self.start
    }
}

/// Contiguous, group-aligned split of one visual's merged tokens over the
/// combined `cp * tp` ranks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub shards: Vec<ShardRange>,
    /// Merged tokens appended so every rank receives the same count.
    pub padding_tokens: u64,
}

impl PartitionPlan {
    pub fn num_ranks(&self) -> usize {
        self.shards.len()
    }

    pub fn padded_merged_tokens(&self) -> u64 {
        self.shards.last().map_or(0, |s| s.end)
    }
}

/// Message of an all-to-all dispatch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DispatchMessage {
    pub src_rank: usize,
    pub dst_rank: usize,
    pub bytes: u64,
}

/// Planned all-to-all: one message per (producer, consumer) pair with
/// nonzero payload; local hand-offs carry no cost and are omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchPlan {
    pub messages: Vec<DispatchMessage>,
    pub total_bytes: u64,
    pub message_count: usize,
}

impl DispatchPlan {
    fn from_messages(messages: Vec<DispatchMessage>) -> Self {
        let total_bytes = messages.iter().map(|m| m.bytes).sum();
        let message_count = messages.len();
        DispatchPlan {
            messages,
            total_bytes,
            message_count,
        }
    }

    /// Serialized transfer time over one link: latency per message plus
    /// bytes over bandwidth.
    pub fn transfer_sec(&self, topo: &TopologySpec) -> f64 {
        self.message_count as f64 * topo.link_latency
            + self.total_bytes as f64 / topo.link_bandwidth
    }
}

/// Build an aggregated dispatch plan from per-item (src, dst, bytes)
/// triples, dropping self-messages and merging per pair.
pub(crate) fn dispatch_from_moves(
    moves: impl IntoIterator<Item = (usize, usize, u64)>,
) -> DispatchPlan {
    let mut per_pair: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for (src, dst, bytes) in moves {
        if src == dst || bytes == 0 {
            continue;
        }
        *per_pair.entry((src, dst)).or_insert(0) += bytes;
    }
    let messages = per_pair
        .into_iter()
        .map(|((src_rank, dst_rank), bytes)| DispatchMessage {
            src_rank,
            dst_rank,
            bytes,
        })
        .collect();
    DispatchPlan::from_messages(messages)
}

/// Split a visual's merged-token sequence over `cp * tp` ranks.
///
/// The sequence is padded to a multiple of `cp * tp` merged tokens, then
/// split into equal contiguous ranges, one per rank in `(cp, tp)`
/// row-major order. Because the split is over merged tokens, every
/// boundary maps back to a multiple of the downsample group size in raw
/// patch indices.
pub fn plan_shards(v: &VisualInput, cp: usize, tp: usize) -> PartitionPlan {
    let ranks = (cp * tp).max(1) as u64;
    let merged = v.merged_tokens();
    let padded = merged.div_ceil(ranks) * ranks;
    let per_rank = padded / ranks;
    let mut shards = Vec::with_capacity((cp * tp).max(1));
    for cp_rank in 0..cp {
        for tp_rank in 0..tp {
            let r = (cp_rank * tp + tp_rank) as u64;
            shards.push(ShardRange {
                cp_rank,
                tp_rank,
                start: r * per_rank,
                end: (r + 1) * per_rank,
            });
        }
    }
    PartitionPlan {
        shards,
        padding_tokens: padded - merged,
    }
}

/// Total bytes received when partitioning happens in the forward pass:
/// every rank all-gathers the raw patch tensor it does not already hold.
///
/// Per-rank received bytes are `raw * patch_dim * bpe * (R - 1) / R`; the
/// returned sum over ranks is `raw * patch_dim * bpe * (R - 1)`.
pub fn naive_gather_volume(v: &VisualInput, topo: &TopologySpec) -> u64 {
    let ranks = (topo.cp * topo.tp) as u64;
    v.raw_tokens() * topo.patch_dim * topo.bytes_per_element * (ranks - 1)
}

/// Total bytes received when each rank is sent only its aligned shard by
/// the data-loading stage. Padding tokens are counted as real tokens.
///
/// With a single rank the producer is the consumer and nothing crosses a
/// link.
pub fn upstream_dispatch_volume(
    plan: &PartitionPlan,
    v: &VisualInput,
    topo: &TopologySpec,
) -> Result<u64> {
    let ranks = topo.cp * topo.tp;
    if plan.num_ranks() != ranks {
        return Err(Error::Argument(format!(
            "plan has {} shards but topology has {} ranks",
            plan.num_ranks(),
            ranks
        )));
    }
    if plan.padded_merged_tokens() < v.merged_tokens() {
        return Err(Error::Argument(
            "plan does not cover the visual's merged tokens".to_string(),
        ));
    }
    if ranks == 1 {
        return Ok(0);
    }
    let per_token_bytes = v.group_size() * topo.patch_dim * topo.bytes_per_element;
    Ok(plan
        .shards
        .iter()
        .map(|s| s.merged_tokens() * per_token_bytes)
        .sum())
}

/// Plan the all-to-all moving each shard from its producing data-loader
/// rank to its consuming rank.
///
/// `producers[i]` is the rank that loads shard `i` (in plan order). Self
/// messages are omitted; bytes aggregate per (src, dst) pair.
pub fn build_dispatch(
    plan: &PartitionPlan,
    producers: &[usize],
    v: &VisualInput,
    topo: &TopologySpec,
) -> Result<DispatchPlan> {
    if producers.len() != plan.num_ranks() {
        return Err(Error::Validation(format!(
            "{} shards but {} producer assignments",
            plan.num_ranks(),
            producers.len()
        )));
    }
    let ranks = plan.num_ranks();
    if let Some(bad) = producers.iter().find(|p| **p >= ranks) {
        return Err(Error::Validation(format!(
            "producer rank {bad} outside [0, {ranks})"
        )));
    }
    let per_token_bytes = v.group_size() * topo.patch_dim * topo.bytes_per_element;
    Ok(dispatch_from_moves(plan.shards.iter().enumerate().map(
        |(i, s)| {
            let consumer = s.cp_rank * topo.tp + s.tp_rank;
            (producers[i], consumer, s.merged_tokens() * per_token_bytes)
        },
    )))
}

/// How visual positions are fed to the multi-token-prediction head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MtpOption {
    /// Forward the backbone's visual embeddings to the head.
    PassEmbeddings,
    /// Drop visual positions entirely, reducing to text-only prediction.
    MaskVisual,
    /// Keep visual positions but substitute a shared learnable image token.
    ImageToken,
}

/// One input slot of the head: a text token or a position of visual `index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Text { token_id: u64 },
    Visual { visual_index: usize },
}

/// Head-input layout: the slot sequence plus the selected option.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MtpLayout {
    pub slots: Vec<Slot>,
    pub option: MtpOption,
}

impl MtpLayout {
    pub fn new(slots: Vec<Slot>, option: MtpOption) -> Result<Self> {
        if slots.is_empty() {
            return Err(Error::Validation("layout must have at least one slot".into()))
        }
        Ok(MtpLayout { slots, option })
    }

    /// Layout of a sample: its prompt tokens followed by one slot per
    /// merged token of each visual.
    pub fn from_sample(sample: &RolloutSample, option: MtpOption) -> Result<Self> {
        let mut slots: Vec<Slot> = (0..sample.prompt_tokens)
            .map(|t| Slot::Text { token_id: t })
            .collect();
        for (visual_index, v) in sample.visuals.iter().enumerate() {
            slots.extend(std::iter::repeat_n(
                Slot::Visual { visual_index },
                v.merged_tokens() as usize,
            ));
        }
        MtpLayout::new(slots, option)
    }

    pub fn visual_slots(&self) -> u64 {
        self.slots
            .iter()
            .filter(|s| matches!(s, Slot::Visual { .. }))
            .count() as u64
    }
}

/// A transformed head-input slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadSlot {
    Text { token_id: u64 },
    /// The shared learnable image token.
    ImageToken,
    /// Backbone embedding forwarded as-is for visual `index`.
    Passthrough { visual_index: usize },
}

/// Result of preparing a layout for the head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadInput {
    pub slots: Vec<HeadSlot>,
    /// Old position -> new position for every retained slot.
    pub offsets: BTreeMap<usize, usize>,
}

/// Transform a layout into the head's input sequence and offset map.
pub fn mtp_head_input(layout: &MtpLayout) -> HeadInput {
    match layout.option {
        MtpOption::ImageToken => HeadInput {
            slots: layout
                .slots
                .iter()
                .map(|s| match s {
                    Slot::Text { token_id } => HeadSlot::Text { token_id: *token_id },
                    Slot::Visual { .. } => HeadSlot::ImageToken,
                })
                .collect(),
            offsets: (0..layout.slots.len()).map(|i| (i, i)).collect(),
        },
        MtpOption::PassEmbeddings => HeadInput {
            slots: layout
                .slots
                .iter()
                .map(|s| match s {
                    Slot::Text { token_id } => HeadSlot::Text { token_id: *token_id },
                    Slot::Visual { visual_index } => HeadSlot::Passthrough {
                        visual_index: *visual_index,
                    },
                })
                .collect(),
            offsets: (0..layout.slots.len()).map(|i| (i, i)).collect(),
        },
        MtpOption::MaskVisual => {
            let mut slots = Vec::new();
            let mut offsets = BTreeMap::new();
            for (old, s) in layout.slots.iter().enumerate() {
                if let Slot::Text { token_id } = s {
                    offsets.insert(old, slots.len());
                    slots.push(HeadSlot::Text { token_id: *token_id });
                }
            }
            HeadInput { slots, offsets }
        }
    }
}

/// Bytes of visual embeddings that must cross pipeline-parallel stage
/// boundaries to feed the head.
///
/// Only forwarding real embeddings with more than one stage costs
/// anything: the image-token and mask options reconstruct the head input
/// from token ids locally.
pub fn mtp_cross_stage_bytes(layout: &MtpLayout, topo: &TopologySpec) -> u64 {
    match layout.option {
        MtpOption::PassEmbeddings if topo.pp > 1 => {
            layout.visual_slots() * topo.hidden_size * topo.bytes_per_element
        }
        _ => 0,
    }
}

/// Compatibility of a layout option with sequence partitioning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompatReport {
    /// Masking changes sequence length, so positions must be remapped.
    pub needs_offset_remap: bool,
    /// Passing embeddings under a sequence split requires shard-aligned
    /// visual embeddings.
    pub needs_embedding_shard_alignment: bool,
}

/// Analyze what extra handling a layout option needs under `cp`-way
/// sequence partitioning.
pub fn partition_compat(layout: &MtpLayout, cp: usize) -> CompatReport {
    let has_visuals = layout.visual_slots() > 0;
    match layout.option {
        MtpOption::MaskVisual => CompatReport {
            needs_offset_remap: has_visuals,
            needs_embedding_shard_alignment: false,
        },
        MtpOption::PassEmbeddings => CompatReport {
            needs_offset_remap: false,
            needs_embedding_shard_alignment: cp > 1 && has_visuals,
        },
        MtpOption::ImageToken => CompatReport {
            needs_offset_remap: false,
            needs_embedding_shard_alignment: false,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vis(h: u64, w: u64, f: u64, m: u64) -> VisualInput {
        VisualInput::new(h, w, f, m).unwrap()
    }

    fn topo(cp: usize, tp: usize, patch_dim: u64, bpe: u64) -> TopologySpec {
        TopologySpec {
            cp,
            tp,
            patch_dim,
            bytes_per_element: bpe,
            ..TopologySpec::default()
        }
    }

    #[test]
    fn four_groups_over_four_ranks() {
        let v = vis(4, 4, 1, 2); // 4 merged tokens
        let plan = plan_shards(&v, 2, 2);
        assert_eq!(plan.padding_tokens, 0);
        assert_eq!(plan.num_ranks(), 4);
        for (i, s) in plan.shards.iter().enumerate() {
            assert_eq!((s.start, s.end), (i as u64, i as u64 + 1));
        }
    }

    #[test]
    fn identity_partition() {
        let v = vis(7, 9, 2, 2);
        let plan = plan_shards(&v, 1, 1);
        assert_eq!(plan.num_ranks(), 1);
        assert_eq!(plan.shards[0].start, 0);
        assert_eq!(plan.shards[0].end, v.merged_tokens());
        assert_eq!(plan.padding_tokens, 0);
    }

    #[test]
    fn padding_to_rank_multiple() {
        let v = vis(4, 4, 1, 2); // 4 merged tokens over 3 ranks -> pad to 6
        let plan = plan_shards(&v, 3, 1);
        assert_eq!(plan.padding_tokens, 2);
        let sizes: Vec<u64> = plan.shards.iter().map(|s| s.merged_tokens()).collect();
        assert_eq!(sizes, vec![2, 2, 2]);
    }

    #[test]
    fn shard_properties_hold_for_a_grid_of_inputs() {
        for h in [1u64, 3, 8, 15, 17] {
            for w in [1u64, 4, 9, 16] {
                for frames in [1u64, 3] {
                    for m in [1u64, 2, 3] {
                        let v = vis(h, w, frames, m);
                        for cp in 1..=4 {
                            for tp in 1..=4 {
                                let plan = plan_shards(&v, cp, tp);
                                let mut cursor = 0;
                                for s in &plan.shards {
                                    assert_eq!(s.start, cursor, "contiguous cover");
                                    cursor = s.end;
                                    // Boundaries in raw patch indices sit on
                                    // downsample-group edges.
                                    assert_eq!((s.start * v.group_size()) % v.group_size(), 0);
                                }
                                assert_eq!(cursor, v.merged_tokens() + plan.padding_tokens);
                                let sizes: Vec<u64> =
                                    plan.shards.iter().map(|s| s.merged_tokens()).collect();
                                let spread =
                                    sizes.iter().max().unwrap() - sizes.iter().min().unwrap();
                                assert!(spread <= 1);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn naive_volume_formula() {
        let v = vis(16, 16, 1, 2); // raw 256
        assert_eq!(naive_gather_volume(&v, &topo(1, 1, 4, 2)), 0);
        assert_eq!(naive_gather_volume(&v, &topo(2, 2, 4, 2)), 6144);
        // Enumerate the 12 rank-to-rank transfers: each of 4 ranks receives
        // 3 remote quarters of 256*4*2/4 bytes.
        let quarter = 256 * 4 * 2 / 4;
        assert_eq!(12 * quarter, 6144);
        let v2 = vis(16, 16, 2, 2);
        assert_eq!(
            naive_gather_volume(&v2, &topo(2, 2, 4, 2)),
            2 * naive_gather_volume(&v, &topo(2, 2, 4, 2))
        );
    }

    #[test]
    fn upstream_volume_and_ratio() {
        let v = vis(16, 16, 1, 2); // 64 merged, group 4
        let t = topo(2, 2, 4, 2);
        let plan = plan_shards(&v, 2, 2);
        let upstream = upstream_dispatch_volume(&plan, &v, &t).unwrap();
        assert_eq!(upstream, 2048);
        assert_eq!(upstream * 3, naive_gather_volume(&v, &t));

        let single = topo(1, 1, 4, 2);
        let plan1 = plan_shards(&v, 1, 1);
        assert_eq!(upstream_dispatch_volume(&plan1, &v, &single).unwrap(), 0);
    }

    #[test]
    fn upstream_volume_counts_padding() {
        let v = vis(4, 4, 1, 2); // 4 merged padded to 6, group 4
        let t = topo(3, 1, 4, 2);
        let plan = plan_shards(&v, 3, 1);
        let padded = upstream_dispatch_volume(&plan, &v, &t).unwrap();
        assert_eq!(padded, 6 * 4 * 4 * 2);
        assert!(padded >= 4 * 4 * 4 * 2);
    }

    #[test]
    fn upstream_volume_rejects_mismatched_plan() {
        let v = vis(16, 16, 1, 2);
        let plan = plan_shards(&v, 2, 2);
        let t = topo(3, 1, 4, 2);
        assert!(upstream_dispatch_volume(&plan, &v, &t).is_err());
    }

    #[test]
    fn dispatch_all_local_is_empty() {
        let v = vis(16, 16, 1, 2);
        let t = topo(2, 2, 4, 2);
        let plan = plan_shards(&v, 2, 2);
        let producers: Vec<usize> = (0..4).collect();
        let d = build_dispatch(&plan, &producers, &v, &t).unwrap();
        assert!(d.messages.is_empty());
        assert_eq!(d.total_bytes, 0);
    }

    #[test]
    fn dispatch_single_producer_star() {
        let v = vis(16, 16, 1, 2);
        let t = topo(2, 2, 4, 2);
        let plan = plan_shards(&v, 2, 2);
        let d = build_dispatch(&plan, &[0, 0, 0, 0], &v, &t).unwrap();
        assert_eq!(d.message_count, 3);
        let shard_bytes = 16 * 4 * 4 * 2; // 16 merged tokens each
        assert!(d.messages.iter().all(|m| m.bytes == shard_bytes));
        let upstream = upstream_dispatch_volume(&plan, &v, &t).unwrap();
        assert_eq!(d.total_bytes, upstream - shard_bytes);
    }

    #[test]
    fn dispatch_offset_cycle() {
        let v = vis(16, 16, 1, 2);
        let t = topo(2, 2, 4, 2);
        let plan = plan_shards(&v, 2, 2);
        // Producer of consumer r is rank (r + 1) % 4: a perfect cycle.
        let producers = vec![1, 2, 3, 0];
        let d = build_dispatch(&plan, &producers, &v, &t).unwrap();
        assert_eq!(d.message_count, 4);
        let mut pairs: Vec<(usize, usize)> =
            d.messages.iter().map(|m| (m.src_rank, m.dst_rank)).collect();
        pairs.sort_unstable();
        assert_eq!(pairs, vec![(0, 3), (1, 0), (2, 1), (3, 2)]);
    }

    #[test]
    fn dispatch_rejects_missing_producers() {
        let v = vis(16, 16, 1, 2);
        let t = topo(2, 2, 4, 2);
        let plan = plan_shards(&v, 2, 2);
        assert!(build_dispatch(&plan, &[0, 1], &v, &t).is_err());
        assert!(build_dispatch(&plan, &[0, 1, 2, 9], &v, &t).is_err());
    }

    fn tvtv() -> Vec<Slot> {
        vec![
            Slot::Text { token_id: 1 },
            Slot::Visual { visual_index: 0 },
            Slot::Visual { visual_index: 0 },
            Slot::Text { token_id: 2 },
        ]
    }

    #[test]
    fn image_token_replaces_visual_slots_in_place() {
        let layout = MtpLayout::new(tvtv(), MtpOption::ImageToken).unwrap();
        let head = mtp_head_input(&layout);
        assert_eq!(
            head.slots,
            vec![
                HeadSlot::Text { token_id: 1 },
                HeadSlot::ImageToken,
                HeadSlot::ImageToken,
                HeadSlot::Text { token_id: 2 },
            ]
        );
        assert_eq!(head.offsets, (0..4).map(|i| (i, i)).collect());
    }

    #[test]
    fn mask_visual_compacts_and_remaps() {
        let layout = MtpLayout::new(tvtv(), MtpOption::MaskVisual).unwrap();
        let head = mtp_head_input(&layout);
        assert_eq!(
            head.slots,
            vec![HeadSlot::Text { token_id: 1 }, HeadSlot::Text { token_id: 2 }]
        );
        assert_eq!(head.offsets, BTreeMap::from([(0, 0), (3, 1)]));
    }

    #[test]
    fn all_text_layouts_agree_across_options() {
        let slots = vec![Slot::Text { token_id: 5 }, Slot::Text { token_id: 6 }];
        let heads: Vec<HeadInput> = [
            MtpOption::PassEmbeddings,
            MtpOption::MaskVisual,
            MtpOption::ImageToken,
        ]
        .iter()
        .map(|opt| mtp_head_input(&MtpLayout::new(slots.clone(), *opt).unwrap()))
        .collect();
        assert_eq!(heads[0].slots, heads[1].slots);
        assert_eq!(heads[1].slots, heads[2].slots);
        assert_eq!(heads[0].offsets, heads[1].offsets);
    }

    #[test]
    fn cross_stage_bytes_only_for_pass_embeddings() {
        let mut slots = vec![Slot::Text { token_id: 0 }];
        slots.extend((0..64).map(|_| Slot::Visual { visual_index: 0 }));
        let t = TopologySpec {
            pp: 2,
            hidden_size: 1024,
            bytes_per_element: 2,
            ..TopologySpec::default()
        };
        let pass = MtpLayout::new(slots.clone(), MtpOption::PassEmbeddings).unwrap();
        assert_eq!(mtp_cross_stage_bytes(&pass, &t), 131072);
        let img = MtpLayout::new(slots.clone(), MtpOption::ImageToken).unwrap();
        assert_eq!(mtp_cross_stage_bytes(&img, &t), 0);
        let single_stage = TopologySpec { pp: 1, ..t };
        assert_eq!(mtp_cross_stage_bytes(&pass, &single_stage), 0);
    }

    #[test]
    fn compat_reports() {
        let img = MtpLayout::new(tvtv(), MtpOption::ImageToken).unwrap();
        assert_eq!(
            partition_compat(&img, 4),
            CompatReport {
                needs_offset_remap: false,
                needs_embedding_shard_alignment: false
            }
        );
        let mask = MtpLayout::new(tvtv(), MtpOption::MaskVisual).unwrap();
        assert!(partition_compat(&mask, 1).needs_offset_remap);
        let pass = MtpLayout::new(tvtv(), MtpOption::PassEmbeddings).unwrap();
        let r = partition_compat(&pass, 1);
        assert!(!r.needs_offset_remap && !r.needs_embedding_shard_alignment);
        assert!(partition_compat(&pass, 2).needs_embedding_shard_alignment);
    }
}
