//! Property tests for the toolkit's structural invariants.

use std::collections::BTreeMap;

use proptest::prelude::*;

use rollsim_core::balance::{pack_joint, BinNorm, ItemCost, PackPolicy};
use rollsim_core::partition::{
    mtp_cross_stage_bytes, mtp_head_input, naive_gather_volume, plan_shards,
    upstream_dispatch_volume, HeadSlot, MtpLayout, MtpOption, Slot, TopologySpec,
};
use rollsim_core::reward::{aggregate, AggregationStrategy};
use rollsim_core::workload::{read_trace, write_trace, ResponseLen, RolloutSample, VisualInput};

fn visual_strategy() -> impl Strategy<Value = VisualInput> {
    (1u64..40, 1u64..40, 1u64..4, 1u64..5)
        .prop_map(|(h, w, f, m)| VisualInput::new(h, w, f, m).unwrap())
}

proptest! {
    #[test]
    fn visual_token_invariants(v in visual_strategy()) {
        let raw = v.raw_tokens();
        let merged = v.merged_tokens();
        prop_assert!(merged <= raw);
        prop_assert!(merged * v.group_size() >= raw);
        prop_assert!(v.padded_h() - v.patches_h() < v.merge());
        prop_assert!(v.padded_w() - v.patches_w() < v.merge());
    }

    #[test]
    fn shards_reconstruct_the_padded_sequence(
        v in visual_strategy(),
        cp in 1usize..5,
        tp in 1usize..5,
    ) {
        let plan = plan_shards(&v, cp, tp);
        let mut cursor = 0;
        for shard in &plan.shards {
            prop_assert_eq!(shard.start, cursor);
            cursor = shard.end;
        }
        prop_assert_eq!(cursor, v.merged_tokens() + plan.padding_tokens);
        let sizes: Vec<u64> = plan.shards.iter().map(|s| s.merged_tokens()).collect();
        let max = sizes.iter().max().unwrap();
        let min = sizes.iter().min().unwrap();
        prop_assert!(max - min <= 1);
        prop_assert!(plan.padding_tokens < (cp * tp) as u64);
    }

    #[test]
    fn upstream_equality_without_padding(
        a in 1u64..12,
        b in 1u64..12,
        f in 1u64..3,
        m in 1u64..4,
        cp in 1usize..5,
        tp in 1usize..5,
    ) {
        // Merge-aligned shape with a merged count divisible by the rank
        // count: no padding anywhere, so the literal relation
        // upstream * (R - 1) == naive must hold.
        let ranks = (cp * tp) as u64;
        let v = VisualInput::new(a * m, b * m * ranks, f, m).unwrap();
        let plan = plan_shards(&v, cp, tp);
        prop_assert_eq!(plan.padding_tokens, 0);
        let topo = TopologySpec { cp, tp, ..TopologySpec::default() };
        let upstream = upstream_dispatch_volume(&plan, &v, &topo).unwrap();
        let naive = naive_gather_volume(&v, &topo);
        prop_assert_eq!(upstream * (ranks - 1), naive);
    }

    #[test]
    fn image_token_preserves_length_and_text(
        slots in prop::collection::vec(
            prop_oneof![
                (0u64..1000).prop_map(|id| Slot::Text { token_id: id }),
                (0usize..4).prop_map(|i| Slot::Visual { visual_index: i }),
            ],
            1..64,
        ),
        pp in 1usize..5,
    ) {
        let layout = MtpLayout::new(slots.clone(), MtpOption::ImageToken).unwrap();
        let head = mtp_head_input(&layout);
        prop_assert_eq!(head.slots.len(), slots.len());
        for (pos, slot) in slots.iter().enumerate() {
            prop_assert_eq!(head.offsets[&pos], pos);
            if let Slot::Text { token_id } = slot {
                prop_assert_eq!(head.slots[pos], HeadSlot::Text { token_id: *token_id });
            }
        }
        // The adopted design never moves embeddings across stages.
        let topo = TopologySpec { pp, ..TopologySpec::default() };
        prop_assert_eq!(mtp_cross_stage_bytes(&layout, &topo), 0);
        let masked = MtpLayout::new(slots, MtpOption::MaskVisual).unwrap();
        prop_assert_eq!(mtp_cross_stage_bytes(&masked, &topo), 0);
    }

    #[test]
    fn packing_partitions_the_item_set(
        costs in prop::collection::vec((1u64..500, 0u64..300), 1..24),
        num_bins in 1usize..6,
        policy_pick in 0usize..3,
    ) {
        let items: Vec<ItemCost> = costs
            .iter()
            .enumerate()
            .map(|(i, &(s, v))| ItemCost { id: i as u64, seq_tokens: s, vit_tokens: v })
            .collect();
        let policy = [
            PackPolicy::FirstFitDecreasing,
            PackPolicy::GreedyMinimax,
            PackPolicy::RoundRobin,
        ][policy_pick];
        let norm = BinNorm::from_items(&items);
        let plan = pack_joint(&items, num_bins, &norm, policy).unwrap();
        // Every item is assigned exactly once and loads add up.
        prop_assert_eq!(plan.assignment.len(), items.len());
        let want: (u64, u64) = items.iter().fold((0, 0), |acc, i| {
            (acc.0 + i.seq_tokens, acc.1 + i.vit_tokens)
        });
        let got: (u64, u64) = plan.loads.iter().fold((0, 0), |acc, &(s, v)| {
            (acc.0 + s, acc.1 + v)
        });
        prop_assert_eq!(want, got);
        // Deterministic replay.
        let again = pack_joint(&items, num_bins, &norm, policy).unwrap();
        prop_assert_eq!(plan, again);
    }

    #[test]
    fn aggregation_is_monotone(
        base in prop::collection::vec(0.0f64..=1.0, 1..6),
        bump_idx in 0usize..6,
        bump in 0.0f64..=1.0,
    ) {
        let names: Vec<String> = (0..base.len()).map(|i| format!("v{i}")).collect();
        let weights: BTreeMap<String, f64> =
            names.iter().map(|n| (n.clone(), 1.0)).collect();
        let scores: BTreeMap<String, f64> =
            names.iter().cloned().zip(base.iter().copied()).collect();
        let mut bumped = scores.clone();
        let idx = bump_idx % base.len();
        let name = &names[idx];
        let raised = (scores[name] + bump).min(1.0);
        bumped.insert(name.clone(), raised);
        for strategy in [
            AggregationStrategy::WeightedSum,
            AggregationStrategy::Min,
            AggregationStrategy::Product,
        ] {
            let before = aggregate(&scores, &weights, &strategy).unwrap();
            let after = aggregate(&bumped, &weights, &strategy).unwrap();
            prop_assert!(after >= before - 1e-12, "{strategy:?}: {after} < {before}");
        }
    }

    #[test]
    fn trace_round_trip_is_identity(
        entries in prop::collection::vec(
            (1u64..5000, 0u64..4, any::<bool>(), 1u64..3000),
            0..20,
        ),
    ) {
        let samples: Vec<RolloutSample> = entries
            .iter()
            .enumerate()
            .map(|(i, &(prompt, n_vis, fixed, resp))| RolloutSample {
                id: i as u64,
                source_tag: format!("tag{}", i % 3),
                group_id: (i / 4) as u64,
                prompt_tokens: prompt,
                response_tokens: if fixed {
                    ResponseLen::Fixed(resp)
                } else {
                    ResponseLen::Dist(rollsim_core::workload::CountDist::Lognormal {
                        mu: 5.0,
                        sigma: 0.5,
                    })
                },
                visuals: (0..n_vis)
                    .map(|k| VisualInput::new(8 + k, 9, 1, 2).unwrap())
                    .collect(),
            })
            .collect();
        let mut buf = Vec::new();
        write_trace(&samples, &mut buf).unwrap();
        let back = read_trace(buf.as_slice()).unwrap();
        prop_assert_eq!(samples, back);
    }
}
