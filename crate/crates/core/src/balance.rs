//! Joint bin-packing over sequence tokens and ViT tokens, plus DP-group
//! balancing.
//!
//! Bins are capacity-free: the objective being minimized is the minimax of
//! normalized per-dimension loads, `max over bins of max(seq/seq_norm,
//! vit/vit_norm)`. A bounded brute-force solver provides the optimal
//! reference for testing the heuristics. All tie-breaking is by ascending
//! bin index, then ascending item id, so plans are reproducible across runs
//! and platforms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{dispatch_from_moves, DispatchPlan};

/// Cost of one packable item in both balanced dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemCost {
    pub id: u64,
    pub seq_tokens: u64,
    /// Merged ViT tokens.
    pub vit_tokens: u64,
}

/// Per-dimension normalizers; loads are compared as `load / norm`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinNorm {
    pub seq_norm: f64,
    pub vit_norm: f64,
}

impl BinNorm {
    pub fn new(seq_norm: f64, vit_norm: f64) -> Result<Self> {
        if seq_norm <= 0.0 || vit_norm <= 0.0 {
            return Err(Error::config("norm", "normalizers must be > 0"));
        }
        Ok(BinNorm { seq_norm, vit_norm })
    }

    /// Default normalizers: the maximum item value per dimension, with a
    /// floor of one so an all-zero dimension stays well defined.
    pub fn from_items(items: &[ItemCost]) -> Self {
        let seq = items.iter().map(|i| i.seq_tokens).max().unwrap_or(1).max(1);
        let vit = items.iter().map(|i| i.vit_tokens).max().unwrap_or(1).max(1);
        BinNorm {
            seq_norm: seq as f64,
            vit_norm: vit as f64,
        }
    }

    fn load_key(&self, seq: u64, vit: u64) -> f64 {
        (seq as f64 / self.seq_norm).max(vit as f64 / self.vit_norm)
    }
}

/// Packing heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PackPolicy {
    /// Sort by descending normalized size, place into the currently
    /// least-loaded bin.
    FirstFitDecreasing,
    /// Sort by descending normalized size, place into the bin that
    /// minimizes the resulting global objective.
    GreedyMinimax,
    /// Assign item `i` (input order) to bin `i mod num_bins`.
    RoundRobin,
}

/// A complete assignment of items to bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackPlan {
    pub num_bins: usize,
    /// Item id -> bin index.
    pub assignment: BTreeMap<u64, usize>,
    /// Per-bin `(seq, vit)` load.
    pub loads: Vec<(u64, u64)>,
    /// `max over bins of max(seq/seq_norm, vit/vit_norm)`.
    pub objective: f64,
}

impl PackPlan {
    fn from_assignment(
        items: &[ItemCost],
        bins: &[usize],
        num_bins: usize,
        norm: &BinNorm,
    ) -> Self {
        let mut loads = vec![(0u64, 0u64); num_bins];
        let mut assignment = BTreeMap::new();
        for (item, &bin) in items.iter().zip(bins) {
            loads[bin].0 += item.seq_tokens;
            loads[bin].1 += item.vit_tokens;
            assignment.insert(item.id, bin);
        }
        let objective = loads
            .iter()
            .map(|&(s, v)| norm.load_key(s, v))
            .fold(0.0, f64::max);
        PackPlan {
            num_bins,
            assignment,
            loads,
            objective,
        }
    }
}

fn sorted_decreasing(items: &[ItemCost], norm: &BinNorm) -> Vec<ItemCost> {
    let mut sorted = items.to_vec();
    sorted.sort_by(|a, b| {
        let ka = norm.load_key(a.seq_tokens, a.vit_tokens);
        let kb = norm.load_key(b.seq_tokens, b.vit_tokens);
        kb.partial_cmp(&ka)
            .expect("finite keys")
            .then(a.id.cmp(&b.id))
    });
    sorted
}

/// Pack items into `num_bins` bins under the given policy.
pub fn pack_joint(
    items: &[ItemCost],
    num_bins: usize,
    norm: &BinNorm,
    policy: PackPolicy,
) -> Result<PackPlan> {
    if num_bins == 0 {
        return Err(Error::Argument("num_bins must be >= 1".into()));
    }
    if items.is_empty() {
        return Err(Error::Argument("items must not be empty".into()));
    }
    if items.iter().any(|i| i.seq_tokens == 0 && i.vit_tokens == 0) {
        return Err(Error::Argument("items must have a nonzero dimension".into()));
    }
    let mut ids = items.iter().map(|i| i.id).collect::<Vec<_>>();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != items.len() {
        return Err(Error::Argument("duplicate item ids".into()));
    }

    match policy {
        PackPolicy::RoundRobin => {
            let bins: Vec<usize> = (0..items.len()).map(|i| i % num_bins).collect();
            Ok(PackPlan::from_assignment(items, &bins, num_bins, norm))
        }
        PackPolicy::FirstFitDecreasing => {
            let sorted = sorted_decreasing(items, norm);
            let mut loads = vec![(0u64, 0u64); num_bins];
            let mut bins = Vec::with_capacity(sorted.len());
            for item in &sorted {
                let best = (0..num_bins)
                    .min_by(|&a, &b| {
                        norm.load_key(loads[a].0, loads[a].1)
                            .partial_cmp(&norm.load_key(loads[b].0, loads[b].1))
                            .expect("finite keys")
                    })
                    .expect("num_bins >= 1");
                loads[best].0 += item.seq_tokens;
                loads[best].1 += item.vit_tokens;
                bins.push(best);
            }
            Ok(PackPlan::from_assignment(&sorted, &bins, num_bins, norm))
        }
        PackPolicy::GreedyMinimax => {
            let sorted = sorted_decreasing(items, norm);
            let mut loads = vec![(0u64, 0u64); num_bins];
            let mut bins = Vec::with_capacity(sorted.len());
            for item in &sorted {
                let mut best_bin = 0;
                let mut best_obj = f64::INFINITY;
                for bin in 0..num_bins {
                    let obj = loads
                        .iter()
                        .enumerate()
                        .map(|(b, &(s, v))| {
                            if b == bin {
                                norm.load_key(s + item.seq_tokens, v + item.vit_tokens)
                            } else {
                                norm.load_key(s, v)
                            }
                        })
                        .fold(0.0, f64::max);
                    if obj < best_obj {
                        best_obj = obj;
                        best_bin = bin;
                    }
                }
                loads[best_bin].0 += item.seq_tokens;
                loads[best_bin].1 += item.vit_tokens;
                bins.push(best_bin);
            }
            Ok(PackPlan::from_assignment(&sorted, &bins, num_bins, norm))
        }
    }
}

const BRUTE_FORCE_LIMIT: u64 = 1 << 24;

/// Exhaustive optimal packing, limited to `num_bins^items <= 2^24`
/// assignments. Among optima, returns the lexicographically smallest
/// assignment vector (in input item order).
pub fn brute_force_pack(items: &[ItemCost], num_bins: usize, norm: &BinNorm) -> Result<PackPlan> {
    if num_bins == 0 {
        return Err(Error::Argument("num_bins must be >= 1".into()));
    }
    if items.is_empty() {
        return Err(Error::Argument("items must not be empty".into()));
    }
    let mut space = 1u64;
    for _ in 0..items.len() {
        space = space.saturating_mul(num_bins as u64);
        if space > BRUTE_FORCE_LIMIT {
            return Err(Error::TooLarge(format!(
                "{num_bins}^{} assignments exceed 2^24",
                items.len()
            )));
        }
    }

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut current = vec![0usize; items.len()];
    let mut loads = vec![(0u64, 0u64); num_bins];
    // Depth-first in lexicographic order; strict improvement keeps the
    // lexicographically smallest optimum.
    fn recurse(
        depth: usize,
        items: &[ItemCost],
        num_bins: usize,
        norm: &BinNorm,
        current: &mut Vec<usize>,
        loads: &mut Vec<(u64, u64)>,
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        if depth == items.len() {
            let obj = loads
                .iter()
                .map(|&(s, v)| norm.load_key(s, v))
                .fold(0.0, f64::max);
            if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                *best = Some((obj, current.clone()));
            }
            return;
        }
        for bin in 0..num_bins {
            current[depth] = bin;
            loads[bin].0 += items[depth].seq_tokens;
            loads[bin].1 += items[depth].vit_tokens;
            recurse(depth + 1, items, num_bins, norm, current, loads, best);
            loads[bin].0 -= items[depth].seq_tokens;
            loads[bin].1 -= items[depth].vit_tokens;
        }
    }
    recurse(0, items, num_bins, norm, &mut current, &mut loads, &mut best);
    let (_, bins) = best.expect("non-empty search space");
    Ok(PackPlan::from_assignment(items, &bins, num_bins, norm))
}

/// Per-dimension imbalance of a plan: max bin load over mean bin load.
/// A dimension with zero total load reports 1.0.
pub fn imbalance(plan: &PackPlan) -> (f64, f64) {
    let ratio = |select: fn(&(u64, u64)) -> u64| -> f64 {
        let total: u64 = plan.loads.iter().map(select).sum();
        if total == 0 {
            return 1.0;
        }
        let mean = total as f64 / plan.num_bins as f64;
        let max = plan.loads.iter().map(select).max().unwrap_or(0) as f64;
        max / mean
    };
    (ratio(|l| l.0), ratio(|l| l.1))
}

/// Balance trajectory loads over `dp` groups, then plan the all-to-all
/// moving each trajectory's payload from its producing rank to its
/// assigned rank. Payload bytes are `seq_tokens * bytes_per_token`.
pub fn balance_dp(
    loads: &[ItemCost],
    dp: usize,
    producers: &[usize],
    bytes_per_token: u64,
) -> Result<(PackPlan, DispatchPlan)> {
    if dp == 0 {
        return Err(Error::Argument("dp must be >= 1".into()));
    }
    if producers.len() != loads.len() {
        return Err(Error::Validation(format!(
            "{} loads but {} producer assignments",
            loads.len(),
            producers.len()
        )));
    }
    if loads.is_empty() {
        return Ok((
            PackPlan {
                num_bins: dp,
                assignment: BTreeMap::new(),
                loads: vec![(0, 0); dp],
                objective: 0.0,
            },
            dispatch_from_moves(std::iter::empty()),
        ));
    }
    let norm = BinNorm::from_items(loads);
    let plan = pack_joint(loads, dp, &norm, PackPolicy::GreedyMinimax)?;
    let dispatch = dispatch_from_moves(loads.iter().zip(producers).map(|(item, &src)| {
        let dst = plan.assignment[&item.id];
        (src, dst, item.seq_tokens * bytes_per_token)
    }));
    Ok((plan, dispatch))
}
