//! Shared helpers for the benchmark targets.

use rand::Rng;

use rollsim_core::balance::ItemCost;
use rollsim_core::rng::substream;

/// Deterministic random packing instance.
pub fn random_items(n: usize, seed: u64) -> Vec<ItemCost> {
    let mut rng = substream(seed, "bench_items");
    (0..n)
        .map(|i| ItemCost {
            id: i as u64,
            seq_tokens: rng.random_range(64..=8192),
            vit_tokens: rng.random_range(0..=4096),
        })
        .collect()
}
