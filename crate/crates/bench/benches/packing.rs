use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use rollsim_bench::random_items;
use rollsim_core::balance::{brute_force_pack, pack_joint, BinNorm, PackPolicy};

fn bench_pack_joint(c: &mut Criterion) {
    let mut group = c.benchmark_group("pack_joint");
    for &n in &[64usize, 512, 4096] {
        let items = random_items(n, 42);
        let norm = BinNorm::from_items(&items);
        for (name, policy) in [
            ("greedy_minimax", PackPolicy::GreedyMinimax),
            ("first_fit_decreasing", PackPolicy::FirstFitDecreasing),
            ("round_robin", PackPolicy::RoundRobin),
        ] {
            group.bench_with_input(BenchmarkId::new(name, n), &items, |b, items| {
                b.iter(|| pack_joint(black_box(items), 8, &norm, policy).unwrap());
            });
        }
    }
    group.finish();
}

fn bench_brute_force(c: &mut Criterion) {
    let mut group = c.benchmark_group("brute_force_pack");
    for &n in &[8usize, 10, 12] {
        let items = random_items(n, 7);
        let norm = BinNorm::from_items(&items);
        group.bench_with_input(BenchmarkId::new("bins2", n), &items, |b, items| {
            b.iter(|| brute_force_pack(black_box(items), 2, &norm).unwrap());
        });
    }
    group.finish();
}

criterion_group!(benches, bench_pack_joint, bench_brute_force);
criterion_main!(benches);
