use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use rollsim_core::gym::{expand_trajectory, TaskSpec, Trajectory};
use rollsim_core::reward::{DurationDist, ScoreFn, ScoreSource, VerifierKind, VerifierSpec};
use rollsim_core::workload::{gen_workload, WorkloadSpec};
use rollsim_core::{
    simulate_iteration, AbortCache, AggregationStrategy, Policy, Resources, RewardConfig,
};

fn reward() -> RewardConfig {
    RewardConfig {
        verifiers: vec![
            VerifierSpec {
                name: "rule".into(),
                kind: VerifierKind::Rule {
                    latency_sec: 0.02,
                    score_fn: ScoreFn::PassRate { p: 0.8 },
                },
                weight: 1.0,
            },
            VerifierSpec {
                name: "judge".into(),
                kind: VerifierKind::Judge {
                    latency: DurationDist::Lognormal { mu: 0.0, sigma: 0.5 },
                    score: ScoreSource::Bernoulli { p: 0.7 },
                },
                weight: 2.0,
            },
        ],
        aggregation: AggregationStrategy::WeightedSum,
        success_threshold: 0.5,
        pass_ks: vec![1],
    }
}

fn trajectories(n: u64) -> Vec<Trajectory> {
    let spec = WorkloadSpec {
        num_samples: n,
        group_size: 4,
        seed: 9,
        ..WorkloadSpec::default()
    };
    gen_workload(&spec)
        .unwrap()
        .iter()
        .map(|s| expand_trajectory(s, &TaskSpec::SingleStep, 9).unwrap())
        .collect()
}

fn bench_simulate(c: &mut Criterion) {
    let resources = Resources::default();
    let reward = reward();
    let mut group = c.benchmark_group("simulate_iteration");
    group.sample_size(20);
    for &n in &[64u64, 512, 2048] {
        let trajs = trajectories(n);
        group.bench_with_input(BenchmarkId::new("overlapped", n), &trajs, |b, trajs| {
            b.iter(|| {
                simulate_iteration(
                    black_box(trajs),
                    &resources,
                    &Policy::overlapped("o"),
                    &reward,
                    9,
                    &AbortCache::default(),
                )
                .unwrap()
            });
        });
    }
    group.finish();
}

criterion_group!(benches, bench_simulate);
criterion_main!(benches);
