//! Verifier orchestration and reward aggregation.
//!
//! Rule verifiers run locally at the owning request's completion instant;
//! judge verifiers model external scoring services dispatched with a
//! sampled latency. Scores are normalized to `[0, 1]` and combined by a
//! configurable aggregation strategy; per-source metrics report mean reward
//! and the unbiased pass@k estimator per rollout group.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream_indexed;
use crate::workload::RolloutSample;

/// A duration-valued distribution (seconds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", content = "params", rename_all = "lowercase")]
pub enum DurationDist {
    Fixed { sec: f64 },
    Uniform { lo: f64, hi: f64 },
    Lognormal { mu: f64, sigma: f64 },
    Exp { mean_sec: f64 },
}

impl DurationDist {
    pub fn validate(&self, field: &str) -> Result<()> {
        let ok = match self {
            DurationDist::Fixed { sec } => *sec >= 0.0 && sec.is_finite(),
            DurationDist::Uniform { lo, hi } => *lo >= 0.0 && hi >= lo && hi.is_finite(),
            DurationDist::Lognormal { mu, sigma } => mu.is_finite() && *sigma >= 0.0,
            DurationDist::Exp { mean_sec } => *mean_sec > 0.0 && mean_sec.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(field, "invalid duration distribution"))
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            DurationDist::Fixed { sec } => *sec,
            DurationDist::Uniform { lo, hi } => {
                if hi > lo {
                    rng.random_range(*lo..*hi)
                } else {
                    *lo
                }
            }
            DurationDist::Lognormal { mu, sigma } => rand_distr::LogNormal::new(*mu, *sigma)
                .expect("validated params")
                .sample(rng),
            DurationDist::Exp { mean_sec } => rand_distr::Exp::new(1.0 / mean_sec)
                .expect("validated params")
                .sample(rng),
        }
    }
}

/// Deterministic rule score function, keyed by sample id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fn", rename_all = "snake_case")]
pub enum ScoreFn {
    Const { value: f64 },
    /// Binary pass/fail decided by a hash of the sample id; passes with
    /// frequency `p` over the id space.
    PassRate { p: f64 },
}

impl ScoreFn {
    pub fn eval(&self, sample_id: u64) -> f64 {
        match self {
            ScoreFn::Const { value } => value.clamp(0.0, 1.0),
            ScoreFn::PassRate { p } => {
                // Deterministic in the sample id alone, independent of any
                // run seed: the same sample always scores the same.
                let h = substream_indexed(0, "rule_score", sample_id).random::<f64>();
                if h < *p {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Judge score source: a distribution or a lookup table keyed by sample id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum ScoreSource {
    Bernoulli { p: f64 },
    Uniform { lo: f64, hi: f64 },
    Table {
        entries: BTreeMap<u64, f64>,
        #[serde(default)]
        default: f64,
    },
}

impl ScoreSource {
    pub fn sample<R: Rng>(&self, rng: &mut R, sample_id: u64) -> f64 {
        match self {
            ScoreSource::Bernoulli { p } => {
                if rng.random::<f64>() < *p {
                    1.0
                } else {
                    0.0
                }
            }
            ScoreSource::Uniform { lo, hi } => {
                if hi > lo {
                    rng.random_range(*lo..*hi).clamp(0.0, 1.0)
                } else {
                    lo.clamp(0.0, 1.0)
                }
            }
            ScoreSource::Table { entries, default } => {
                entries.get(&sample_id).copied().unwrap_or(*default).clamp(0.0, 1.0)
            }
        }
    }
}

/// Rule verifiers run inline and synchronously; judges are dispatched
/// asynchronously with a latency drawn per (sample, verifier).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VerifierKind {
    Rule {
        latency_sec: f64,
        score_fn: ScoreFn,
    },
    Judge {
        latency: DurationDist,
        score: ScoreSource,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifierSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: VerifierKind,
    pub weight: f64,
}

impl VerifierSpec {
    pub fn validate(&self) -> Result<()> {
        if self.weight < 0.0 || !self.weight.is_finite() {
            return Err(Error::config(
                format!("verifier.{}.weight", self.name),
                "must be finite and >= 0",
            ));
        }
        match &self.kind {
            VerifierKind::Rule { latency_sec, .. } => {
                if *latency_sec < 0.0 || !latency_sec.is_finite() {
                    return Err(Error::config(
                        format!("verifier.{}.latency_sec", self.name),
                        "must be finite and >= 0",
                    ));
                }
            }
            VerifierKind::Judge { latency, .. } => {
                latency.validate(&format!("verifier.{}.latency", self.name))?;
            }
        }
        Ok(())
    }
}

/// Where a verifier task executes relative to the event loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedClass {
    /// Runs at the owning request's completion instant.
    Inline,
    /// Queued to the judge pool.
    Dispatch,
}

/// One planned verifier execution for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifierTask {
    pub verifier: String,
    pub class: SchedClass,
    pub latency_sec: f64,
    pub score: f64,
}

/// Plan the verifier suite for a completed sample.
///
/// Judge latencies and scores are drawn from a substream keyed by
/// `(seed, sample, verifier index)`, so they do not depend on dispatch time
/// or policy — paired policy runs see identical draws.
pub fn plan_verification(
    sample_id: u64,
    specs: &[VerifierSpec],
    seed: u64,
) -> Result<Vec<VerifierTask>> {
    if specs.is_empty() {
        return Err(Error::config("verifiers", "must not be empty"));
    }
    let mut names = BTreeSet::new();
    for spec in specs {
        if !names.insert(spec.name.as_str()) {
            return Err(Error::config(
                "verifiers",
                format!("duplicate verifier name `{}`", spec.name),
            ));
        }
        spec.validate()?;
    }
    let tasks = specs
        .iter()
        .enumerate()
        .map(|(idx, spec)| match &spec.kind {
            VerifierKind::Rule {
                latency_sec,
                score_fn,
            } => VerifierTask {
                verifier: spec.name.clone(),
                class: SchedClass::Inline,
                latency_sec: *latency_sec,
                score: score_fn.eval(sample_id),
            },
            VerifierKind::Judge { latency, score } => {
                let mut rng = substream_indexed(seed, &format!("judge/{idx}"), sample_id);
                let latency_sec = latency.sample(&mut rng);
                let score = score.sample(&mut rng, sample_id);
                VerifierTask {
                    verifier: spec.name.clone(),
                    class: SchedClass::Dispatch,
                    latency_sec,
                    score,
                }
            }
        })
        .collect();
    Ok(tasks)
}

/// Completion time of the whole suite when every task starts at
/// `dispatch_sec` (unlimited judge concurrency).
pub fn ready_time_unlimited(dispatch_sec: f64, tasks: &[VerifierTask]) -> f64 {
    tasks
        .iter()
        .map(|t| dispatch_sec + t.latency_sec)
        .fold(dispatch_sec, f64::max)
}

/// How per-verifier scores combine into one reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum AggregationStrategy {
    /// Weighted mean with weights renormalized to sum to one.
    WeightedSum,
    Min,
    Product,
    /// Reward is zero when the gate verifier scores zero; otherwise the
    /// remaining verifiers aggregate by weighted sum.
    VetoGate { gate: String },
}

impl AggregationStrategy {
    pub fn validate(&self, specs: &[VerifierSpec]) -> Result<()> {
        if let AggregationStrategy::VetoGate { gate } = self {
            if !specs.iter().any(|s| &s.name == gate) {
                return Err(Error::config(
                    "aggregation.gate",
                    format!("gate verifier `{gate}` does not exist"),
                ));
            }
        }
        Ok(())
    }
}

/// Combine scores (each in `[0, 1]`) into one reward in `[0, 1]`.
///
/// `weights` pairs verifier names with their configured weights; every score
/// must have a weight entry.
pub fn aggregate(
    scores: &BTreeMap<String, f64>,
    weights: &BTreeMap<String, f64>,
    strategy: &AggregationStrategy,
) -> Result<f64> {
    let weighted_sum = |names: &mut dyn Iterator<Item = &String>| -> Result<f64> {
        let mut num = 0.0;
        let mut den = 0.0;
        for name in names {
            let s = scores[name];
            let w = *weights
                .get(name)
                .ok_or_else(|| Error::config("weights", format!("no weight for `{name}`")))?;
            num += w * s;
            den += w;
        }
        if den == 0.0 {
            return Err(Error::config(
                "weights",
                "weighted sum requires a positive total weight",
            ));
        }
        Ok(num / den)
    };
    match strategy {
        AggregationStrategy::WeightedSum => weighted_sum(&mut scores.keys()),
        AggregationStrategy::Min => Ok(scores.values().fold(1.0, |a, &b| a.min(b))),
        AggregationStrategy::Product => Ok(scores.values().product()),
        AggregationStrategy::VetoGate { gate } => {
            let gate_score = *scores
                .get(gate)
                .ok_or_else(|| Error::config("aggregation.gate", format!("no score for `{gate}`")))?;
            if gate_score == 0.0 {
                return Ok(0.0);
            }
            weighted_sum(&mut scores.keys().filter(|n| *n != gate))
        }
    }
}

/// Unbiased pass@k estimator: `1 - C(n-c, k) / C(n, k)`.
pub fn pass_at_k(n: u64, c: u64, k: u64) -> Result<f64> {
    if c > n {
        return Err(Error::Argument(format!("c={c} exceeds n={n}")));
    }
    if k == 0 || k > n {
        return Err(Error::Argument(format!("k={k} out of range [1, {n}]")));
    }
    if n - c < k {
        return Ok(1.0);
    }
    // 1 - prod_{i=1..k} (n - c - k + i) / (n - k + i), numerically stable.
    let mut ratio = 1.0f64;
    for i in 1..=k {
        ratio *= (n - c - k + i) as f64 / (n - k + i) as f64;
    }
    Ok(1.0 - ratio)
}

/// Scores and timing of one sample's verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRecord {
    pub sample_id: u64,
    /// Scores by verifier name, each in `[0, 1]`.
    pub scores: BTreeMap<String, f64>,
    /// Per-verifier `(start, finish)` timestamps.
    pub spans: BTreeMap<String, (f64, f64)>,
    pub reward: f64,
}

/// Per-source-tag metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceMetrics {
    pub count: u64,
    pub mean_reward: f64,
    /// pass@k per configured k, averaged over rollout groups.
    pub pass_at: BTreeMap<u64, f64>,
    /// Groups too small for some k, excluded from that k's average.
    pub skipped_groups: u64,
}

/// Aggregate records into per-source metrics.
///
/// pass@k is computed per rollout group (success = reward >= `threshold`)
/// and averaged over the groups within each tag. Groups with fewer than `k`
/// members are excluded from that k and counted in `skipped_groups`.
pub fn source_report(
    records: &[RewardRecord],
    samples: &[RolloutSample],
    ks: &[u64],
    threshold: f64,
) -> Result<BTreeMap<String, SourceMetrics>> {
    let by_id: BTreeMap<u64, &RolloutSample> = samples.iter().map(|s| (s.id, s)).collect();
    // tag -> group -> (n, successes); plus tag -> (count, reward sum).
    let mut groups: BTreeMap<&str, BTreeMap<u64, (u64, u64)>> = BTreeMap::new();
    let mut totals: BTreeMap<&str, (u64, f64)> = BTreeMap::new();
    for r in records {
        let sample = by_id
            .get(&r.sample_id)
            .ok_or_else(|| Error::Validation(format!("record for unknown sample {}", r.sample_id)))?;
        let tag = sample.source_tag.as_str();
        let entry = groups.entry(tag).or_default().entry(sample.group_id).or_insert((0, 0));
        entry.0 += 1;
        if r.reward >= threshold {
            entry.1 += 1;
        }
        let t = totals.entry(tag).or_insert((0, 0.0));
        t.0 += 1;
        t.1 += r.reward;
    }
    let mut out = BTreeMap::new();
    for (tag, tag_groups) in groups {
        let (count, reward_sum) = totals[tag];
        let mut pass_at = BTreeMap::new();
        let mut skipped = 0u64;
        for &k in ks {
            let mut acc = 0.0;
            let mut used = 0u64;
            for &(n, c) in tag_groups.values() {
                if n < k {
                    skipped += 1;
                    continue;
                }
                acc += pass_at_k(n, c, k)?;
                used += 1;
            }
            if used > 0 {
                pass_at.insert(k, acc / used as f64);
            }
        }
        out.insert(
            tag.to_string(),
            SourceMetrics {
                count,
                mean_reward: reward_sum / count as f64,
                pass_at,
                skipped_groups: skipped,
            },
        );
    }
    Ok(out)
}
