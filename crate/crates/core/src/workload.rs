//! Rollout samples, visual inputs and synthetic workload generation.
//!
//! A workload is a list of [`RolloutSample`]s: prompts with attached visual
//! inputs, a data-source tag for per-source metrics, and a rollout group id
//! tying together the parallel responses scored as one pass@k group.
//! Workloads are either generated synthetically from a [`WorkloadSpec`]
//! (heavy-tailed response lengths by default) or read from a line-delimited
//! JSON trace.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream;

/// One visual input as a grid of ViT patches.
///
/// `merge` is the spatial downsample factor: an `merge x merge` block of raw
/// patches collapses into one merged token per frame. Each spatial dimension
/// is padded up to the next multiple of `merge` before merging, so a merged
/// token never straddles a padding boundary and frames are never merged
/// temporally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VisualInputWire", into = "VisualInputWire")]
pub struct VisualInput {
    patches_h: u64,
    patches_w: u64,
    frames: u64,
    merge: u64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VisualInputWire {
    h: u64,
    w: u64,
    frames: u64,
    merge: u64,
}

impl TryFrom<VisualInputWire> for VisualInput {
    type Error = Error;
    fn try_from(w: VisualInputWire) -> Result<Self> {
        VisualInput::new(w.h, w.w, w.frames, w.merge)
    }
}

impl From<VisualInput> for VisualInputWire {
    fn from(v: VisualInput) -> Self {
        VisualInputWire {
            h: v.patches_h,
            w: v.patches_w,
            frames: v.frames,
            merge: v.merge,
        }
    }
}

impl VisualInput {
    pub fn new(patches_h: u64, patches_w: u64, frames: u64, merge: u64) -> Result<Self> {
        for (name, value) in [
            ("patches_h", patches_h),
            ("patches_w", patches_w),
            ("frames", frames),
            ("merge", merge),
        ] {
            if value == 0 {
                return Err(Error::config(name, "must be >= 1"));
            }
        }
        Ok(VisualInput {
            patches_h,
            patches_w,
            frames,
            merge,
        })
    }

    pub fn patches_h(&self) -> u64 {
        self.patches_h
    }

    pub fn patches_w(&self) -> u64 {
        self.patches_w
    }

    pub fn frames(&self) -> u64 {
        self.frames
    }

    pub fn merge(&self) -> u64 {
        self.merge
    }

    /// Raw ViT patch count before merging.
    pub fn raw_tokens(&self) -> u64 {
        self.patches_h * self.patches_w * self.frames
    }

    /// Height after padding up to a multiple of the merge factor.
    pub fn padded_h(&self) -> u64 {
        self.patches_h.div_ceil(self.merge) * self.merge
    }

    /// Width after padding up to a multiple of the merge factor.
    pub fn padded_w(&self) -> u64 {
        self.patches_w.div_ceil(self.merge) * self.merge
    }

    /// Token count entering the language backbone after merging.
    pub fn merged_tokens(&self) -> u64 {
        (self.padded_h() / self.merge) * (self.padded_w() / self.merge) * self.frames
    }

    /// Raw patches per merged token per frame.
    pub fn group_size(&self) -> u64 {
        self.merge * self.merge
    }
}

/// Per-merged-token counts for a visual: `(raw, merged)`.
pub fn vit_token_count(v: &VisualInput) -> (u64, u64) {
    (v.raw_tokens(), v.merged_tokens())
}

/// Response length: resolved up front or carried as a distribution handle
/// that the trajectory expansion resolves from its own seed substream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ResponseLen {
    Fixed(u64),
    Dist(CountDist),
}

/// A non-negative integer-valued distribution.
///
/// The wire form follows the trace schema: `{"dist": name, "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", content = "params", rename_all = "lowercase")]
pub enum CountDist {
    Fixed { value: u64 },
    Uniform { min: u64, max: u64 },
    Lognormal { mu: f64, sigma: f64 },
    Poisson { lambda: f64 },
}

impl CountDist {
    /// Validate parameters, naming `field` in any error.
    pub fn validate(&self, field: &str) -> Result<()> {
        match self {
            CountDist::Fixed { .. } => Ok(()),
            CountDist::Uniform { min, max } => {
                if min > max {
                    Err(Error::config(field, "uniform requires min <= max"))
                } else {
                    Ok(())
                }
            }
            CountDist::Lognormal { mu, sigma } => {
                if !mu.is_finite() || !sigma.is_finite() || *sigma < 0.0 {
                    Err(Error::config(field, "lognormal requires finite mu and sigma >= 0"))
                } else {
                    Ok(())
                }
            }
            CountDist::Poisson { lambda } => {
                if !lambda.is_finite() || *lambda <= 0.0 {
                    Err(Error::config(field, "poisson requires lambda > 0"))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Sample one value, clamped below at `min_value`.
    pub fn sample<R: Rng>(&self, rng: &mut R, min_value: u64) -> u64 {
        let v = match self {
            CountDist::Fixed { value } => *value,
            CountDist::Uniform { min, max } => rng.random_range(*min..=*max),
            CountDist::Lognormal { mu, sigma } => {
                let d = rand_distr::LogNormal::new(*mu, *sigma).expect("validated params");
                d.sample(rng).round().max(0.0) as u64
            }
            CountDist::Poisson { lambda } => {
                let d = rand_distr::Poisson::new(*lambda).expect("validated params");
                d.sample(rng).round().max(0.0) as u64
            }
        };
        v.max(min_value)
    }

    /// Analytic mean of the distribution, ignoring rounding and clamping.
    pub fn mean(&self) -> f64 {
        match self {
            CountDist::Fixed { value } => *value as f64,
            CountDist::Uniform { min, max } => (*min as f64 + *max as f64) / 2.0,
            CountDist::Lognormal { mu, sigma } => (mu + sigma * sigma / 2.0).exp(),
            CountDist::Poisson { lambda } => *lambda,
        }
    }
}

/// One prompt to roll out, with its visual inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolloutSample {
    pub id: u64,
    pub source_tag: String,
    pub group_id: u64,
    pub prompt_tokens: u64,
    pub response_tokens: ResponseLen,
    pub visuals: Vec<VisualInput>,
}

impl RolloutSample {
    /// Merged ViT tokens across all attached visuals.
    pub fn vit_tokens(&self) -> u64 {
        self.visuals.iter().map(|v| v.merged_tokens()).sum()
    }
}

/// Recipe for a synthetic workload.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkloadSpec {
    pub num_samples: u64,
    /// Data-source mixture as `(tag, probability)` pairs; probabilities sum to 1.
    pub mixture: Vec<(String, f64)>,
    pub prompt_dist: CountDist,
    /// Response lengths; lognormal by default to exercise long tails.
    pub response_dist: CountDist,
    pub image_count_dist: CountDist,
    /// Distribution of patch rows and columns (drawn independently).
    pub visual_size_dist: CountDist,
    #[serde(default = "default_frames_dist")]
    pub frames_dist: CountDist,
    #[serde(default = "default_merge")]
    pub merge: u64,
    /// Parallel rollouts per prompt (the `n` of pass@k groups).
    pub group_size: u64,
    pub seed: u64,
}

fn default_frames_dist() -> CountDist {
    CountDist::Fixed { value: 1 }
}

fn default_merge() -> u64 {
    2
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            num_samples: 64,
            mixture: vec![("default".to_string(), 1.0)],
            prompt_dist: CountDist::Uniform { min: 64, max: 1024 },
            response_dist: CountDist::Lognormal { mu: 6.0, sigma: 0.8 },
            image_count_dist: CountDist::Poisson { lambda: 1.5 },
            visual_size_dist: CountDist::Uniform { min: 8, max: 40 },
            frames_dist: default_frames_dist(),
            merge: default_merge(),
            group_size: 1,
            seed: 0,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        if self.mixture.is_empty() {
            return Err(Error::config("mixture", "must name at least one source tag"));
        }
        let total: f64 = self.mixture.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::config(
                "mixture",
                format!("probabilities sum to {total}, expected 1"),
            ));
        }
        if self.mixture.iter().any(|(_, p)| *p < 0.0 || !p.is_finite()) {
            return Err(Error::config("mixture", "probabilities must be finite and >= 0"));
        }
        self.prompt_dist.validate("prompt_dist")?;
        self.response_dist.validate("response_dist")?;
        self.image_count_dist.validate("image_count_dist")?;
        self.visual_size_dist.validate("visual_size_dist")?;
        self.frames_dist.validate("frames_dist")?;
        if self.merge == 0 {
            return Err(Error::config("merge", "must be >= 1"));
        }
        if self.group_size == 0 {
            return Err(Error::config("group_size", "must be >= 1"));
        }
        Ok(())
    }
}

/// Generate a synthetic workload. Pure function of `(spec, spec.seed)`.
///
/// Samples are produced in groups of `spec.group_size`; members of a group
/// share the prompt descriptor (tag, prompt length, visuals) and differ only
/// in their resolved response length. Ids are dense integers in generation
/// order.
pub fn gen_workload(spec: &WorkloadSpec) -> Result<Vec<RolloutSample>> {
    spec.validate()?;
    let mut rng = substream(spec.seed, "workload");
    let mut samples = Vec::with_capacity(spec.num_samples as usize);
    let mut group_id = 0u64;
    while (samples.len() as u64) < spec.num_samples {
        let tag = pick_tag(&spec.mixture, rng.random::<f64>());
        let prompt_tokens = spec.prompt_dist.sample(&mut rng, 1);
        let image_count = spec.image_count_dist.sample(&mut rng, 0);
        let mut visuals = Vec::with_capacity(image_count as usize);
        for _ in 0..image_count {
            let h = spec.visual_size_dist.sample(&mut rng, 1);
            let w = spec.visual_size_dist.sample(&mut rng, 1);
            let frames = spec.frames_dist.sample(&mut rng, 1);
            visuals.push(VisualInput::new(h, w, frames, spec.merge)?);
        }
        let members = spec
            .group_size
            .min(spec.num_samples - samples.len() as u64);
        for _ in 0..members {
            let response = spec.response_dist.sample(&mut rng, 1);
            samples.push(RolloutSample {
                id: samples.len() as u64,
                source_tag: tag.clone(),
                group_id,
                prompt_tokens,
                response_tokens: ResponseLen::Fixed(response),
                visuals: visuals.clone(),
            });
        }
        group_id += 1;
    }
    Ok(samples)
}

fn pick_tag(mixture: &[(String, f64)], draw: f64) -> String {
    let mut acc = 0.0;
    for (tag, p) in mixture {
        acc += p;
        if draw < acc {
            return tag.clone();
        }
    }
    mixture.last().expect("non-empty mixture").0.clone()
}

/// Write one JSON record per line.
pub fn write_trace<W: Write>(samples: &[RolloutSample], mut out: W) -> Result<()> {
    for s in samples {
        serde_json::to_writer(&mut out, s)
            .map_err(|e| Error::Validation(format!("trace encode: {e}")))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Parse a line-delimited trace, enforcing the schema and id uniqueness.
pub fn read_trace<R: BufRead>(input: R) -> Result<Vec<RolloutSample>> {
    let mut samples = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let sample: RolloutSample = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        if sample.prompt_tokens == 0 {
            return Err(Error::Parse {
                line: idx + 1,
                message: "prompt_tokens must be >= 1".to_string(),
            });
        }
        if let ResponseLen::Dist(d) = &sample.response_tokens {
            d.validate("response_tokens").map_err(|e| Error::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
        }
        if !seen.insert(sample.id) {
            return Err(Error::Validation(format!(
                "duplicate sample id {} at line {}",
                sample.id,
                idx + 1
            )));
        }
        samples.push(sample);
    }
    Ok(samples)
}

pub fn save_trace(samples: &[RolloutSample], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_trace(samples, std::io::BufWriter::new(file))
}

pub fn load_trace(path: &Path) -> Result<Vec<RolloutSample>> {
    let file = std::fs::File::open(path)?;
    read_trace(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vis(h: u64, w: u64, f: u64, m: u64) -> VisualInput {
        VisualInput::new(h, w, f, m).unwrap()
    }

    #[test]
    fn token_counts_merge_evenly() {
        assert_eq!(vit_token_count(&vis(16, 16, 1, 2)), (256, 64));
        assert_eq!(vit_token_count(&vis(1, 1, 1, 1)), (1, 1));
    }

    #[test]
    fn token_counts_pad_per_frame() {
        // 15x15 pads to 16x16 per frame: 64 merged tokens per frame.
        assert_eq!(vit_token_count(&vis(15, 15, 2, 2)), (450, 128));
    }

    #[test]
    fn padding_stays_below_one_merge_band() {
        for h in 1..20 {
            for w in 1..20 {
                for m in 1..5 {
                    let v = vis(h, w, 1, m);
                    assert!(v.padded_h() - v.patches_h() < m);
                    assert!(v.padded_w() - v.patches_w() < m);
                    let (raw, merged) = vit_token_count(&v);
                    assert!(merged <= raw);
                    assert!(merged * v.group_size() >= raw);
                }
            }
        }
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(VisualInput::new(0, 4, 1, 1).is_err());
        assert!(VisualInput::new(4, 4, 1, 0).is_err());
    }

    #[test]
    fn gen_empty_workload() {
        let spec = WorkloadSpec {
            num_samples: 0,
            ..WorkloadSpec::default()
        };
        assert!(gen_workload(&spec).unwrap().is_empty());
    }

    #[test]
    fn gen_is_deterministic() {
        let spec = WorkloadSpec {
            num_samples: 50,
            group_size: 4,
            seed: 11,
            ..WorkloadSpec::default()
        };
        assert_eq!(gen_workload(&spec).unwrap(), gen_workload(&spec).unwrap());
    }

    #[test]
    fn groups_share_prompt_descriptor() {
        let spec = WorkloadSpec {
            num_samples: 40,
            group_size: 4,
            seed: 3,
            ..WorkloadSpec::default()
        };
        let samples = gen_workload(&spec).unwrap();
        assert_eq!(samples.len(), 40);
        for chunk in samples.chunks(4) {
            for s in chunk {
                assert_eq!(s.group_id, chunk[0].group_id);
                assert_eq!(s.prompt_tokens, chunk[0].prompt_tokens);
                assert_eq!(s.visuals, chunk[0].visuals);
                assert_eq!(s.source_tag, chunk[0].source_tag);
            }
        }
    }

    #[test]
    fn lognormal_sample_mean_tracks_analytic_mean() {
        // mu chosen so the analytic mean exp(mu + sigma^2/2) is 512.
        let sigma = 0.5f64;
        let mu = 512f64.ln() - sigma * sigma / 2.0;
        let dist = CountDist::Lognormal { mu, sigma };
        assert!((dist.mean() - 512.0).abs() < 1e-9);
        let spec = WorkloadSpec {
            num_samples: 10_000,
            response_dist: dist,
            seed: 9,
            ..WorkloadSpec::default()
        };
        let samples = gen_workload(&spec).unwrap();
        let mean: f64 = samples
            .iter()
            .map(|s| match s.response_tokens {
                ResponseLen::Fixed(v) => v as f64,
                _ => unreachable!("generation resolves lengths"),
            })
            .sum::<f64>()
            / samples.len() as f64;
        assert!(
            (mean - 512.0).abs() / 512.0 < 0.05,
            "sample mean {mean} deviates more than 5% from 512"
        );
    }

    #[test]
    fn mixture_frequencies_converge() {
        let spec = WorkloadSpec {
            num_samples: 10_000,
            mixture: vec![("a".into(), 0.7), ("b".into(), 0.3)],
            seed: 21,
            ..WorkloadSpec::default()
        };
        let samples = gen_workload(&spec).unwrap();
        let a = samples.iter().filter(|s| s.source_tag == "a").count() as f64;
        assert!((a / 10_000.0 - 0.7).abs() < 0.03);
    }

    #[test]
    fn bad_mixture_names_field() {
        let spec = WorkloadSpec {
            mixture: vec![("a".into(), 0.5)],
            ..WorkloadSpec::default()
        };
        match gen_workload(&spec) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "mixture"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn trace_round_trip() {
        let spec = WorkloadSpec {
            num_samples: 100,
            group_size: 4,
            seed: 5,
            ..WorkloadSpec::default()
        };
        let samples = gen_workload(&spec).unwrap();
        let mut buf = Vec::new();
        write_trace(&samples, &mut buf).unwrap();
        let back = read_trace(buf.as_slice()).unwrap();
        assert_eq!(samples, back);
    }

    #[test]
    fn trace_supports_distribution_handles() {
        let line = r#"{"id":0,"source_tag":"t","group_id":0,"prompt_tokens":10,"response_tokens":{"dist":"lognormal","params":{"mu":6.0,"sigma":0.5}},"visuals":[]}"#;
        let samples = read_trace(line.as_bytes()).unwrap();
        assert!(matches!(
            samples[0].response_tokens,
            ResponseLen::Dist(CountDist::Lognormal { .. })
        ));
    }

    #[test]
    fn missing_field_reports_line() {
        let good = r#"{"id":0,"source_tag":"t","group_id":0,"prompt_tokens":10,"response_tokens":5,"visuals":[]}"#;
        let bad = r#"{"id":1,"group_id":0,"prompt_tokens":10,"response_tokens":5,"visuals":[]}"#;
        let input = format!("{good}\n{bad}\n");
        match read_trace(input.as_bytes()) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("source_tag"), "message was: {message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_field_rejected() {
        let line = r#"{"id":0,"source_tag":"t","group_id":0,"prompt_tokens":10,"response_tokens":5,"visuals":[],"extra":1}"#;
        assert!(matches!(
            read_trace(line.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn duplicate_id_rejected() {
        let line = r#"{"id":0,"source_tag":"t","group_id":0,"prompt_tokens":10,"response_tokens":5,"visuals":[]}"#;
        let input = format!("{line}\n{line}\n");
        assert!(matches!(
            read_trace(input.as_bytes()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn empty_trace_is_empty_workload() {
        assert!(read_trace("".as_bytes()).unwrap().is_empty());
    }
}
