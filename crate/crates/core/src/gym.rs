//! Environment abstraction: a sample plus a task spec expands into a chain
//! of dependent inference requests.
//!
//! Environments here are scripted stochastic processes: observations are
//! token counts, not content, which is all the pipeline engine needs to
//! reproduce load and dependency structure. Expansion is deterministic per
//! `(sample, task, seed)`; each trajectory draws from its own substream
//! keyed by the sample id, so adding samples never perturbs existing ones.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream_indexed;
use crate::workload::{ResponseLen, RolloutSample, VisualInput};

/// Task shape: one-shot, or an episode of up to `max_steps` exchanges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskSpec {
    SingleStep,
    MultiStep {
        max_steps: u32,
        /// Tokens added to the context by each environment observation.
        obs_tokens: u64,
        /// Probability that a step's observation carries an image.
        obs_image_prob: f64,
        /// Probability that the episode ends after a step.
        term_prob: f64,
        /// Shape used for image observations.
        obs_visual: Option<VisualInput>,
    },
}

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            TaskSpec::SingleStep => Ok(()),
            TaskSpec::MultiStep {
                max_steps,
                obs_image_prob,
                term_prob,
                ..
            } => {
                if *max_steps == 0 {
                    return Err(Error::config("task.max_steps", "must be >= 1"));
                }
                for (name, p) in [
                    ("task.obs_image_prob", obs_image_prob),
                    ("task.term_prob", term_prob),
                ] {
                    if !(0.0..=1.0).contains(p) {
                        return Err(Error::config(name, "must be in [0, 1]"));
                    }
                }
                Ok(())
            }
        }
    }
}

/// One inference call within a trajectory. Request `k` depends on the
/// completion of request `k - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceRequest {
    pub step_index: u32,
    /// Full context to prefill: prompt plus all prior responses and
    /// observations.
    pub context_tokens: u64,
    /// Visuals introduced at this step (prompt visuals at step 0).
    pub new_visuals: Vec<VisualInput>,
    pub expected_response_tokens: u64,
}

/// A chain of dependent inference requests for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub sample_id: u64,
    pub requests: Vec<InferenceRequest>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }
}

/// Expand a sample into its request chain. Deterministic per
/// `(sample, task, seed)`.
pub fn expand_trajectory(sample: &RolloutSample, task: &TaskSpec, seed: u64) -> Result<Trajectory> {
    task.validate()?;
    if sample.prompt_tokens == 0 {
        return Err(Error::Validation(format!(
            "sample {} has an empty prompt",
            sample.id
        )));
    }
    let mut rng = substream_indexed(seed, "gym", sample.id);
    let resolve_response = |rng: &mut rand_chacha::ChaCha8Rng| match &sample.response_tokens {
        ResponseLen::Fixed(v) => (*v).max(1),
        ResponseLen::Dist(d) => d.sample(rng, 1),
    };

    let mut requests = Vec::new();
    let mut context = sample.prompt_tokens;
    let first_response = resolve_response(&mut rng);
    requests.push(InferenceRequest {
        step_index: 0,
        context_tokens: context,
        new_visuals: sample.visuals.clone(),
        expected_response_tokens: first_response,
    });

    if let TaskSpec::MultiStep {
        max_steps,
        obs_tokens,
        obs_image_prob,
        term_prob,
        obs_visual,
    } = task
    {
        for step in 1..*max_steps {
            // Episode termination is decided after each completed step.
            if rng.random::<f64>() < *term_prob {
                break;
            }
            let prev = requests.last().expect("at least the first request");
            context = prev.context_tokens + prev.expected_response_tokens + obs_tokens;
            let mut new_visuals = Vec::new();
            if rng.random::<f64>() < *obs_image_prob {
                if let Some(v) = obs_visual {
                    new_visuals.push(*v);
                }
            }
            let response = resolve_response(&mut rng);
            requests.push(InferenceRequest {
                step_index: step,
                context_tokens: context,
                new_visuals,
                expected_response_tokens: response,
            });
        }
    }

    Ok(Trajectory {
        sample_id: sample.id,
        requests,
    })
}

/// Total load of a trajectory: `(seq_tokens, vit_tokens)`.
///
/// Sequence load sums context plus response per request (each step
/// re-prefills its context); ViT load counts each visual once, at the step
/// that introduces it, in merged tokens.
pub fn trajectory_load(t: &Trajectory) -> (u64, u64) {
    let mut seq = 0;
    let mut vit = 0;
    for r in &t.requests {
        seq += r.context_tokens + r.expected_response_tokens;
        vit += r.new_visuals.iter().map(|v| v.merged_tokens()).sum::<u64>();
    }
    (seq, vit)
}
