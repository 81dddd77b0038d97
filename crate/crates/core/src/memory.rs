//! Closed-form activation-memory model for the vision side, and GPU
//! communication-buffer accounting.
//!
//! The activation model is linear in layer count and token count, with
//! checkpoint-interval retention under recomputation. Offloading processes
//! images one at a time against a fixed staging buffer, which is what
//! breaks the naive linear scaling of peak memory in image count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::workload::VisualInput;

/// Memory model configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemConfig {
    pub act_bytes_per_token_per_layer: u64,
    pub vit_layers: u64,
    pub projector_bytes_per_token: u64,
    pub recompute_vit: bool,
    pub recompute_projector: bool,
    pub offload: bool,
    pub offload_staging_bytes: u64,
    pub checkpoint_interval_layers: u64,
}

impl MemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vit_layers == 0 {
            return Err(Error::config("memory.vit_layers", "must be >= 1"));
        }
        if self.checkpoint_interval_layers == 0
            || self.checkpoint_interval_layers > self.vit_layers
        {
            return Err(Error::config(
                "memory.checkpoint_interval_layers",
                "must be in [1, vit_layers]",
            ));
        }
        Ok(())
    }

    /// The same configuration with recomputation and offloading disabled.
    pub fn naive(&self) -> MemConfig {
        MemConfig {
            recompute_vit: false,
            recompute_projector: false,
            offload: false,
            ..self.clone()
        }
    }

    /// The same configuration with recomputation and offloading enabled.
    pub fn recompute_offload(&self) -> MemConfig {
        MemConfig {
            recompute_vit: true,
            recompute_projector: true,
            offload: true,
            ..self.clone()
        }
    }
}

/// Peak activation bytes for processing `visuals` under `cfg`.
///
/// Per image, the ViT cost is `merged * act_bytes * vit_layers` when all
/// activations are kept, or `merged * act_bytes * (checkpoint_interval +
/// ceil(layers / interval))` when only checkpoints plus the active segment
/// are retained. Without offloading every image is resident at once (the
/// costs sum); with offloading images are processed one at a time against
/// the staging buffer (the max image governs). The projector term sums over
/// images unless projector recomputation keeps only the largest alive.
pub fn peak_activation(visuals: &[VisualInput], cfg: &MemConfig) -> Result<u64> {
    cfg.validate()?;
    if visuals.is_empty() {
        return Ok(0);
    }
    let per_image_vit = |merged: u64| -> u64 {
        if cfg.recompute_vit {
            let segment = merged * cfg.act_bytes_per_token_per_layer * cfg.checkpoint_interval_layers;
            let checkpoints = cfg.vit_layers.div_ceil(cfg.checkpoint_interval_layers)
                * merged
                * cfg.act_bytes_per_token_per_layer;
            segment + checkpoints
        } else {
            merged * cfg.act_bytes_per_token_per_layer * cfg.vit_layers
        }
    };
    let merged: Vec<u64> = visuals.iter().map(|v| v.merged_tokens()).collect();
    let vit_bytes = if cfg.offload {
        merged.iter().map(|&m| per_image_vit(m)).max().unwrap_or(0) + cfg.offload_staging_bytes
    } else {
        merged.iter().map(|&m| per_image_vit(m)).sum()
    };
    let projector_bytes = if cfg.recompute_projector {
        merged.iter().max().copied().unwrap_or(0) * cfg.projector_bytes_per_token
    } else {
        merged.iter().sum::<u64>() * cfg.projector_bytes_per_token
    };
    Ok(vit_bytes + projector_bytes)
}

/// Which communication path a runtime object lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BufferPath {
    GpuComm,
    HostComm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferEntry {
    pub name: String,
    pub bytes: u64,
    pub path: BufferPath,
}

/// Registry of named communication buffers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BufferRegistry {
    entries: Vec<BufferEntry>,
}

impl BufferRegistry {
    pub fn new(entries: Vec<BufferEntry>) -> Result<Self> {
        let mut names: Vec<&str> = entries.iter().map(|e| e.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != entries.len() {
            return Err(Error::Validation("duplicate buffer names".into()));
        }
        Ok(BufferRegistry { entries })
    }

    pub fn entries(&self) -> &[BufferEntry] {
        &self.entries
    }

    /// Move the named entry to `path`.
    pub fn migrate(&mut self, name: &str, path: BufferPath) -> Result<()> {
        let entry = self
            .entries
            .iter_mut()
            .find(|e| e.name == name)
            .ok_or_else(|| Error::Lookup(name.to_string()))?;
        entry.path = path;
        Ok(())
    }
}

/// Total bytes by path: `(gpu_bytes, host_bytes)`.
pub fn comm_buffer_bytes(registry: &BufferRegistry) -> (u64, u64) {
    let mut gpu = 0;
    let mut host = 0;
    for e in registry.entries() {
        match e.path {
            BufferPath::GpuComm => gpu += e.bytes,
            BufferPath::HostComm => host += e.bytes,
        }
    }
    (gpu, host)
}
