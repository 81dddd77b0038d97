//! Scenario-driven CLI for the rollsim toolkit: generate workloads, run
//! policy-comparison simulations and sweeps, pack batches, and plan visual
//! partitioning — all emitting byte-stable machine-readable reports.

pub mod commands;
pub mod config;
pub mod output;
pub mod report;

use std::path::Path;

use rollsim_core::error::{Error, Result};
use serde_json::Value;

pub use commands::Format;
pub use config::Scenario;

/// Load a scenario file, applying an optional seed override before
/// parsing so the override also reaches sweep points.
pub fn load_scenario(path: &Path, seed: Option<u64>) -> Result<(Scenario, Value)> {
    let raw = std::fs::read_to_string(path)?;
    let mut value: Value = serde_json::from_str(&raw).map_err(|e| Error::Config {
        field: ".".into(),
        message: e.to_string(),
    })?;
    if let (Some(seed), Some(obj)) = (seed, value.as_object_mut()) {
        obj.insert("seed".into(), serde_json::json!(seed));
    }
    let scenario = Scenario::from_value(value.clone())?;
    Ok((scenario, value))
}
