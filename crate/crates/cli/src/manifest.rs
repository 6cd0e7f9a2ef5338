//! Run manifest written next to the CSV outputs.

use crate::error::{io_err, CliResult};
use qtraj::acceptance::CriterionOutcome;
use serde::Serialize;
use std::path::Path;

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub trajectories: u64,
    pub csv_schema_version: u32,
    pub wall_seconds: f64,
    /// Files written, relative to the output directory.
    pub files: Vec<String>,
    /// Acceptance outcomes; empty unless the command was `validate`.
    pub criteria: Vec<CriterionOutcome>,
    pub success: bool,
}

impl Manifest {
    pub fn write(&self, path: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(io_err(path))
    }
}
