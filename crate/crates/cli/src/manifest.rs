use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::args::Command;
use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "run_manifest.json";
pub const TOOL: &str = "swbce";

/// Record written next to every output set. `command` holds the fully
/// resolved arguments (including the output directory), so replaying it
/// reproduces the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    /// Library-level configuration derived from the arguments.
    pub config: Value,
    pub inputs: Vec<String>,
    /// Output paths relative to the run directory, sorted.
    pub outputs: Vec<String>,
    /// Subcommand-specific extras, e.g. the gradient rescale parameters.
    pub extra: Value,
    pub threads: Option<usize>,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn parse(bytes: &[u8]) -> CliResult<Self> {
        let m: RunManifest = serde_json::from_slice(bytes).map_err(|e| CliError::Manifest(e.to_string()))?;
        if m.tool != TOOL {
            return Err(CliError::Manifest(format!("written by '{}', not {TOOL}", m.tool)));
        }
        Ok(m)
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&bytes)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, self.to_json()).map_err(|e| CliError::io(&path, e))
    }
}
