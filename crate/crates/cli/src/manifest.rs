//! `manifest.toml`: written first into every output directory.
//!
//! ```toml
//! command = "optimize"            # optimize | compare | validate
//! config_path = "runs/base.toml"  # absent when defaults were used
//! track = "synthetic_circuit"     # fixture name or file path
//! transmission = "mgt3"
//! tool_version = "0.1.0"
//! timestamp = 1760000000          # Unix seconds
//! output_dir = "out/mgt3"
//!
//! [arguments]                     # command flags, as resolved
//! step = 4.0
//! design_search = true
//!
//! [parameters]                    # full configuration snapshot
//! ...
//! ```
//!
//! `lapopt rerun <manifest> --out <dir>` repeats the run from the manifest
//! alone; it never reads the original config file.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use lapopt_core::Config;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.toml";

/// Flags of the recorded command after defaults were applied.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Arguments {
    pub step: Option<f64>,
    pub design_search: bool,
    pub steps: Vec<usize>,
    pub section: Option<String>,
    pub runs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<String>,
    pub track: Option<String>,
    pub transmission: Option<String>,
    pub tool_version: String,
    pub timestamp: u64,
    pub output_dir: String,
    pub arguments: Arguments,
    pub parameters: Config,
}

impl RunManifest {
    pub fn new(command: &str, config_path: Option<&Path>, parameters: &Config, out: &Path) -> Self {
        RunManifest {
            command: command.to_string(),
            config_path: config_path.map(|p| p.display().to_string()),
            track: None,
            transmission: None,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            output_dir: out.display().to_string(),
            arguments: Arguments::default(),
            parameters: parameters.clone(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        std::fs::write(dir.join(MANIFEST_FILE), self.to_toml())?;
        Ok(())
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let m: RunManifest = toml::from_str(&text)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        m.parameters.validate()?;
        Ok(m)
    }

    /// Manifest of a finished run directory.
    pub fn load_dir(dir: &Path) -> CliResult<Self> {
        let path = dir.join(MANIFEST_FILE);
        if !path.is_file() {
            return Err(CliError::Input(format!(
                "{}: not a run directory (no {MANIFEST_FILE})",
                dir.display()
            )));
        }
        Self::load(&path)
    }
}
