//! Run manifests: the resolved configuration of a command plus digests of
//! everything it wrote, so a run can be replayed and checked byte for byte.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, VimcoError};

/// Current manifest schema.
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
/// File name used inside output directories.
pub const MANIFEST_FILE: &str = "manifest.json";

/// One written file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Name relative to the output directory.
    pub name: String,
    /// Size in bytes.
    pub bytes: u64,
    /// Lowercase hex SHA-256.
    pub sha256: String,
}

/// Manifest document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// Schema version.
    pub schema_version: u32,
    /// Producing tool.
    pub tool: String,
    /// Tool version.
    pub tool_version: String,
    /// Subcommand.
    pub command: String,
    /// Fully resolved arguments of the subcommand.
    pub config: serde_json::Value,
    /// Outputs in write order.
    pub outputs: Vec<OutputFile>,
}

/// Lowercase hex SHA-256 of a file.
pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| VimcoError::io(path, e))?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

impl Manifest {
    /// Describes `outputs` (file names inside `dir`) for `command`.
    pub fn describe<C: Serialize>(
        command: &str,
        config: &C,
        dir: &Path,
        outputs: &[&str],
    ) -> Result<Self> {
        let outputs = outputs
            .iter()
            .map(|name| {
                let path = dir.join(name);
                let bytes = fs::metadata(&path)
                    .map_err(|e| VimcoError::io(&path, e))?
                    .len();
                Ok(OutputFile {
                    name: (*name).to_owned(),
                    bytes,
                    sha256: sha256_file(&path)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            schema_version: MANIFEST_SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME").into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: serde_json::to_value(config).expect("configs serialize"),
            outputs,
        })
    }

    /// Writes `dir/manifest.json`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| VimcoError::io(&path, e))
    }

    /// Reads a manifest and checks its schema version.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| VimcoError::io(path, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| VimcoError::Json {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(VimcoError::Json {
                path: path.to_path_buf(),
                message: format!(
                    "manifest schema {} is not supported (expected {MANIFEST_SCHEMA_VERSION})",
                    manifest.schema_version
                ),
            });
        }
        Ok(manifest)
    }

    /// Decodes the stored configuration for `command`.
    pub fn config_for<C: for<'de> Deserialize<'de>>(&self, command: &str) -> Result<C> {
        if self.command != command {
            return Err(VimcoError::Usage(format!(
                "manifest records a {} run, not {command}",
                self.command
            )));
        }
        serde_json::from_value(self.config.clone())
            .map_err(|e| VimcoError::Usage(format!("manifest config: {e}")))
    }
}
