//! TOML run configuration: top-level keys plus one section per subcommand.
//!
//! ```toml
//! threads = 4
//! log_level = "info"
//! output_dir = "runs/sim1"
//!
//! [simulate]
//! n = 500
//! rho_e = 0.8
//!
//! [qc]
//! min_maf = 0.01
//! ```
//!
//! Command-line flags take precedence over the file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::checkpoint::FitMode;
use crate::commands::GenoFormat;
use crate::error::{Result, VimcoError};

/// Environment variable overriding the configured worker count.
pub const THREADS_ENV: &str = "VIMCO_THREADS";

/// Whole configuration file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    /// Worker threads for `bench`.
    pub threads: Option<usize>,
    /// `error`, `warn`, `info`, `debug` or `trace`.
    pub log_level: Option<String>,
    /// Output directory.
    pub output_dir: Option<PathBuf>,
    /// `[simulate]`
    pub simulate: SimulateSection,
    /// `[fit]`
    pub fit: FitSection,
    /// `[qc]`
    pub qc: QcSection,
    /// `[assoc]`
    pub assoc: AssocSection,
    /// `[bench]`
    pub bench: BenchSection,
}

/// `[simulate]` keys.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[allow(missing_docs)]
pub struct SimulateSection {
    pub n: Option<usize>,
    pub p: Option<usize>,
    pub k: Option<usize>,
    pub rho_x: Option<f64>,
    pub rho_e: Option<f64>,
    pub g: Option<f64>,
    pub h2: Option<f64>,
    pub causal_frac: Option<f64>,
    pub maf_min: Option<f64>,
    pub maf_max: Option<f64>,
    pub seed: Option<u64>,
    pub replicate: Option<u64>,
    pub geno_format: Option<GenoFormat>,
}

/// `[fit]` keys.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[allow(missing_docs)]
pub struct FitSection {
    pub geno: Option<PathBuf>,
    pub pheno: Option<PathBuf>,
    pub mode: Option<FitMode>,
    pub single_phase: Option<bool>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub shuffle: Option<bool>,
    pub prune: Option<bool>,
}

/// `[qc]` keys.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[allow(missing_docs)]
pub struct QcSection {
    pub min_maf: Option<f64>,
    pub max_missing_rate: Option<f64>,
    pub prune_r2: Option<f64>,
    pub prune_window: Option<usize>,
}

/// `[assoc]` keys.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[allow(missing_docs)]
pub struct AssocSection {
    pub checkpoint: Option<PathBuf>,
    pub target_fdr: Option<f64>,
}

/// `[bench]` keys.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[allow(missing_docs)]
pub struct BenchSection {
    pub n: Option<usize>,
    pub p: Option<usize>,
    pub k: Option<usize>,
    pub h2: Option<f64>,
    pub causal_frac: Option<f64>,
    pub rho_x: Option<Vec<f64>>,
    pub rho_e: Option<Vec<f64>>,
    pub g: Option<Vec<f64>>,
    pub replicates: Option<u64>,
    pub seed: Option<u64>,
    pub target_fdr: Option<f64>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub block_r2: Option<f64>,
    pub block_window: Option<usize>,
}

impl FileConfig {
    /// Parses a configuration file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| VimcoError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            VimcoError::Usage(msg) => VimcoError::Usage(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Parses configuration text.
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| VimcoError::Usage(e.to_string()))
    }
}

/// Worker count: the flag, else `VIMCO_THREADS`, else the file, else the
/// available parallelism.
pub fn resolve_threads(flag: Option<usize>, file: Option<usize>) -> Result<usize> {
    let env = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| {
            VimcoError::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))
        })?),
        Err(_) => None,
    };
    let threads = flag
        .or(env)
        .or(file)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if threads == 0 {
        return Err(VimcoError::Usage("threads must be at least 1".into()));
    }
    Ok(threads)
}
