//! Versioned JSON snapshot of a fit: variational factors, model parameters
//! and traces, enough to resume or to run association testing.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vimco_core::vbem::{FitResult, PrecisionMode};
use vimco_core::{GenotypeMatrix, Matrix, ModelParams, PhenotypeMatrix, VariationalState};

use crate::error::{Result, VimcoError};
use crate::qc::QcConfig;

/// Identifier stored in every checkpoint.
pub const CHECKPOINT_FORMAT: &str = "vimco-checkpoint";
/// Current layout version.
pub const CHECKPOINT_VERSION: u32 = 1;

/// Which precision structure produced the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FitMode {
    /// Independent traits (`Θ` diagonal).
    Bvsr,
    /// Joint fit with a full `Θ`.
    Vimco,
}

impl FitMode {
    /// Core precision mode.
    pub fn precision_mode(self) -> PrecisionMode {
        match self {
            FitMode::Bvsr => PrecisionMode::Diagonal,
            FitMode::Vimco => PrecisionMode::Full,
        }
    }

    /// Lowercase label used in files.
    pub fn label(self) -> &'static str {
        match self {
            FitMode::Bvsr => "bvsr",
            FitMode::Vimco => "vimco",
        }
    }
}

/// Data inputs a checkpoint was fitted on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitInputs {
    /// Genotype table or PLINK prefix.
    pub geno: PathBuf,
    /// Phenotype table.
    pub pheno: PathBuf,
    /// QC thresholds applied to the genotypes.
    pub qc: QcConfig,
    /// Whether LD pruning ran after QC.
    pub prune: bool,
}

/// Column-major `rows × cols` block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseBlock {
    /// Row count.
    pub rows: usize,
    /// Column count.
    pub cols: usize,
    /// Entries, column-major.
    pub data: Vec<f64>,
}

impl From<&Matrix> for DenseBlock {
    fn from(m: &Matrix) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.as_slice().to_vec(),
        }
    }
}

impl DenseBlock {
    fn to_matrix(&self, what: &str) -> Result<Matrix> {
        if self.data.len() != self.rows * self.cols {
            return Err(VimcoError::Usage(format!(
                "checkpoint field {what}: {} entries for {}x{}",
                self.data.len(),
                self.rows,
                self.cols
            )));
        }
        Ok(Matrix::from_col_major(
            self.rows,
            self.cols,
            self.data.clone(),
        ))
    }
}

/// Serialized fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    /// Always [`CHECKPOINT_FORMAT`].
    pub format: String,
    /// Layout version.
    pub version: u32,
    /// Mode of the final phase.
    pub mode: FitMode,
    /// Data the fit used.
    pub inputs: FitInputs,
    /// Sample count.
    pub n_samples: usize,
    /// SNPs in model order (after QC).
    pub snp_ids: Vec<String>,
    /// Traits in model order.
    pub trait_ids: Vec<String>,
    /// `μ`, `p × K`.
    pub mu: DenseBlock,
    /// `s²`, `p × K`.
    pub s2: DenseBlock,
    /// `α`, `p × K`.
    pub alpha: DenseBlock,
    /// `a_k`.
    pub inclusion_probs: Vec<f64>,
    /// `σ²_βk`.
    pub slab_vars: Vec<f64>,
    /// `Θ`, `K × K`.
    pub precision: DenseBlock,
    /// ELBO after every iteration of the final phase.
    pub elbo_trace: Vec<f64>,
    /// ELBO at the start and after every E and M step of the final phase.
    pub step_trace: Vec<f64>,
    /// Whether the final phase met its tolerance.
    pub converged: bool,
    /// Iterations of the final phase.
    pub n_iters: usize,
}

impl Checkpoint {
    /// Captures a fit.
    pub fn from_fit(
        fit: &FitResult,
        mode: FitMode,
        inputs: FitInputs,
        snp_ids: Vec<String>,
        trait_ids: Vec<String>,
    ) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            mode,
            inputs,
            n_samples: fit.state.residuals().nrows(),
            snp_ids,
            trait_ids,
            mu: fit.state.mu().into(),
            s2: fit.state.s2().into(),
            alpha: fit.state.alpha().into(),
            inclusion_probs: fit.params.inclusion_probs().to_vec(),
            slab_vars: fit.params.slab_vars().to_vec(),
            precision: fit.params.precision().into(),
            elbo_trace: fit.elbo_trace.clone(),
            step_trace: fit.step_trace.clone(),
            converged: fit.converged,
            n_iters: fit.n_iters,
        }
    }

    /// `α` as a matrix.
    pub fn alpha_matrix(&self) -> Result<Matrix> {
        self.alpha.to_matrix("alpha")
    }

    /// Model parameters.
    pub fn params(&self) -> Result<ModelParams> {
        Ok(ModelParams::new(
            self.inclusion_probs.clone(),
            self.slab_vars.clone(),
            self.precision.to_matrix("precision")?,
        )?)
    }

    /// Rebuilds the variational state (and its residual cache) on data.
    pub fn state(
        &self,
        geno: &GenotypeMatrix,
        pheno: &PhenotypeMatrix,
    ) -> Result<VariationalState> {
        if geno.snp_ids() != self.snp_ids.as_slice() {
            return Err(VimcoError::Usage(
                "checkpoint SNPs do not match the genotype data after QC".into(),
            ));
        }
        if pheno.trait_ids() != self.trait_ids.as_slice() {
            return Err(VimcoError::Usage(
                "checkpoint traits do not match the phenotype table".into(),
            ));
        }
        Ok(VariationalState::from_parts(
            self.mu.to_matrix("mu")?,
            self.s2.to_matrix("s2")?,
            self.alpha.to_matrix("alpha")?,
            geno,
            pheno,
        )?)
    }

    /// Last recorded ELBO.
    pub fn last_elbo(&self) -> Option<f64> {
        self.step_trace.last().copied()
    }

    /// Writes pretty-printed JSON.
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        fs::write(path, text + "\n").map_err(|e| VimcoError::io(path, e))
    }

    /// Reads and version-checks a checkpoint.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| VimcoError::io(path, e))?;
        let json_err = |message: String| VimcoError::Json {
            path: path.to_path_buf(),
            message,
        };
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| json_err(e.to_string()))?;
        if value.get("format").and_then(|f| f.as_str()) != Some(CHECKPOINT_FORMAT) {
            return Err(json_err("not a vimco checkpoint".into()));
        }
        match value.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == CHECKPOINT_VERSION as u64 => {}
            Some(v) => {
                return Err(json_err(format!(
                    "checkpoint version {v} is not supported (expected {CHECKPOINT_VERSION})"
                )))
            }
            None => return Err(json_err("checkpoint has no version".into())),
        }
        serde_json::from_value(value).map_err(|e| json_err(e.to_string()))
    }
}
