//! SNP quality control: allele-frequency and call-rate filters and a
//! windowed LD prune.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VimcoError};
use crate::genotypes::{RawGenotypes, MISSING};

/// Filter thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QcConfig {
    /// SNPs with MAF below this are dropped.
    pub min_maf: f64,
    /// SNPs with a larger fraction of missing calls are dropped.
    pub max_missing_rate: f64,
    /// Pairs with `r²` above this are pruned.
    pub prune_r2: f64,
    /// Pairs at most this many positions apart are compared.
    pub prune_window: usize,
}

impl Default for QcConfig {
    fn default() -> Self {
        Self {
            min_maf: 0.01,
            max_missing_rate: 0.01,
            prune_r2: 0.5,
            prune_window: 100,
        }
    }
}

impl QcConfig {
    /// Checks every threshold lies in its domain.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.min_maf) {
            return Err(VimcoError::Usage(format!(
                "min_maf must be in [0, 0.5], got {}",
                self.min_maf
            )));
        }
        if !(0.0..=1.0).contains(&self.max_missing_rate) {
            return Err(VimcoError::Usage(format!(
                "max_missing_rate must be in [0, 1], got {}",
                self.max_missing_rate
            )));
        }
        if !(self.prune_r2 > 0.0 && self.prune_r2 < 1.0) {
            return Err(VimcoError::Usage(format!(
                "prune_r2 must be in (0, 1), got {}",
                self.prune_r2
            )));
        }
        if self.prune_window == 0 {
            return Err(VimcoError::Usage("prune_window must be at least 1".into()));
        }
        Ok(())
    }
}

/// Counts of SNPs removed by each filter. A SNP failing both is counted
/// under missingness only.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QcReport {
    /// SNPs examined.
    pub input: usize,
    /// Dropped for too many missing calls.
    pub dropped_missing: usize,
    /// Dropped for low minor allele frequency.
    pub dropped_maf: usize,
    /// SNPs kept.
    pub kept: usize,
}

/// Drops SNPs whose missing rate exceeds `max_missing_rate` or whose MAF is
/// below `min_maf` (a monomorphic SNP has MAF 0 and is always dropped).
pub fn qc_filter(raw: &RawGenotypes, qc: &QcConfig) -> (RawGenotypes, Vec<usize>, QcReport) {
    let mut report = QcReport {
        input: raw.n_snps(),
        ..QcReport::default()
    };
    let mut keep = Vec::with_capacity(raw.n_snps());
    for j in 0..raw.n_snps() {
        if raw.missing_rate(j) > qc.max_missing_rate {
            report.dropped_missing += 1;
        } else {
            let maf = raw.maf(j);
            if maf < qc.min_maf || maf == 0.0 {
                report.dropped_maf += 1;
            } else {
                keep.push(j);
            }
        }
    }
    report.kept = keep.len();
    (raw.select_snps(&keep), keep, report)
}

/// Mean-imputed, centered, unit-norm column (zero if monomorphic).
fn standardized(raw: &RawGenotypes, j: usize) -> Vec<f64> {
    let mean = raw.mean_dosage(j).unwrap_or(0.0);
    let mut col: Vec<f64> = raw
        .snp(j)
        .iter()
        .map(|&c| if c == MISSING { 0.0 } else { c as f64 - mean })
        .collect();
    let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        col.iter_mut().for_each(|v| *v /= norm);
    }
    col
}

/// Greedy windowed prune. SNP pairs less than `window` positions apart are
/// visited left to right; when both are still kept and `r² > r2`, the one
/// with more missing calls is dropped (the later one on ties). `r²` is taken
/// on mean-imputed dosages. Returns the surviving indices in order.
pub fn ld_prune(raw: &RawGenotypes, r2: f64, window: usize) -> Result<Vec<usize>> {
    if !(r2 > 0.0 && r2 < 1.0) {
        return Err(VimcoError::Usage(format!("r2 must be in (0, 1), got {r2}")));
    }
    let p = raw.n_snps();
    let columns: Vec<Vec<f64>> = (0..p).map(|j| standardized(raw, j)).collect();
    let missing: Vec<f64> = (0..p).map(|j| raw.missing_rate(j)).collect();
    let mut kept = vec![true; p];
    for i in 0..p {
        if !kept[i] {
            continue;
        }
        for j in i + 1..p.min(i + window) {
            if !kept[j] {
                continue;
            }
            let r: f64 = columns[i].iter().zip(&columns[j]).map(|(a, b)| a * b).sum();
            if r * r > r2 {
                if missing[i] > missing[j] {
                    kept[i] = false;
                    break;
                }
                kept[j] = false;
            }
        }
    }
    Ok((0..p).filter(|&j| kept[j]).collect())
}
