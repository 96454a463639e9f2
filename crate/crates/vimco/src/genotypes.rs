//! Raw dosage calls with missing values, before imputation and centering.

use vimco_core::{GenotypeMatrix, Matrix};

use crate::error::{Result, VimcoError};

/// Code stored for a missing call.
pub const MISSING: u8 = u8::MAX;

/// Hard-called dosages `{0, 1, 2}` or [`MISSING`], stored SNP-major
/// (`snp * n_samples + sample`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawGenotypes {
    n_samples: usize,
    n_snps: usize,
    codes: Vec<u8>,
}

impl RawGenotypes {
    /// Wraps SNP-major codes after checking the shape and the code set.
    pub fn new(n_samples: usize, n_snps: usize, codes: Vec<u8>) -> Result<Self> {
        if codes.len() != n_samples * n_snps {
            return Err(VimcoError::Usage(format!(
                "expected {} genotype codes for {n_samples} samples x {n_snps} SNPs, got {}",
                n_samples * n_snps,
                codes.len()
            )));
        }
        if let Some(bad) = codes.iter().find(|&&c| c > 2 && c != MISSING) {
            return Err(VimcoError::Usage(format!("invalid genotype code {bad}")));
        }
        Ok(Self {
            n_samples,
            n_snps,
            codes,
        })
    }

    /// All calls missing.
    pub fn missing(n_samples: usize, n_snps: usize) -> Self {
        Self {
            n_samples,
            n_snps,
            codes: vec![MISSING; n_samples * n_snps],
        }
    }

    /// Hard calls from a dense `N × p` dosage matrix; NaN marks missing.
    pub fn from_dosages(dosages: &Matrix) -> Result<Self> {
        let (n, p) = (dosages.nrows(), dosages.ncols());
        let mut codes = Vec::with_capacity(n * p);
        for j in 0..p {
            for &v in dosages.col(j) {
                codes.push(if v.is_nan() {
                    MISSING
                } else if v == 0.0 || v == 1.0 || v == 2.0 {
                    v as u8
                } else {
                    return Err(VimcoError::Usage(format!(
                        "dosage {v} at SNP {j} is not 0, 1 or 2"
                    )));
                });
            }
        }
        Ok(Self {
            n_samples: n,
            n_snps: p,
            codes,
        })
    }

    /// `N`
    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    /// `p`
    pub fn n_snps(&self) -> usize {
        self.n_snps
    }

    /// Call for `(sample, snp)`; `None` when missing.
    pub fn get(&self, sample: usize, snp: usize) -> Option<u8> {
        let c = self.codes[snp * self.n_samples + sample];
        (c != MISSING).then_some(c)
    }

    /// Overwrites one call.
    pub fn set(&mut self, sample: usize, snp: usize, call: Option<u8>) {
        let code = match call {
            Some(c) if c <= 2 => c,
            Some(c) => panic!("invalid genotype code {c}"),
            None => MISSING,
        };
        self.codes[snp * self.n_samples + sample] = code;
    }

    /// Codes of one SNP across samples.
    pub fn snp(&self, snp: usize) -> &[u8] {
        &self.codes[snp * self.n_samples..(snp + 1) * self.n_samples]
    }

    /// The SNP-major code buffer.
    pub fn codes(&self) -> &[u8] {
        &self.codes
    }

    /// Keeps the listed SNPs in the given order.
    pub fn select_snps(&self, keep: &[usize]) -> Self {
        let mut codes = Vec::with_capacity(keep.len() * self.n_samples);
        for &j in keep {
            codes.extend_from_slice(self.snp(j));
        }
        Self {
            n_samples: self.n_samples,
            n_snps: keep.len(),
            codes,
        }
    }

    /// Fraction of samples with a missing call.
    pub fn missing_rate(&self, snp: usize) -> f64 {
        if self.n_samples == 0 {
            return 0.0;
        }
        let missing = self.snp(snp).iter().filter(|&&c| c == MISSING).count();
        missing as f64 / self.n_samples as f64
    }

    /// Mean dosage over observed calls; `None` when every call is missing.
    pub fn mean_dosage(&self, snp: usize) -> Option<f64> {
        let (sum, count) = self
            .snp(snp)
            .iter()
            .filter(|&&c| c != MISSING)
            .fold((0u64, 0u64), |(s, n), &c| (s + c as u64, n + 1));
        (count > 0).then(|| sum as f64 / count as f64)
    }

    /// Minor allele frequency over observed calls (0 when all missing).
    pub fn maf(&self, snp: usize) -> f64 {
        self.mean_dosage(snp).map_or(0.0, |m| {
            let f = m / 2.0;
            f.min(1.0 - f)
        })
    }

    /// Dense `N × p` dosages with missing calls replaced by the SNP mean.
    pub fn to_imputed_matrix(&self) -> Matrix {
        let mut out = Vec::with_capacity(self.codes.len());
        for j in 0..self.n_snps {
            let mean = self.mean_dosage(j).unwrap_or(0.0);
            out.extend(
                self.snp(j)
                    .iter()
                    .map(|&c| if c == MISSING { mean } else { c as f64 }),
            );
        }
        Matrix::from_col_major(self.n_samples, self.n_snps, out)
    }

    /// Dense dosages with NaN for missing calls.
    pub fn to_matrix_with_nan(&self) -> Matrix {
        let data = self
            .codes
            .iter()
            .map(|&c| if c == MISSING { f64::NAN } else { c as f64 })
            .collect();
        Matrix::from_col_major(self.n_samples, self.n_snps, data)
    }
}

/// Mean-imputes, centers and validates the calls as a model design.
pub fn to_genotype_matrix(raw: &RawGenotypes, snp_ids: Vec<String>) -> Result<GenotypeMatrix> {
    if snp_ids.len() != raw.n_snps() {
        return Err(VimcoError::Usage(format!(
            "{} SNP ids for {} SNPs",
            snp_ids.len(),
            raw.n_snps()
        )));
    }
    Ok(GenotypeMatrix::from_raw(
        &raw.to_imputed_matrix(),
        Some(snp_ids),
    )?)
}
