//! Data, parameter and posterior types for `Y = X B + E`.
//!
//! Rows of `E` are `N(0, Θ⁻¹)`; effects are `β_jk = γ_jk β̃_jk` with
//! `γ_jk ~ Bernoulli(a_k)` and `β̃_jk ~ N(0, σ²_βk)`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::linalg::{self, Matrix};
use crate::{Error, Result};

/// Tolerance on column means for centered inputs.
pub const CENTERING_TOL: f64 = 1e-8;
/// Inclusion probabilities are clamped to `[A_CLAMP, 1 - A_CLAMP]`.
pub const A_CLAMP: f64 = 1e-6;
/// Lower bound on slab variances.
pub const SLAB_VAR_FLOOR: f64 = 1e-10;
/// Largest tolerated asymmetry of the precision matrix.
pub const SYMMETRY_TOL: f64 = 1e-10;

fn column_mean(col: &[f64]) -> f64 {
    col.iter().sum::<f64>() / col.len() as f64
}

fn default_ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{}", i + 1)).collect()
}

/// Subtracts each column's mean. Leaves the input untouched.
pub fn center_columns(matrix: &Matrix) -> Result<Matrix> {
    if matrix.nrows() < 2 {
        return Err(Error::TooFewRows(matrix.nrows()));
    }
    let mut out = matrix.clone();
    for j in 0..out.ncols() {
        let col = out.col_mut(j);
        let mean = column_mean(col);
        col.iter_mut().for_each(|v| *v -= mean);
    }
    Ok(out)
}

/// Centered `N × p` genotype dosages with cached squared column norms.
#[derive(Debug, Clone, PartialEq)]
pub struct GenotypeMatrix {
    data: Matrix,
    snp_ids: Vec<String>,
    col_sq_norms: Vec<f64>,
}

impl GenotypeMatrix {
    /// Wraps already-centered dosages.
    pub fn new(data: Matrix, snp_ids: Vec<String>) -> Result<Self> {
        if snp_ids.len() != data.ncols() {
            return Err(Error::DimensionMismatch {
                what: "SNP identifiers",
                expected: data.ncols(),
                found: snp_ids.len(),
            });
        }
        if data.nrows() < 2 {
            return Err(Error::TooFewRows(data.nrows()));
        }
        let mut col_sq_norms = Vec::with_capacity(data.ncols());
        for j in 0..data.ncols() {
            let col = data.col(j);
            let mean = column_mean(col);
            if !(mean.abs() <= CENTERING_TOL) {
                return Err(Error::NotCentered {
                    matrix: "genotype",
                    column: j,
                    mean,
                });
            }
            let sq = linalg::dot(col, col);
            if !(sq > 0.0) || !sq.is_finite() {
                return Err(Error::DegenerateColumn { column: j });
            }
            col_sq_norms.push(sq);
        }
        Ok(Self {
            data,
            snp_ids,
            col_sq_norms,
        })
    }

    /// Centers raw dosages, then wraps them. Labels default to `snp1..snpP`.
    pub fn from_raw(raw: &Matrix, snp_ids: Option<Vec<String>>) -> Result<Self> {
        let ids = snp_ids.unwrap_or_else(|| default_ids("snp", raw.ncols()));
        Self::new(center_columns(raw)?, ids)
    }

    /// The centered matrix `X`.
    pub fn data(&self) -> &Matrix {
        &self.data
    }

    /// Column `X_j`.
    #[inline]
    pub fn column(&self, j: usize) -> &[f64] {
        self.data.col(j)
    }

    /// `‖X_j‖²`
    #[inline]
    pub fn col_sq_norm(&self, j: usize) -> f64 {
        self.col_sq_norms[j]
    }

    /// All `‖X_j‖²`.
    pub fn col_sq_norms(&self) -> &[f64] {
        &self.col_sq_norms
    }

    /// SNP labels.
    pub fn snp_ids(&self) -> &[String] {
        &self.snp_ids
    }

    /// `N`
    pub fn n_samples(&self) -> usize {
        self.data.nrows()
    }

    /// `p`
    pub fn n_snps(&self) -> usize {
        self.data.ncols()
    }

    /// Keeps the listed SNPs in the given order.
    pub fn select_snps(&self, keep: &[usize]) -> Self {
        Self {
            data: self.data.select_columns(keep),
            snp_ids: keep.iter().map(|&j| self.snp_ids[j].clone()).collect(),
            col_sq_norms: keep.iter().map(|&j| self.col_sq_norms[j]).collect(),
        }
    }

    /// Rescales every column to unit sample variance.
    pub fn standardized(&self) -> Self {
        let n = self.n_samples() as f64;
        let mut data = self.data.clone();
        let mut norms = Vec::with_capacity(self.n_snps());
        for j in 0..self.n_snps() {
            let scale = (n / self.col_sq_norms[j]).sqrt();
            let col = data.col_mut(j);
            col.iter_mut().for_each(|v| *v *= scale);
            norms.push(linalg::dot(col, col));
        }
        Self {
            data,
            snp_ids: self.snp_ids.clone(),
            col_sq_norms: norms,
        }
    }
}

/// Centered `N × K` trait matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PhenotypeMatrix {
    data: Matrix,
    trait_ids: Vec<String>,
}

impl PhenotypeMatrix {
    /// Wraps already-centered traits.
    pub fn new(data: Matrix, trait_ids: Vec<String>) -> Result<Self> {
        if trait_ids.len() != data.ncols() {
            return Err(Error::DimensionMismatch {
                what: "trait identifiers",
                expected: data.ncols(),
                found: trait_ids.len(),
            });
        }
        if data.ncols() == 0 {
            return Err(Error::InvalidValue(
                "at least one trait is required".to_string(),
            ));
        }
        if data.ncols() > data.nrows() {
            return Err(Error::TooManyTraits {
                traits: data.ncols(),
                samples: data.nrows(),
            });
        }
        for k in 0..data.ncols() {
            let col = data.col(k);
            let mean = column_mean(col);
            if !(mean.abs() <= CENTERING_TOL) || col.iter().any(|v| !v.is_finite()) {
                return Err(Error::NotCentered {
                    matrix: "phenotype",
                    column: k,
                    mean,
                });
            }
        }
        Ok(Self { data, trait_ids })
    }

    /// Centers raw traits, then wraps them. Labels default to `trait1..traitK`.
    pub fn from_raw(raw: &Matrix, trait_ids: Option<Vec<String>>) -> Result<Self> {
        let ids = trait_ids.unwrap_or_else(|| default_ids("trait", raw.ncols()));
        Self::new(center_columns(raw)?, ids)
    }

    /// The centered matrix `Y`.
    pub fn data(&self) -> &Matrix {
        &self.data
    }

    /// Column `Y_k`.
    #[inline]
    pub fn column(&self, k: usize) -> &[f64] {
        self.data.col(k)
    }

    /// Trait labels.
    pub fn trait_ids(&self) -> &[String] {
        &self.trait_ids
    }

    /// `N`
    pub fn n_samples(&self) -> usize {
        self.data.nrows()
    }

    /// `K`
    pub fn n_traits(&self) -> usize {
        self.data.ncols()
    }

    /// Keeps the listed traits in the given order.
    pub fn select_traits(&self, keep: &[usize]) -> Self {
        Self {
            data: self.data.select_columns(keep),
            trait_ids: keep.iter().map(|&k| self.trait_ids[k].clone()).collect(),
        }
    }

    /// Per-trait variance `‖Y_k‖² / N`.
    pub fn variances(&self) -> Vec<f64> {
        let n = self.n_samples() as f64;
        (0..self.n_traits())
            .map(|k| linalg::dot(self.column(k), self.column(k)) / n)
            .collect()
    }
}

/// Checks that genotypes and traits describe the same samples.
///
/// Centering and degeneracy are enforced by the constructors; this
/// re-validates them so hand-assembled inputs cannot slip through.
pub fn validate_dataset(geno: &GenotypeMatrix, pheno: &PhenotypeMatrix) -> Result<()> {
    if geno.n_samples() != pheno.n_samples() {
        return Err(Error::DimensionMismatch {
            what: "sample count",
            expected: geno.n_samples(),
            found: pheno.n_samples(),
        });
    }
    for j in 0..geno.n_snps() {
        let col = geno.column(j);
        let mean = column_mean(col);
        if !(mean.abs() <= CENTERING_TOL) {
            return Err(Error::NotCentered {
                matrix: "genotype",
                column: j,
                mean,
            });
        }
        let sq = linalg::dot(col, col);
        if !(sq > 0.0) {
            return Err(Error::DegenerateColumn { column: j });
        }
        if (sq - geno.col_sq_norm(j)).abs() > 1e-12 * sq {
            return Err(Error::InvalidValue(format!("stale norm cache for SNP {j}")));
        }
    }
    for k in 0..pheno.n_traits() {
        let mean = column_mean(pheno.column(k));
        if !(mean.abs() <= CENTERING_TOL) {
            return Err(Error::NotCentered {
                matrix: "phenotype",
                column: k,
                mean,
            });
        }
    }
    Ok(())
}

/// Model parameters `Φ = {a_k, σ²_βk, Θ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    inclusion_probs: Vec<f64>,
    slab_vars: Vec<f64>,
    precision: Matrix,
}

impl ModelParams {
    /// Validates and stores parameters.
    ///
    /// `a_k` is clamped into `[1e-6, 1 - 1e-6]` and `σ²_βk` floored at
    /// `1e-10`; `Θ` must be symmetric and admit a Cholesky factorization.
    pub fn new(inclusion_probs: Vec<f64>, slab_vars: Vec<f64>, precision: Matrix) -> Result<Self> {
        let k = inclusion_probs.len();
        if slab_vars.len() != k {
            return Err(Error::DimensionMismatch {
                what: "slab variances",
                expected: k,
                found: slab_vars.len(),
            });
        }
        if precision.nrows() != k || precision.ncols() != k {
            return Err(Error::DimensionMismatch {
                what: "precision matrix",
                expected: k,
                found: precision.nrows(),
            });
        }
        let inclusion_probs = inclusion_probs
            .into_iter()
            .map(|a| {
                if (0.0..=1.0).contains(&a) {
                    Ok(clamp_inclusion(a))
                } else {
                    Err(Error::InvalidValue(format!("inclusion probability {a}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let slab_vars = slab_vars
            .into_iter()
            .map(|s| {
                if s >= 0.0 && s.is_finite() {
                    Ok(s.max(SLAB_VAR_FLOOR))
                } else {
                    Err(Error::InvalidValue(format!("slab variance {s}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        check_precision(&precision)?;
        Ok(Self {
            inclusion_probs,
            slab_vars,
            precision,
        })
    }

    /// Null-model starting point: `a_k = 0.01`, `σ²_βk = 0.1 Var(Y_k)`,
    /// `Θ = diag(1 / Var(Y_k))`.
    pub fn null_init(pheno: &PhenotypeMatrix) -> Result<Self> {
        let var = pheno.variances();
        if let Some(k) = var.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::InvalidValue(format!("trait {k} has zero variance")));
        }
        Self::new(
            alloc::vec![0.01; var.len()],
            var.iter().map(|v| 0.1 * v).collect(),
            Matrix::from_diagonal(&var.iter().map(|v| 1.0 / v).collect::<Vec<_>>()),
        )
    }

    /// `K`
    pub fn n_traits(&self) -> usize {
        self.inclusion_probs.len()
    }

    /// `a_k`
    pub fn inclusion_probs(&self) -> &[f64] {
        &self.inclusion_probs
    }

    /// `σ²_βk`
    pub fn slab_vars(&self) -> &[f64] {
        &self.slab_vars
    }

    /// `Θ`
    pub fn precision(&self) -> &Matrix {
        &self.precision
    }

    /// `Θ⁻¹`, the residual covariance.
    pub fn covariance(&self) -> Matrix {
        if self.precision.is_diagonal() {
            let d: Vec<f64> = self.precision.diagonal().iter().map(|v| 1.0 / v).collect();
            return Matrix::from_diagonal(&d);
        }
        linalg::spd_inverse(&self.precision).expect("precision validated at construction")
    }

    /// `log|Θ|`. Diagonal matrices use the sum of log entries directly.
    pub fn log_det_precision(&self) -> f64 {
        if self.precision.is_diagonal() {
            return self.precision.diagonal().iter().map(|v| v.ln()).sum();
        }
        let l = linalg::cholesky(&self.precision).expect("precision validated at construction");
        linalg::log_det_from_cholesky(&l)
    }

    pub(crate) fn set_inclusion_prob(&mut self, k: usize, a: f64) {
        self.inclusion_probs[k] = clamp_inclusion(a);
    }

    pub(crate) fn set_slab_var(&mut self, k: usize, s: f64) {
        self.slab_vars[k] = s.max(SLAB_VAR_FLOOR);
    }

    pub(crate) fn set_precision(&mut self, precision: Matrix) {
        debug_assert!(check_precision(&precision).is_ok());
        self.precision = precision;
    }

    /// Same parameters with traits reordered (`perm[new] = old`).
    pub fn permute_traits(&self, perm: &[usize]) -> Self {
        let k = perm.len();
        let mut precision = Matrix::zeros(k, k);
        for s in 0..k {
            for t in 0..k {
                precision[(s, t)] = self.precision[(perm[s], perm[t])];
            }
        }
        Self {
            inclusion_probs: perm.iter().map(|&i| self.inclusion_probs[i]).collect(),
            slab_vars: perm.iter().map(|&i| self.slab_vars[i]).collect(),
            precision,
        }
    }
}

fn clamp_inclusion(a: f64) -> f64 {
    a.clamp(A_CLAMP, 1.0 - A_CLAMP)
}

fn check_precision(precision: &Matrix) -> Result<()> {
    if precision.as_slice().iter().any(|v| !v.is_finite())
        || precision.asymmetry() > SYMMETRY_TOL
        || linalg::cholesky(precision).is_none()
    {
        return Err(Error::NotPositiveDefinite("precision matrix"));
    }
    Ok(())
}

/// Mean-field factors `q(β̃_jk, γ_jk)`: slab means `μ`, slab variances `s²`
/// and inclusion probabilities `α`, all `p × K`, plus the residual cache
/// `R_t = Y_t - Σ_j α_jt μ_jt X_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalState {
    pub(crate) mu: Matrix,
    pub(crate) s2: Matrix,
    pub(crate) alpha: Matrix,
    pub(crate) residuals: Matrix,
}

impl VariationalState {
    /// `q` equal to the prior: `μ = 0`, `s² = σ²_βk`, `α = a_k`, `R = Y`.
    pub fn from_prior(
        geno: &GenotypeMatrix,
        pheno: &PhenotypeMatrix,
        params: &ModelParams,
    ) -> Self {
        let (p, k) = (geno.n_snps(), pheno.n_traits());
        let mut s2 = Matrix::zeros(p, k);
        let mut alpha = Matrix::zeros(p, k);
        for t in 0..k {
            s2.col_mut(t).fill(params.slab_vars()[t]);
            alpha.col_mut(t).fill(params.inclusion_probs()[t]);
        }
        Self {
            mu: Matrix::zeros(p, k),
            s2,
            alpha,
            residuals: pheno.data().clone(),
        }
    }

    /// Assembles a state from stored factors and rebuilds the residual cache.
    pub fn from_parts(
        mu: Matrix,
        s2: Matrix,
        alpha: Matrix,
        geno: &GenotypeMatrix,
        pheno: &PhenotypeMatrix,
    ) -> Result<Self> {
        let (p, k) = (geno.n_snps(), pheno.n_traits());
        for (what, m) in [("mu", &mu), ("s2", &s2), ("alpha", &alpha)] {
            if m.nrows() != p || m.ncols() != k {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: p * k,
                    found: m.nrows() * m.ncols(),
                });
            }
        }
        if alpha.as_slice().iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::InvalidValue("alpha outside [0, 1]".to_string()));
        }
        if s2.as_slice().iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidValue("s2 must be positive".to_string()));
        }
        if mu.as_slice().iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidValue("mu must be finite".to_string()));
        }
        let mut state = Self {
            mu,
            s2,
            alpha,
            residuals: pheno.data().clone(),
        };
        state.recompute_residuals(geno, pheno);
        Ok(state)
    }

    /// `μ_jk`
    pub fn mu(&self) -> &Matrix {
        &self.mu
    }

    /// `s²_jk`
    pub fn s2(&self) -> &Matrix {
        &self.s2
    }

    /// `α_jk = q(γ_jk = 1)`
    pub fn alpha(&self) -> &Matrix {
        &self.alpha
    }

    /// Cached residuals `R`.
    pub fn residuals(&self) -> &Matrix {
        &self.residuals
    }

    /// Posterior mean effects `α ∘ μ`.
    pub fn posterior_mean_effects(&self) -> Matrix {
        let mut b = self.mu.clone();
        for (v, a) in b.as_mut_slice().iter_mut().zip(self.alpha.as_slice()) {
            *v *= a;
        }
        b
    }

    /// Residuals recomputed from scratch.
    pub fn fresh_residuals(&self, geno: &GenotypeMatrix, pheno: &PhenotypeMatrix) -> Matrix {
        let mut r = pheno.data().clone();
        for t in 0..r.ncols() {
            let col = r.col_mut(t);
            for j in 0..geno.n_snps() {
                let b = self.alpha[(j, t)] * self.mu[(j, t)];
                if b != 0.0 {
                    linalg::axpy(-b, geno.column(j), col);
                }
            }
        }
        r
    }

    /// Largest entrywise gap between the cache and fresh residuals.
    pub fn residual_drift(&self, geno: &GenotypeMatrix, pheno: &PhenotypeMatrix) -> f64 {
        self.residuals
            .max_abs_diff(&self.fresh_residuals(geno, pheno))
    }

    /// Replaces the cache with freshly computed residuals.
    pub fn recompute_residuals(&mut self, geno: &GenotypeMatrix, pheno: &PhenotypeMatrix) {
        self.residuals = self.fresh_residuals(geno, pheno);
    }

    /// Same state with trait columns reordered (`perm[new] = old`).
    pub fn permute_traits(&self, perm: &[usize]) -> Self {
        Self {
            mu: self.mu.select_columns(perm),
            s2: self.s2.select_columns(perm),
            alpha: self.alpha.select_columns(perm),
            residuals: self.residuals.select_columns(perm),
        }
    }
}

/// True sparse effects `B = γ ∘ β̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseEffects {
    n_snps: usize,
    n_traits: usize,
    gamma: Vec<bool>,
    beta_tilde: Matrix,
    beta: Matrix,
}

impl SparseEffects {
    /// Builds `B` from indicators (column-major, `p × K`) and slab effects.
    pub fn new(gamma: Vec<bool>, beta_tilde: Matrix) -> Result<Self> {
        let (p, k) = (beta_tilde.nrows(), beta_tilde.ncols());
        if gamma.len() != p * k {
            return Err(Error::DimensionMismatch {
                what: "inclusion indicators",
                expected: p * k,
                found: gamma.len(),
            });
        }
        let mut beta = Matrix::zeros(p, k);
        for (i, (b, &bt)) in beta
            .as_mut_slice()
            .iter_mut()
            .zip(beta_tilde.as_slice())
            .enumerate()
        {
            if gamma[i] {
                *b = bt;
            }
        }
        Ok(Self {
            n_snps: p,
            n_traits: k,
            gamma,
            beta_tilde,
            beta,
        })
    }

    /// Effects from a dense `B`; `γ` marks the nonzero entries.
    pub fn from_beta(beta: Matrix) -> Self {
        let gamma = beta.as_slice().iter().map(|b| *b != 0.0).collect();
        Self::new(gamma, beta).expect("shapes agree by construction")
    }

    /// `p`
    pub fn n_snps(&self) -> usize {
        self.n_snps
    }

    /// `K`
    pub fn n_traits(&self) -> usize {
        self.n_traits
    }

    /// `γ_jk`
    #[inline]
    pub fn gamma(&self, j: usize, k: usize) -> bool {
        self.gamma[k * self.n_snps + j]
    }

    /// Column-major indicator buffer.
    pub fn gamma_slice(&self) -> &[bool] {
        &self.gamma
    }

    /// `β̃`
    pub fn beta_tilde(&self) -> &Matrix {
        &self.beta_tilde
    }

    /// `B`
    pub fn beta(&self) -> &Matrix {
        &self.beta
    }

    /// Number of causal SNPs for trait `k`.
    pub fn causal_count(&self, k: usize) -> usize {
        (0..self.n_snps).filter(|&j| self.gamma(j, k)).count()
    }

    /// Pleiotropy `g = #{j : Σ_k γ_jk ≥ 2} / Σ_jk γ_jk`; zero with no causal entries.
    pub fn pleiotropy(&self) -> f64 {
        let total = self.gamma.iter().filter(|g| **g).count();
        if total == 0 {
            return 0.0;
        }
        let multi = (0..self.n_snps)
            .filter(|&j| (0..self.n_traits).filter(|&k| self.gamma(j, k)).count() >= 2)
            .count();
        multi as f64 / total as f64
    }
}

/// Global-FDR association calls over all SNP-trait pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationReport {
    /// Local false discovery rates `1 - α_jk`.
    pub lfdr: Matrix,
    /// lfdr cutoff `ξ`; `-1` when nothing is rejected.
    pub threshold_xi: f64,
    /// Rejected `(snp, trait)` pairs, SNP-major order.
    pub rejections: Vec<(usize, usize)>,
    /// Requested global FDR.
    pub target_fdr: f64,
}

impl AssociationReport {
    /// Estimated FDR of the rejection set (mean lfdr over it).
    pub fn estimated_fdr(&self) -> f64 {
        if self.rejections.is_empty() {
            return 0.0;
        }
        self.rejections
            .iter()
            .map(|&(j, k)| self.lfdr[(j, k)])
            .sum::<f64>()
            / self.rejections.len() as f64
    }

    /// Rejection count per trait.
    pub fn counts_per_trait(&self) -> Vec<usize> {
        let mut counts = alloc::vec![0; self.lfdr.ncols()];
        for &(_, k) in &self.rejections {
            counts[k] += 1;
        }
        counts
    }
}
