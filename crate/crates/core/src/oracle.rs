//! Exact posterior over inclusion indicators by brute-force enumeration.
//!
//! For each configuration `γ` the slab effects integrate out analytically:
//! the trait-major stacked vector `y = vec(Y)` is `N(0, Θ⁻¹ ⊗ I_N + A D_γ Aᵀ)`
//! where block `k` of `A` holds the columns `X_j` and `D_γ` carries
//! `γ_jk σ²_βk`. Only tiny problems are admitted.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::linalg::{self, Matrix};
use crate::model::{GenotypeMatrix, ModelParams, PhenotypeMatrix};
use crate::special::LN_2PI;
use crate::{Error, Result};

/// Largest `p · K` admitted (65 536 configurations).
pub const MAX_INDICATORS: usize = 16;
/// Largest `N · K` admitted.
pub const MAX_STACKED_LEN: usize = 200;

/// Exact posterior of `γ` given `Y`, `X` and `Φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactPosterior {
    /// `ln p(Y | X; Φ)`
    pub log_marginal: f64,
    /// `ln Pr(γ | Y, X; Φ)` indexed by configuration; bit `k·p + j` is `γ_jk`.
    pub config_log_probs: Vec<f64>,
    /// Exact `Pr(γ_jk = 1 | Y, X; Φ)`, `p × K`.
    pub inclusion_probs: Matrix,
}

impl ExactPosterior {
    /// Bit position of `γ_jk` in a configuration index.
    pub fn bit(&self, j: usize, k: usize) -> usize {
        k * self.inclusion_probs.nrows() + j
    }
}

fn check_limits(
    geno: &GenotypeMatrix,
    pheno: &PhenotypeMatrix,
    params: &ModelParams,
) -> Result<()> {
    let (n, p, k) = (geno.n_samples(), geno.n_snps(), pheno.n_traits());
    if pheno.n_samples() != n {
        return Err(Error::DimensionMismatch {
            what: "sample count",
            expected: n,
            found: pheno.n_samples(),
        });
    }
    if params.n_traits() != k {
        return Err(Error::DimensionMismatch {
            what: "parameter traits",
            expected: k,
            found: params.n_traits(),
        });
    }
    if p * k > MAX_INDICATORS {
        return Err(Error::TooLarge(format!(
            "p·K = {} exceeds {MAX_INDICATORS}",
            p * k
        )));
    }
    if n * k > MAX_STACKED_LEN {
        return Err(Error::TooLarge(format!(
            "N·K = {} exceeds {MAX_STACKED_LEN}",
            n * k
        )));
    }
    Ok(())
}

fn log_prior(config: usize, p: usize, params: &ModelParams) -> f64 {
    let mut lp = 0.0;
    for (k, &a) in params.inclusion_probs().iter().enumerate() {
        for j in 0..p {
            lp += if config >> (k * p + j) & 1 == 1 {
                a.ln()
            } else {
                (-a).ln_1p()
            };
        }
    }
    lp
}

fn active_indicators(config: usize, p: usize, k: usize) -> Vec<(usize, usize)> {
    (0..k)
        .flat_map(|t| (0..p).map(move |j| (j, t)))
        .filter(|&(j, t)| config >> (t * p + j) & 1 == 1)
        .collect()
}

fn normalize(p: usize, k: usize, log_joint: Vec<f64>) -> ExactPosterior {
    let max = log_joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + log_joint.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    let config_log_probs: Vec<f64> = log_joint.iter().map(|v| v - lse).collect();
    let mut inclusion_probs = Matrix::zeros(p, k);
    for (config, lp) in config_log_probs.iter().enumerate() {
        let w = lp.exp();
        for (j, t) in active_indicators(config, p, k) {
            inclusion_probs[(j, t)] += w;
        }
    }
    ExactPosterior {
        log_marginal: lse,
        config_log_probs,
        inclusion_probs,
    }
}

/// Exact posterior through the Woodbury identity: per configuration only an
/// `|γ| × |γ|` system is factored.
pub fn exact_posterior(
    geno: &GenotypeMatrix,
    pheno: &PhenotypeMatrix,
    params: &ModelParams,
) -> Result<ExactPosterior> {
    check_limits(geno, pheno, params)?;
    let (n, p, k) = (geno.n_samples(), geno.n_snps(), pheno.n_traits());
    let theta = params.precision();
    let slab = params.slab_vars();

    let gram = geno.data().transpose().matmul(geno.data());
    // Σ₀⁻¹ y in trait-major layout is Y Θ
    let y_theta = pheno.data().matmul(theta);
    let x_y_theta = geno.data().transpose().matmul(&y_theta);
    let mut quad0 = 0.0;
    for t in 0..k {
        quad0 += linalg::dot(pheno.column(t), y_theta.col(t));
    }
    let log_det0 = -(n as f64) * params.log_det_precision();
    let constant = (n * k) as f64 * LN_2PI;

    let mut log_joint = Vec::with_capacity(1 << (p * k));
    for config in 0..1usize << (p * k) {
        let active = active_indicators(config, p, k);
        let m = active.len();
        let mut system = Matrix::zeros(m, m);
        let mut rhs = vec![0.0; m];
        let mut log_det_d = 0.0;
        for (a, &(j, s)) in active.iter().enumerate() {
            rhs[a] = x_y_theta[(j, s)];
            log_det_d += slab[s].ln();
            for (b, &(jj, t)) in active.iter().enumerate() {
                system[(a, b)] = theta[(s, t)] * gram[(j, jj)];
            }
            system[(a, a)] += 1.0 / slab[s];
        }
        let (log_det_m, correction) = if m == 0 {
            (0.0, 0.0)
        } else {
            let l = linalg::cholesky(&system).ok_or(Error::SingularCovariance)?;
            let mut sol = rhs.clone();
            linalg::cholesky_solve_in_place(&l, &mut sol);
            (linalg::log_det_from_cholesky(&l), linalg::dot(&rhs, &sol))
        };
        let log_lik = -0.5 * (constant + log_det0 + log_det_d + log_det_m + quad0 - correction);
        log_joint.push(log_lik + log_prior(config, p, params));
    }
    let post = normalize(p, k, log_joint);
    if !post.log_marginal.is_finite() {
        return Err(Error::SingularCovariance);
    }
    Ok(post)
}

/// Exact posterior by factoring the full `NK × NK` covariance for every
/// configuration. Independent of [`exact_posterior`]'s algebra.
pub fn exact_posterior_dense(
    geno: &GenotypeMatrix,
    pheno: &PhenotypeMatrix,
    params: &ModelParams,
) -> Result<ExactPosterior> {
    check_limits(geno, pheno, params)?;
    let (n, p, k) = (geno.n_samples(), geno.n_snps(), pheno.n_traits());
    let noise = params.covariance();
    let slab = params.slab_vars();
    let x = geno.data();

    let y: Vec<f64> = pheno.data().as_slice().to_vec();
    let mut log_joint = Vec::with_capacity(1 << (p * k));
    for config in 0..1usize << (p * k) {
        let mut cov = Matrix::zeros(n * k, n * k);
        for s in 0..k {
            for t in 0..k {
                for i in 0..n {
                    cov[(s * n + i, t * n + i)] = noise[(s, t)];
                }
            }
        }
        for (j, t) in active_indicators(config, p, k) {
            let col = x.col(j);
            for a in 0..n {
                for b in 0..n {
                    cov[(t * n + a, t * n + b)] += slab[t] * col[a] * col[b];
                }
            }
        }
        let l = linalg::cholesky(&cov).ok_or(Error::SingularCovariance)?;
        let mut sol = y.clone();
        linalg::cholesky_solve_in_place(&l, &mut sol);
        let log_lik = -0.5
            * ((n * k) as f64 * LN_2PI + linalg::log_det_from_cholesky(&l) + linalg::dot(&y, &sol));
        log_joint.push(log_lik + log_prior(config, p, params));
    }
    Ok(normalize(p, k, log_joint))
}

/// `ln p(Y | X; Φ)` via [`exact_posterior`].
pub fn exact_log_marginal(
    geno: &GenotypeMatrix,
    pheno: &PhenotypeMatrix,
    params: &ModelParams,
) -> Result<f64> {
    exact_posterior(geno, pheno, params).map(|post| post.log_marginal)
}
