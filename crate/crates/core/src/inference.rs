//! Local FDR, global FDR thresholding and simulation scoring.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{self, Matrix};
use crate::model::{AssociationReport, GenotypeMatrix, SparseEffects};
use crate::{Error, Result};

/// Greedy blocking: 0.5 squared correlation with the block's first SNP.
pub const DEFAULT_BLOCK_R2: f64 = 0.5;
/// Greedy blocking: at most 100 SNPs per block.
pub const DEFAULT_BLOCK_WINDOW: usize = 100;

/// SNP-to-block assignment; ids are contiguous from zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LdBlocks {
    block_of: Vec<usize>,
}

impl LdBlocks {
    /// Validates that ids start at 0 and use every value up to the maximum.
    pub fn new(block_of: Vec<usize>) -> Result<Self> {
        let ids: BTreeSet<usize> = block_of.iter().copied().collect();
        if ids.iter().enumerate().any(|(i, &id)| i != id) {
            return Err(Error::InvalidValue(alloc::string::String::from(
                "block ids must be contiguous from 0",
            )));
        }
        Ok(Self { block_of })
    }

    /// Every SNP in its own block.
    pub fn singletons(n_snps: usize) -> Self {
        Self {
            block_of: (0..n_snps).collect(),
        }
    }

    /// Block of SNP `j`.
    pub fn block(&self, j: usize) -> usize {
        self.block_of[j]
    }

    /// Per-SNP block ids.
    pub fn as_slice(&self) -> &[usize] {
        &self.block_of
    }

    /// Number of blocks.
    pub fn n_blocks(&self) -> usize {
        self.block_of.iter().max().map_or(0, |m| m + 1)
    }
}

/// Power, grouped empirical FDR and AUC of one analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalMetrics {
    /// Detected true associations over all true associations.
    pub power: f64,
    /// False grouped rejections over grouped rejections.
    pub empirical_fdr: f64,
    /// Area under the ROC curve of the scores.
    pub auc: f64,
}

/// `lfdr_jk = 1 - α_jk`
pub fn lfdr_from_alpha(alpha: &Matrix) -> Matrix {
    let data = alpha.as_slice().iter().map(|a| 1.0 - a).collect();
    Matrix::from_col_major(alpha.nrows(), alpha.ncols(), data)
}

/// Largest observed lfdr `ξ` whose rejection set `{lfdr ≤ ξ}` has mean lfdr
/// at most `target`.
///
/// Ties enter or leave together. Returns `(-1, [])` when no set qualifies
/// (including any `target ≤ 0`). Rejected indices are ascending.
pub fn fdr_threshold(lfdr: &[f64], target: f64) -> (f64, Vec<usize>) {
    if !(target > 0.0) || lfdr.is_empty() {
        return (-1.0, Vec::new());
    }
    let mut order: Vec<usize> = (0..lfdr.len()).collect();
    order.sort_by(|&a, &b| lfdr[a].total_cmp(&lfdr[b]).then(a.cmp(&b)));

    let mut xi = -1.0;
    let mut sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let value = lfdr[order[i]];
        let mut end = i;
        while end < order.len() && lfdr[order[end]] == value {
            sum += value;
            end += 1;
        }
        if sum / end as f64 <= target {
            xi = value;
        } else {
            // cumulative means of a sorted list never decrease
            break;
        }
        i = end;
    }
    if xi < 0.0 {
        return (-1.0, Vec::new());
    }
    let rejected = (0..lfdr.len()).filter(|&i| lfdr[i] <= xi).collect();
    (xi, rejected)
}

/// Thresholds `1 - α` over all SNP-trait pairs at a global FDR.
pub fn associate(alpha: &Matrix, target_fdr: f64) -> AssociationReport {
    let lfdr = lfdr_from_alpha(alpha);
    let p = lfdr.nrows();
    let (xi, flat) = fdr_threshold(lfdr.as_slice(), target_fdr);
    let mut rejections: Vec<(usize, usize)> = flat.into_iter().map(|i| (i % p, i / p)).collect();
    rejections.sort_unstable();
    AssociationReport {
        lfdr,
        threshold_xi: xi,
        rejections,
        target_fdr,
    }
}

/// Per-SNP union rule: SNP `j` is rejected when any `(j, k)` is.
pub fn reject_h0b(rejections: &[(usize, usize)]) -> Vec<usize> {
    rejections
        .iter()
        .map(|&(j, _)| j)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Per-SNP score for "associated with any trait": `1 - Π_k (1 - α_jk)`.
pub fn any_trait_scores(alpha: &Matrix) -> Vec<f64> {
    (0..alpha.nrows())
        .map(|j| {
            1.0 - (0..alpha.ncols())
                .map(|k| 1.0 - alpha[(j, k)])
                .product::<f64>()
        })
        .collect()
}

/// Area under the ROC curve by the Mann–Whitney rank sum; ties get
/// average ranks.
pub fn auc(scores: &[f64], truth: &[bool]) -> Result<f64> {
    assert_eq!(scores.len(), truth.len(), "scores and truth lengths");
    let n_pos = truth.iter().filter(|t| **t).count();
    let n_neg = truth.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut end = i + 1;
        while end < order.len() && scores[order[end]] == scores[order[i]] {
            end += 1;
        }
        // ranks i+1 ..= end share their mean
        let avg = (i + 1 + end) as f64 / 2.0;
        rank_sum += avg * order[i..end].iter().filter(|&&o| truth[o]).count() as f64;
        i = end;
    }
    let (np, nn) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * nn))
}

/// Scores per-(SNP, trait) calls against the simulated truth.
///
/// Power counts exact `(j, k)` hits. For the FDR, rejections sharing an
/// LD block and trait form one discovery, which is false when the block
/// holds no causal SNP for that trait. AUC ranks `scores` (`p × K`) over
/// every pair.
pub fn evaluate(
    rejections: &[(usize, usize)],
    truth: &SparseEffects,
    blocks: &LdBlocks,
    scores: &Matrix,
) -> Result<EvalMetrics> {
    let (p, k) = (truth.n_snps(), truth.n_traits());
    check_dims(p, blocks, scores.nrows())?;
    if scores.ncols() != k {
        return Err(Error::DimensionMismatch {
            what: "score traits",
            expected: k,
            found: scores.ncols(),
        });
    }
    let causal_blocks: BTreeSet<(usize, usize)> = (0..k)
        .flat_map(|t| {
            (0..p)
                .filter(move |&j| truth.gamma(j, t))
                .map(move |j| (j, t))
        })
        .map(|(j, t)| (blocks.block(j), t))
        .collect();
    let total_true = truth.gamma_slice().iter().filter(|g| **g).count();
    let hits = rejections
        .iter()
        .filter(|&&(j, t)| truth.gamma(j, t))
        .count();
    let groups: BTreeSet<(usize, usize)> = rejections
        .iter()
        .map(|&(j, t)| (blocks.block(j), t))
        .collect();
    let false_groups = groups.iter().filter(|g| !causal_blocks.contains(g)).count();

    Ok(EvalMetrics {
        power: ratio(hits, total_true),
        empirical_fdr: ratio(false_groups, groups.len()),
        auc: auc(scores.as_slice(), truth.gamma_slice())?,
    })
}

/// Scores per-SNP (any-trait) calls: a SNP is truly associated when it is
/// causal for at least one trait. Rejections are grouped by LD block.
pub fn evaluate_h0b(
    rejected_snps: &[usize],
    truth: &SparseEffects,
    blocks: &LdBlocks,
    scores: &[f64],
) -> Result<EvalMetrics> {
    let p = truth.n_snps();
    check_dims(p, blocks, scores.len())?;
    let causal: Vec<bool> = (0..p)
        .map(|j| (0..truth.n_traits()).any(|t| truth.gamma(j, t)))
        .collect();
    let causal_blocks: BTreeSet<usize> = (0..p)
        .filter(|&j| causal[j])
        .map(|j| blocks.block(j))
        .collect();
    let total_true = causal.iter().filter(|c| **c).count();
    let hits = rejected_snps.iter().filter(|&&j| causal[j]).count();
    let groups: BTreeSet<usize> = rejected_snps.iter().map(|&j| blocks.block(j)).collect();
    let false_groups = groups.iter().filter(|b| !causal_blocks.contains(b)).count();

    Ok(EvalMetrics {
        power: ratio(hits, total_true),
        empirical_fdr: ratio(false_groups, groups.len()),
        auc: auc(scores, &causal)?,
    })
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn check_dims(p: usize, blocks: &LdBlocks, score_rows: usize) -> Result<()> {
    if blocks.as_slice().len() != p {
        return Err(Error::DimensionMismatch {
            what: "LD block assignment",
            expected: p,
            found: blocks.as_slice().len(),
        });
    }
    if score_rows != p {
        return Err(Error::DimensionMismatch {
            what: "score SNPs",
            expected: p,
            found: score_rows,
        });
    }
    Ok(())
}

/// Greedy left-to-right LD blocks: SNP `j` joins the open block while
/// `r²(X_j, X_first) ≥ r2_threshold` and the block has fewer than
/// `max_window` SNPs.
pub fn ld_blocks_from_genotypes(
    geno: &GenotypeMatrix,
    r2_threshold: f64,
    max_window: usize,
) -> LdBlocks {
    let p = geno.n_snps();
    let mut block_of = vec![0; p];
    if p == 0 {
        return LdBlocks { block_of };
    }
    let mut block = 0;
    let mut first = 0;
    let mut len = 1;
    for (j, slot) in block_of.iter_mut().enumerate().skip(1) {
        let c = linalg::dot(geno.column(j), geno.column(first));
        let r2 = c * c / (geno.col_sq_norm(j) * geno.col_sq_norm(first));
        if r2 >= r2_threshold && len < max_window.max(1) {
            len += 1;
        } else {
            block += 1;
            first = j;
            len = 1;
        }
        *slot = block;
    }
    LdBlocks { block_of }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::String;

    #[test]
    fn lfdr_values() {
        let a = Matrix::from_columns(3, &[vec![1.0, 0.27, 0.0]]);
        let l = lfdr_from_alpha(&a);
        assert_eq!(l[(0, 0)], 0.0);
        assert!((l[(1, 0)] - 0.73).abs() < 1e-15);
        assert_eq!(l[(2, 0)], 1.0);
    }

    #[test]
    fn threshold_examples() {
        let (xi, rej) = fdr_threshold(&[0.01, 0.05, 0.2, 0.6], 0.1);
        assert_eq!(xi, 0.2);
        assert_eq!(rej, vec![0, 1, 2]);

        let (xi, rej) = fdr_threshold(&[0.0; 5], 0.1);
        assert_eq!(xi, 0.0);
        assert_eq!(rej.len(), 5);

        let (xi, rej) = fdr_threshold(&[0.5; 4], 0.1);
        assert_eq!(xi, -1.0);
        assert!(rej.is_empty());

        assert_eq!(fdr_threshold(&[0.0, 0.3], 0.0), (-1.0, Vec::new()));
    }

    #[test]
    fn ties_enter_together() {
        // 0.0 alone has mean 0; adding both 0.25s gives 0.1667 > 0.15
        let (xi, rej) = fdr_threshold(&[0.25, 0.0, 0.25], 0.15);
        assert_eq!(xi, 0.0);
        assert_eq!(rej, vec![1]);
    }

    #[test]
    fn union_rule() {
        assert_eq!(reject_h0b(&[(3, 1), (3, 2), (7, 1)]), vec![3, 7]);
        assert!(reject_h0b(&[]).is_empty());
        let all: Vec<(usize, usize)> = (0..6).map(|j| (j, 1)).collect();
        assert_eq!(reject_h0b(&all), (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn auc_hand_values() {
        assert_eq!(
            auc(&[0.1, 0.9, 0.8, 0.2], &[false, true, true, false]),
            Ok(1.0)
        );
        assert_eq!(auc(&[0.9, 0.1], &[false, true]), Ok(0.0));
        assert_eq!(auc(&[0.5, 0.5], &[false, true]), Ok(0.5));
        // positives {0.4, 0.8} vs negatives {0.4, 0.1}: pairs won 1 + 1 + 0.5 + 1 = 3.5 of 4
        assert_eq!(
            auc(&[0.4, 0.8, 0.4, 0.1], &[true, true, false, false]),
            Ok(0.875)
        );
        assert_eq!(auc(&[0.1, 0.2], &[true, true]), Err(Error::NoPositives));
    }

    #[test]
    fn perfect_scores() {
        let mut beta = Matrix::zeros(6, 2);
        beta[(1, 0)] = 1.0;
        beta[(4, 1)] = -0.5;
        let truth = SparseEffects::from_beta(beta.clone());
        let scores = Matrix::from_col_major(
            6,
            2,
            beta.as_slice()
                .iter()
                .map(|b| if *b != 0.0 { 1.0 } else { 0.0 })
                .collect(),
        );
        let m = evaluate(&[(1, 0), (4, 1)], &truth, &LdBlocks::singletons(6), &scores).unwrap();
        assert_eq!(
            m,
            EvalMetrics {
                power: 1.0,
                empirical_fdr: 0.0,
                auc: 1.0
            }
        );
    }

    #[test]
    fn grouped_fdr_counts_blocks() {
        let mut beta = Matrix::zeros(6, 1);
        beta[(0, 0)] = 1.0;
        let truth = SparseEffects::from_beta(beta);
        let blocks = LdBlocks::new(vec![0, 0, 0, 1, 1, 1]).unwrap();
        let scores = Matrix::from_columns(6, &[vec![0.9, 0.8, 0.1, 0.7, 0.6, 0.0]]);
        // two hits in the causal block, two in the empty one
        let m = evaluate(&[(0, 0), (1, 0), (3, 0), (4, 0)], &truth, &blocks, &scores).unwrap();
        assert_eq!(m.empirical_fdr, 0.5);
        assert_eq!(m.power, 1.0);
    }

    #[test]
    fn blocks_validation_and_window() {
        assert!(LdBlocks::new(vec![0, 2]).is_err());
        assert_eq!(LdBlocks::new(vec![0, 0, 1]).unwrap().n_blocks(), 2);

        let col = vec![1.0, -1.0, 2.0, -2.0];
        let other = vec![1.0, 1.0, -1.0, -1.0];
        let x = Matrix::from_columns(4, &[col.clone(), col.clone(), other, col]);
        let ids = (0..4)
            .map(|i| alloc::format!("s{i}"))
            .collect::<Vec<String>>();
        let geno = GenotypeMatrix::new(x, ids).unwrap();
        assert_eq!(
            ld_blocks_from_genotypes(&geno, 0.5, 100).as_slice(),
            &[0, 0, 1, 2]
        );
        assert_eq!(
            ld_blocks_from_genotypes(&geno, 0.5, 1).as_slice(),
            &[0, 1, 2, 3]
        );
    }

    #[test]
    fn any_trait_score_is_union_probability() {
        let a = Matrix::from_row_major(2, 2, &[0.5, 0.5, 0.0, 0.2]);
        let s = any_trait_scores(&a);
        assert!((s[0] - 0.75).abs() < 1e-15);
        assert!((s[1] - 0.2).abs() < 1e-15);
    }
}
