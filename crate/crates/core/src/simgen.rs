//! Simulation of multi-trait GWAS data.
//!
//! Latent genotypes follow an AR(1) Gaussian across SNPs and are cut into
//! Hardy–Weinberg dosage classes; each trait gets a fixed number of causal
//! SNPs with `N(0, 1)` effects and a controlled pleiotropy `g`; errors are
//! AR(1)-correlated across traits and scaled to a target heritability.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{self, Matrix};
use crate::model::{GenotypeMatrix, PhenotypeMatrix, SparseEffects};
use crate::special::normal_quantile;
use crate::{Error, Result};

/// Simulation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Individuals `N`.
    pub n_samples: usize,
    /// SNPs `p`.
    pub n_snps: usize,
    /// Traits `K`.
    pub n_traits: usize,
    /// AR parameter of latent genotypes across SNPs.
    pub rho_x: f64,
    /// AR parameter of errors across traits.
    pub rho_e: f64,
    /// Fraction of SNPs causal for each trait.
    pub causal_frac: f64,
    /// Target pleiotropy `g`.
    pub pleiotropy_g: f64,
    /// Heritability per trait.
    pub h2: f64,
    /// Minor allele frequencies are drawn uniformly from this range.
    pub maf_range: (f64, f64),
    /// RNG seed.
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_samples: 500,
            n_snps: 1000,
            n_traits: 4,
            rho_x: 0.8,
            rho_e: 0.5,
            causal_frac: 0.01,
            pleiotropy_g: 0.0,
            h2: 0.3,
            maf_range: (0.05, 0.5),
            seed: 0,
        }
    }
}

impl SimConfig {
    /// Causal SNPs per trait, `round(causal_frac · p)`.
    pub fn causal_per_trait(&self) -> usize {
        (self.causal_frac * self.n_snps as f64).round() as usize
    }

    /// Checks every range.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidValue(msg));
        if self.n_samples < 2 {
            return bad(format!(
                "n_samples must be at least 2, got {}",
                self.n_samples
            ));
        }
        if self.n_traits == 0 || self.n_traits > self.n_samples {
            return bad(format!(
                "n_traits must be in 1..=n_samples, got {}",
                self.n_traits
            ));
        }
        if !(0.0..1.0).contains(&self.rho_x) || !(0.0..1.0).contains(&self.rho_e) {
            return bad(format!(
                "rho_x and rho_e must be in [0, 1), got {} and {}",
                self.rho_x, self.rho_e
            ));
        }
        if !(self.h2 > 0.0 && self.h2 < 1.0) {
            return bad(format!("h2 must be in (0, 1), got {}", self.h2));
        }
        if !(0.0..1.0).contains(&self.pleiotropy_g) {
            return bad(format!("g must be in [0, 1), got {}", self.pleiotropy_g));
        }
        let (lo, hi) = self.maf_range;
        if !(lo > 0.0 && lo <= hi && hi <= 0.5) {
            return bad(format!(
                "maf_range must satisfy 0 < lo <= hi <= 0.5, got ({lo}, {hi})"
            ));
        }
        if !(self.causal_frac > 0.0) || (self.causal_frac * self.n_snps as f64) < 1.0 {
            return bad(format!(
                "causal_frac * n_snps must be at least 1, got {}",
                self.causal_frac * self.n_snps as f64
            ));
        }
        Ok(())
    }
}

/// One simulated replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDataset {
    /// Centered genotypes.
    pub geno: GenotypeMatrix,
    /// Dosages before centering, `{0, 1, 2}`.
    pub raw_dosages: Matrix,
    /// Per-SNP minor allele frequency used for discretization.
    pub mafs: Vec<f64>,
    /// Centered traits.
    pub pheno: PhenotypeMatrix,
    /// True effects.
    pub truth: SparseEffects,
    /// `g` computed from the true indicators.
    pub realized_g: f64,
}

/// Simulated genotypes before and after centering.
#[derive(Debug, Clone, PartialEq)]
pub struct SimGenotypes {
    /// Centered genotypes.
    pub geno: GenotypeMatrix,
    /// Dosages `{0, 1, 2}`.
    pub raw: Matrix,
    /// Minor allele frequencies.
    pub mafs: Vec<f64>,
}

/// HWE cut points on the latent scale for minor allele frequency `f`:
/// dosage 2 below the first, 1 below the second, else 0.
pub fn hwe_thresholds(f: f64) -> (f64, f64) {
    let p2 = f * f;
    (
        normal_quantile(p2),
        normal_quantile(p2 + 2.0 * f * (1.0 - f)),
    )
}

fn discretize(z: &[f64], f: f64, out: &mut [f64]) {
    let (t2, t1) = hwe_thresholds(f);
    for (o, &zi) in out.iter_mut().zip(z) {
        *o = if zi < t2 {
            2.0
        } else if zi < t1 {
            1.0
        } else {
            0.0
        };
    }
}

/// AR(1) latent genotypes discretized under Hardy–Weinberg equilibrium.
///
/// Each row follows `z_j = ρ z_{j-1} + √(1-ρ²) ε_j`. A SNP whose dosages
/// come out constant redraws its allele frequency against the same latent
/// column; after 1000 failures the SNP is reported as degenerate.
pub fn gen_genotypes<R: Rng + ?Sized>(
    n_samples: usize,
    n_snps: usize,
    rho_x: f64,
    maf_range: (f64, f64),
    rng: &mut R,
) -> Result<SimGenotypes> {
    let innovation = (1.0 - rho_x * rho_x).sqrt();
    let mut latent = Matrix::zeros(n_samples, n_snps);
    for i in 0..n_samples {
        let mut prev = 0.0;
        for j in 0..n_snps {
            let eps: f64 = rng.sample(StandardNormal);
            let z = if j == 0 {
                eps
            } else {
                rho_x * prev + innovation * eps
            };
            latent[(i, j)] = z;
            prev = z;
        }
    }

    let mut raw = Matrix::zeros(n_samples, n_snps);
    let mut mafs = Vec::with_capacity(n_snps);
    let (lo, hi) = maf_range;
    for j in 0..n_snps {
        let mut attempts = 0;
        loop {
            let f = if hi > lo {
                rng.random_range(lo..hi)
            } else {
                lo
            };
            discretize(latent.col(j), f, raw.col_mut(j));
            let col = raw.col(j);
            if col.iter().any(|v| *v != col[0]) {
                mafs.push(f);
                break;
            }
            attempts += 1;
            if attempts >= 1000 {
                return Err(Error::DegenerateColumn { column: j });
            }
        }
    }
    let geno = GenotypeMatrix::from_raw(&raw, None)?;
    Ok(SimGenotypes { geno, raw, mafs })
}

/// Sparse effects with exactly `round(causal_frac · p)` causal SNPs per
/// trait and realized pleiotropy `s / (K m)` for `s = round(g K m)` shared
/// SNPs.
///
/// Each shared SNP is causal for exactly two traits, always the two with
/// the most open slots (lowest index on ties), which spreads sharing evenly
/// over trait pairs. The remaining slots get distinct single-trait SNPs.
pub fn gen_effects<R: Rng + ?Sized>(
    n_snps: usize,
    n_traits: usize,
    causal_frac: f64,
    pleiotropy_g: f64,
    rng: &mut R,
) -> Result<SparseEffects> {
    let m = (causal_frac * n_snps as f64).round() as usize;
    let total = n_traits * m;
    let shared = (pleiotropy_g * total as f64).round() as usize;
    let infeasible = |why: String| Err(Error::InfeasiblePleiotropy(why));

    if m == 0 {
        return infeasible(format!(
            "causal_frac {causal_frac} leaves no causal SNP among {n_snps}"
        ));
    }
    if shared > 0 && n_traits < 2 {
        return infeasible(format!("g = {pleiotropy_g} needs at least two traits"));
    }
    if 2 * shared > total {
        return infeasible(format!(
            "{shared} shared SNPs need {} slots but only {total} exist (g must be at most 0.5)",
            2 * shared
        ));
    }
    let distinct = total - shared;
    if distinct > n_snps {
        return infeasible(format!(
            "{distinct} distinct causal SNPs needed but only {n_snps} available"
        ));
    }

    let mut open = vec![m; n_traits];
    let mut pairs = Vec::with_capacity(shared);
    for _ in 0..shared {
        let mut ranked: Vec<usize> = (0..n_traits).collect();
        ranked.sort_by(|&a, &b| open[b].cmp(&open[a]).then(a.cmp(&b)));
        let (a, b) = (ranked[0], ranked[1]);
        if open[b] == 0 {
            return infeasible(format!(
                "cannot place {shared} shared SNPs across {n_traits} traits"
            ));
        }
        open[a] -= 1;
        open[b] -= 1;
        pairs.push((a.min(b), a.max(b)));
    }

    let mut snps: Vec<usize> = (0..n_snps).collect();
    snps.shuffle(rng);
    let chosen = &snps[..distinct];

    let mut gamma = vec![false; n_snps * n_traits];
    for (&j, &(a, b)) in chosen.iter().zip(&pairs) {
        gamma[a * n_snps + j] = true;
        gamma[b * n_snps + j] = true;
    }
    let mut next = shared;
    for (k, &slots) in open.iter().enumerate() {
        for &j in &chosen[next..next + slots] {
            gamma[k * n_snps + j] = true;
        }
        next += slots;
    }
    debug_assert_eq!(next, distinct);

    let mut beta_tilde = Matrix::zeros(n_snps, n_traits);
    for k in 0..n_traits {
        for j in 0..n_snps {
            if gamma[k * n_snps + j] {
                beta_tilde[(j, k)] = rng.sample(StandardNormal);
            }
        }
    }
    SparseEffects::new(gamma, beta_tilde)
}

/// `Y = X B + E` with error rows `N(0, D½ C D½)`, `C_st = ρ_e^{|s-t|}` and
/// `D_kk = Var(X β_k) (1 - h²) / h²` from the realized signal; `Y` is then
/// centered.
pub fn gen_errors_and_traits<R: Rng + ?Sized>(
    geno: &GenotypeMatrix,
    truth: &SparseEffects,
    rho_e: f64,
    h2: f64,
    rng: &mut R,
) -> Result<PhenotypeMatrix> {
    let n = geno.n_samples();
    let k = truth.n_traits();
    if truth.n_snps() != geno.n_snps() {
        return Err(Error::DimensionMismatch {
            what: "effect SNPs",
            expected: geno.n_snps(),
            found: truth.n_snps(),
        });
    }
    if let Some(t) = (0..k).find(|&t| truth.causal_count(t) == 0) {
        return Err(Error::NoCausalSnp(t));
    }

    let signal = geno.data().matmul(truth.beta());
    let mut sd = Vec::with_capacity(k);
    for t in 0..k {
        let g = signal.col(t);
        let var = linalg::dot(g, g) / n as f64;
        if !(var > 0.0) {
            return Err(Error::NoCausalSnp(t));
        }
        sd.push((var * (1.0 - h2) / h2).sqrt());
    }

    let innovation = (1.0 - rho_e * rho_e).sqrt();
    let mut y = signal;
    for i in 0..n {
        let mut prev = 0.0;
        for t in 0..k {
            let eps: f64 = rng.sample(StandardNormal);
            let e = if t == 0 {
                eps
            } else {
                rho_e * prev + innovation * eps
            };
            prev = e;
            y[(i, t)] += sd[t] * e;
        }
    }
    PhenotypeMatrix::from_raw(&y, None)
}

/// Generates one replicate from `config.seed`.
pub fn simulate(config: &SimConfig) -> Result<SimDataset> {
    simulate_replicate(config, 0)
}

/// Generates replicate `replicate`: the ChaCha stream selected by the index
/// under `config.seed`, so replicates are independent and reproducible.
pub fn simulate_replicate(config: &SimConfig, replicate: u64) -> Result<SimDataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(replicate);

    let SimGenotypes { geno, raw, mafs } = gen_genotypes(
        config.n_samples,
        config.n_snps,
        config.rho_x,
        config.maf_range,
        &mut rng,
    )?;
    let truth = gen_effects(
        config.n_snps,
        config.n_traits,
        config.causal_frac,
        config.pleiotropy_g,
        &mut rng,
    )?;
    let pheno = gen_errors_and_traits(&geno, &truth, config.rho_e, config.h2, &mut rng)?;
    let realized_g = truth.pleiotropy();
    Ok(SimDataset {
        geno,
        raw_dosages: raw,
        mafs,
        pheno,
        truth,
        realized_g,
    })
}

/// Per-trait `Var(X β_k) / Var(Y_k)`.
pub fn realized_heritability(data: &SimDataset) -> Vec<f64> {
    let signal = data.geno.data().matmul(data.truth.beta());
    (0..data.pheno.n_traits())
        .map(|k| {
            let g = signal.col(k);
            let y = data.pheno.column(k);
            linalg::dot(g, g) / linalg::dot(y, y)
        })
        .collect()
}
