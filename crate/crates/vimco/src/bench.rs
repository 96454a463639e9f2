//! Replicated simulation study: simulate, fit both modes, score both
//! hypotheses, one row per replicate, method and hypothesis.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vimco_core::inference::{
    any_trait_scores, associate, evaluate, evaluate_h0b, ld_blocks_from_genotypes, reject_h0b,
    EvalMetrics, DEFAULT_BLOCK_R2, DEFAULT_BLOCK_WINDOW,
};
use vimco_core::simgen::{simulate_replicate, SimConfig};
use vimco_core::vbem::{fit_two_phase, FitConfig};

use crate::error::{Result, VimcoError};

/// Grid and per-replicate settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchArgs {
    /// Individuals per replicate.
    pub n_samples: usize,
    /// SNPs per replicate.
    pub n_snps: usize,
    /// Traits.
    pub n_traits: usize,
    /// Heritability.
    pub h2: f64,
    /// Causal fraction per trait.
    pub causal_frac: f64,
    /// MAF draw range.
    pub maf_range: (f64, f64),
    /// Genotype AR parameters.
    pub rho_x: Vec<f64>,
    /// Error AR parameters.
    pub rho_e: Vec<f64>,
    /// Pleiotropy levels.
    pub g: Vec<f64>,
    /// Replicates per grid point.
    pub replicates: u64,
    /// Base seed; replicate `r` uses stream `r` at every grid point.
    pub seed: u64,
    /// Nominal global FDR.
    pub target_fdr: f64,
    /// Iteration cap per phase.
    pub max_iters: usize,
    /// Relative ELBO tolerance.
    pub elbo_rel_tol: f64,
    /// LD-block `r²` threshold for grouping discoveries.
    pub block_r2: f64,
    /// Maximum LD-block length.
    pub block_window: usize,
}

impl Default for BenchArgs {
    fn default() -> Self {
        let sim = SimConfig::default();
        let fit = FitConfig::default();
        Self {
            n_samples: sim.n_samples,
            n_snps: sim.n_snps,
            n_traits: sim.n_traits,
            h2: sim.h2,
            causal_frac: sim.causal_frac,
            maf_range: sim.maf_range,
            rho_x: vec![0.8],
            rho_e: vec![0.2, 0.5, 0.8],
            g: vec![0.0],
            replicates: 50,
            seed: 0,
            target_fdr: 0.1,
            max_iters: fit.max_iters,
            elbo_rel_tol: fit.elbo_rel_tol,
            block_r2: DEFAULT_BLOCK_R2,
            block_window: DEFAULT_BLOCK_WINDOW,
        }
    }
}

/// Fitting strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Joint fit with full `Θ`.
    Vimco,
    /// Per-trait fits.
    Bvsr,
}

/// Null hypothesis being scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Hypothesis {
    /// `β_jk = 0` for one pair.
    H0a,
    /// `β_j1 = … = β_jK = 0`.
    H0b,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Vimco => "vimco",
            Method::Bvsr => "bvsr",
        })
    }
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hypothesis::H0a => "H0a",
            Hypothesis::H0b => "H0b",
        })
    }
}

/// One results line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    /// Replicate index.
    pub replicate: u64,
    /// Fitting strategy.
    pub method: Method,
    /// Hypothesis scored.
    pub hypothesis: Hypothesis,
    /// Genotype AR parameter.
    pub rho_x: f64,
    /// Error AR parameter.
    pub rho_e: f64,
    /// Target pleiotropy.
    pub g: f64,
    /// Power.
    pub power: f64,
    /// LD-block-grouped empirical FDR.
    pub fdr: f64,
    /// Area under the ROC curve.
    pub auc: f64,
}

/// Header of the results table.
pub const RESULTS_HEADER: &str = "replicate\tmethod\thypothesis\trho_x\trho_e\tg\tpower\tfdr\tauc";

impl BenchArgs {
    /// Checks grid and scalar settings.
    pub fn validate(&self) -> Result<()> {
        for (name, grid) in [
            ("rho_x", &self.rho_x),
            ("rho_e", &self.rho_e),
            ("g", &self.g),
        ] {
            if grid.is_empty() {
                return Err(VimcoError::Usage(format!("{name} grid is empty")));
            }
        }
        if self.replicates == 0 {
            return Err(VimcoError::Usage("replicates must be at least 1".into()));
        }
        if !(self.target_fdr > 0.0 && self.target_fdr < 1.0) {
            return Err(VimcoError::Usage(format!(
                "target_fdr must be in (0, 1), got {}",
                self.target_fdr
            )));
        }
        if !(self.block_r2 > 0.0 && self.block_r2 < 1.0) || self.block_window == 0 {
            return Err(VimcoError::Usage("invalid LD block settings".into()));
        }
        for point in self.grid() {
            self.sim_config(point).validate()?;
        }
        self.fit_config().validate()?;
        Ok(())
    }

    /// `(rho_x, rho_e, g)` points in output order.
    pub fn grid(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for &rx in &self.rho_x {
            for &re in &self.rho_e {
                for &g in &self.g {
                    out.push((rx, re, g));
                }
            }
        }
        out
    }

    /// Simulation settings at a grid point.
    pub fn sim_config(&self, (rho_x, rho_e, g): (f64, f64, f64)) -> SimConfig {
        SimConfig {
            n_samples: self.n_samples,
            n_snps: self.n_snps,
            n_traits: self.n_traits,
            rho_x,
            rho_e,
            causal_frac: self.causal_frac,
            pleiotropy_g: g,
            h2: self.h2,
            maf_range: self.maf_range,
            seed: self.seed,
        }
    }

    /// Fit settings shared by both phases.
    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            max_iters: self.max_iters,
            elbo_rel_tol: self.elbo_rel_tol,
            ..FitConfig::default()
        }
    }
}

fn row(
    replicate: u64,
    method: Method,
    hypothesis: Hypothesis,
    (rho_x, rho_e, g): (f64, f64, f64),
    m: EvalMetrics,
) -> BenchRow {
    BenchRow {
        replicate,
        method,
        hypothesis,
        rho_x,
        rho_e,
        g,
        power: m.power,
        fdr: m.empirical_fdr,
        auc: m.auc,
    }
}

/// Simulates one replicate at one grid point and scores both methods on
/// both hypotheses: rows in the order (vimco, H0a), (vimco, H0b),
/// (bvsr, H0a), (bvsr, H0b).
pub fn run_replicate(
    args: &BenchArgs,
    point: (f64, f64, f64),
    replicate: u64,
) -> Result<Vec<BenchRow>> {
    let data = simulate_replicate(&args.sim_config(point), replicate)?;
    let (bvsr, vimco) = fit_two_phase(&data.geno, &data.pheno, &args.fit_config())?;
    let blocks = ld_blocks_from_genotypes(&data.geno, args.block_r2, args.block_window);
    let mut rows = Vec::with_capacity(4);
    for (method, fit) in [(Method::Vimco, &vimco), (Method::Bvsr, &bvsr)] {
        let alpha = fit.state.alpha();
        let report = associate(alpha, args.target_fdr);
        let h0a = evaluate(&report.rejections, &data.truth, &blocks, alpha)?;
        let snps = reject_h0b(&report.rejections);
        let h0b = evaluate_h0b(&snps, &data.truth, &blocks, &any_trait_scores(alpha))?;
        rows.push(row(replicate, method, Hypothesis::H0a, point, h0a));
        rows.push(row(replicate, method, Hypothesis::H0b, point, h0b));
    }
    Ok(rows)
}

/// Runs the full grid on a pool of `threads` workers. Rows come back in
/// grid, then replicate order regardless of scheduling.
pub fn run_bench(args: &BenchArgs, threads: usize) -> Result<Vec<BenchRow>> {
    args.validate()?;
    let tasks: Vec<((f64, f64, f64), u64)> = args
        .grid()
        .into_iter()
        .flat_map(|point| (0..args.replicates).map(move |r| (point, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| VimcoError::Usage(format!("thread pool: {e}")))?;
    let chunks: Vec<Vec<BenchRow>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(point, r)| {
                log::debug!("replicate {r} at {point:?}");
                run_replicate(args, point, r)
            })
            .collect::<Result<_>>()
    })?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Writes the long-format results table.
pub fn write_results_tsv(path: &Path, rows: &[BenchRow]) -> Result<()> {
    let io = |e| VimcoError::io(path, e);
    let mut w = BufWriter::new(fs::File::create(path).map_err(io)?);
    let mut body = || -> std::io::Result<()> {
        writeln!(w, "{RESULTS_HEADER}")?;
        for r in rows {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.replicate, r.method, r.hypothesis, r.rho_x, r.rho_e, r.g, r.power, r.fdr, r.auc
            )?;
        }
        w.flush()
    };
    body().map_err(|e| VimcoError::io(path, e))
}
