//! Subcommand drivers. Each takes fully resolved arguments plus an output
//! directory, writes its files and a manifest, and returns the file names.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vimco_core::inference::{associate, reject_h0b};
use vimco_core::oracle::exact_posterior;
use vimco_core::simgen::{simulate_replicate, SimConfig};
use vimco_core::vbem::{fit, fit_two_phase, FitConfig, FitResult, Init, PrecisionMode};
use vimco_core::{GenotypeMatrix, ModelParams, PhenotypeMatrix};

use crate::bench::{run_bench, write_results_tsv, BenchArgs};
use crate::checkpoint::{Checkpoint, FitInputs, FitMode};
use crate::error::{Result, VimcoError};
use crate::genotypes::{to_genotype_matrix, RawGenotypes};
use crate::manifest::Manifest;
use crate::plink::{read_plink, write_plink, PlinkDataset, SampleMeta, SnpMeta};
use crate::qc::{ld_prune, qc_filter, QcConfig, QcReport};
use crate::tsv::{
    load_pheno_tsv, read_geno_tsv, write_assoc_tsv, write_geno_tsv, write_pheno_tsv,
    write_truth_tsv,
};

/// On-disk genotype representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GenoFormat {
    /// SNP-major tab-separated table.
    Tsv,
    /// PLINK `.bed`/`.bim`/`.fam`.
    Plink,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| VimcoError::io(dir, e))
}

fn labels(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn finish<C: Serialize>(
    command: &str,
    config: &C,
    out: &Path,
    files: Vec<String>,
) -> Result<Vec<String>> {
    let names: Vec<&str> = files.iter().map(String::as_str).collect();
    Manifest::describe(command, config, out, &names)?.save(out)?;
    let mut all = files;
    all.push(crate::manifest::MANIFEST_FILE.into());
    Ok(all)
}

/// Arguments of `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateArgs {
    /// Individuals.
    pub n_samples: usize,
    /// SNPs.
    pub n_snps: usize,
    /// Traits.
    pub n_traits: usize,
    /// Genotype AR parameter.
    pub rho_x: f64,
    /// Error AR parameter.
    pub rho_e: f64,
    /// Target pleiotropy.
    pub g: f64,
    /// Heritability.
    pub h2: f64,
    /// Causal fraction per trait.
    pub causal_frac: f64,
    /// MAF draw range.
    pub maf_range: (f64, f64),
    /// RNG seed.
    pub seed: u64,
    /// Replicate stream under the seed.
    pub replicate: u64,
    /// Genotype output format.
    pub geno_format: GenoFormat,
}

impl Default for SimulateArgs {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            n_samples: d.n_samples,
            n_snps: d.n_snps,
            n_traits: d.n_traits,
            rho_x: d.rho_x,
            rho_e: d.rho_e,
            g: d.pleiotropy_g,
            h2: d.h2,
            causal_frac: d.causal_frac,
            maf_range: d.maf_range,
            seed: d.seed,
            replicate: 0,
            geno_format: GenoFormat::Tsv,
        }
    }
}

impl SimulateArgs {
    /// Core simulation settings.
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            n_samples: self.n_samples,
            n_snps: self.n_snps,
            n_traits: self.n_traits,
            rho_x: self.rho_x,
            rho_e: self.rho_e,
            causal_frac: self.causal_frac,
            pleiotropy_g: self.g,
            h2: self.h2,
            maf_range: self.maf_range,
            seed: self.seed,
        }
    }
}

/// Writes genotypes, `phenotypes.tsv`, `truth.tsv` and the manifest.
pub fn run_simulate(args: &SimulateArgs, out: &Path) -> Result<Vec<String>> {
    let sim = args.sim_config();
    let data = simulate_replicate(&sim, args.replicate)?;
    ensure_dir(out)?;
    let samples = labels("ind", sim.n_samples);
    let snps = labels("snp", sim.n_snps);
    let traits = labels("trait", sim.n_traits);
    let raw = RawGenotypes::from_dosages(&data.raw_dosages)?;

    let mut files = Vec::new();
    match args.geno_format {
        GenoFormat::Tsv => {
            write_geno_tsv(&out.join("genotypes.tsv"), &snps, &samples, &raw)?;
            files.push("genotypes.tsv".to_owned());
        }
        GenoFormat::Plink => {
            let bim: Vec<SnpMeta> = snps
                .iter()
                .enumerate()
                .map(|(j, id)| SnpMeta::synthetic(id.clone(), j))
                .collect();
            let fam: Vec<SampleMeta> = samples.iter().map(SampleMeta::founder).collect();
            write_plink(&out.join("genotypes"), &raw, &bim, &fam)?;
            files.extend(["genotypes.bed", "genotypes.bim", "genotypes.fam"].map(String::from));
        }
    }
    write_pheno_tsv(
        &out.join("phenotypes.tsv"),
        &samples,
        &traits,
        data.pheno.data(),
    )?;
    write_truth_tsv(&out.join("truth.tsv"), &snps, &traits, &data.truth)?;
    files.extend(["phenotypes.tsv", "truth.tsv"].map(String::from));
    log::info!(
        "simulated {} x {} genotypes, {} traits, realized g = {}",
        sim.n_samples,
        sim.n_snps,
        sim.n_traits,
        data.realized_g
    );
    finish("simulate", args, out, files)
}

/// Model-ready data after QC, imputation and centering.
#[derive(Debug, Clone)]
pub struct LoadedData {
    /// Centered design.
    pub geno: GenotypeMatrix,
    /// Centered traits aligned to the genotype samples.
    pub pheno: PhenotypeMatrix,
    /// Samples in row order.
    pub sample_ids: Vec<String>,
    /// QC outcome.
    pub qc_report: QcReport,
    /// SNPs removed by LD pruning.
    pub n_pruned_out: usize,
}

fn is_table(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("tsv" | "txt")
    )
}

/// Reads genotypes (a `.tsv` table or a PLINK prefix) and phenotypes,
/// applies QC and optional pruning, mean-imputes and centers.
pub fn load_data(geno: &Path, pheno: &Path, qc: &QcConfig, prune: bool) -> Result<LoadedData> {
    qc.validate()?;
    let (raw, snp_ids, sample_ids) = if is_table(geno) {
        let table = read_geno_tsv(geno)?;
        (table.raw, table.snp_ids, table.sample_ids)
    } else {
        let dataset = PlinkDataset::open(geno)?;
        let raw = read_plink(&dataset)?;
        (raw, dataset.snp_ids(), dataset.sample_ids())
    };
    let (filtered, kept, qc_report) = qc_filter(&raw, qc);
    let mut ids: Vec<String> = kept.iter().map(|&j| snp_ids[j].clone()).collect();
    let mut filtered = filtered;
    let mut n_pruned_out = 0;
    if prune {
        let survivors = ld_prune(&filtered, qc.prune_r2, qc.prune_window)?;
        n_pruned_out = filtered.n_snps() - survivors.len();
        filtered = filtered.select_snps(&survivors);
        ids = survivors.iter().map(|&j| ids[j].clone()).collect();
    }
    if filtered.n_snps() == 0 {
        return Err(VimcoError::Usage("no SNP survived quality control".into()));
    }
    let geno = to_genotype_matrix(&filtered, ids)?;
    let pheno = load_pheno_tsv(pheno, &sample_ids)?;
    log::info!(
        "loaded {} samples, {} of {} SNPs after QC, {} traits",
        geno.n_samples(),
        geno.n_snps(),
        qc_report.input,
        pheno.n_traits()
    );
    Ok(LoadedData {
        geno,
        pheno,
        sample_ids,
        qc_report,
        n_pruned_out,
    })
}

/// Arguments of `fit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitArgs {
    /// Genotype table or PLINK prefix.
    pub geno: PathBuf,
    /// Phenotype table.
    pub pheno: PathBuf,
    /// `vimco` (joint) or `bvsr` (per trait, stops after phase one).
    pub mode: FitMode,
    /// Fit the requested mode directly from the null start.
    pub single_phase: bool,
    /// Checkpoint to continue from.
    pub resume: Option<PathBuf>,
    /// Iteration cap per phase.
    pub max_iters: usize,
    /// Relative ELBO tolerance.
    pub elbo_rel_tol: f64,
    /// Coordinate-shuffle seed.
    pub seed: u64,
    /// Shuffle the update order each sweep.
    pub shuffle: bool,
    /// QC thresholds.
    pub qc: QcConfig,
    /// Run LD pruning after QC.
    pub prune: bool,
}

impl FitArgs {
    /// Defaults for the given inputs.
    pub fn new(geno: PathBuf, pheno: PathBuf) -> Self {
        let d = FitConfig::default();
        Self {
            geno,
            pheno,
            mode: FitMode::Vimco,
            single_phase: false,
            resume: None,
            max_iters: d.max_iters,
            elbo_rel_tol: d.elbo_rel_tol,
            seed: d.seed,
            shuffle: d.shuffle_coordinates,
            qc: QcConfig::default(),
            prune: false,
        }
    }

    fn fit_config(&self, mode: PrecisionMode, init: Init) -> FitConfig {
        FitConfig {
            max_iters: self.max_iters,
            elbo_rel_tol: self.elbo_rel_tol,
            mode,
            init,
            seed: self.seed,
            shuffle_coordinates: self.shuffle,
            ..FitConfig::default()
        }
    }
}

fn write_trace(path: &Path, phases: &[(&str, &FitResult)]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path).map_err(|e| VimcoError::io(path, e))?);
    let mut body = || -> std::io::Result<()> {
        writeln!(w, "phase,iteration,step,elbo")?;
        for (phase, fit) in phases {
            for (i, value) in fit.step_trace.iter().enumerate() {
                let (iteration, step) = match i {
                    0 => (0, "init"),
                    i if i % 2 == 1 => (i.div_ceil(2), "e"),
                    i => (i / 2, "m"),
                };
                writeln!(w, "{phase},{iteration},{step},{value}")?;
            }
        }
        w.flush()
    };
    body().map_err(|e| VimcoError::io(path, e))
}

#[derive(Serialize)]
struct ParamsDoc<'a> {
    trait_ids: &'a [String],
    inclusion_probs: &'a [f64],
    slab_vars: &'a [f64],
    precision: Vec<Vec<f64>>,
    covariance: Vec<Vec<f64>>,
}

fn rows(m: &vimco_core::Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i)).collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("document serializes");
    fs::write(path, text + "\n").map_err(|e| VimcoError::io(path, e))
}

/// Fits and writes `checkpoint.json`, `elbo_trace.csv`, `params.json`,
/// `qc_report.json` and the manifest.
pub fn run_fit(args: &FitArgs, out: &Path) -> Result<Vec<String>> {
    let data = load_data(&args.geno, &args.pheno, &args.qc, args.prune)?;
    ensure_dir(out)?;
    let mode = args.mode.precision_mode();

    let phases: Vec<(&str, FitResult)> = if let Some(path) = &args.resume {
        let ck = Checkpoint::load(path)?;
        let state = ck.state(&data.geno, &data.pheno)?;
        let init = Init::WarmStart {
            state,
            params: ck.params()?,
        };
        let resumed = fit(&data.geno, &data.pheno, &args.fit_config(mode, init))?;
        if let (Some(last), Some(first)) = (ck.last_elbo(), resumed.step_trace.first()) {
            log::info!("resuming at ELBO {first} (checkpoint ended at {last})");
        }
        vec![("resume", resumed)]
    } else if args.mode == FitMode::Bvsr || args.single_phase {
        let res = fit(&data.geno, &data.pheno, &args.fit_config(mode, Init::Null))?;
        vec![(args.mode.label(), res)]
    } else {
        let (first, second) = fit_two_phase(
            &data.geno,
            &data.pheno,
            &args.fit_config(PrecisionMode::Full, Init::Null),
        )?;
        vec![("bvsr", first), ("vimco", second)]
    };
    let (_, last) = phases.last().expect("at least one phase");
    if !last.converged {
        log::warn!(
            "fit stopped at max_iters = {} before converging",
            args.max_iters
        );
    }

    let inputs = FitInputs {
        geno: args.geno.clone(),
        pheno: args.pheno.clone(),
        qc: args.qc,
        prune: args.prune,
    };
    Checkpoint::from_fit(
        last,
        args.mode,
        inputs,
        data.geno.snp_ids().to_vec(),
        data.pheno.trait_ids().to_vec(),
    )
    .save(&out.join("checkpoint.json"))?;
    let trace: Vec<(&str, &FitResult)> = phases.iter().map(|(p, f)| (*p, f)).collect();
    write_trace(&out.join("elbo_trace.csv"), &trace)?;
    write_json(
        &out.join("params.json"),
        &ParamsDoc {
            trait_ids: data.pheno.trait_ids(),
            inclusion_probs: last.params.inclusion_probs(),
            slab_vars: last.params.slab_vars(),
            precision: rows(last.params.precision()),
            covariance: rows(&last.params.covariance()),
        },
    )?;
    write_json(&out.join("qc_report.json"), &data.qc_report)?;
    log::info!(
        "fit finished after {} iterations, ELBO {}",
        last.n_iters,
        last.step_trace.last().copied().unwrap_or(f64::NAN)
    );
    let files = [
        "checkpoint.json",
        "elbo_trace.csv",
        "params.json",
        "qc_report.json",
    ];
    finish("fit", args, out, files.map(String::from).to_vec())
}

/// Arguments of `assoc`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssocArgs {
    /// Fit checkpoint.
    pub checkpoint: PathBuf,
    /// Global FDR; 0 rejects nothing.
    pub target_fdr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
/// Per-trait rejection count in the summary.
pub struct TraitCount {
    /// Trait label.
    pub trait_id: String,
    /// Rejected SNPs for the trait.
    pub rejections: usize,
}

/// `assoc_summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssocSummary {
    /// Requested global FDR.
    pub target_fdr: f64,
    /// lfdr cut-off, -1 when nothing is rejected.
    pub threshold_xi: f64,
    /// Rejected SNP-trait pairs.
    pub total_rejections: usize,
    /// Mean lfdr of the rejection set.
    pub estimated_fdr: f64,
    /// SNPs rejected for at least one trait.
    pub snps_any_trait: usize,
    /// Counts per trait.
    pub per_trait: Vec<TraitCount>,
}

/// Writes `assoc.tsv`, `assoc_summary.json` and the manifest.
pub fn run_assoc(args: &AssocArgs, out: &Path) -> Result<Vec<String>> {
    if !(0.0..1.0).contains(&args.target_fdr) {
        return Err(VimcoError::Usage(format!(
            "target FDR must be in [0, 1), got {}",
            args.target_fdr
        )));
    }
    let ck = Checkpoint::load(&args.checkpoint)?;
    let alpha = ck.alpha_matrix()?;
    let report = associate(&alpha, args.target_fdr);
    ensure_dir(out)?;
    write_assoc_tsv(
        &out.join("assoc.tsv"),
        &ck.snp_ids,
        &ck.trait_ids,
        &alpha,
        &report,
    )?;
    let summary = AssocSummary {
        target_fdr: args.target_fdr,
        threshold_xi: report.threshold_xi,
        total_rejections: report.rejections.len(),
        estimated_fdr: report.estimated_fdr(),
        snps_any_trait: reject_h0b(&report.rejections).len(),
        per_trait: ck
            .trait_ids
            .iter()
            .zip(report.counts_per_trait())
            .map(|(t, c)| TraitCount {
                trait_id: t.clone(),
                rejections: c,
            })
            .collect(),
    };
    write_json(&out.join("assoc_summary.json"), &summary)?;
    log::info!(
        "{} rejections at target FDR {} (xi = {})",
        summary.total_rejections,
        args.target_fdr,
        summary.threshold_xi
    );
    finish(
        "assoc",
        args,
        out,
        vec!["assoc.tsv".into(), "assoc_summary.json".into()],
    )
}

/// Writes `results.tsv` and the manifest.
pub fn run_bench_command(args: &BenchArgs, threads: usize, out: &Path) -> Result<Vec<String>> {
    let rows = run_bench(args, threads)?;
    ensure_dir(out)?;
    write_results_tsv(&out.join("results.tsv"), &rows)?;
    log::info!("wrote {} result rows", rows.len());
    finish("bench", args, out, vec!["results.tsv".into()])
}

/// Arguments of the hidden `oracle` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleArgs {
    /// Genotype table or PLINK prefix.
    pub geno: PathBuf,
    /// Phenotype table.
    pub pheno: PathBuf,
    /// Parameters and variational `α` to compare against; null start when absent.
    pub checkpoint: Option<PathBuf>,
    /// QC thresholds.
    pub qc: QcConfig,
}

#[derive(Serialize)]
struct OracleSummary {
    log_marginal: f64,
    configurations: usize,
    max_abs_alpha_diff: Option<f64>,
}

/// Exact enumeration on a tiny data set: `oracle.tsv`,
/// `oracle_summary.json` and the manifest.
pub fn run_oracle(args: &OracleArgs, out: &Path) -> Result<Vec<String>> {
    let data = load_data(&args.geno, &args.pheno, &args.qc, false)?;
    let ck = args
        .checkpoint
        .as_deref()
        .map(Checkpoint::load)
        .transpose()?;
    let params = match &ck {
        Some(ck) => ck.params()?,
        None => ModelParams::null_init(&data.pheno)?,
    };
    let exact = exact_posterior(&data.geno, &data.pheno, &params)?;
    let vb_alpha = match &ck {
        Some(ck) => Some(ck.state(&data.geno, &data.pheno)?.alpha().clone()),
        None => None,
    };
    ensure_dir(out)?;
    let path = out.join("oracle.tsv");
    let mut w = BufWriter::new(fs::File::create(&path).map_err(|e| VimcoError::io(&path, e))?);
    let mut body = || -> std::io::Result<()> {
        writeln!(w, "snp_id\ttrait_id\texact_alpha\tvb_alpha")?;
        for (t, trait_id) in data.pheno.trait_ids().iter().enumerate() {
            for (j, snp_id) in data.geno.snp_ids().iter().enumerate() {
                let vb = vb_alpha
                    .as_ref()
                    .map_or_else(|| "NA".to_owned(), |a| a[(j, t)].to_string());
                writeln!(
                    w,
                    "{snp_id}\t{trait_id}\t{}\t{vb}",
                    exact.inclusion_probs[(j, t)]
                )?;
            }
        }
        w.flush()
    };
    body().map_err(|e| VimcoError::io(&path, e))?;
    write_json(
        &out.join("oracle_summary.json"),
        &OracleSummary {
            log_marginal: exact.log_marginal,
            configurations: exact.config_log_probs.len(),
            max_abs_alpha_diff: vb_alpha.map(|a| a.max_abs_diff(&exact.inclusion_probs)),
        },
    )?;
    finish(
        "oracle",
        args,
        out,
        vec!["oracle.tsv".into(), "oracle_summary.json".into()],
    )
}
