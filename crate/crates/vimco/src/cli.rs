//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bench::BenchArgs;
use crate::checkpoint::FitMode;
use crate::commands::{
    run_assoc, run_bench_command, run_fit, run_oracle, run_simulate, AssocArgs, FitArgs,
    GenoFormat, OracleArgs, SimulateArgs,
};
use crate::config::{resolve_threads, FileConfig, QcSection};
use crate::error::{Result, VimcoError};
use crate::manifest::Manifest;
use crate::qc::QcConfig;

/// Multi-trait variational Bayes association mapping.
#[derive(Debug, Parser)]
#[command(name = "vimco", version, about)]
pub struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (falls back to VIMCO_THREADS, then the config file).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true)]
    pub log_level: Option<String>,
    /// Output directory.
    #[arg(short, long, global = true)]
    pub out: Option<PathBuf>,
    #[allow(missing_docs)]
    #[command(subcommand)]
    pub command: Command,
}

/// Subcommands.
#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate genotypes, correlated traits and the true effects.
    Simulate(SimulateFlags),
    /// Fit the model (per-trait warm start, then the joint fit).
    Fit(FitFlags),
    /// Threshold a fitted model at a global FDR.
    Assoc(AssocFlags),
    /// Replicated simulation study over a parameter grid.
    Bench(BenchFlags),
    /// Exact posterior by enumeration on a tiny data set.
    #[command(hide = true)]
    Oracle(OracleFlags),
}

#[derive(Debug, Args)]
#[allow(missing_docs)]
pub struct SimulateFlags {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub rho_x: Option<f64>,
    #[arg(long)]
    pub rho_e: Option<f64>,
    #[arg(long)]
    pub g: Option<f64>,
    #[arg(long)]
    pub h2: Option<f64>,
    #[arg(long)]
    pub causal_frac: Option<f64>,
    #[arg(long)]
    pub maf_min: Option<f64>,
    #[arg(long)]
    pub maf_max: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicate: Option<u64>,
    #[arg(long, value_enum)]
    pub geno_format: Option<GenoFormat>,
    /// Re-run the configuration recorded in a manifest.
    #[arg(long)]
    pub replay: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[allow(missing_docs)]
pub struct QcFlags {
    #[arg(long)]
    pub min_maf: Option<f64>,
    #[arg(long)]
    pub max_missing_rate: Option<f64>,
    #[arg(long)]
    pub prune_r2: Option<f64>,
    #[arg(long)]
    pub prune_window: Option<usize>,
}

#[derive(Debug, Args)]
#[allow(missing_docs)]
pub struct FitFlags {
    /// Genotype table (.tsv) or PLINK prefix.
    #[arg(long)]
    pub geno: Option<PathBuf>,
    /// Phenotype table.
    #[arg(long)]
    pub pheno: Option<PathBuf>,
    /// vimco (joint) or bvsr (per trait only).
    #[arg(long, value_enum)]
    pub mode: Option<FitMode>,
    /// Skip the per-trait warm start.
    #[arg(long)]
    pub single_phase: bool,
    /// Continue from a checkpoint.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Shuffle coordinate order every sweep.
    #[arg(long)]
    pub shuffle: bool,
    /// LD-prune SNPs after QC.
    #[arg(long)]
    pub prune: bool,
    #[command(flatten)]
    pub qc: QcFlags,
    #[arg(long)]
    pub replay: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[allow(missing_docs)]
pub struct AssocFlags {
    /// Fit checkpoint.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Global FDR (default 0.1).
    #[arg(long)]
    pub target_fdr: Option<f64>,
    #[arg(long)]
    pub replay: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[allow(missing_docs)]
pub struct BenchFlags {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub h2: Option<f64>,
    #[arg(long)]
    pub causal_frac: Option<f64>,
    /// Comma-separated grid.
    #[arg(long, value_delimiter = ',')]
    pub rho_x: Option<Vec<f64>>,
    /// Comma-separated grid.
    #[arg(long, value_delimiter = ',')]
    pub rho_e: Option<Vec<f64>>,
    /// Comma-separated grid.
    #[arg(long, value_delimiter = ',')]
    pub g: Option<Vec<f64>>,
    #[arg(long)]
    pub replicates: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub target_fdr: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub block_r2: Option<f64>,
    #[arg(long)]
    pub block_window: Option<usize>,
    #[arg(long)]
    pub replay: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[allow(missing_docs)]
pub struct OracleFlags {
    #[arg(long)]
    pub geno: PathBuf,
    #[arg(long)]
    pub pheno: PathBuf,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

fn required<T>(value: Option<T>, what: &str) -> Result<T> {
    value.ok_or_else(|| VimcoError::Usage(format!("{what} is required")))
}

fn qc_config(flags: Option<&QcFlags>, file: &QcSection) -> QcConfig {
    let d = QcConfig::default();
    QcConfig {
        min_maf: flags
            .and_then(|f| f.min_maf)
            .or(file.min_maf)
            .unwrap_or(d.min_maf),
        max_missing_rate: flags
            .and_then(|f| f.max_missing_rate)
            .or(file.max_missing_rate)
            .unwrap_or(d.max_missing_rate),
        prune_r2: flags
            .and_then(|f| f.prune_r2)
            .or(file.prune_r2)
            .unwrap_or(d.prune_r2),
        prune_window: flags
            .and_then(|f| f.prune_window)
            .or(file.prune_window)
            .unwrap_or(d.prune_window),
    }
}

fn replayed<C: for<'de> serde::Deserialize<'de>>(path: &Path, command: &str) -> Result<C> {
    Manifest::load(path)?.config_for(command)
}

fn simulate_args(f: &SimulateFlags, file: &FileConfig) -> Result<SimulateArgs> {
    if let Some(path) = &f.replay {
        return replayed(path, "simulate");
    }
    let s = &file.simulate;
    let d = SimulateArgs::default();
    Ok(SimulateArgs {
        n_samples: f.n.or(s.n).unwrap_or(d.n_samples),
        n_snps: f.p.or(s.p).unwrap_or(d.n_snps),
        n_traits: f.k.or(s.k).unwrap_or(d.n_traits),
        rho_x: f.rho_x.or(s.rho_x).unwrap_or(d.rho_x),
        rho_e: f.rho_e.or(s.rho_e).unwrap_or(d.rho_e),
        g: f.g.or(s.g).unwrap_or(d.g),
        h2: f.h2.or(s.h2).unwrap_or(d.h2),
        causal_frac: f.causal_frac.or(s.causal_frac).unwrap_or(d.causal_frac),
        maf_range: (
            f.maf_min.or(s.maf_min).unwrap_or(d.maf_range.0),
            f.maf_max.or(s.maf_max).unwrap_or(d.maf_range.1),
        ),
        seed: f.seed.or(s.seed).unwrap_or(d.seed),
        replicate: f.replicate.or(s.replicate).unwrap_or(d.replicate),
        geno_format: f.geno_format.or(s.geno_format).unwrap_or(d.geno_format),
    })
}

fn fit_args(f: &FitFlags, file: &FileConfig) -> Result<FitArgs> {
    if let Some(path) = &f.replay {
        return replayed(path, "fit");
    }
    let s = &file.fit;
    let geno = required(f.geno.clone().or(s.geno.clone()), "--geno")?;
    let pheno = required(f.pheno.clone().or(s.pheno.clone()), "--pheno")?;
    let d = FitArgs::new(geno, pheno);
    Ok(FitArgs {
        mode: f.mode.or(s.mode).unwrap_or(d.mode),
        single_phase: f.single_phase || s.single_phase.unwrap_or(false),
        resume: f.resume.clone(),
        max_iters: f.max_iters.or(s.max_iters).unwrap_or(d.max_iters),
        elbo_rel_tol: f.tol.or(s.tol).unwrap_or(d.elbo_rel_tol),
        seed: f.seed.or(s.seed).unwrap_or(d.seed),
        shuffle: f.shuffle || s.shuffle.unwrap_or(false),
        qc: qc_config(Some(&f.qc), &file.qc),
        prune: f.prune || s.prune.unwrap_or(false),
        ..d
    })
}

fn assoc_args(f: &AssocFlags, file: &FileConfig) -> Result<AssocArgs> {
    if let Some(path) = &f.replay {
        return replayed(path, "assoc");
    }
    Ok(AssocArgs {
        checkpoint: required(
            f.checkpoint.clone().or(file.assoc.checkpoint.clone()),
            "--checkpoint",
        )?,
        target_fdr: f.target_fdr.or(file.assoc.target_fdr).unwrap_or(0.1),
    })
}

fn bench_args(f: &BenchFlags, file: &FileConfig) -> Result<BenchArgs> {
    if let Some(path) = &f.replay {
        return replayed(path, "bench");
    }
    let s = &file.bench;
    let d = BenchArgs::default();
    Ok(BenchArgs {
        n_samples: f.n.or(s.n).unwrap_or(d.n_samples),
        n_snps: f.p.or(s.p).unwrap_or(d.n_snps),
        n_traits: f.k.or(s.k).unwrap_or(d.n_traits),
        h2: f.h2.or(s.h2).unwrap_or(d.h2),
        causal_frac: f.causal_frac.or(s.causal_frac).unwrap_or(d.causal_frac),
        maf_range: d.maf_range,
        rho_x: f.rho_x.clone().or(s.rho_x.clone()).unwrap_or(d.rho_x),
        rho_e: f.rho_e.clone().or(s.rho_e.clone()).unwrap_or(d.rho_e),
        g: f.g.clone().or(s.g.clone()).unwrap_or(d.g),
        replicates: f.replicates.or(s.replicates).unwrap_or(d.replicates),
        seed: f.seed.or(s.seed).unwrap_or(d.seed),
        target_fdr: f.target_fdr.or(s.target_fdr).unwrap_or(d.target_fdr),
        max_iters: f.max_iters.or(s.max_iters).unwrap_or(d.max_iters),
        elbo_rel_tol: f.tol.or(s.tol).unwrap_or(d.elbo_rel_tol),
        block_r2: f.block_r2.or(s.block_r2).unwrap_or(d.block_r2),
        block_window: f.block_window.or(s.block_window).unwrap_or(d.block_window),
    })
}

fn init_logging(level: &str) -> Result<()> {
    let filter: log::LevelFilter = level
        .parse()
        .map_err(|_| VimcoError::Usage(format!("unknown log level {level:?}")))?;
    let _ = env_logger::Builder::new()
        .filter_level(filter)
        .format_timestamp(None)
        .try_init();
    Ok(())
}

/// Runs a parsed command line; returns the files written.
pub fn dispatch(cli: &Cli) -> Result<Vec<String>> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let level = cli
        .log_level
        .clone()
        .or(file.log_level.clone())
        .unwrap_or_else(|| "warn".into());
    init_logging(&level)?;
    let out = required(
        cli.out.clone().or(file.output_dir.clone()),
        "output directory (--out)",
    )?;
    match &cli.command {
        Command::Simulate(f) => run_simulate(&simulate_args(f, &file)?, &out),
        Command::Fit(f) => run_fit(&fit_args(f, &file)?, &out),
        Command::Assoc(f) => run_assoc(&assoc_args(f, &file)?, &out),
        Command::Bench(f) => {
            let threads = resolve_threads(cli.threads, file.threads)?;
            run_bench_command(&bench_args(f, &file)?, threads, &out)
        }
        Command::Oracle(f) => run_oracle(
            &OracleArgs {
                geno: f.geno.clone(),
                pheno: f.pheno.clone(),
                checkpoint: f.checkpoint.clone(),
                qc: qc_config(None, &file.qc),
            },
            &out,
        ),
    }
}

/// Parses `args`, runs the command and returns the process exit status:
/// 0 success, 1 usage error, 2 data error, 3 numerical failure.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(files) => {
            for f in files {
                log::info!("wrote {f}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.kind().code()
        }
    }
}
