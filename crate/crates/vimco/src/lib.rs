//! File formats, quality control, run orchestration and the command-line
//! driver around [`vimco_core`].
//!
//! - [`plink`]: PLINK 1 `.bed`/`.bim`/`.fam` reading and writing
//! - [`genotypes`], [`qc`]: raw calls, MAF/missingness filters, LD pruning
//! - [`tsv`]: phenotype, genotype, truth and association tables
//! - [`checkpoint`], [`manifest`]: JSON fit snapshots and run manifests
//! - [`bench`](mod@bench): the replicated simulation study
//! - [`commands`], [`cli`], [`config`]: subcommand drivers and their inputs

#![warn(missing_docs)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config;
mod error;
pub mod genotypes;
pub mod manifest;
pub mod plink;
pub mod qc;
pub mod tsv;

pub use error::{ExitKind, Result, VimcoError};
pub use vimco_core;
