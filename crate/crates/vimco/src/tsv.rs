//! Tab-separated tables: phenotypes, genotype interchange, simulation truth
//! and association reports.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! written table reads back bit-identically.

use std::collections::HashMap;
use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use vimco_core::{AssociationReport, Matrix, PhenotypeMatrix, SparseEffects};

use crate::genotypes::RawGenotypes;

/// Missing-value token written for absent genotype calls.
pub const NA: &str = "NA";

/// Problems in a delimited table.
#[derive(Debug, thiserror::Error)]
pub enum TableError {
    /// A row names a sample absent from the reference sample list.
    #[error("{path}:{line}: sample {sample:?} is not in the genotype sample list")]
    UnknownSample {
        /// Table path.
        path: PathBuf,
        /// One-based line.
        line: usize,
        /// Offending identifier.
        sample: String,
    },

    /// A reference sample has no row in the table.
    #[error("{path}: no row for genotyped sample {sample:?}")]
    AbsentSample {
        /// Table path.
        path: PathBuf,
        /// Identifier without a row.
        sample: String,
    },

    /// The same sample appears twice.
    #[error("{path}:{line}: duplicate sample {sample:?}")]
    DuplicateSample {
        /// Table path.
        path: PathBuf,
        /// One-based line.
        line: usize,
        /// Repeated identifier.
        sample: String,
    },

    /// An empty or `NA`-style cell where a number is required.
    #[error("{path}:{line}: missing value in column {column:?}")]
    MissingValue {
        /// Table path.
        path: PathBuf,
        /// One-based line.
        line: usize,
        /// Column header.
        column: String,
    },

    /// A cell that does not parse as a number.
    #[error("{path}:{line}: non-numeric value {value:?} in column {column:?}")]
    NonNumeric {
        /// Table path.
        path: PathBuf,
        /// One-based line.
        line: usize,
        /// Column header.
        column: String,
        /// Cell text.
        value: String,
    },

    /// Wrong header or a row with the wrong number of cells.
    #[error("{path}:{line}: {message}")]
    Malformed {
        /// Table path.
        path: PathBuf,
        /// One-based line.
        line: usize,
        /// What was wrong.
        message: String,
    },

    /// Filesystem failure.
    #[error("{path}: {source}")]
    Io {
        /// Table path.
        path: PathBuf,
        /// Underlying error.
        source: io::Error,
    },
}

type Result<T> = std::result::Result<T, TableError>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> TableError + '_ {
    move |source| TableError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn is_missing_token(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "na" | "NaN" | "nan" | "." | "-9")
}

struct Table {
    path: PathBuf,
    header: Vec<String>,
    rows: Vec<(usize, Vec<String>)>,
}

fn read_table(path: &Path) -> Result<Table> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, line)) => {
                let line = line.map_err(io_err(path))?;
                if !line.trim().is_empty() {
                    break split(&line);
                }
            }
            None => {
                return Err(TableError::Malformed {
                    path: path.to_path_buf(),
                    line: 1,
                    message: "empty file".into(),
                })
            }
        }
    };
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let cells = split(&line);
        if cells.len() != header.len() {
            return Err(TableError::Malformed {
                path: path.to_path_buf(),
                line: idx + 1,
                message: format!("{} cells but {} header columns", cells.len(), header.len()),
            });
        }
        rows.push((idx + 1, cells));
    }
    Ok(Table {
        path: path.to_path_buf(),
        header,
        rows,
    })
}

fn split(line: &str) -> Vec<String> {
    line.trim_end_matches(['\r', '\n'])
        .split('\t')
        .map(|c| c.trim().to_owned())
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(
        fs::File::create(path).map_err(io_err(path))?,
    ))
}

/// Phenotypes as read, before alignment and centering.
#[derive(Debug, Clone, PartialEq)]
pub struct PhenotypeTable {
    /// Sample identifiers in file order.
    pub sample_ids: Vec<String>,
    /// Trait names from the header.
    pub trait_ids: Vec<String>,
    /// `N × K` values.
    pub values: Matrix,
}

/// Parses `sample_id<TAB>trait...` with one numeric row per sample; any
/// missing cell is an error.
pub fn read_pheno_table(path: &Path) -> Result<PhenotypeTable> {
    parse_pheno(path).map(|(table, _)| table)
}

fn parse_pheno(path: &Path) -> Result<(PhenotypeTable, Vec<usize>)> {
    let table = read_table(path)?;
    if table.header.len() < 2 || table.header[0] != "sample_id" {
        return Err(TableError::Malformed {
            path: table.path,
            line: 1,
            message: "header must be sample_id followed by at least one trait".into(),
        });
    }
    let trait_ids = table.header[1..].to_vec();
    let n = table.rows.len();
    let k = trait_ids.len();
    let mut values = Matrix::zeros(n, k);
    let mut sample_ids = Vec::with_capacity(n);
    for (i, (line, cells)) in table.rows.iter().enumerate() {
        sample_ids.push(cells[0].clone());
        for t in 0..k {
            let cell = &cells[t + 1];
            if is_missing_token(cell) {
                return Err(TableError::MissingValue {
                    path: table.path.clone(),
                    line: *line,
                    column: trait_ids[t].clone(),
                });
            }
            values[(i, t)] = match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => v,
                _ => {
                    return Err(TableError::NonNumeric {
                        path: table.path.clone(),
                        line: *line,
                        column: trait_ids[t].clone(),
                        value: cell.clone(),
                    })
                }
            };
        }
    }
    let lines = table.rows.iter().map(|r| r.0).collect();
    Ok((
        PhenotypeTable {
            sample_ids,
            trait_ids,
            values,
        },
        lines,
    ))
}

/// Reads a phenotype table, reorders its rows to `sample_order` (the
/// `.fam` or genotype-table order) and centers each trait.
pub fn load_pheno_tsv(path: &Path, sample_order: &[String]) -> crate::Result<PhenotypeMatrix> {
    let (table, lines) = parse_pheno(path)?;
    let position: HashMap<&str, usize> = sample_order
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let mut row_of = vec![usize::MAX; sample_order.len()];
    for (r, id) in table.sample_ids.iter().enumerate() {
        let Some(&target) = position.get(id.as_str()) else {
            return Err(TableError::UnknownSample {
                path: path.to_path_buf(),
                line: lines[r],
                sample: id.clone(),
            }
            .into());
        };
        if row_of[target] != usize::MAX {
            return Err(TableError::DuplicateSample {
                path: path.to_path_buf(),
                line: lines[r],
                sample: id.clone(),
            }
            .into());
        }
        row_of[target] = r;
    }
    if let Some(i) = row_of.iter().position(|&r| r == usize::MAX) {
        return Err(TableError::AbsentSample {
            path: path.to_path_buf(),
            sample: sample_order[i].clone(),
        }
        .into());
    }
    let k = table.trait_ids.len();
    let mut aligned = Matrix::zeros(sample_order.len(), k);
    for (i, &r) in row_of.iter().enumerate() {
        for t in 0..k {
            aligned[(i, t)] = table.values[(r, t)];
        }
    }
    Ok(PhenotypeMatrix::from_raw(&aligned, Some(table.trait_ids))?)
}

/// Writes `sample_id<TAB>trait...` rows.
pub fn write_pheno_tsv(
    path: &Path,
    sample_ids: &[String],
    trait_ids: &[String],
    values: &Matrix,
) -> Result<()> {
    let mut w = create(path)?;
    let e = io_err(path);
    let mut body = || -> io::Result<()> {
        write!(w, "sample_id")?;
        for t in trait_ids {
            write!(w, "\t{t}")?;
        }
        writeln!(w)?;
        for (i, s) in sample_ids.iter().enumerate() {
            write!(w, "{s}")?;
            for t in 0..trait_ids.len() {
                write!(w, "\t{}", values[(i, t)])?;
            }
            writeln!(w)?;
        }
        w.flush()
    };
    body().map_err(e)
}

/// Genotype interchange table: header `snp_id<TAB>sample...`, one row per
/// SNP, calls `0`/`1`/`2` or `NA`.
pub fn write_geno_tsv(
    path: &Path,
    snp_ids: &[String],
    sample_ids: &[String],
    raw: &RawGenotypes,
) -> Result<()> {
    let mut w = create(path)?;
    let e = io_err(path);
    let mut body = || -> io::Result<()> {
        write!(w, "snp_id")?;
        for s in sample_ids {
            write!(w, "\t{s}")?;
        }
        writeln!(w)?;
        for (j, id) in snp_ids.iter().enumerate() {
            w.write_all(id.as_bytes())?;
            for i in 0..raw.n_samples() {
                match raw.get(i, j) {
                    Some(c) => write!(w, "\t{c}")?,
                    None => write!(w, "\t{NA}")?,
                }
            }
            writeln!(w)?;
        }
        w.flush()
    };
    body().map_err(e)
}

/// Genotypes parsed from a genotype table.
#[derive(Debug, Clone, PartialEq)]
pub struct GenotypeTable {
    /// SNP identifiers in row order.
    pub snp_ids: Vec<String>,
    /// Sample identifiers from the header.
    pub sample_ids: Vec<String>,
    /// Calls.
    pub raw: RawGenotypes,
}

/// Reads a table written by [`write_geno_tsv`].
pub fn read_geno_tsv(path: &Path) -> Result<GenotypeTable> {
    let table = read_table(path)?;
    if table.header.first().map(String::as_str) != Some("snp_id") {
        return Err(TableError::Malformed {
            path: table.path,
            line: 1,
            message: "header must start with snp_id".into(),
        });
    }
    let sample_ids = table.header[1..].to_vec();
    let n = sample_ids.len();
    let mut raw = RawGenotypes::missing(n, table.rows.len());
    let mut snp_ids = Vec::with_capacity(table.rows.len());
    for (j, (line, cells)) in table.rows.iter().enumerate() {
        snp_ids.push(cells[0].clone());
        for i in 0..n {
            let cell = cells[i + 1].as_str();
            let call = match cell {
                "0" => Some(0),
                "1" => Some(1),
                "2" => Some(2),
                c if is_missing_token(c) => None,
                other => {
                    return Err(TableError::NonNumeric {
                        path: table.path.clone(),
                        line: *line,
                        column: sample_ids[i].clone(),
                        value: other.to_owned(),
                    })
                }
            };
            raw.set(i, j, call);
        }
    }
    Ok(GenotypeTable {
        snp_ids,
        sample_ids,
        raw,
    })
}

/// Writes the nonzero effects as `snp_id<TAB>trait_id<TAB>beta`.
pub fn write_truth_tsv(
    path: &Path,
    snp_ids: &[String],
    trait_ids: &[String],
    truth: &SparseEffects,
) -> Result<()> {
    let mut w = create(path)?;
    let e = io_err(path);
    let mut body = || -> io::Result<()> {
        writeln!(w, "snp_id\ttrait_id\tbeta")?;
        for (t, trait_id) in trait_ids.iter().enumerate() {
            for (j, snp_id) in snp_ids.iter().enumerate() {
                if truth.gamma(j, t) {
                    writeln!(w, "{snp_id}\t{trait_id}\t{}", truth.beta()[(j, t)])?;
                }
            }
        }
        w.flush()
    };
    body().map_err(e)
}

/// Reads a truth table against known SNP and trait labels.
pub fn read_truth_tsv(
    path: &Path,
    snp_ids: &[String],
    trait_ids: &[String],
) -> Result<SparseEffects> {
    let table = read_table(path)?;
    if table.header != ["snp_id", "trait_id", "beta"] {
        return Err(TableError::Malformed {
            path: table.path,
            line: 1,
            message: "header must be snp_id, trait_id, beta".into(),
        });
    }
    let snp_pos: HashMap<&str, usize> = snp_ids
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let trait_pos: HashMap<&str, usize> = trait_ids
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let (p, k) = (snp_ids.len(), trait_ids.len());
    let mut gamma = vec![false; p * k];
    let mut beta = Matrix::zeros(p, k);
    for (line, cells) in &table.rows {
        let malformed = |message: String| TableError::Malformed {
            path: table.path.clone(),
            line: *line,
            message,
        };
        let j = *snp_pos
            .get(cells[0].as_str())
            .ok_or_else(|| malformed(format!("unknown SNP {:?}", cells[0])))?;
        let t = *trait_pos
            .get(cells[1].as_str())
            .ok_or_else(|| malformed(format!("unknown trait {:?}", cells[1])))?;
        let b: f64 = cells[2].parse().map_err(|_| TableError::NonNumeric {
            path: table.path.clone(),
            line: *line,
            column: "beta".into(),
            value: cells[2].clone(),
        })?;
        gamma[t * p + j] = true;
        beta[(j, t)] = b;
    }
    Ok(SparseEffects::new(gamma, beta).expect("shapes agree by construction"))
}

/// Writes `snp_id, trait_id, alpha, lfdr, rejected` for every pair,
/// trait by trait.
pub fn write_assoc_tsv(
    path: &Path,
    snp_ids: &[String],
    trait_ids: &[String],
    alpha: &Matrix,
    report: &AssociationReport,
) -> Result<()> {
    let p = snp_ids.len();
    let mut rejected = vec![false; p * trait_ids.len()];
    for &(j, t) in &report.rejections {
        rejected[t * p + j] = true;
    }
    let mut w = create(path)?;
    let e = io_err(path);
    let mut body = || -> io::Result<()> {
        writeln!(w, "snp_id\ttrait_id\talpha\tlfdr\trejected")?;
        for (t, trait_id) in trait_ids.iter().enumerate() {
            for (j, snp_id) in snp_ids.iter().enumerate() {
                writeln!(
                    w,
                    "{snp_id}\t{trait_id}\t{}\t{}\t{}",
                    alpha[(j, t)],
                    report.lfdr[(j, t)],
                    u8::from(rejected[t * p + j])
                )?;
            }
        }
        w.flush()
    };
    body().map_err(e)
}
