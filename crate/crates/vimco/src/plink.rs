//! PLINK 1 binary filesets (`.bed`, `.bim`, `.fam`), SNP-major mode only.
//!
//! Each SNP occupies `ceil(N / 4)` bytes after the three-byte header. Within
//! a byte the first sample sits in the two least significant bits:
//!
//! | bits | call                      | dosage of A1 |
//! |------|---------------------------|--------------|
//! | `00` | homozygous A1             | 2            |
//! | `01` | missing                   | -            |
//! | `10` | heterozygous              | 1            |
//! | `11` | homozygous A2             | 0            |

use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::genotypes::{RawGenotypes, MISSING};

/// Leading bytes of a SNP-major `.bed` file.
pub const BED_MAGIC: [u8; 3] = [0x6C, 0x1B, 0x01];

/// Failures while reading or writing a PLINK fileset.
#[derive(Debug, thiserror::Error)]
pub enum PlinkError {
    /// The header is not `6C 1B 01`.
    #[error("{path}: bad .bed header {found:02X?} (only SNP-major 6C 1B 01 is supported)")]
    BadMagic {
        /// `.bed` file.
        path: PathBuf,
        /// First bytes found (fewer than three if the file is shorter).
        found: Vec<u8>,
    },

    /// The `.bed` file is shorter than the `.bim`/`.fam` counts require.
    #[error("{path}: truncated .bed, expected {expected} bytes but found {found}")]
    TruncatedFile {
        /// `.bed` file.
        path: PathBuf,
        /// Required length.
        expected: u64,
        /// Actual length.
        found: u64,
    },

    /// `.bim`/`.fam` counts disagree with the `.bed` payload.
    #[error("{0}")]
    MetaMismatch(String),

    /// A `.bim` or `.fam` line could not be parsed.
    #[error("{path}:{line}: {message}")]
    Malformed {
        /// Text file.
        path: PathBuf,
        /// One-based line number.
        line: usize,
        /// What was wrong.
        message: String,
    },

    /// Filesystem failure.
    #[error("{path}: {source}")]
    Io {
        /// File involved.
        path: PathBuf,
        /// Underlying error.
        source: io::Error,
    },
}

type Result<T> = std::result::Result<T, PlinkError>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PlinkError + '_ {
    move |source| PlinkError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One `.bim` record.
#[derive(Debug, Clone, PartialEq)]
pub struct SnpMeta {
    /// Chromosome code.
    pub chrom: String,
    /// Variant identifier.
    pub id: String,
    /// Genetic distance in centimorgans.
    pub cm: f64,
    /// Base-pair position.
    pub pos: u64,
    /// Allele counted by the dosage.
    pub a1: String,
    /// Other allele.
    pub a2: String,
}

impl SnpMeta {
    /// Placeholder metadata for a simulated SNP at position `index + 1`.
    pub fn synthetic(id: impl Into<String>, index: usize) -> Self {
        Self {
            chrom: "1".into(),
            id: id.into(),
            cm: 0.0,
            pos: index as u64 + 1,
            a1: "A".into(),
            a2: "G".into(),
        }
    }
}

/// One `.fam` record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleMeta {
    /// Family identifier.
    pub fid: String,
    /// Individual identifier.
    pub iid: String,
    /// Paternal identifier (`0` if unknown).
    pub father: String,
    /// Maternal identifier (`0` if unknown).
    pub mother: String,
    /// Sex code.
    pub sex: String,
    /// Phenotype column as written (often `-9`).
    pub phenotype: String,
}

impl SampleMeta {
    /// A founder with unknown sex and phenotype.
    pub fn founder(iid: impl Into<String>) -> Self {
        let iid = iid.into();
        Self {
            fid: iid.clone(),
            iid,
            father: "0".into(),
            mother: "0".into(),
            sex: "0".into(),
            phenotype: "-9".into(),
        }
    }
}

/// Paths and metadata of a PLINK fileset whose header has been validated.
#[derive(Debug, Clone, PartialEq)]
pub struct PlinkDataset {
    /// `.bed` path.
    pub bed_path: PathBuf,
    /// `.bim` path.
    pub bim_path: PathBuf,
    /// `.fam` path.
    pub fam_path: PathBuf,
    /// Per-SNP metadata in file order.
    pub snp_meta: Vec<SnpMeta>,
    /// Per-sample metadata in file order.
    pub samples: Vec<SampleMeta>,
}

/// `prefix.bed`, `prefix.bim`, `prefix.fam`; a trailing `.bed`/`.bim`/`.fam`
/// on `prefix` is dropped first.
pub fn fileset_paths(prefix: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let base = match prefix.extension().and_then(|e| e.to_str()) {
        Some("bed" | "bim" | "fam") => prefix.with_extension(""),
        _ => prefix.to_path_buf(),
    };
    let with = |ext: &str| {
        let mut s = base.clone().into_os_string();
        s.push(".");
        s.push(ext);
        PathBuf::from(s)
    };
    (with("bed"), with("bim"), with("fam"))
}

impl PlinkDataset {
    /// Reads `.bim` and `.fam` and checks the `.bed` header and length.
    pub fn open(prefix: &Path) -> Result<Self> {
        let (bed_path, bim_path, fam_path) = fileset_paths(prefix);
        let snp_meta = read_bim(&bim_path)?;
        let samples = read_fam(&fam_path)?;
        let dataset = Self {
            bed_path,
            bim_path,
            fam_path,
            snp_meta,
            samples,
        };
        let mut head = Vec::with_capacity(3);
        let file = fs::File::open(&dataset.bed_path).map_err(io_err(&dataset.bed_path))?;
        let len = file.metadata().map_err(io_err(&dataset.bed_path))?.len();
        file.take(3)
            .read_to_end(&mut head)
            .map_err(io_err(&dataset.bed_path))?;
        check_header(&dataset.bed_path, &head)?;
        check_length(
            &dataset.bed_path,
            len,
            dataset.n_samples(),
            dataset.n_snps(),
        )?;
        Ok(dataset)
    }

    /// `N`
    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    /// `p`
    pub fn n_snps(&self) -> usize {
        self.snp_meta.len()
    }

    /// Individual identifiers in `.fam` order.
    pub fn sample_ids(&self) -> Vec<String> {
        self.samples.iter().map(|s| s.iid.clone()).collect()
    }

    /// Variant identifiers in `.bim` order.
    pub fn snp_ids(&self) -> Vec<String> {
        self.snp_meta.iter().map(|s| s.id.clone()).collect()
    }
}

fn check_header(path: &Path, head: &[u8]) -> Result<()> {
    if head != BED_MAGIC {
        return Err(PlinkError::BadMagic {
            path: path.to_path_buf(),
            found: head.to_vec(),
        });
    }
    Ok(())
}

/// Bytes per SNP for `n` samples.
pub fn bytes_per_snp(n_samples: usize) -> usize {
    n_samples.div_ceil(4)
}

fn check_length(path: &Path, len: u64, n: usize, p: usize) -> Result<()> {
    let expected = 3 + (bytes_per_snp(n) * p) as u64;
    if len < expected {
        return Err(PlinkError::TruncatedFile {
            path: path.to_path_buf(),
            expected,
            found: len,
        });
    }
    if len > expected {
        return Err(PlinkError::MetaMismatch(format!(
            "{}: {len} bytes but {n} samples x {p} SNPs need {expected}",
            path.display()
        )));
    }
    Ok(())
}

const DECODE: [u8; 4] = [2, MISSING, 1, 0];

/// The four calls packed into one byte, first sample in the low bits.
pub fn decode_byte(byte: u8) -> [Option<u8>; 4] {
    core::array::from_fn(|slot| {
        let code = DECODE[((byte >> (2 * slot)) & 0b11) as usize];
        (code != MISSING).then_some(code)
    })
}

fn encode_call(code: u8) -> u8 {
    match code {
        2 => 0b00,
        MISSING => 0b01,
        1 => 0b10,
        0 => 0b11,
        _ => unreachable!("RawGenotypes holds only valid codes"),
    }
}

/// Decodes a complete `.bed` image (header included).
pub fn decode_bed(bytes: &[u8], n_samples: usize, n_snps: usize) -> Result<RawGenotypes> {
    let path = Path::new("<memory>");
    check_header(path, &bytes[..bytes.len().min(3)])?;
    check_length(path, bytes.len() as u64, n_samples, n_snps)?;
    let stride = bytes_per_snp(n_samples);
    let mut codes = Vec::with_capacity(n_samples * n_snps);
    for block in bytes[3..].chunks_exact(stride.max(1)).take(n_snps) {
        for i in 0..n_samples {
            let pair = (block[i / 4] >> (2 * (i % 4))) & 0b11;
            codes.push(DECODE[pair as usize]);
        }
    }
    codes.resize(n_samples * n_snps, MISSING);
    Ok(RawGenotypes::new(n_samples, n_snps, codes).expect("decoded codes are valid"))
}

/// Encodes calls as a `.bed` image; padding bits in each SNP's last byte
/// are zero.
pub fn encode_bed(raw: &RawGenotypes) -> Vec<u8> {
    let n = raw.n_samples();
    let stride = bytes_per_snp(n);
    let mut out = Vec::with_capacity(3 + stride * raw.n_snps());
    out.extend_from_slice(&BED_MAGIC);
    for j in 0..raw.n_snps() {
        let start = out.len();
        out.resize(start + stride, 0);
        for (i, &code) in raw.snp(j).iter().enumerate() {
            out[start + i / 4] |= encode_call(code) << (2 * (i % 4));
        }
    }
    out
}

/// Reads every call of a validated fileset.
pub fn read_plink(dataset: &PlinkDataset) -> Result<RawGenotypes> {
    let bytes = fs::read(&dataset.bed_path).map_err(io_err(&dataset.bed_path))?;
    if bytes.len() < 3 || bytes[..3] != BED_MAGIC {
        return Err(PlinkError::BadMagic {
            path: dataset.bed_path.clone(),
            found: bytes[..bytes.len().min(3)].to_vec(),
        });
    }
    check_length(
        &dataset.bed_path,
        bytes.len() as u64,
        dataset.n_samples(),
        dataset.n_snps(),
    )?;
    decode_bed(&bytes, dataset.n_samples(), dataset.n_snps())
}

/// Writes `prefix.{bed,bim,fam}` and returns the reopened dataset.
pub fn write_plink(
    prefix: &Path,
    raw: &RawGenotypes,
    snps: &[SnpMeta],
    samples: &[SampleMeta],
) -> Result<PlinkDataset> {
    if snps.len() != raw.n_snps() || samples.len() != raw.n_samples() {
        return Err(PlinkError::MetaMismatch(format!(
            "{} .bim and {} .fam records for {} SNPs x {} samples",
            snps.len(),
            samples.len(),
            raw.n_snps(),
            raw.n_samples()
        )));
    }
    let (bed, bim, fam) = fileset_paths(prefix);
    fs::write(&bed, encode_bed(raw)).map_err(io_err(&bed))?;

    let mut w = BufWriter::new(fs::File::create(&bim).map_err(io_err(&bim))?);
    for s in snps {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}",
            s.chrom, s.id, s.cm, s.pos, s.a1, s.a2
        )
        .map_err(io_err(&bim))?;
    }
    w.flush().map_err(io_err(&bim))?;

    let mut w = BufWriter::new(fs::File::create(&fam).map_err(io_err(&fam))?);
    for s in samples {
        writeln!(
            w,
            "{} {} {} {} {} {}",
            s.fid, s.iid, s.father, s.mother, s.sex, s.phenotype
        )
        .map_err(io_err(&fam))?;
    }
    w.flush().map_err(io_err(&fam))?;

    PlinkDataset::open(&bed)
}

fn text_fields(path: &Path, expected: usize) -> Result<Vec<(usize, Vec<String>)>> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split_whitespace().map(str::to_owned).collect();
        if fields.len() != expected {
            return Err(PlinkError::Malformed {
                path: path.to_path_buf(),
                line: idx + 1,
                message: format!("expected {expected} fields, found {}", fields.len()),
            });
        }
        out.push((idx + 1, fields));
    }
    Ok(out)
}

/// Parses a `.bim` file.
pub fn read_bim(path: &Path) -> Result<Vec<SnpMeta>> {
    text_fields(path, 6)?
        .into_iter()
        .map(|(line, f)| {
            let bad = |what: &str| PlinkError::Malformed {
                path: path.to_path_buf(),
                line,
                message: format!("bad {what}"),
            };
            let [chrom, id, cm, pos, a1, a2]: [String; 6] = f.try_into().expect("six fields");
            Ok(SnpMeta {
                cm: cm.parse().map_err(|_| bad("genetic distance"))?,
                pos: pos.parse().map_err(|_| bad("position"))?,
                chrom,
                id,
                a1,
                a2,
            })
        })
        .collect()
}

/// Parses a `.fam` file.
pub fn read_fam(path: &Path) -> Result<Vec<SampleMeta>> {
    Ok(text_fields(path, 6)?
        .into_iter()
        .map(|(_, f)| {
            let [fid, iid, father, mother, sex, phenotype]: [String; 6] =
                f.try_into().expect("six fields");
            SampleMeta {
                fid,
                iid,
                father,
                mother,
                sex,
                phenotype,
            }
        })
        .collect())
}
