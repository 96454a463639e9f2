use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vimco::genotypes::{to_genotype_matrix, RawGenotypes, MISSING};
use vimco::qc::{ld_prune, qc_filter, QcConfig};
use vimco::tsv::{
    load_pheno_tsv, read_geno_tsv, read_pheno_table, read_truth_tsv, write_geno_tsv,
    write_truth_tsv, TableError,
};
use vimco::vimco_core::{Matrix, SparseEffects};
use vimco::VimcoError;

fn random_raw(seed: u64, n: usize, p: usize) -> RawGenotypes {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let codes = (0..n * p).map(|_| rng.random_range(0..3u8)).collect();
    RawGenotypes::new(n, p, codes).unwrap()
}

fn ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

#[test]
fn monomorphic_and_missing_snps_are_dropped() {
    let n = 100;
    let mut raw = random_raw(1, n, 4);
    for i in 0..n {
        raw.set(i, 1, Some(2));
    }
    raw.set(0, 2, None);
    raw.set(1, 2, None);
    raw.set(5, 3, None);
    let (kept_raw, kept, report) = qc_filter(&raw, &QcConfig::default());
    assert_eq!(kept, [0, 3]);
    assert_eq!(report.dropped_maf, 1);
    assert_eq!(report.dropped_missing, 1);
    assert_eq!(report.kept, 2);
    assert_eq!(kept_raw.snp(1), raw.snp(3));
}

#[test]
fn clean_data_passes_qc_unchanged() {
    let raw = random_raw(2, 200, 30);
    let (kept_raw, kept, report) = qc_filter(&raw, &QcConfig::default());
    assert_eq!(kept, (0..30).collect::<Vec<_>>());
    assert_eq!(kept_raw, raw);
    assert_eq!(report.input, 30);

    let geno = to_genotype_matrix(&kept_raw, ids("snp", 30)).unwrap();
    for j in 0..30 {
        let mean: f64 = geno.data().col(j).iter().sum::<f64>() / 200.0;
        assert!(mean.abs() < 1e-12);
    }
}

#[test]
fn duplicated_column_leaves_one_survivor() {
    let mut raw = random_raw(3, 300, 5);
    for i in 0..300 {
        let c = raw.get(i, 1);
        raw.set(i, 3, c);
    }
    assert_eq!(ld_prune(&raw, 0.5, 100).unwrap(), [0, 1, 2, 4]);

    raw.set(7, 1, None);
    raw.set(8, 1, None);
    assert_eq!(
        ld_prune(&raw, 0.5, 100).unwrap(),
        [0, 2, 3, 4],
        "the copy with more missing calls goes"
    );
}

#[test]
fn prune_window_and_independence() {
    let mut raw = random_raw(4, 2000, 40);
    assert_eq!(ld_prune(&raw, 0.5, 100).unwrap().len(), 40);
    for i in 0..2000 {
        let c = raw.get(i, 0);
        raw.set(i, 1, c);
    }
    assert_eq!(ld_prune(&raw, 0.5, 1).unwrap().len(), 40);
    assert_eq!(ld_prune(&raw, 0.5, 2).unwrap().len(), 39);
    assert_eq!(
        ld_prune(&raw, 0.5, 100).unwrap(),
        ld_prune(&raw, 0.5, 100).unwrap()
    );
    assert!(ld_prune(&raw, 1.0, 10).is_err());
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn na_cell_is_missing_value() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "p.tsv",
        "sample_id\tt1\tt2\na\t1.0\t2.0\nb\tNA\t0.5\n",
    );
    match read_pheno_table(&path) {
        Err(TableError::MissingValue { line, column, .. }) => {
            assert_eq!((line, column.as_str()), (3, "t1"))
        }
        other => panic!("expected MissingValue, got {other:?}"),
    }
    let path = write(dir.path(), "q.tsv", "sample_id\tt1\na\t1.0\nb\tabc\n");
    assert!(matches!(
        read_pheno_table(&path),
        Err(TableError::NonNumeric { line: 3, .. })
    ));
}

#[test]
fn rows_follow_sample_order() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "p.tsv", "sample_id\ty\nc\t3\na\t1\nb\t2\n");
    let order = vec!["a".to_string(), "b".into(), "c".into()];
    let pheno = load_pheno_tsv(&path, &order).unwrap();
    assert_eq!(pheno.column(0), [-1.0, 0.0, 1.0]);

    let unknown = vec!["a".to_string(), "b".into(), "z".into()];
    assert!(matches!(
        load_pheno_tsv(&path, &unknown),
        Err(VimcoError::Table(TableError::UnknownSample { .. }))
    ));
    let dup = write(
        dir.path(),
        "d.tsv",
        "sample_id\ty\na\t1\na\t2\nb\t0\nc\t0\n",
    );
    assert!(matches!(
        load_pheno_tsv(&dup, &order),
        Err(VimcoError::Table(TableError::DuplicateSample { .. }))
    ));
}

#[test]
fn sindi_shaped_table() {
    let dir = tempfile::tempdir().unwrap();
    let n = 2219;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut text = String::from("sample_id\tHDL\tLDL\tTC\n");
    for i in 0..n {
        let v: [f64; 3] = core::array::from_fn(|_| rng.random_range(-3.0..3.0));
        text.push_str(&format!("id{i}\t{}\t{}\t{}\n", v[0], v[1], v[2]));
    }
    let path = write(dir.path(), "sindi.tsv", &text);
    let order: Vec<String> = (0..n).rev().map(|i| format!("id{i}")).collect();
    let pheno = load_pheno_tsv(&path, &order).unwrap();
    assert_eq!((pheno.n_samples(), pheno.n_traits()), (n, 3));
    assert_eq!(pheno.trait_ids(), ["HDL", "LDL", "TC"]);
}

#[test]
fn genotype_and_truth_tables_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut raw = random_raw(6, 7, 5);
    raw.set(3, 2, None);
    let path = dir.path().join("g.tsv");
    write_geno_tsv(&path, &ids("snp", 5), &ids("ind", 7), &raw).unwrap();
    let table = read_geno_tsv(&path).unwrap();
    assert_eq!(table.raw, raw);
    assert_eq!(table.raw.get(3, 2), None);
    assert_eq!(table.snp_ids, ids("snp", 5));
    assert_eq!(table.sample_ids, ids("ind", 7));
    assert_eq!(raw.codes().iter().filter(|&&c| c == MISSING).count(), 1);

    let mut gamma = vec![false; 10];
    gamma[1] = true;
    gamma[7] = true;
    let beta = Matrix::from_columns(
        5,
        &[
            vec![0.0, 0.25, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, -1.5, 0.0, 0.0],
        ],
    );
    let truth = SparseEffects::new(gamma, beta).unwrap();
    let tpath = dir.path().join("t.tsv");
    write_truth_tsv(&tpath, &ids("snp", 5), &ids("trait", 2), &truth).unwrap();
    let back = read_truth_tsv(&tpath, &ids("snp", 5), &ids("trait", 2)).unwrap();
    assert_eq!(back, truth);
}
