use std::fs;

use proptest::prelude::*;
use vimco::genotypes::{RawGenotypes, MISSING};
use vimco::plink::{
    decode_bed, decode_byte, encode_bed, read_plink, write_plink, PlinkDataset, PlinkError,
    SampleMeta, SnpMeta, BED_MAGIC,
};

fn meta(raw: &RawGenotypes) -> (Vec<SnpMeta>, Vec<SampleMeta>) {
    let snps = (0..raw.n_snps())
        .map(|j| SnpMeta::synthetic(format!("rs{j}"), j))
        .collect();
    let samples = (0..raw.n_samples())
        .map(|i| SampleMeta::founder(format!("s{i}")))
        .collect();
    (snps, samples)
}

#[test]
fn low_pairs_decode_first() {
    assert_eq!(decode_byte(0b0001_1011), [Some(0), Some(1), None, Some(2)]);
    assert_eq!(decode_byte(0b1110_0100), [Some(2), None, Some(1), Some(0)]);
    assert_eq!(decode_byte(0x00), [Some(2); 4]);
    assert_eq!(decode_byte(0xFF), [Some(0); 4]);
    assert_eq!(decode_byte(0x55), [None; 4]);
}

#[test]
fn single_snp_image() {
    let mut bytes = BED_MAGIC.to_vec();
    bytes.extend([0b1110_0100, 0b1111_1110]);
    let raw = decode_bed(&bytes, 5, 1).unwrap();
    let calls: Vec<_> = (0..5).map(|i| raw.get(i, 0)).collect();
    assert_eq!(calls, [Some(2), None, Some(1), Some(0), Some(1)]);
    let again = encode_bed(&raw);
    assert_eq!(again[..4], bytes[..4]);
    assert_eq!(again[4], 0b0000_0010, "padding bits are written as zero");
}

#[test]
fn individual_major_header_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("d");
    let raw = RawGenotypes::new(4, 1, vec![0, 1, 2, 0]).unwrap();
    let (snps, samples) = meta(&raw);
    write_plink(&prefix, &raw, &snps, &samples).unwrap();
    let bed = prefix.with_extension("bed");
    let mut bytes = fs::read(&bed).unwrap();
    bytes[2] = 0x00;
    fs::write(&bed, &bytes).unwrap();
    match PlinkDataset::open(&prefix) {
        Err(PlinkError::BadMagic { found, .. }) => assert_eq!(found, [0x6C, 0x1B, 0x00]),
        other => panic!("expected BadMagic, got {other:?}"),
    }
}

#[test]
fn short_bed_is_truncated_and_long_bed_mismatched() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("d");
    let raw = RawGenotypes::new(5, 1, vec![0, 1, 2, 0, 1]).unwrap();
    let (snps, samples) = meta(&raw);
    write_plink(&prefix, &raw, &snps, &samples).unwrap();
    let bed = prefix.with_extension("bed");
    let bytes = fs::read(&bed).unwrap();
    assert_eq!(bytes.len(), 5);

    fs::write(&bed, &bytes[..4]).unwrap();
    match PlinkDataset::open(&prefix) {
        Err(PlinkError::TruncatedFile {
            expected, found, ..
        }) => assert_eq!((expected, found), (5, 4)),
        other => panic!("expected TruncatedFile, got {other:?}"),
    }

    let mut long = bytes.clone();
    long.push(0);
    fs::write(&bed, &long).unwrap();
    assert!(matches!(
        PlinkDataset::open(&prefix),
        Err(PlinkError::MetaMismatch(_))
    ));
}

#[test]
fn fileset_metadata_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("meta");
    let raw = RawGenotypes::new(3, 2, vec![0, 1, 2, MISSING, 2, 2]).unwrap();
    let (snps, samples) = meta(&raw);
    let ds = write_plink(&prefix, &raw, &snps, &samples).unwrap();
    assert_eq!(ds.n_samples(), 3);
    assert_eq!(ds.n_snps(), 2);
    assert_eq!(ds.snp_ids(), ["rs0", "rs1"]);
    assert_eq!(ds.sample_ids(), ["s0", "s1", "s2"]);
    assert_eq!(read_plink(&ds).unwrap(), raw);
}

fn raw_strategy() -> impl Strategy<Value = RawGenotypes> {
    (1usize..23, 1usize..9).prop_flat_map(|(n, p)| {
        prop::collection::vec(
            prop_oneof![Just(0u8), Just(1), Just(2), Just(MISSING)],
            n * p,
        )
        .prop_map(move |codes| RawGenotypes::new(n, p, codes).unwrap())
    })
}

proptest! {
    #[test]
    fn bed_round_trip(raw in raw_strategy()) {
        let image = encode_bed(&raw);
        prop_assert_eq!(image.len(), 3 + raw.n_samples().div_ceil(4) * raw.n_snps());
        prop_assert_eq!(decode_bed(&image, raw.n_samples(), raw.n_snps()).unwrap(), raw);
    }

    #[test]
    fn fileset_round_trip(raw in raw_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("x");
        let (snps, samples) = meta(&raw);
        let ds = write_plink(&prefix, &raw, &snps, &samples).unwrap();
        prop_assert_eq!(read_plink(&PlinkDataset::open(&prefix).unwrap()).unwrap(), raw);
        prop_assert_eq!(ds.n_snps(), snps.len());
    }
}
