#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use vimco_core::{GenotypeMatrix, Matrix, ModelParams, PhenotypeMatrix};

pub struct Instance {
    pub geno: GenotypeMatrix,
    pub pheno: PhenotypeMatrix,
}

fn ar1_row(rng: &mut ChaCha8Rng, len: usize, rho: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut prev: f64 = rng.sample(StandardNormal);
    out.push(prev);
    for _ in 1..len {
        let e: f64 = rng.sample(StandardNormal);
        prev = rho * prev + (1.0 - rho * rho).sqrt() * e;
        out.push(prev);
    }
    out
}

/// Gaussian design with AR(0.5) columns, a sparse effect matrix and
/// AR(`rho_e`) errors across traits.
pub fn gaussian_instance(seed: u64, n: usize, p: usize, k: usize, rho_e: f64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Matrix::zeros(n, p);
    for i in 0..n {
        let row = ar1_row(&mut rng, p, 0.5);
        for j in 0..p {
            x[(i, j)] = row[j];
        }
    }
    let mut b = Matrix::zeros(p, k);
    for t in 0..k {
        for j in 0..p {
            if rng.random::<f64>() < 0.2 {
                let v: f64 = rng.sample(StandardNormal);
                b[(j, t)] = 0.5 * v;
            }
        }
    }
    let signal = x.matmul(&b);
    let mut y = Matrix::zeros(n, k);
    for i in 0..n {
        let e = ar1_row(&mut rng, k, rho_e);
        for t in 0..k {
            y[(i, t)] = signal[(i, t)] + e[t];
        }
    }
    Instance {
        geno: GenotypeMatrix::from_raw(&x, None).unwrap(),
        pheno: PhenotypeMatrix::from_raw(&y, None).unwrap(),
    }
}

/// Centered design whose columns are mutually orthogonal.
pub fn orthogonal_instance(seed: u64, n: usize, p: usize, k: usize) -> Instance {
    let base = gaussian_instance(seed, n, p, k, 0.3);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(p);
    for j in 0..p {
        let mut v = base.geno.column(j).to_vec();
        for q in &cols {
            let proj = dot(&v, q) / dot(q, q);
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= proj * qi;
            }
        }
        cols.push(v);
    }
    let x = Matrix::from_columns(n, &cols);
    Instance {
        geno: GenotypeMatrix::from_raw(&x, None).unwrap(),
        pheno: base.pheno,
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Random but well-conditioned model parameters.
pub fn random_params(seed: u64, k: usize, diagonal: bool) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let a = (0..k).map(|_| rng.random_range(0.05..0.6)).collect();
    let slab = (0..k).map(|_| rng.random_range(0.1..2.0)).collect();
    let mut l = Matrix::zeros(k, k);
    for i in 0..k {
        l[(i, i)] = rng.random_range(0.6..1.5);
        if !diagonal {
            for j in 0..i {
                l[(i, j)] = rng.random_range(-0.5..0.5);
            }
        }
    }
    let theta = l.matmul(&l.transpose());
    ModelParams::new(a, slab, theta).unwrap()
}

pub fn non_decreasing(trace: &[f64], slack: f64) -> Option<usize> {
    trace.windows(2).position(|w| w[1] < w[0] - slack)
}
