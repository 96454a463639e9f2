//! Multi-trait Bayesian variable selection for genome-wide association.
//!
//! The model regresses `K` centered traits on `p` centered SNP dosages,
//! `Y = X B + E`, with rows of `E` drawn from `N(0, Θ⁻¹)` and every effect
//! `β_jk = γ_jk β̃_jk` under a spike-slab prior. Posterior inclusion
//! probabilities are approximated with a mean-field variational EM
//! ([`vbem`]), converted into local false discovery rates and thresholded
//! at a global FDR ([`inference`]).
//!
//! The crate is `no_std` (with `alloc`) so the numerical core can be embedded
//! anywhere; file formats and the command line live in the `vimco` crate.
//!
//! Modules:
//! - [`model`]: data and parameter types with their invariants.
//! - [`vbem`]: coordinate-ascent E-step, closed-form M-step and ELBO.
//! - [`inference`]: lfdr, global FDR thresholding, LD blocks, scoring.
//! - [`simgen`]: simulation of genotypes, sparse effects and traits.
//! - [`oracle`]: exact posterior by enumeration for tiny problems.
#![no_std]
#![warn(missing_docs)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
pub mod inference;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod simgen;
pub mod special;
pub mod vbem;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use model::{
    center_columns, validate_dataset, AssociationReport, GenotypeMatrix, ModelParams,
    PhenotypeMatrix, SparseEffects, VariationalState,
};
