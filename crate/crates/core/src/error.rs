use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Two inputs disagree on a dimension.
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        /// Which dimension disagreed.
        what: &'static str,
        /// Expected size.
        expected: usize,
        /// Observed size.
        found: usize,
    },

    /// A column that must be centered has a nonzero mean.
    #[error("column {column} of the {matrix} matrix is not centered (mean {mean:e})")]
    NotCentered {
        /// `"genotype"` or `"phenotype"`.
        matrix: &'static str,
        /// Offending column.
        column: usize,
        /// Its mean.
        mean: f64,
    },

    /// A SNP column has zero variance.
    #[error("SNP column {column} has zero variance")]
    DegenerateColumn {
        /// Offending column.
        column: usize,
    },

    /// Centering needs at least two rows.
    #[error("at least two rows are required, found {0}")]
    TooFewRows(usize),

    /// More traits than samples.
    #[error("{traits} traits exceed {samples} samples")]
    TooManyTraits {
        /// Number of traits.
        traits: usize,
        /// Number of samples.
        samples: usize,
    },

    /// A parameter or configuration value is outside its domain.
    #[error("invalid value: {0}")]
    InvalidValue(String),

    /// A matrix that must be symmetric positive definite is not.
    #[error("{0} is not symmetric positive definite")]
    NotPositiveDefinite(&'static str),

    /// An E-step update produced NaN or an infinity.
    #[error("non-finite variational update at SNP {snp}, trait {trait_index}")]
    NonFiniteUpdate {
        /// SNP index.
        snp: usize,
        /// Trait index.
        trait_index: usize,
    },

    /// The ELBO evaluated to NaN or an infinity.
    #[error("non-finite ELBO")]
    NonFiniteElbo,

    /// The residual covariance could not be made positive definite.
    #[error("residual covariance is singular")]
    SingularCovariance,

    /// The requested pleiotropy cannot be realized.
    #[error("infeasible pleiotropy: {0}")]
    InfeasiblePleiotropy(String),

    /// A trait has no causal SNP, so its heritability scaling is undefined.
    #[error("trait {0} has no causal SNP")]
    NoCausalSnp(usize),

    /// AUC is undefined without both positives and negatives.
    #[error("AUC undefined: truth has no positives or no negatives")]
    NoPositives,

    /// Instance exceeds the exact oracle's size limits.
    #[error("instance too large for exact enumeration: {0}")]
    TooLarge(String),
}

/// Result alias for the numerical core.
pub type Result<T> = core::result::Result<T, Error>;
