//! Variational Bayes EM for the multi-trait spike-slab model.
//!
//! The E-step is coordinate ascent over the mean-field factors
//! `q(β̃_jk, γ_jk)`; each update maximizes the ELBO exactly in
//! `(μ_jk, s²_jk, α_jk)` with every other factor held fixed. The M-step
//! maximizes the ELBO in closed form over `a_k`, `σ²_βk` and `Θ`.
//!
//! With `Θ` diagonal the traits decouple and the engine reduces to
//! independent single-trait BVSR fits ([`PrecisionMode::Diagonal`]).

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{self, Matrix};
use crate::model::{
    validate_dataset, GenotypeMatrix, ModelParams, PhenotypeMatrix, VariationalState,
};
use crate::special::{log_prior_odds, logistic, xlogx_over_y, LN_2PI};
use crate::{Error, Result};

/// How the residual precision `Θ` is modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PrecisionMode {
    /// Dense `Θ`: traits borrow strength through residual correlation.
    #[default]
    Full,
    /// `Θ` restricted to a diagonal: independent single-trait BVSR.
    Diagonal,
}

/// Which parameter blocks the M-step updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MStepUpdates {
    /// Update `a_k`.
    pub inclusion_probs: bool,
    /// Update `σ²_βk`.
    pub slab_vars: bool,
    /// Update `Θ`.
    pub precision: bool,
}

impl MStepUpdates {
    /// Update every block.
    pub const ALL: Self = Self {
        inclusion_probs: true,
        slab_vars: true,
        precision: true,
    };
    /// Keep all parameters fixed (pure variational inference).
    pub const NONE: Self = Self {
        inclusion_probs: false,
        slab_vars: false,
        precision: false,
    };
}

impl Default for MStepUpdates {
    fn default() -> Self {
        Self::ALL
    }
}

/// Starting point of a fit.
#[derive(Debug, Clone, PartialEq, Default)]
#[allow(clippy::large_enum_variant)]
pub enum Init {
    /// `q` equal to the prior under [`ModelParams::null_init`].
    #[default]
    Null,
    /// Resume from a previous state and parameters.
    WarmStart {
        /// Variational factors; the residual cache is rebuilt.
        state: VariationalState,
        /// Model parameters.
        params: ModelParams,
    },
}

/// Fit controls.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Maximum number of E+M iterations.
    pub max_iters: usize,
    /// Stop once `|ΔL| / (|L| + 1)` falls below this.
    pub elbo_rel_tol: f64,
    /// Dense or diagonal precision.
    pub mode: PrecisionMode,
    /// Starting point.
    pub init: Init,
    /// Seed for coordinate shuffling.
    pub seed: u64,
    /// Visit SNPs in a fresh random order every sweep.
    pub shuffle_coordinates: bool,
    /// Parameter blocks the M-step may change.
    pub updates: MStepUpdates,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iters: 600,
            elbo_rel_tol: 1e-6,
            mode: PrecisionMode::Full,
            init: Init::Null,
            seed: 0,
            shuffle_coordinates: false,
            updates: MStepUpdates::ALL,
        }
    }
}

impl FitConfig {
    /// Checks `max_iters ≥ 1` and `elbo_rel_tol > 0`.
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidValue(
                "max_iters must be at least 1".to_string(),
            ));
        }
        if !(self.elbo_rel_tol > 0.0) {
            return Err(Error::InvalidValue(format!(
                "elbo_rel_tol must be positive, got {}",
                self.elbo_rel_tol
            )));
        }
        Ok(())
    }
}

/// Output of [`fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Final variational factors.
    pub state: VariationalState,
    /// Final model parameters.
    pub params: ModelParams,
    /// ELBO after each E+M iteration.
    pub elbo_trace: Vec<f64>,
    /// ELBO at the start, then after every E-step and every M-step.
    pub step_trace: Vec<f64>,
    /// Whether the tolerance was reached before `max_iters`.
    pub converged: bool,
    /// Iterations performed.
    pub n_iters: usize,
}

/// Visiting order for one sweep: SNPs outer, traits inner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoordinateOrder {
    /// SNP visiting order.
    pub snps: Vec<usize>,
    /// Trait visiting order within each SNP; omitted traits are skipped.
    pub traits: Vec<usize>,
}

impl CoordinateOrder {
    /// `j` ascending, then `k` ascending.
    pub fn row_major(n_snps: usize, n_traits: usize) -> Self {
        Self {
            snps: (0..n_snps).collect(),
            traits: (0..n_traits).collect(),
        }
    }

    /// Random SNP and trait order.
    pub fn shuffled<R: rand::Rng + ?Sized>(n_snps: usize, n_traits: usize, rng: &mut R) -> Self {
        let mut order = Self::row_major(n_snps, n_traits);
        order.snps.shuffle(rng);
        order.traits.shuffle(rng);
        order
    }
}

/// `q(γ_jk = 1)` at the ELBO optimum for given slab moments:
/// `logit α = logit a + μ²/(2s²) + ½ ln(s²/σ²)`.
#[inline]
pub fn inclusion_probability(prior: f64, mu: f64, s2: f64, slab_var: f64) -> f64 {
    logistic(log_prior_odds(prior) + 0.5 * mu * mu / s2 + 0.5 * (s2 / slab_var).ln())
}

/// `s²_jk = 1 / (θ_kk ‖X_j‖² + 1/σ²_βk)`.
#[inline]
pub fn slab_posterior_variance(theta_kk: f64, col_sq_norm: f64, slab_var: f64) -> f64 {
    1.0 / (theta_kk * col_sq_norm + 1.0 / slab_var)
}

/// Posterior variance of `β_jk = γ_jk β̃_jk` under `q`:
/// `α(μ² + s²) - α²μ²`, written as a sum of non-negative terms.
#[inline]
fn effect_variance(alpha: f64, mu: f64, s2: f64) -> f64 {
    alpha * s2 + alpha * (1.0 - alpha) * mu * mu
}

/// Sets `(μ_jk, s²_jk, α_jk)` from the projected residual
/// `c = Σ_t θ_kt X_jᵀ(Y_t - Σ_{j'≠j} α μ X_{j'})` restricted to trait `k`'s
/// own exclusion, then patches `R_k`. Returns the change in `α_jk μ_jk`.
fn set_coordinate(
    state: &mut VariationalState,
    params: &ModelParams,
    geno: &GenotypeMatrix,
    j: usize,
    k: usize,
    projected: f64,
) -> Result<f64> {
    let theta_kk = params.precision()[(k, k)];
    let slab = params.slab_vars()[k];
    let xsq = geno.col_sq_norm(j);

    let s2 = slab_posterior_variance(theta_kk, xsq, slab);
    let mu = projected * s2;
    let alpha = inclusion_probability(params.inclusion_probs()[k], mu, s2, slab);
    if !mu.is_finite() || !(s2 > 0.0) || !s2.is_finite() || !alpha.is_finite() {
        return Err(Error::NonFiniteUpdate {
            snp: j,
            trait_index: k,
        });
    }

    let old = state.alpha[(j, k)] * state.mu[(j, k)];
    let new = alpha * mu;
    state.mu[(j, k)] = mu;
    state.s2[(j, k)] = s2;
    state.alpha[(j, k)] = alpha;
    let delta = new - old;
    if delta != 0.0 {
        linalg::axpy(-delta, geno.column(j), state.residuals.col_mut(k));
    }
    Ok(delta)
}

/// Optimal-factor update for a single `(j, k)`.
pub fn update_coordinate(
    state: &mut VariationalState,
    params: &ModelParams,
    geno: &GenotypeMatrix,
    j: usize,
    k: usize,
) -> Result<()> {
    let xj = geno.column(j);
    let theta = params.precision();
    let own = state.alpha[(j, k)] * state.mu[(j, k)] * geno.col_sq_norm(j);
    let mut projected = 0.0;
    for t in 0..theta.ncols() {
        let w = theta[(k, t)];
        if w != 0.0 {
            projected += w * linalg::dot(xj, state.residuals.col(t));
        }
    }
    projected += theta[(k, k)] * own;
    set_coordinate(state, params, geno, j, k, projected).map(|_| ())
}

/// One pass of coordinate updates in the given order.
///
/// Per SNP the `K` products `X_jᵀR_t` are computed once and patched as
/// trait columns change, so a sweep costs `O(N p K)`.
pub fn e_step_sweep(
    state: &mut VariationalState,
    params: &ModelParams,
    geno: &GenotypeMatrix,
    order: &CoordinateOrder,
) -> Result<()> {
    let theta = params.precision();
    let n_traits = theta.ncols();
    let diagonal = theta.is_diagonal();
    let mut proj = vec![0.0; n_traits];

    for &j in &order.snps {
        let xj = geno.column(j);
        let xsq = geno.col_sq_norm(j);
        if diagonal {
            for &k in &order.traits {
                let d = linalg::dot(xj, state.residuals.col(k));
                let own = state.alpha[(j, k)] * state.mu[(j, k)] * xsq;
                let theta_kk = theta[(k, k)];
                set_coordinate(state, params, geno, j, k, theta_kk * d + theta_kk * own)?;
            }
        } else {
            for (t, v) in proj.iter_mut().enumerate() {
                *v = linalg::dot(xj, state.residuals.col(t));
            }
            for &k in &order.traits {
                let own = state.alpha[(j, k)] * state.mu[(j, k)] * xsq;
                let mut projected = 0.0;
                for (t, v) in proj.iter().enumerate() {
                    projected += theta[(k, t)] * v;
                }
                projected += theta[(k, k)] * own;
                let delta = set_coordinate(state, params, geno, j, k, projected)?;
                proj[k] -= delta * xsq;
            }
        }
    }
    Ok(())
}

/// Closed-form M-step over every trait.
pub fn m_step(
    state: &VariationalState,
    params: &mut ModelParams,
    geno: &GenotypeMatrix,
    mode: PrecisionMode,
    updates: MStepUpdates,
) -> Result<()> {
    let traits: Vec<usize> = (0..params.n_traits()).collect();
    m_step_traits(state, params, geno, mode, updates, &traits)
}

/// `Σ_j ‖X_j‖² Var_q(β_jk)` for trait `k`.
fn weighted_effect_variance(state: &VariationalState, geno: &GenotypeMatrix, k: usize) -> f64 {
    let (mu, s2, alpha) = (state.mu.col(k), state.s2.col(k), state.alpha.col(k));
    geno.col_sq_norms()
        .iter()
        .enumerate()
        .map(|(j, xsq)| xsq * effect_variance(alpha[j], mu[j], s2[j]))
        .sum()
}

fn m_step_traits(
    state: &VariationalState,
    params: &mut ModelParams,
    geno: &GenotypeMatrix,
    mode: PrecisionMode,
    updates: MStepUpdates,
    traits: &[usize],
) -> Result<()> {
    let p = geno.n_snps();
    let n = state.residuals.nrows() as f64;
    let n_traits = params.n_traits();

    for &k in traits {
        let alpha = state.alpha.col(k);
        let total: f64 = alpha.iter().sum();
        if updates.inclusion_probs && p > 0 {
            params.set_inclusion_prob(k, total / p as f64);
        }
        if updates.slab_vars && total >= 1e-12 {
            let (mu, s2) = (state.mu.col(k), state.s2.col(k));
            let second: f64 = (0..p).map(|j| alpha[j] * (mu[j] * mu[j] + s2[j])).sum();
            params.set_slab_var(k, second / total);
        }
    }

    if !updates.precision {
        return Ok(());
    }
    let residual_cov =
        |s: usize, t: usize| linalg::dot(state.residuals.col(s), state.residuals.col(t)) / n;
    let own_cov = |k: usize| residual_cov(k, k) + weighted_effect_variance(state, geno, k) / n;

    if mode == PrecisionMode::Diagonal || n_traits == 1 {
        let mut theta = params.precision().clone();
        for &k in traits {
            let v = own_cov(k);
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::SingularCovariance);
            }
            theta[(k, k)] = 1.0 / v;
        }
        if mode == PrecisionMode::Diagonal {
            for s in 0..n_traits {
                for t in 0..n_traits {
                    if s != t {
                        theta[(s, t)] = 0.0;
                    }
                }
            }
        }
        params.set_precision(theta);
        return Ok(());
    }

    let mut cov = Matrix::zeros(n_traits, n_traits);
    for s in 0..n_traits {
        cov[(s, s)] = own_cov(s);
        for t in 0..s {
            let c = residual_cov(s, t);
            cov[(s, t)] = c;
            cov[(t, s)] = c;
        }
    }
    params.set_precision(invert_covariance(cov)?);
    Ok(())
}

/// Inverts a residual covariance, adding `1e-8 · mean(diag)` jitter up to
/// three times if the Cholesky factorization fails.
fn invert_covariance(mut cov: Matrix) -> Result<Matrix> {
    if cov.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularCovariance);
    }
    let k = cov.nrows();
    let jitter = 1e-8 * cov.diagonal().iter().sum::<f64>() / k as f64;
    for attempt in 0..=3 {
        if attempt > 0 {
            for i in 0..k {
                cov[(i, i)] += jitter;
            }
        }
        if let Some(l) = linalg::cholesky(&cov) {
            let inv = linalg::inverse_from_cholesky(&l);
            if linalg::cholesky(&inv).is_some() {
                return Ok(inv);
            }
        }
    }
    Err(Error::SingularCovariance)
}

/// The ELBO terms that involve only trait `k` and `θ_kk`:
///
/// `-½θ_kk‖R_k‖² - ½θ_kk Σ_j‖X_j‖²Var_q(β_jk) - Σ_j KL(α_jk‖a_k)
///  + ½Σ_j α_jk(1 + ln(s²/σ²) - (μ²+s²)/σ²) + (N/2)(ln θ_kk - ln 2π)`.
///
/// For diagonal `Θ` the ELBO is exactly the sum of these.
pub fn trait_elbo(
    state: &VariationalState,
    params: &ModelParams,
    geno: &GenotypeMatrix,
    k: usize,
) -> f64 {
    let n = state.residuals.nrows() as f64;
    let theta_kk = params.precision()[(k, k)];
    let a = params.inclusion_probs()[k];
    let slab = params.slab_vars()[k];
    let r = state.residuals.col(k);

    let (mu, s2, alpha) = (state.mu.col(k), state.s2.col(k), state.alpha.col(k));
    let mut kl_indicator = 0.0;
    let mut slab_term = 0.0;
    for j in 0..mu.len() {
        let aj = alpha[j];
        kl_indicator += xlogx_over_y(aj, a) + xlogx_over_y(1.0 - aj, 1.0 - a);
        if aj != 0.0 {
            slab_term += aj * (1.0 + (s2[j] / slab).ln() - (mu[j] * mu[j] + s2[j]) / slab);
        }
    }
    -0.5 * theta_kk * linalg::dot(r, r)
        - 0.5 * theta_kk * weighted_effect_variance(state, geno, k)
        - kl_indicator
        + 0.5 * slab_term
        + 0.5 * n * (theta_kk.ln() - LN_2PI)
}

/// Closed-form ELBO, including the `-(NK/2) ln 2π` constant so that it
/// lower-bounds `ln p(Y | X; Φ)`.
pub fn elbo(state: &VariationalState, params: &ModelParams, geno: &GenotypeMatrix) -> Result<f64> {
    let theta = params.precision();
    let n_traits = theta.ncols();
    let mut value: f64 = (0..n_traits)
        .map(|k| trait_elbo(state, params, geno, k))
        .sum();
    if !theta.is_diagonal() {
        let n = state.residuals.nrows() as f64;
        let diag_log: f64 = theta.diagonal().iter().map(|v| v.ln()).sum();
        value += 0.5 * n * (params.log_det_precision() - diag_log);
        for s in 0..n_traits {
            for t in 0..s {
                let w = theta[(s, t)];
                if w != 0.0 {
                    value -= w * linalg::dot(state.residuals.col(s), state.residuals.col(t));
                }
            }
        }
    }
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFiniteElbo)
    }
}

fn relative_change(old: f64, new: f64) -> f64 {
    (new - old).abs() / (new.abs() + 1.0)
}

/// Replaces off-diagonal precision with the diagonal of `1 / (Θ⁻¹)_kk`.
fn diagonalize(params: &ModelParams) -> Result<ModelParams> {
    if params.precision().is_diagonal() {
        return Ok(params.clone());
    }
    let cov = params.covariance();
    let diag: Vec<f64> = cov.diagonal().iter().map(|v| 1.0 / v).collect();
    ModelParams::new(
        params.inclusion_probs().to_vec(),
        params.slab_vars().to_vec(),
        Matrix::from_diagonal(&diag),
    )
}

/// Runs variational EM until the ELBO stabilizes or `max_iters` is reached.
///
/// In [`PrecisionMode::Diagonal`] each trait is its own independent problem
/// and stops on its own ELBO, so a joint diagonal fit reproduces `K`
/// separate single-trait fits. A non-diagonal warm start is projected to
/// `diag(1 / (Θ⁻¹)_kk)` in that mode.
pub fn fit(
    geno: &GenotypeMatrix,
    pheno: &PhenotypeMatrix,
    config: &FitConfig,
) -> Result<FitResult> {
    validate_dataset(geno, pheno)?;
    config.validate()?;
    let n_traits = pheno.n_traits();

    let (mut state, mut params) = match &config.init {
        Init::Null => {
            let params = ModelParams::null_init(pheno)?;
            (VariationalState::from_prior(geno, pheno, &params), params)
        }
        Init::WarmStart { state, params } => {
            if params.n_traits() != n_traits {
                return Err(Error::DimensionMismatch {
                    what: "warm-start traits",
                    expected: n_traits,
                    found: params.n_traits(),
                });
            }
            let state = VariationalState::from_parts(
                state.mu.clone(),
                state.s2.clone(),
                state.alpha.clone(),
                geno,
                pheno,
            )?;
            (state, params.clone())
        }
    };
    if config.mode == PrecisionMode::Diagonal {
        params = diagonalize(&params)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut active: Vec<usize> = (0..n_traits).collect();
    let mut trait_values: Vec<f64> = (0..n_traits)
        .map(|k| trait_elbo(&state, &params, geno, k))
        .collect();
    let mut current = elbo(&state, &params, geno)?;

    let mut elbo_trace = Vec::new();
    let mut step_trace = vec![current];
    let mut converged = false;
    let mut n_iters = 0;

    for iter in 1..=config.max_iters {
        let order = if config.shuffle_coordinates {
            let mut order = CoordinateOrder::shuffled(geno.n_snps(), 0, &mut rng);
            order.traits = active.clone();
            order.traits.shuffle(&mut rng);
            order
        } else {
            CoordinateOrder {
                snps: (0..geno.n_snps()).collect(),
                traits: active.clone(),
            }
        };
        e_step_sweep(&mut state, &params, geno, &order)?;
        step_trace.push(elbo(&state, &params, geno)?);

        m_step_traits(
            &state,
            &mut params,
            geno,
            config.mode,
            config.updates,
            &active,
        )?;
        let next = elbo(&state, &params, geno)?;
        step_trace.push(next);
        elbo_trace.push(next);
        n_iters = iter;

        match config.mode {
            PrecisionMode::Diagonal => {
                active.retain(|&k| {
                    let value = trait_elbo(&state, &params, geno, k);
                    let moving = relative_change(trait_values[k], value) >= config.elbo_rel_tol;
                    trait_values[k] = value;
                    moving
                });
                if active.is_empty() {
                    converged = true;
                }
            }
            PrecisionMode::Full => {
                converged = relative_change(current, next) < config.elbo_rel_tol;
            }
        }
        current = next;
        if converged {
            break;
        }
    }

    Ok(FitResult {
        state,
        params,
        elbo_trace,
        step_trace,
        converged,
        n_iters,
    })
}

/// Diagonal-precision fit followed by a full fit started from its output.
///
/// Returns `(single_trait, joint)`. Both phases use `config` apart from
/// `mode` and `init`.
pub fn fit_two_phase(
    geno: &GenotypeMatrix,
    pheno: &PhenotypeMatrix,
    config: &FitConfig,
) -> Result<(FitResult, FitResult)> {
    let first = fit(
        geno,
        pheno,
        &FitConfig {
            mode: PrecisionMode::Diagonal,
            ..config.clone()
        },
    )?;
    let second = fit(
        geno,
        pheno,
        &FitConfig {
            mode: PrecisionMode::Full,
            init: Init::WarmStart {
                state: first.state.clone(),
                params: first.params.clone(),
            },
            ..config.clone()
        },
    )?;
    Ok((first, second))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::String;

    fn one_snp() -> (GenotypeMatrix, PhenotypeMatrix) {
        let x = Matrix::from_columns(2, &[vec![1.0, -1.0]]);
        let y = Matrix::from_columns(2, &[vec![1.0, -1.0]]);
        (
            GenotypeMatrix::new(x, vec![String::from("s")]).unwrap(),
            PhenotypeMatrix::new(y, vec![String::from("t")]).unwrap(),
        )
    }

    #[test]
    fn prior_moments_give_prior_inclusion() {
        for a in [1e-6, 0.01, 0.3, 0.5, 0.9] {
            let alpha = inclusion_probability(a, 0.0, 0.7, 0.7);
            assert!((alpha - a).abs() < 1e-15, "{a} vs {alpha}");
        }
    }

    #[test]
    fn slab_variance_substitution() {
        assert_eq!(slab_posterior_variance(1.0, 3.0, 1.0), 0.25);
    }

    #[test]
    fn single_snp_hand_values() {
        let (geno, pheno) = one_snp();
        let params = ModelParams::new(vec![0.5], vec![1.0], Matrix::identity(1)).unwrap();
        let mut state = VariationalState::from_prior(&geno, &pheno, &params);
        update_coordinate(&mut state, &params, &geno, 0, 0).unwrap();
        let mu = state.mu()[(0, 0)];
        let s2 = state.s2()[(0, 0)];
        assert!((mu - 2.0 / 3.0).abs() < 1e-15);
        assert!((s2 - 1.0 / 3.0).abs() < 1e-15);
        // logit α = ½ (μ²/s² + ln s²/σ²) = ½ (4/3 - ln 3)
        let expected = logistic(0.5 * (4.0 / 3.0 - f64::ln(3.0)));
        assert!((state.alpha()[(0, 0)] - expected).abs() < 1e-15);
        assert!((expected - 0.5293).abs() < 1e-4);
        assert!(state.residual_drift(&geno, &pheno) < 1e-15);
    }

    #[test]
    fn empty_design_is_gaussian_likelihood() {
        let y = Matrix::from_columns(4, &[vec![1.0, -2.0, 0.5, 0.5]]);
        let pheno = PhenotypeMatrix::new(y.clone(), vec![String::from("t")]).unwrap();
        let geno = GenotypeMatrix::new(Matrix::zeros(4, 0), Vec::new()).unwrap();
        let v = 1.7;
        let params =
            ModelParams::new(vec![0.1], vec![1.0], Matrix::from_diagonal(&[1.0 / v])).unwrap();
        let mut state = VariationalState::from_prior(&geno, &pheno, &params);
        e_step_sweep(
            &mut state,
            &params,
            &geno,
            &CoordinateOrder::row_major(0, 1),
        )
        .unwrap();
        assert_eq!(state.residuals(), pheno.data());
        let yy = linalg::dot(y.col(0), y.col(0));
        let n = 4.0;
        let expected = -yy / (2.0 * v) - 0.5 * n * v.ln() - 0.5 * n * LN_2PI;
        let got = elbo(&state, &params, &geno).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn prior_state_has_zero_kl_terms() {
        let (geno, pheno) = one_snp();
        let params = ModelParams::new(vec![0.2], vec![0.4], Matrix::identity(1)).unwrap();
        let state = VariationalState::from_prior(&geno, &pheno, &params);
        // with q = prior only the expected log-likelihood remains
        let n = 2.0;
        let expected = -0.5 * linalg::dot(pheno.column(0), pheno.column(0))
            - 0.5 * geno.col_sq_norm(0) * effect_variance(0.2, 0.0, 0.4)
            - 0.5 * n * LN_2PI;
        let got = elbo(&state, &params, &geno).unwrap();
        assert!((got - expected).abs() < 1e-14);
    }

    #[test]
    fn m_step_substitutions() {
        let x = Matrix::from_columns(
            4,
            &(0..10)
                .map(|j| {
                    let s = 1.0 + j as f64;
                    vec![s, -s, 0.5 * s, -0.5 * s]
                })
                .collect::<Vec<_>>(),
        );
        let geno = GenotypeMatrix::from_raw(&x, None).unwrap();
        let y = Matrix::from_columns(4, &[vec![1.0, 2.0, -1.5, -1.5], vec![0.3, -0.3, 1.0, -1.0]]);
        let pheno = PhenotypeMatrix::new(y, vec![String::from("a"), String::from("b")]).unwrap();
        let params = ModelParams::null_init(&pheno).unwrap();

        let mut state = VariationalState::from_prior(&geno, &pheno, &params);
        state.alpha.as_mut_slice().fill(0.5);
        state.recompute_residuals(&geno, &pheno);
        let mut p1 = params.clone();
        m_step(
            &state,
            &mut p1,
            &geno,
            PrecisionMode::Full,
            MStepUpdates::ALL,
        )
        .unwrap();
        assert_eq!(p1.inclusion_probs(), &[0.5, 0.5]);

        state.alpha.as_mut_slice().fill(0.0);
        state.recompute_residuals(&geno, &pheno);
        let mut p0 = params.clone();
        m_step(
            &state,
            &mut p0,
            &geno,
            PrecisionMode::Full,
            MStepUpdates::ALL,
        )
        .unwrap();
        assert_eq!(p0.inclusion_probs(), &[1e-6, 1e-6]);
        assert_eq!(p0.slab_vars(), params.slab_vars());
        let yty = pheno.data().transpose().matmul(pheno.data());
        let cov = p0.covariance();
        for (a, b) in cov.as_slice().iter().zip(yty.as_slice()) {
            assert!((a - b / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_residual_columns_share_covariance() {
        let x = Matrix::from_columns(4, &[vec![1.0, -1.0, 2.0, -2.0], vec![1.0, 1.0, -1.0, -1.0]]);
        let geno = GenotypeMatrix::new(x, vec![String::from("a"), String::from("b")]).unwrap();
        let y = Matrix::from_columns(4, &[vec![1.0, 0.5, -2.0, 0.5], vec![1.0, 0.5, -2.0, 0.5]]);
        let pheno = PhenotypeMatrix::new(y, vec![String::from("a"), String::from("b")]).unwrap();
        let params = ModelParams::null_init(&pheno).unwrap();
        let state = VariationalState::from_prior(&geno, &pheno, &params);
        let r = state.residuals().col(0);
        let rr = linalg::dot(r, r) / 4.0;
        let v = weighted_effect_variance(&state, &geno, 0) / 4.0;
        let mut cov = Matrix::zeros(2, 2);
        cov[(0, 0)] = rr + v;
        cov[(1, 1)] = rr + v;
        cov[(0, 1)] = rr;
        cov[(1, 0)] = rr;
        let mut updated = params.clone();
        m_step(
            &state,
            &mut updated,
            &geno,
            PrecisionMode::Full,
            MStepUpdates::ALL,
        )
        .unwrap();
        let got = updated.covariance();
        assert!((got[(0, 1)] - rr).abs() < 1e-10 * rr);
        assert!(got.max_abs_diff(&cov) < 1e-10);
    }

    #[test]
    fn singular_covariance_is_reported() {
        let cov = Matrix::from_row_major(2, 2, &[1.0, 1.0 + 1e-3, 1.0 + 1e-3, 1.0]);
        assert_eq!(invert_covariance(cov), Err(Error::SingularCovariance));
        let cov = Matrix::from_row_major(2, 2, &[1.0, f64::NAN, f64::NAN, 1.0]);
        assert_eq!(invert_covariance(cov), Err(Error::SingularCovariance));
    }

    #[test]
    fn non_finite_update_detected() {
        let (geno, pheno) = one_snp();
        let params = ModelParams::new(vec![0.5], vec![1.0], Matrix::identity(1)).unwrap();
        let mut state = VariationalState::from_prior(&geno, &pheno, &params);
        state.residuals[(0, 0)] = f64::INFINITY;
        assert_eq!(
            update_coordinate(&mut state, &params, &geno, 0, 0),
            Err(Error::NonFiniteUpdate {
                snp: 0,
                trait_index: 0
            })
        );
    }

    #[test]
    fn config_validation() {
        let mut c = FitConfig::default();
        assert!(c.validate().is_ok());
        c.max_iters = 0;
        assert!(c.validate().is_err());
        c = FitConfig {
            elbo_rel_tol: 0.0,
            ..FitConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn causal_snp_recovered_on_tiny_design() {
        // y = 2 x_0 + small noise, x_1 unrelated
        let x0 = [1.0, -1.0, 2.0, -2.0, 0.5, -0.5, 1.5, -1.5];
        let x1 = [1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0];
        let noise = [0.1, -0.05, 0.02, 0.03, -0.1, 0.04, 0.0, -0.04];
        let y: Vec<f64> = (0..8).map(|i| 2.0 * x0[i] + noise[i]).collect();
        let geno =
            GenotypeMatrix::from_raw(&Matrix::from_columns(8, &[x0.to_vec(), x1.to_vec()]), None)
                .unwrap();
        let pheno = PhenotypeMatrix::from_raw(&Matrix::from_columns(8, &[y]), None).unwrap();
        let fit = fit(&geno, &pheno, &FitConfig::default()).unwrap();
        assert!(fit.state.alpha()[(0, 0)] > 0.95);
        assert!(fit.state.alpha()[(1, 0)] < 0.5);
    }
}
