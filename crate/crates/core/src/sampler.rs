//! MCMC for Bayesian finite Gaussian mixtures.
//!
//! Three modes share the same building blocks:
//!
//! * [`SamplerMode::FixedK`]: data-augmented Gibbs sampling with `K` fixed.
//!   A sweep is classify → component parameters (all `K`) → hyperparameter
//!   `C0` (all `K`) → weights.
//! * [`SamplerMode::Sparse`]: the same sweep on a deliberately overfitting
//!   mixture with a small Dirichlet parameter.
//! * [`SamplerMode::Telescoping`]: `K` is random. A sweep is classify →
//!   compact filled components to the front → parameters of the filled
//!   components → `K | N_1..N_K₊` → add `K − K₊` empty components drawn from
//!   the prior → weights over all `K` → `C0` from the filled components.
//!
//! Every sweep may end with a uniformly random relabeling (the permutation
//! sampler). All randomness comes from the caller's RNG, so a run is a pure
//! function of its inputs and seed.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::clustering::{kmeans, ClusteringError, KMeansConfig, Points};
use crate::distributions::{
    sample_categorical_log, sample_dirichlet, sample_inv_wishart, sample_mvnormal_with_factor,
    sample_wishart, DistError, GaussianLogDensity, WishartParams,
};
use crate::linalg::{spd_cholesky, spd_inverse, symmetrize};
use crate::model::{
    mixture_log_likelihood, ChainConfig, Dataset, KPrior, MixtureState, ModelError, PriorConfig,
};
use crate::ChainRng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SamplerError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("all component densities underflow for observation {observation}")]
    Underflow { observation: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Clustering(#[from] ClusteringError),
    #[error("sweep {iter}: {source}")]
    AtIteration {
        iter: usize,
        #[source]
        source: Box<SamplerError>,
    },
}

impl SamplerError {
    /// Sweep index at which a chain failed, if known.
    pub fn iteration(&self) -> Option<usize> {
        match self {
            SamplerError::AtIteration { iter, .. } => Some(*iter),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplerMode {
    FixedK,
    Sparse,
    Telescoping { initial_k: usize },
}

impl SamplerMode {
    pub fn name(&self) -> &'static str {
        match self {
            SamplerMode::FixedK => "fixed-k",
            SamplerMode::Sparse => "sfm",
            SamplerMode::Telescoping { .. } => "mfm",
        }
    }
}

/// One stored sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    /// 1-based sweep index.
    pub iter: usize,
    pub k: usize,
    pub k_plus: usize,
    pub eta: Vec<f64>,
    pub mu: Vec<DVector<f64>>,
    pub sigma: Vec<DMatrix<f64>>,
    pub counts: Vec<usize>,
    pub s: Option<Vec<usize>>,
    pub log_lik: f64,
}

impl SweepRecord {
    fn from_state(iter: usize, state: &MixtureState, log_lik: f64, keep_s: bool) -> Self {
        Self {
            iter,
            k: state.k(),
            k_plus: state.k_plus,
            eta: state.eta.clone(),
            mu: state.mu.clone(),
            sigma: state.sigma.clone(),
            counts: state.counts.clone(),
            s: keep_s.then(|| state.s.clone()),
            log_lik,
        }
    }
}

/// Light per-sweep summary kept for every sweep, burn-in included.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub iter: usize,
    pub k: usize,
    pub k_plus: usize,
    pub log_lik: f64,
    /// First coordinate of each component mean.
    pub mu_first: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub records: Vec<SweepRecord>,
    pub trace: Vec<TracePoint>,
    pub config: ChainConfig,
    pub prior: PriorConfig,
    pub mode: SamplerMode,
    pub n_obs: usize,
    pub wall_time: Duration,
    pub seed: u64,
}

/// Quantities of the prior reused by every sweep.
struct PriorCache {
    b0_prec: DMatrix<f64>,
    b0_prec_b0: DVector<f64>,
}

impl PriorCache {
    fn new(prior: &PriorConfig) -> Result<Self, SamplerError> {
        let b0_prec = spd_inverse(&prior.big_b0)?;
        let b0_prec_b0 = &b0_prec * &prior.b0;
        Ok(Self {
            b0_prec,
            b0_prec_b0,
        })
    }
}

fn check_dims(data: &Dataset, prior: &PriorConfig) -> Result<(), SamplerError> {
    if data.dim() != prior.dim() {
        return Err(SamplerError::Config(format!(
            "data has {} columns but the prior has dimension {}",
            data.dim(),
            prior.dim()
        )));
    }
    Ok(())
}

/// Initial state from a k-means partition of the raw data.
///
/// Means are the cluster means, every `Σ_k = φ S`, `η_k = 1/K` and `C0` is
/// the prior's `C0`.
pub fn init_from_kmeans<R: Rng + ?Sized>(
    data: &Dataset,
    k: usize,
    prior: &PriorConfig,
    rng: &mut R,
) -> Result<MixtureState, SamplerError> {
    if k == 0 {
        return Err(SamplerError::Config("K must be at least 1".into()));
    }
    check_dims(data, prior)?;
    let r = data.dim();
    let res = kmeans(Points::new(data.rows(), r)?, &KMeansConfig::new(k), rng)?;
    let grand_mean = DVector::from_iterator(r, data.y().row_mean().iter().cloned());
    let mut sums = vec![DVector::zeros(r); k];
    let mut counts = vec![0usize; k];
    for (i, &l) in res.labels.iter().enumerate() {
        sums[l] += DVector::from_column_slice(data.row(i));
        counts[l] += 1;
    }
    let mu = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &c)| {
            if c > 0 {
                s / c as f64
            } else {
                grand_mean.clone()
            }
        })
        .collect();
    let sigma0 = &prior.s * prior.phi;
    let mut state = MixtureState {
        eta: vec![1.0 / k as f64; k],
        mu,
        sigma: vec![sigma0; k],
        c0: prior.c0_init.clone(),
        s: res.labels,
        counts: Vec::new(),
        k_plus: 0,
    };
    state.recount();
    Ok(state)
}

/// Draw every `S_i` with `P(S_i = k) ∝ η_k f_N(y_i | μ_k, Σ_k)`.
pub fn step_classify<R: Rng + ?Sized>(
    data: &Dataset,
    state: &mut MixtureState,
    rng: &mut R,
) -> Result<(), SamplerError> {
    let k = state.k();
    if k == 1 {
        state.s.iter_mut().for_each(|s| *s = 0);
        state.recount();
        return Ok(());
    }
    let dens: Vec<GaussianLogDensity> = state
        .mu
        .iter()
        .zip(&state.sigma)
        .map(|(m, s)| GaussianLogDensity::new(m, s))
        .collect::<Result<_, _>>()?;
    let log_eta: Vec<f64> = state.eta.iter().map(|e| e.ln()).collect();
    let mut logp = vec![0.0; k];
    for i in 0..data.n() {
        let y = data.row(i);
        for ((lp, d), le) in logp.iter_mut().zip(&dens).zip(&log_eta) {
            *lp = le + d.eval(y);
        }
        state.s[i] = sample_categorical_log(&logp, rng)
            .map_err(|_| SamplerError::Underflow { observation: i })?;
    }
    state.recount();
    Ok(())
}

/// `η ~ Dirichlet(γ_K + N_1, …, γ_K + N_K)` over all components.
pub fn step_weights<R: Rng + ?Sized>(
    state: &mut MixtureState,
    gamma_k: f64,
    rng: &mut R,
) -> Result<(), SamplerError> {
    let e: Vec<f64> = state.counts.iter().map(|&n| gamma_k + n as f64).collect();
    state.eta = sample_dirichlet(&e, rng)?;
    Ok(())
}

fn members(state: &MixtureState) -> Vec<Vec<usize>> {
    let mut m = vec![Vec::new(); state.k()];
    for (i, &s) in state.s.iter().enumerate() {
        m[s].push(i);
    }
    m
}

fn draw_component<R: Rng + ?Sized>(
    data: &Dataset,
    k: usize,
    rows: &[usize],
    state: &mut MixtureState,
    prior: &PriorConfig,
    cache: &PriorCache,
    rng: &mut R,
) -> Result<(), SamplerError> {
    let r = data.dim();
    let nk = rows.len() as f64;
    let mut sum = DVector::zeros(r);
    for &i in rows {
        for (s, y) in sum.iter_mut().zip(data.row(i)) {
            *s += y;
        }
    }
    // μ_k | Σ_k: B_k = (B0⁻¹ + N_k Σ_k⁻¹)⁻¹, b_k = B_k (B0⁻¹ b0 + Σ_k⁻¹ Σ y_i)
    let prec = spd_inverse(&state.sigma[k])?;
    let post_prec = symmetrize(&(&cache.b0_prec + &prec * nk));
    let post_chol = spd_cholesky(&post_prec).map_err(|_| {
        SamplerError::Numerical(format!(
            "posterior precision of component {} is singular",
            k + 1
        ))
    })?;
    let rhs = &cache.b0_prec_b0 + &prec * &sum;
    let b_k = post_chol.solve(&rhs);
    // draw with covariance L⁻ᵀ L⁻¹: μ = b + L⁻ᵀ z
    let z = DVector::from_fn(r, |_, _| {
        rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, rng)
    });
    let lt = post_chol.l().transpose();
    let offset = lt
        .solve_upper_triangular(&z)
        .ok_or_else(|| SamplerError::Numerical("triangular solve failed".into()))?;
    let mu = b_k + offset;

    // Σ_k⁻¹ | μ_k ~ W(c0 + N_k/2, C0 + ½ Σ (y_i − μ_k)(y_i − μ_k)ᵀ)
    let mut scatter = DMatrix::zeros(r, r);
    let mut diff = DVector::zeros(r);
    for &i in rows {
        for (d, (y, m)) in diff.iter_mut().zip(data.row(i).iter().zip(mu.iter())) {
            *d = y - m;
        }
        scatter.ger(1.0, &diff, &diff, 1.0);
    }
    let ck = prior.c0 + nk / 2.0;
    let cmat = &state.c0 + scatter * 0.5;
    let params = WishartParams::new(ck, symmetrize(&cmat))?;
    state.mu[k] = mu;
    state.sigma[k] = sample_inv_wishart(&params, rng);
    Ok(())
}

/// Conditional draws of `μ_k` then `Σ_k` for each component.
///
/// With `filled_only`, empty components keep their current values; otherwise
/// they are drawn with `N_k = 0`, which reduces to the prior given `C0`.
pub fn step_component_params<R: Rng + ?Sized>(
    data: &Dataset,
    state: &mut MixtureState,
    prior: &PriorConfig,
    filled_only: bool,
    rng: &mut R,
) -> Result<(), SamplerError> {
    let cache = PriorCache::new(prior)?;
    component_params_cached(data, state, prior, &cache, filled_only, rng)
}

fn component_params_cached<R: Rng + ?Sized>(
    data: &Dataset,
    state: &mut MixtureState,
    prior: &PriorConfig,
    cache: &PriorCache,
    filled_only: bool,
    rng: &mut R,
) -> Result<(), SamplerError> {
    let groups = members(state);
    for (k, rows) in groups.iter().enumerate() {
        if filled_only && rows.is_empty() {
            continue;
        }
        draw_component(data, k, rows, state, prior, cache, rng)?;
    }
    Ok(())
}

/// `C0 ~ W(g0 + K' c0, G0 + Σ Σ_k⁻¹)`, summing over all components, or over
/// the filled ones (`K' = K₊`) when `filled_only` is set.
pub fn step_hyper<R: Rng + ?Sized>(
    state: &mut MixtureState,
    prior: &PriorConfig,
    filled_only: bool,
    rng: &mut R,
) -> Result<(), SamplerError> {
    let mut sum_prec = prior.big_g0.clone();
    let mut used = 0usize;
    for (sigma, &n) in state.sigma.iter().zip(&state.counts) {
        if filled_only && n == 0 {
            continue;
        }
        sum_prec += spd_inverse(sigma)?;
        used += 1;
    }
    if used == 0 {
        return Err(SamplerError::Config(
            "hyperparameter update needs at least one component".into(),
        ));
    }
    let params = WishartParams::new(prior.g0 + used as f64 * prior.c0, symmetrize(&sum_prec))?;
    state.c0 = sample_wishart(&params, rng);
    Ok(())
}

/// Unnormalized `log p(K | N_1..N_K₊, γ)` for `K = K₊..=k_max`.
pub fn log_k_posterior(
    filled_counts: &[usize],
    prior: &PriorConfig,
) -> Result<Vec<(usize, f64)>, SamplerError> {
    let KPrior::Random { bnb, k_max } = prior.k_prior else {
        return Err(SamplerError::Config(
            "sampling K requires a random-K prior".into(),
        ));
    };
    let k_plus = filled_counts.len();
    if k_plus == 0 {
        return Err(SamplerError::Config("no filled components".into()));
    }
    if k_max < k_plus {
        return Err(SamplerError::Config(format!(
            "k_max = {k_max} is below the number of filled components {k_plus}"
        )));
    }
    let n: usize = filled_counts.iter().sum();
    (k_plus..=k_max)
        .map(|k| {
            let g = prior.gamma_spec.gamma_for(k);
            let kf = k as f64;
            let mut lp = ln_gamma(kf + 1.0) - ln_gamma((k - k_plus) as f64 + 1.0)
                + ln_gamma(kf * g)
                - ln_gamma(kf * g + n as f64);
            for &nk in filled_counts {
                lp += ln_gamma(nk as f64 + g) - ln_gamma(1.0 + g);
            }
            lp += bnb.log_pmf_k(k)?;
            Ok((k, lp))
        })
        .collect()
}

/// Draw `K` given the sizes of the filled components.
pub fn step_sample_k<R: Rng + ?Sized>(
    state: &MixtureState,
    prior: &PriorConfig,
    rng: &mut R,
) -> Result<usize, SamplerError> {
    let filled: Vec<usize> = state.counts.iter().cloned().filter(|&n| n > 0).collect();
    let post = log_k_posterior(&filled, prior)?;
    let lp: Vec<f64> = post.iter().map(|(_, l)| *l).collect();
    Ok(post[sample_categorical_log(&lp, rng)?].0)
}

/// Move filled components to the front, keeping their relative order, and
/// drop the empty ones.
pub fn compact_filled(state: &mut MixtureState) {
    let keep: Vec<usize> = (0..state.k()).filter(|&k| state.counts[k] > 0).collect();
    if keep.len() == state.k() {
        return;
    }
    let mut new_index = vec![usize::MAX; state.k()];
    for (to, &from) in keep.iter().enumerate() {
        new_index[from] = to;
    }
    state.eta = keep.iter().map(|&k| state.eta[k]).collect();
    state.mu = keep.iter().map(|&k| state.mu[k].clone()).collect();
    state.sigma = keep.iter().map(|&k| state.sigma[k].clone()).collect();
    state.counts = keep.iter().map(|&k| state.counts[k]).collect();
    for s in &mut state.s {
        *s = new_index[*s];
    }
    state.k_plus = keep.len();
}

/// Extend a compacted state to `k` components; the new ones are empty with
/// `μ ~ N(b0, B0)` and `Σ ~ W⁻¹(c0, C0)` at the current `C0`.
///
/// The new components get weight zero until the next weight update.
pub fn step_add_empty<R: Rng + ?Sized>(
    state: &mut MixtureState,
    prior: &PriorConfig,
    k: usize,
    rng: &mut R,
) -> Result<(), SamplerError> {
    if k < state.k_plus {
        return Err(SamplerError::Config(format!(
            "cannot shrink to {k} components with {} filled",
            state.k_plus
        )));
    }
    compact_filled(state);
    let extra = k - state.k();
    if extra == 0 {
        return Ok(());
    }
    let b0_lower = spd_cholesky(&prior.big_b0)?.l();
    let sp = prior.sigma_prior(&state.c0)?;
    for _ in 0..extra {
        state
            .mu
            .push(sample_mvnormal_with_factor(&prior.b0, &b0_lower, rng));
        state.sigma.push(sample_inv_wishart(&sp, rng));
        state.eta.push(0.0);
        state.counts.push(0);
    }
    Ok(())
}

/// Apply a uniformly random relabeling. Returns the permutation used
/// (component `j` became `perm[j]`).
pub fn permute_labels_random<R: Rng + ?Sized>(state: &mut MixtureState, rng: &mut R) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..state.k()).collect();
    perm.shuffle(rng);
    state.apply_permutation(&perm);
    perm
}

fn check_mode(prior: &PriorConfig, mode: SamplerMode) -> Result<usize, SamplerError> {
    match (mode, prior.k_prior) {
        (SamplerMode::FixedK, KPrior::Fixed { k })
        | (SamplerMode::Sparse, KPrior::Sparse { k }) => Ok(k),
        (SamplerMode::Telescoping { initial_k }, KPrior::Random { k_max, .. }) => {
            if initial_k == 0 || initial_k > k_max {
                Err(SamplerError::Config(format!(
                    "initial K = {initial_k} must lie in 1..={k_max}"
                )))
            } else {
                Ok(initial_k)
            }
        }
        (m, p) => Err(SamplerError::Config(format!(
            "sampler mode {} does not match the prior on K ({p:?})",
            m.name()
        ))),
    }
}

fn sweep<R: Rng + ?Sized>(
    data: &Dataset,
    state: &mut MixtureState,
    prior: &PriorConfig,
    cache: &PriorCache,
    mode: SamplerMode,
    permute: bool,
    rng: &mut R,
) -> Result<(), SamplerError> {
    step_classify(data, state, rng)?;
    match mode {
        SamplerMode::FixedK | SamplerMode::Sparse => {
            component_params_cached(data, state, prior, cache, false, rng)?;
            step_hyper(state, prior, false, rng)?;
            step_weights(state, prior.gamma_spec.gamma_for(state.k()), rng)?;
        }
        SamplerMode::Telescoping { .. } => {
            compact_filled(state);
            component_params_cached(data, state, prior, cache, true, rng)?;
            let k = step_sample_k(state, prior, rng)?;
            step_add_empty(state, prior, k, rng)?;
            step_weights(state, prior.gamma_spec.gamma_for(k), rng)?;
            step_hyper(state, prior, true, rng)?;
        }
    }
    if permute {
        permute_labels_random(state, rng);
    }
    Ok(())
}

/// Run one chain from a k-means initialization.
pub fn run_chain<R: Rng + ?Sized>(
    data: &Dataset,
    prior: &PriorConfig,
    config: &ChainConfig,
    mode: SamplerMode,
    rng: &mut R,
) -> Result<ChainOutput, SamplerError> {
    config.validate()?;
    check_dims(data, prior)?;
    let k0 = check_mode(prior, mode)?;
    let start = Instant::now();
    let cache = PriorCache::new(prior)?;
    let mut state = init_from_kmeans(data, k0, prior, rng)?;
    let mut records = Vec::with_capacity(config.n_stored());
    let mut trace = Vec::with_capacity(config.n_iter);
    for iter in 1..=config.n_iter {
        sweep(
            data,
            &mut state,
            prior,
            &cache,
            mode,
            config.permutation_step,
            rng,
        )
        .and_then(|_| Ok(mixture_log_likelihood(data, &state)?))
        .map(|log_lik| {
            trace.push(TracePoint {
                iter,
                k: state.k(),
                k_plus: state.k_plus,
                log_lik,
                mu_first: state.mu.iter().map(|m| m[0]).collect(),
                counts: state.counts.clone(),
            });
            if iter > config.burn_in && (iter - config.burn_in - 1) % config.thinning == 0 {
                records.push(SweepRecord::from_state(
                    iter,
                    &state,
                    log_lik,
                    config.store_assignments,
                ));
            }
        })
        .map_err(|e| SamplerError::AtIteration {
            iter,
            source: Box::new(e),
        })?;
    }
    Ok(ChainOutput {
        records,
        trace,
        config: config.clone(),
        prior: prior.clone(),
        mode,
        n_obs: data.n(),
        wall_time: start.elapsed(),
        seed: config.seed,
    })
}

/// Run `n_chains` independent chains concurrently with seeds
/// `seed, seed + 1, …`.
pub fn run_chains(
    data: &Dataset,
    prior: &PriorConfig,
    config: &ChainConfig,
    mode: SamplerMode,
    n_chains: usize,
) -> Vec<Result<ChainOutput, SamplerError>> {
    (0..n_chains)
        .into_par_iter()
        .map(|c| {
            let mut cfg = config.clone();
            cfg.seed = config.seed.wrapping_add(c as u64);
            let mut rng = ChainRng::seed_from_u64(cfg.seed);
            run_chain(data, prior, &cfg, mode, &mut rng)
        })
        .collect()
}

/// Convenience: seed the chain RNG from `config.seed`.
pub fn run_seeded(
    data: &Dataset,
    prior: &PriorConfig,
    config: &ChainConfig,
    mode: SamplerMode,
) -> Result<ChainOutput, SamplerError> {
    let mut rng = ChainRng::seed_from_u64(config.seed);
    run_chain(data, prior, config, mode, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::sample_mvnormal;
    use crate::model::{build_default_prior, BnbPrior, GammaSpec};
    use std::collections::HashMap;

    fn rng(seed: u64) -> ChainRng {
        ChainRng::seed_from_u64(seed)
    }

    fn data_1d(values: &[f64]) -> Dataset {
        Dataset::from_rows(&values.iter().map(|v| vec![*v]).collect::<Vec<_>>()).unwrap()
    }

    fn two_groups() -> Dataset {
        let mut rows = Vec::new();
        let mut r = rng(99);
        for _ in 0..20 {
            let (a, b): (f64, f64) = (r.random(), r.random());
            rows.push(vec![a, 1.0 - b]);
            rows.push(vec![8.0 + b, 9.0 - a * 0.5]);
        }
        Dataset::from_rows(&rows).unwrap()
    }

    fn prior_for(data: &Dataset, k_prior: KPrior, gamma: GammaSpec) -> PriorConfig {
        build_default_prior(data, 2.5, 0.75, gamma, k_prior).unwrap()
    }

    fn state_1d(eta: &[f64], mu: &[f64], var: &[f64], n: usize) -> MixtureState {
        let mut st = MixtureState {
            eta: eta.to_vec(),
            mu: mu.iter().map(|m| DVector::from_vec(vec![*m])).collect(),
            sigma: var
                .iter()
                .map(|v| DMatrix::from_element(1, 1, *v))
                .collect(),
            c0: DMatrix::identity(1, 1),
            s: vec![0; n],
            counts: vec![],
            k_plus: 0,
        };
        st.recount();
        st
    }

    #[test]
    fn init_single_component() {
        let data = two_groups();
        let p = prior_for(
            &data,
            KPrior::Fixed { k: 1 },
            GammaSpec::Fixed { gamma: 1.0 },
        );
        let st = init_from_kmeans(&data, 1, &p, &mut rng(1)).unwrap();
        assert!(st.s.iter().all(|&s| s == 0));
        let gm = data.y().row_mean();
        assert!((st.mu[0][0] - gm[0]).abs() < 1e-12);
        assert_eq!(st.eta, vec![1.0]);
    }

    #[test]
    fn init_covariances_equal_phi_s() {
        let data = two_groups();
        let p = prior_for(
            &data,
            KPrior::Fixed { k: 2 },
            GammaSpec::Fixed { gamma: 1.0 },
        );
        let st = init_from_kmeans(&data, 2, &p, &mut rng(2)).unwrap();
        for s in &st.sigma {
            assert_eq!(s, &(&p.s * 0.75));
        }
        assert_eq!(st.counts, vec![20, 20]);
        assert_eq!(st.c0, p.c0_init);
    }

    #[test]
    fn classify_single_component_is_trivial() {
        let data = data_1d(&[0.0, 1.0, 2.0]);
        let mut st = state_1d(&[1.0], &[0.0], &[1.0], 3);
        step_classify(&data, &mut st, &mut rng(3)).unwrap();
        assert_eq!(st.s, vec![0, 0, 0]);
    }

    #[test]
    fn classify_symmetric_components() {
        let data = data_1d(&[0.3; 50]);
        let mut st = state_1d(&[0.5, 0.5], &[0.0, 0.0], &[1.0, 1.0], 50);
        let mut r = rng(4);
        let mut ones = 0usize;
        let reps = 400;
        for _ in 0..reps {
            step_classify(&data, &mut st, &mut r).unwrap();
            ones += st.counts[0];
        }
        let f = ones as f64 / (reps * 50) as f64;
        assert!((f - 0.5).abs() < 0.02, "{f}");
    }

    #[test]
    fn classify_prefers_near_component() {
        let data = data_1d(&[0.0]);
        let mut st = state_1d(&[0.5, 0.5], &[0.0, 5.0], &[0.01, 0.01], 1);
        let mut r = rng(5);
        let hits = (0..10_000)
            .filter(|_| {
                step_classify(&data, &mut st, &mut r).unwrap();
                st.s[0] == 0
            })
            .count();
        assert!(hits as f64 / 10_000.0 > 0.999);
    }

    #[test]
    fn classify_reports_underflow() {
        let data = data_1d(&[0.0, 1e200]);
        let mut st = state_1d(&[0.5, 0.5], &[0.0, 1.0], &[1.0, 1.0], 2);
        assert_eq!(
            step_classify(&data, &mut st, &mut rng(6)),
            Err(SamplerError::Underflow { observation: 1 })
        );
    }

    #[test]
    fn weights_posterior_mean() {
        let mut st = state_1d(&[0.5, 0.5], &[0.0, 0.0], &[1.0, 1.0], 0);
        let mut r = rng(7);
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            step_weights(&mut st, 1.0, &mut r).unwrap();
            acc += st.eta[0];
        }
        assert!((acc / n as f64 - 0.5).abs() < 0.01);

        st.counts = vec![90, 10];
        let mut acc = 0.0;
        for _ in 0..n {
            step_weights(&mut st, 1.0, &mut r).unwrap();
            acc += st.eta[0];
        }
        assert!((acc / n as f64 - 91.0 / 102.0).abs() < 0.005);

        let mut single = state_1d(&[1.0], &[0.0], &[1.0], 3);
        step_weights(&mut single, 1.0, &mut r).unwrap();
        assert_eq!(single.eta, vec![1.0]);
    }

    fn scalar_prior(b0: f64, big_b0: f64, c0: f64, g0: f64, big_g0: f64) -> PriorConfig {
        PriorConfig {
            gamma_spec: GammaSpec::Fixed { gamma: 1.0 },
            b0: DVector::from_vec(vec![b0]),
            big_b0: DMatrix::from_element(1, 1, big_b0),
            c: c0 - 1.0,
            phi: 1.0,
            c0,
            g0,
            c0_init: DMatrix::identity(1, 1),
            big_g0: DMatrix::from_element(1, 1, big_g0),
            s: DMatrix::identity(1, 1),
            range: DVector::from_vec(vec![1.0]),
            k_prior: KPrior::Fixed { k: 1 },
        }
    }

    #[test]
    fn empty_component_draws_from_prior() {
        let data = data_1d(&[10.0, 11.0]);
        let p = scalar_prior(2.0, 4.0, 3.0, 1.0, 1.0);
        let mut r = rng(8);
        let n = 100_000;
        let (mut m1, mut m2, mut sv) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let mut st = state_1d(&[0.5, 0.5], &[0.0, 0.0], &[1.0, 1.0], 2);
            st.c0 = DMatrix::from_element(1, 1, 2.0);
            step_component_params(&data, &mut st, &p, false, &mut r).unwrap();
            let mu = st.mu[1][0];
            m1 += mu;
            m2 += mu * mu;
            sv += st.sigma[1][(0, 0)];
        }
        let mean = m1 / n as f64;
        let var = m2 / n as f64 - mean * mean;
        assert!((mean - 2.0).abs() < 0.02);
        assert!((var - 4.0).abs() < 0.08);
        // W⁻¹(3, 2) mean: 2·2/(6 − 2) = 1
        assert!((sv / n as f64 - 1.0).abs() < 0.03);
    }

    #[test]
    fn mean_draws_match_conjugate_normal_posterior() {
        // fixed Σ = 2: run only the μ part by holding Σ and re-setting it
        let ys = [1.2, 0.4, 2.2, 1.9, 0.8];
        let data = data_1d(&ys);
        let p = scalar_prior(0.0, 10.0, 3.0, 1.0, 1.0);
        let sigma2 = 2.0;
        let prec = 1.0 / 10.0 + ys.len() as f64 / sigma2;
        let b_var = 1.0 / prec;
        let b_mean = b_var * (ys.iter().sum::<f64>() / sigma2);
        let mut r = rng(9);
        let n = 100_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        let mut st = state_1d(&[1.0], &[0.0], &[sigma2], ys.len());
        for _ in 0..n {
            st.sigma[0] = DMatrix::from_element(1, 1, sigma2);
            step_component_params(&data, &mut st, &p, false, &mut r).unwrap();
            s1 += st.mu[0][0];
            s2 += st.mu[0][0].powi(2);
        }
        let m = s1 / n as f64;
        let v = s2 / n as f64 - m * m;
        assert!((m - b_mean).abs() < 0.02 * b_mean, "{m} vs {b_mean}");
        assert!((v - b_var).abs() < 0.02 * b_var, "{v} vs {b_var}");
    }

    #[test]
    fn covariance_draws_match_inverse_wishart_mean() {
        // fixed μ = 1: C_k = C0 + ½ Σ (y − 1)², c_k = c0 + N/2
        let ys = [1.2, 0.4, 2.2, 1.9, 0.8, -0.3];
        let data = data_1d(&ys);
        let p = scalar_prior(1.0, 1e-12, 2.5, 1.0, 1.0);
        let c0m = 1.5;
        let ck = 2.5 + ys.len() as f64 / 2.0;
        let cmat = c0m + 0.5 * ys.iter().map(|y| (y - 1.0f64).powi(2)).sum::<f64>();
        let want = 2.0 * cmat / (2.0 * ck - 2.0);
        let mut r = rng(10);
        let n = 100_000;
        let mut acc = 0.0;
        let mut st = state_1d(&[1.0], &[1.0], &[1.0], ys.len());
        st.c0 = DMatrix::from_element(1, 1, c0m);
        for _ in 0..n {
            // B0 ≈ 0 pins μ at b0 = 1
            step_component_params(&data, &mut st, &p, false, &mut r).unwrap();
            acc += st.sigma[0][(0, 0)];
        }
        assert!((acc / n as f64 - want).abs() < 0.03 * want);
    }

    #[test]
    fn hyper_draw_mean() {
        let p = scalar_prior(0.0, 1.0, 3.0, 1.5, 2.0);
        let mut st = state_1d(&[1.0], &[0.0], &[1.0], 1);
        let mut r = rng(11);
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            step_hyper(&mut st, &p, false, &mut r).unwrap();
            acc += st.c0[(0, 0)];
        }
        // W(g0 + c0, G0 + 1) mean (g0 + c0)/(G0 + 1)
        let want = (1.5 + 3.0) / (2.0 + 1.0);
        assert!((acc / n as f64 - want).abs() < 0.03 * want);
    }

    #[test]
    fn hyper_filled_only_guard_and_equivalence() {
        let p = scalar_prior(0.0, 1.0, 3.0, 1.5, 2.0);
        let mut st = state_1d(&[0.5, 0.5], &[0.0, 1.0], &[1.0, 2.0], 0);
        assert!(matches!(
            step_hyper(&mut st, &p, true, &mut rng(12)),
            Err(SamplerError::Config(_))
        ));
        st.s = vec![0, 1];
        st.recount();
        let mut a = st.clone();
        let mut b = st.clone();
        step_hyper(&mut a, &p, true, &mut rng(13)).unwrap();
        step_hyper(&mut b, &p, false, &mut rng(13)).unwrap();
        assert_eq!(a.c0, b.c0);
    }

    fn random_prior(gamma: GammaSpec, k_max: usize) -> PriorConfig {
        let mut p = scalar_prior(0.0, 1.0, 3.0, 1.0, 1.0);
        p.gamma_spec = gamma;
        p.k_prior = KPrior::Random {
            bnb: BnbPrior {
                a_l: 1.0,
                a_pi: 4.0,
                b_pi: 3.0,
            },
            k_max,
        };
        p
    }

    fn tv_to(expected: &[(usize, f64)], counts: &HashMap<usize, usize>, n: usize) -> f64 {
        0.5 * expected
            .iter()
            .map(|(k, p)| (p - *counts.get(k).unwrap_or(&0) as f64 / n as f64).abs())
            .sum::<f64>()
    }

    #[test]
    fn k_posterior_equals_prior_for_one_observation() {
        let p = random_prior(GammaSpec::Fixed { gamma: 0.7 }, 100);
        let st = state_1d(&[1.0], &[0.0], &[1.0], 1);
        let KPrior::Random { bnb, .. } = p.k_prior else {
            unreachable!()
        };
        let prior_pmf: Vec<(usize, f64)> = (1..=100)
            .map(|k| (k, bnb.log_pmf_k(k).unwrap().exp()))
            .collect();
        let z: f64 = prior_pmf.iter().map(|x| x.1).sum();
        let prior_pmf: Vec<(usize, f64)> = prior_pmf.into_iter().map(|(k, v)| (k, v / z)).collect();

        // analytic cancellation
        let post = log_k_posterior(&[1], &p).unwrap();
        let offset = post[0].1 - prior_pmf[0].1.ln();
        for ((_, lp), (_, pp)) in post.iter().zip(&prior_pmf) {
            assert!((lp - offset - pp.ln()).abs() < 1e-9);
        }

        let mut r = rng(14);
        let n = 100_000;
        let mut counts = HashMap::new();
        for _ in 0..n {
            *counts
                .entry(step_sample_k(&st, &p, &mut r).unwrap())
                .or_insert(0) += 1;
        }
        assert!(tv_to(&prior_pmf, &counts, n) < 0.01);
    }

    #[test]
    fn k_posterior_dynamic_gamma_is_k_times_prior() {
        let p = random_prior(GammaSpec::Dynamic { alpha: 0.5 }, 60);
        let post = log_k_posterior(&[1], &p).unwrap();
        let KPrior::Random { bnb, .. } = p.k_prior else {
            unreachable!()
        };
        let offset = post[0].1 - bnb.log_pmf_k(1).unwrap();
        for (k, lp) in post {
            let want = (k as f64).ln() + bnb.log_pmf_k(k).unwrap();
            assert!((lp - offset - want).abs() < 1e-9);
        }
    }

    #[test]
    fn k_posterior_reaches_large_values() {
        let p = random_prior(GammaSpec::Dynamic { alpha: 0.5 }, 100);
        let mut st = state_1d(&[0.2, 0.2, 0.6], &[0.0; 3], &[1.0; 3], 0);
        st.counts = vec![28, 33, 84];
        st.k_plus = 3;
        let mut r = rng(15);
        let big = (0..10_000)
            .filter(|_| step_sample_k(&st, &p, &mut r).unwrap() > 20)
            .count();
        assert!(big > 0);
    }

    #[test]
    fn k_max_below_k_plus_is_config_error() {
        let p = random_prior(GammaSpec::Fixed { gamma: 1.0 }, 2);
        assert!(matches!(
            log_k_posterior(&[1, 2, 3], &p),
            Err(SamplerError::Config(_))
        ));
    }

    #[test]
    fn compact_and_add_empty() {
        let p = scalar_prior(0.0, 1.0, 3.0, 1.0, 1.0);
        let mut st = state_1d(&[0.2, 0.3, 0.5], &[0.0, 1.0, 2.0], &[1.0, 1.0, 1.0], 0);
        st.s = vec![2, 0, 2];
        st.recount();
        let mut same = st.clone();
        compact_filled(&mut st);
        assert_eq!(st.k(), 2);
        assert_eq!(st.mu[0][0], 0.0);
        assert_eq!(st.mu[1][0], 2.0);
        assert_eq!(st.s, vec![1, 0, 1]);
        step_add_empty(&mut same, &p, 2, &mut rng(16)).unwrap();
        assert_eq!(same.k(), 2);
        assert_eq!(same.s, st.s);

        step_add_empty(&mut st, &p, 5, &mut rng(17)).unwrap();
        assert_eq!(st.k(), 5);
        assert_eq!(st.counts, vec![1, 2, 0, 0, 0]);
        let before = st.k_plus;
        st.recount();
        assert_eq!(st.k_plus, before);
    }

    #[test]
    fn empty_slots_follow_prior_given_c0() {
        let p = scalar_prior(0.0, 1.0, 3.0, 1.0, 1.0);
        let mut r = rng(18);
        let n = 50_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let mut st = state_1d(&[1.0], &[0.0], &[1.0], 1);
            st.c0 = DMatrix::from_element(1, 1, 2.0);
            step_add_empty(&mut st, &p, 3, &mut r).unwrap();
            acc += st.sigma[1][(0, 0)] + st.sigma[2][(0, 0)];
        }
        // 2 C0 / (2 c0 − r − 1) = 4 / 4
        assert!((acc / (2 * n) as f64 - 1.0).abs() < 0.03);
    }

    #[test]
    fn permutation_uniform_and_likelihood_invariant() {
        let data = data_1d(&[0.1, 1.5, 3.0, -0.4]);
        let mut st = state_1d(&[0.2, 0.3, 0.5], &[0.0, 1.0, 2.0], &[1.0, 0.5, 2.0], 4);
        st.s = vec![0, 1, 2, 0];
        st.recount();
        let base = mixture_log_likelihood(&data, &st).unwrap();
        let mut r = rng(19);
        let mut freq: HashMap<Vec<usize>, usize> = HashMap::new();
        let n = 10_000;
        for _ in 0..n {
            let mut s2 = st.clone();
            let perm = permute_labels_random(&mut s2, &mut r);
            assert_eq!(mixture_log_likelihood(&data, &s2).unwrap(), base);
            *freq.entry(perm).or_insert(0) += 1;
        }
        assert_eq!(freq.len(), 6);
        for c in freq.values() {
            assert!((*c as f64 / n as f64 - 1.0 / 6.0).abs() < 0.02);
        }
        let mut one = state_1d(&[1.0], &[0.0], &[1.0], 2);
        assert_eq!(permute_labels_random(&mut one, &mut r), vec![0]);
    }

    /// Alternating `y | θ` and one Gibbs sweep `θ | y` leaves the joint
    /// prior invariant, so parameter moments must match the prior.
    #[test]
    fn successive_conditional_matches_prior_in_two_dimensions() {
        let r = 2;
        let k = 2;
        let prior = PriorConfig {
            gamma_spec: GammaSpec::Fixed { gamma: 1.0 },
            b0: DVector::from_vec(vec![1.0, -2.0]),
            big_b0: DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
            c: 2.5,
            phi: 1.0,
            c0: 4.0,
            g0: 1.5,
            c0_init: DMatrix::identity(2, 2),
            big_g0: DMatrix::from_row_slice(2, 2, &[1.5, 0.3, 0.3, 0.75]),
            s: DMatrix::identity(2, 2),
            range: DVector::from_vec(vec![1.0, 1.0]),
            k_prior: KPrior::Fixed { k },
        };
        let cache = PriorCache::new(&prior).unwrap();
        let mut r_ = rng(21);
        let n = 3;
        let mut data = Dataset::from_rows(&vec![vec![0.0; r]; n]).unwrap();
        let c0 = sample_wishart(&prior.c0_prior().unwrap(), &mut r_);
        let sp = prior.sigma_prior(&c0).unwrap();
        let b0_lower = spd_cholesky(&prior.big_b0).unwrap().l();
        let mut st = MixtureState {
            eta: sample_dirichlet(&[1.0; 2], &mut r_).unwrap(),
            mu: (0..k)
                .map(|_| sample_mvnormal_with_factor(&prior.b0, &b0_lower, &mut r_))
                .collect(),
            sigma: (0..k).map(|_| sample_inv_wishart(&sp, &mut r_)).collect(),
            c0,
            s: vec![0; n],
            counts: vec![],
            k_plus: 0,
        };
        st.s = (0..n)
            .map(|_| crate::distributions::sample_categorical(&st.eta, &mut r_).unwrap())
            .collect();
        st.recount();
        let iters = 300_000;
        let (mut mu0, mut mu1, mut s00, mut s01, mut c00, mut eta0) =
            (vec![], vec![], vec![], vec![], vec![], vec![]);
        for _ in 0..iters {
            let rows: Vec<Vec<f64>> =
                st.s.iter()
                    .map(|&l| {
                        sample_mvnormal(&st.mu[l], &st.sigma[l], &mut r_)
                            .unwrap()
                            .iter()
                            .cloned()
                            .collect()
                    })
                    .collect();
            data = Dataset::from_rows(&rows).unwrap();
            sweep(
                &data,
                &mut st,
                &prior,
                &cache,
                SamplerMode::FixedK,
                false,
                &mut r_,
            )
            .unwrap();
            mu0.push(st.mu[0][0]);
            mu1.push(st.mu[1][1]);
            s00.push(st.sigma[0][(0, 0)]);
            s01.push(st.sigma[1][(0, 1)]);
            c00.push(st.c0[(0, 0)]);
            eta0.push(st.eta[0]);
        }
        let _ = data;
        let e_c0 = spd_inverse(&prior.big_g0).unwrap() * prior.g0;
        let e_sigma = &e_c0 * (2.0 / (2.0 * prior.c0 - r as f64 - 1.0));
        let se = |x: &[f64]| {
            let b = 200;
            let size = x.len() / b;
            let m: Vec<f64> = x
                .chunks(size)
                .take(b)
                .map(|c| c.iter().sum::<f64>() / c.len() as f64)
                .collect();
            let mean = m.iter().sum::<f64>() / b as f64;
            (
                mean,
                (m.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / ((b - 1) * b) as f64).sqrt(),
            )
        };
        for (name, x, want) in [
            ("mu_1[0]", &mu0, 1.0),
            ("mu_2[1]", &mu1, -2.0),
            ("Sigma_1[0,0]", &s00, e_sigma[(0, 0)]),
            ("Sigma_2[0,1]", &s01, e_sigma[(0, 1)]),
            ("C0[0,0]", &c00, e_c0[(0, 0)]),
            ("eta_1", &eta0, 0.5),
        ] {
            let (m, s) = se(x);
            assert!((m - want).abs() < 5.0 * s, "{name}: {m} vs {want} (se {s})");
        }
    }

    fn short_config(n_iter: usize, burn_in: usize, store: bool) -> ChainConfig {
        ChainConfig {
            n_iter,
            burn_in,
            seed: 3,
            store_assignments: store,
            permutation_step: false,
            thinning: 1,
        }
    }

    #[test]
    fn chain_records_respect_invariants() {
        let data = two_groups();
        for (mode, kp, g) in [
            (
                SamplerMode::FixedK,
                KPrior::Fixed { k: 2 },
                GammaSpec::Fixed { gamma: 1.0 },
            ),
            (
                SamplerMode::Sparse,
                KPrior::Sparse { k: 6 },
                GammaSpec::Fixed { gamma: 0.01 },
            ),
            (
                SamplerMode::Telescoping { initial_k: 4 },
                KPrior::Random {
                    bnb: BnbPrior {
                        a_l: 1.0,
                        a_pi: 4.0,
                        b_pi: 3.0,
                    },
                    k_max: 100,
                },
                GammaSpec::Dynamic { alpha: 0.5 },
            ),
        ] {
            let p = prior_for(&data, kp, g);
            let mut cfg = short_config(400, 100, true);
            cfg.permutation_step = true;
            cfg.thinning = 3;
            let out = run_chain(&data, &p, &cfg, mode, &mut rng(20)).unwrap();
            assert_eq!(out.records.len(), cfg.n_stored());
            assert_eq!(out.trace.len(), 400);
            for w in out.records.windows(2) {
                assert!(w[0].iter < w[1].iter);
            }
            for rec in &out.records {
                assert_eq!(rec.counts.iter().sum::<usize>(), data.n());
                assert!((rec.eta.iter().sum::<f64>() - 1.0).abs() < 1e-10);
                assert!(rec.k >= rec.k_plus);
                assert_eq!(rec.k_plus, rec.counts.iter().filter(|&&c| c > 0).count());
                if !matches!(mode, SamplerMode::Telescoping { .. }) {
                    assert_eq!(rec.k, p_k(&p));
                }
            }
        }
    }

    fn p_k(p: &PriorConfig) -> usize {
        match p.k_prior {
            KPrior::Fixed { k } | KPrior::Sparse { k } => k,
            _ => unreachable!(),
        }
    }

    #[test]
    fn chain_is_reproducible() {
        let data = two_groups();
        let p = prior_for(
            &data,
            KPrior::Fixed { k: 2 },
            GammaSpec::Fixed { gamma: 1.0 },
        );
        let cfg = short_config(200, 50, true);
        let a = run_seeded(&data, &p, &cfg, SamplerMode::FixedK).unwrap();
        let b = run_seeded(&data, &p, &cfg, SamplerMode::FixedK).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn mode_prior_mismatch_is_rejected() {
        let data = two_groups();
        let p = prior_for(
            &data,
            KPrior::Fixed { k: 2 },
            GammaSpec::Fixed { gamma: 1.0 },
        );
        let cfg = short_config(20, 5, false);
        assert!(matches!(
            run_chain(
                &data,
                &p,
                &cfg,
                SamplerMode::Telescoping { initial_k: 3 },
                &mut rng(1)
            ),
            Err(SamplerError::Config(_))
        ));
        let bad = ChainConfig { burn_in: 20, ..cfg };
        assert!(run_chain(&data, &p, &bad, SamplerMode::FixedK, &mut rng(1)).is_err());
    }

    #[test]
    fn chains_use_consecutive_seeds() {
        let data = two_groups();
        let p = prior_for(
            &data,
            KPrior::Fixed { k: 2 },
            GammaSpec::Fixed { gamma: 1.0 },
        );
        let cfg = short_config(60, 10, false);
        let outs = run_chains(&data, &p, &cfg, SamplerMode::FixedK, 3);
        for (i, o) in outs.into_iter().enumerate() {
            let o = o.unwrap();
            assert_eq!(o.seed, 3 + i as u64);
            let mut c2 = cfg.clone();
            c2.seed = 3 + i as u64;
            assert_eq!(
                o.records,
                run_seeded(&data, &p, &c2, SamplerMode::FixedK)
                    .unwrap()
                    .records
            );
        }
    }
}
