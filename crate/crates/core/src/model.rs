//! Data, prior hyperparameters, mixture state and likelihoods.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{
    bnb_log_pmf, sample_categorical, sample_categorical_log, sample_dirichlet, sample_inv_wishart,
    sample_mvnormal, sample_wishart, DistError, GaussianLogDensity, WishartParams,
};
use crate::linalg::spd_inverse;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("degenerate prior: {0}")]
    DegeneratePrior(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("state does not match data: {0}")]
    StateMismatch(String),
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// `N × r` observations with optional reference classes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: DMatrix<f64>,
    rows: Vec<f64>,
    feature_names: Vec<String>,
    true_labels: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(
        y: DMatrix<f64>,
        feature_names: Vec<String>,
        true_labels: Option<Vec<String>>,
    ) -> Result<Self, ModelError> {
        let (n, r) = y.shape();
        if n == 0 || r == 0 {
            return Err(ModelError::InvalidData(format!(
                "empty data matrix ({n}x{r})"
            )));
        }
        if let Some(pos) = y.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::InvalidData(format!(
                "non-finite value at row {}, column {}",
                pos % n + 1,
                pos / n + 1
            )));
        }
        if feature_names.len() != r {
            return Err(ModelError::InvalidData(format!(
                "{} feature names for {r} columns",
                feature_names.len()
            )));
        }
        if let Some(l) = &true_labels {
            if l.len() != n {
                return Err(ModelError::InvalidData(format!(
                    "{} labels for {n} observations",
                    l.len()
                )));
            }
        }
        let rows = (0..n)
            .flat_map(|i| y.row(i).iter().cloned().collect::<Vec<_>>())
            .collect();
        Ok(Self {
            y,
            rows,
            feature_names,
            true_labels,
        })
    }

    /// Build from row-major values with generated feature names.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ModelError> {
        let r = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != r) {
            return Err(ModelError::InvalidData("ragged rows".into()));
        }
        let y = DMatrix::from_fn(rows.len(), r, |i, j| rows[i][j]);
        let names = (1..=r).map(|j| format!("y{j}")).collect();
        Self::new(y, names, None)
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn dim(&self) -> usize {
        self.y.ncols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let r = self.dim();
        &self.rows[i * r..(i + 1) * r]
    }

    /// All observations, row-major.
    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn true_labels(&self) -> Option<&[String]> {
        self.true_labels.as_deref()
    }

    pub fn with_true_labels(mut self, labels: Vec<String>) -> Result<Self, ModelError> {
        if labels.len() != self.n() {
            return Err(ModelError::InvalidData(format!(
                "{} labels for {} observations",
                labels.len(),
                self.n()
            )));
        }
        self.true_labels = Some(labels);
        Ok(self)
    }
}

/// Dirichlet parameter of the weight prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GammaSpec {
    Fixed {
        gamma: f64,
    },
    /// `γ_K = α / K`.
    Dynamic {
        alpha: f64,
    },
}

impl GammaSpec {
    pub fn gamma_for(&self, k: usize) -> f64 {
        match *self {
            GammaSpec::Fixed { gamma } => gamma,
            GammaSpec::Dynamic { alpha } => alpha / k as f64,
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        let v = match *self {
            GammaSpec::Fixed { gamma } => gamma,
            GammaSpec::Dynamic { alpha } => alpha,
        };
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(ModelError::Config(format!(
                "Dirichlet parameter {v} must be positive"
            )))
        }
    }
}

/// Beta-negative-binomial prior on `K − 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BnbPrior {
    pub a_l: f64,
    pub a_pi: f64,
    pub b_pi: f64,
}

impl BnbPrior {
    /// `log p(K)`; `K ≥ 1`.
    pub fn log_pmf_k(&self, k: usize) -> Result<f64, DistError> {
        if k == 0 {
            return Err(DistError::Domain("K must be at least 1".into()));
        }
        bnb_log_pmf(k as u64 - 1, self.a_l, self.a_pi, self.b_pi)
    }
}

/// Prior on the number of components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KPrior {
    Fixed {
        k: usize,
    },
    /// Overfitting mixture with `k` components; pair with a small fixed γ.
    Sparse {
        k: usize,
    },
    /// `K − 1 ~ BNB(a_l, a_π, b_π)` truncated to `K ≤ k_max`.
    Random {
        bnb: BnbPrior,
        k_max: usize,
    },
}

impl KPrior {
    fn validate(&self) -> Result<(), ModelError> {
        match *self {
            KPrior::Fixed { k } | KPrior::Sparse { k } if k == 0 => {
                Err(ModelError::Config("K must be at least 1".into()))
            }
            KPrior::Random { bnb, k_max } => {
                if k_max == 0 {
                    return Err(ModelError::Config("k_max must be at least 1".into()));
                }
                bnb.log_pmf_k(1)?;
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// All prior hyperparameters.
///
/// `μ_k ~ N(b0, B0)`, `Σ_k ~ W⁻¹(c0, C0)`, `C0 ~ W(g0, G0)`,
/// `η ~ Dirichlet(γ_K)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub gamma_spec: GammaSpec,
    pub b0: DVector<f64>,
    pub big_b0: DMatrix<f64>,
    pub c: f64,
    pub phi: f64,
    pub c0: f64,
    pub g0: f64,
    /// `c · φ · S`, also the initial value of the hyperparameter `C0`.
    pub c0_init: DMatrix<f64>,
    /// `g0 · C0_init⁻¹`.
    pub big_g0: DMatrix<f64>,
    /// Diagonal of the empirical covariance, as a diagonal matrix.
    pub s: DMatrix<f64>,
    /// Column ranges `max − min`.
    pub range: DVector<f64>,
    pub k_prior: KPrior,
}

impl PriorConfig {
    /// Assemble the default hierarchy from a location, column ranges and
    /// column variances.
    pub fn from_scale(
        b0: DVector<f64>,
        range: DVector<f64>,
        variances: DVector<f64>,
        c: f64,
        phi: f64,
        gamma_spec: GammaSpec,
        k_prior: KPrior,
    ) -> Result<Self, ModelError> {
        let r = b0.len();
        if r == 0 || range.len() != r || variances.len() != r {
            return Err(ModelError::Config("prior dimensions disagree".into()));
        }
        if !(c.is_finite() && c > 0.0 && phi.is_finite() && phi > 0.0) {
            return Err(ModelError::Config(format!(
                "c = {c} and phi = {phi} must be positive"
            )));
        }
        if let Some(j) = range.iter().position(|x| !(*x > 0.0)) {
            return Err(ModelError::DegeneratePrior(format!(
                "column {} has zero range",
                j + 1
            )));
        }
        if let Some(j) = variances.iter().position(|x| !(*x > 0.0)) {
            return Err(ModelError::DegeneratePrior(format!(
                "column {} has zero variance",
                j + 1
            )));
        }
        gamma_spec.validate()?;
        k_prior.validate()?;
        let rf = r as f64;
        let c0 = c + (rf + 1.0) / 2.0;
        let g0 = 1.0 + (rf - 1.0) / 2.0;
        let s = DMatrix::from_diagonal(&variances);
        let c0_init = &s * (c * phi);
        let big_g0 = spd_inverse(&c0_init)? * g0;
        let big_b0 = DMatrix::from_diagonal(&range.map(|x| x * x));
        Ok(Self {
            gamma_spec,
            b0,
            big_b0,
            c,
            phi,
            c0,
            g0,
            c0_init,
            big_g0,
            s,
            range,
            k_prior,
        })
    }

    pub fn dim(&self) -> usize {
        self.b0.len()
    }

    /// Parameters of the `W⁻¹(c0, C0)` prior on `Σ_k` for a given `C0`.
    pub fn sigma_prior(&self, c0_matrix: &DMatrix<f64>) -> Result<WishartParams, DistError> {
        WishartParams::new(self.c0, c0_matrix.clone())
    }

    pub fn c0_prior(&self) -> Result<WishartParams, DistError> {
        WishartParams::new(self.g0, self.big_g0.clone())
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Data-driven default prior.
///
/// `b0` is the column-wise median, `B0 = diag(R_j²)` with `R_j` the range of
/// column `j`, `S` the diagonal of the empirical covariance (denominator
/// `N − 1`), `c0 = c + (r+1)/2`, `g0 = 1 + (r−1)/2`, `C0 = cφS` and
/// `G0 = g0 C0⁻¹`, so that `E[Σ_k] = φS` a priori.
pub fn build_default_prior(
    data: &Dataset,
    c: f64,
    phi: f64,
    gamma_spec: GammaSpec,
    k_prior: KPrior,
) -> Result<PriorConfig, ModelError> {
    let n = data.n();
    if n < 2 {
        return Err(ModelError::DegeneratePrior(
            "at least two observations are needed for the empirical covariance".into(),
        ));
    }
    let r = data.dim();
    let mut b0 = DVector::zeros(r);
    let mut range = DVector::zeros(r);
    let mut variances = DVector::zeros(r);
    for j in 0..r {
        let mut col: Vec<f64> = data.y().column(j).iter().cloned().collect();
        let mean = col.iter().sum::<f64>() / n as f64;
        variances[j] = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        b0[j] = median(&mut col);
        range[j] = col[n - 1] - col[0];
    }
    PriorConfig::from_scale(b0, range, variances, c, phi, gamma_spec, k_prior)
}

/// Sampler configuration shared by all modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// Total number of sweeps `M`, burn-in included.
    pub n_iter: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub store_assignments: bool,
    /// Apply a uniformly random label permutation after every sweep.
    pub permutation_step: bool,
    /// Keep every `thinning`-th sweep after burn-in.
    pub thinning: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            n_iter: 30_000,
            burn_in: 5_000,
            seed: 1,
            store_assignments: false,
            permutation_step: false,
            thinning: 1,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.burn_in >= self.n_iter {
            return Err(ModelError::Config(format!(
                "burn-in {} must be smaller than the number of iterations {}",
                self.burn_in, self.n_iter
            )));
        }
        if self.thinning == 0 {
            return Err(ModelError::Config("thinning must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of records a run stores.
    pub fn n_stored(&self) -> usize {
        (self.n_iter - self.burn_in).div_ceil(self.thinning)
    }
}

/// One state of the Markov chain. Component labels are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureState {
    pub eta: Vec<f64>,
    pub mu: Vec<DVector<f64>>,
    pub sigma: Vec<DMatrix<f64>>,
    /// Current draw of the hyperparameter `C0`.
    pub c0: DMatrix<f64>,
    pub s: Vec<usize>,
    pub counts: Vec<usize>,
    pub k_plus: usize,
}

impl MixtureState {
    pub fn k(&self) -> usize {
        self.eta.len()
    }

    /// Recompute `N_k` and `K₊` from the assignments.
    pub fn recount(&mut self) {
        let mut counts = vec![0; self.k()];
        for &s in &self.s {
            counts[s] += 1;
        }
        self.k_plus = counts.iter().filter(|&&c| c > 0).count();
        self.counts = counts;
    }

    /// Relabel so that component `j` becomes component `perm[j]`.
    pub fn apply_permutation(&mut self, perm: &[usize]) {
        let k = self.k();
        assert_eq!(perm.len(), k, "permutation length");
        let mut eta = vec![0.0; k];
        let mut mu = vec![DVector::zeros(0); k];
        let mut sigma = vec![DMatrix::zeros(0, 0); k];
        let mut counts = vec![0; k];
        for j in 0..k {
            let to = perm[j];
            eta[to] = self.eta[j];
            mu[to] = std::mem::replace(&mut self.mu[j], DVector::zeros(0));
            sigma[to] = std::mem::replace(&mut self.sigma[j], DMatrix::zeros(0, 0));
            counts[to] = self.counts[j];
        }
        for s in &mut self.s {
            *s = perm[*s];
        }
        self.eta = eta;
        self.mu = mu;
        self.sigma = sigma;
        self.counts = counts;
    }

    /// Check the structural invariants against a data set of size `n`.
    pub fn validate(&self, n: usize, r: usize) -> Result<(), ModelError> {
        let k = self.k();
        if k == 0 || self.mu.len() != k || self.sigma.len() != k || self.counts.len() != k {
            return Err(ModelError::StateMismatch(
                "component vectors differ in length".into(),
            ));
        }
        if self.s.len() != n {
            return Err(ModelError::StateMismatch(format!(
                "{} assignments for {n} observations",
                self.s.len()
            )));
        }
        if self.mu.iter().any(|m| m.len() != r) || self.sigma.iter().any(|s| s.shape() != (r, r)) {
            return Err(ModelError::StateMismatch(format!(
                "component dimension is not {r}"
            )));
        }
        if let Some(&bad) = self.s.iter().find(|&&s| s >= k) {
            return Err(ModelError::StateMismatch(format!(
                "assignment {bad} out of range"
            )));
        }
        Ok(())
    }

    fn densities(&self) -> Result<Vec<GaussianLogDensity>, DistError> {
        self.mu
            .iter()
            .zip(&self.sigma)
            .map(|(m, s)| GaussianLogDensity::new(m, s))
            .collect()
    }
}

/// `log(Σ exp(x))` over terms sorted ascending, so the value does not
/// depend on the order in which components are listed.
fn canonical_log_sum_exp(terms: &mut [f64]) -> f64 {
    terms.sort_by(f64::total_cmp);
    let max = terms[terms.len() - 1];
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `Σ_i log Σ_k η_k f_N(y_i | μ_k, Σ_k)`.
pub fn mixture_log_likelihood(data: &Dataset, state: &MixtureState) -> Result<f64, ModelError> {
    state.validate(data.n(), data.dim())?;
    let dens = state.densities()?;
    let log_eta: Vec<f64> = state.eta.iter().map(|e| e.ln()).collect();
    let mut terms = vec![0.0; state.k()];
    let mut total = 0.0;
    for i in 0..data.n() {
        let y = data.row(i);
        for (t, (d, le)) in terms.iter_mut().zip(dens.iter().zip(&log_eta)) {
            *t = le + d.eval(y);
        }
        total += canonical_log_sum_exp(&mut terms);
    }
    Ok(total)
}

/// `Σ_i [log η_{S_i} + log f_N(y_i | μ_{S_i}, Σ_{S_i})]`.
pub fn complete_data_log_likelihood(
    data: &Dataset,
    state: &MixtureState,
) -> Result<f64, ModelError> {
    state.validate(data.n(), data.dim())?;
    let dens = state.densities()?;
    Ok((0..data.n())
        .map(|i| {
            let k = state.s[i];
            state.eta[k].ln() + dens[k].eval(data.row(i))
        })
        .sum())
}

/// Draw `K − 1` from the BNB prior truncated to `K ≤ k_max`.
pub fn sample_k_from_prior<R: Rng + ?Sized>(
    bnb: &BnbPrior,
    k_max: usize,
    rng: &mut R,
) -> Result<usize, DistError> {
    let log_p: Vec<f64> = (1..=k_max)
        .map(|k| bnb.log_pmf_k(k))
        .collect::<Result<_, _>>()?;
    Ok(sample_categorical_log(&log_p, rng)? + 1)
}

/// Simulate data and the generating state from the hierarchical model.
///
/// Draws `K` (for a random-K prior), `η ~ Dirichlet(γ_K)`,
/// `C0 ~ W(g0, G0)`, `Σ_k ~ W⁻¹(c0, C0)`, `μ_k ~ N(b0, B0)`,
/// `S_i ~ η`, and `y_i ~ N(μ_{S_i}, Σ_{S_i})`.
pub fn generate_synthetic<R: Rng + ?Sized>(
    prior: &PriorConfig,
    n: usize,
    rng: &mut R,
) -> Result<(Dataset, MixtureState), ModelError> {
    if n == 0 {
        return Err(ModelError::Config(
            "cannot generate an empty data set".into(),
        ));
    }
    let k = match prior.k_prior {
        KPrior::Fixed { k } | KPrior::Sparse { k } => k,
        KPrior::Random { bnb, k_max } => sample_k_from_prior(&bnb, k_max, rng)?,
    };
    let gamma = prior.gamma_spec.gamma_for(k);
    let eta = sample_dirichlet(&vec![gamma; k], rng)?;
    let c0 = sample_wishart(&prior.c0_prior()?, rng);
    let sigma_prior = prior.sigma_prior(&c0)?;
    let sigma: Vec<DMatrix<f64>> = (0..k)
        .map(|_| sample_inv_wishart(&sigma_prior, rng))
        .collect();
    let mu: Vec<DVector<f64>> = (0..k)
        .map(|_| sample_mvnormal(&prior.b0, &prior.big_b0, rng))
        .collect::<Result<_, _>>()?;
    let s: Vec<usize> = (0..n)
        .map(|_| sample_categorical(&eta, rng))
        .collect::<Result<_, _>>()?;
    let r = prior.dim();
    let mut y = DMatrix::zeros(n, r);
    for (i, &si) in s.iter().enumerate() {
        let yi = sample_mvnormal(&mu[si], &sigma[si], rng)?;
        y.row_mut(i).copy_from(&yi.transpose());
    }
    let names = (1..=r).map(|j| format!("y{j}")).collect();
    let labels = s.iter().map(|k| (k + 1).to_string()).collect();
    let data = Dataset::new(y, names, Some(labels))?;
    let mut state = MixtureState {
        eta,
        mu,
        sigma,
        c0,
        s,
        counts: Vec::new(),
        k_plus: 0,
    };
    state.recount();
    Ok((data, state))
}
