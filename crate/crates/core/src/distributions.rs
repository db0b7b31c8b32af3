//! Sampling and density evaluation for the distributions used by the
//! mixture samplers.
//!
//! Wishart and inverse Wishart distributions use the rate-style
//! parameterization `W(α, V)` with density
//!
//! ```text
//! f(Y | α, V) = |V|^α / Γ_r(α) · |Y|^(α − (r+1)/2) · exp{−tr(V Y)}
//! ```
//!
//! which is the textbook Wishart with `2α` degrees of freedom and scale
//! matrix `(2V)⁻¹`. Hence `E[Y] = α V⁻¹`, and for `Y ~ W⁻¹(α, V)`,
//! `E[Y] = 2V / (2α − r − 1)`. This module is the only place that performs
//! the translation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::linalg::{log_det, mahalanobis_sq, spd_cholesky, symmetrize};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DistError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("argument outside the function domain: {0}")]
    Domain(String),
}

/// Parameters `(α, V)` of a Wishart or inverse Wishart distribution.
///
/// Construction validates `V` (symmetric within 1e-10, Cholesky succeeds)
/// and `α > (r − 1)/2`, and caches the lower Cholesky factor of `V`.
#[derive(Debug, Clone)]
pub struct WishartParams {
    alpha: f64,
    v: DMatrix<f64>,
    v_lower: DMatrix<f64>,
}

impl WishartParams {
    pub fn new(alpha: f64, v: DMatrix<f64>) -> Result<Self, DistError> {
        let r = v.nrows();
        if r == 0 || !v.is_square() {
            return Err(DistError::InvalidParameter(format!(
                "scale matrix must be square and non-empty, got {}x{}",
                v.nrows(),
                v.ncols()
            )));
        }
        let asym = (&v - v.transpose()).amax();
        let scale = v.amax().max(1.0);
        if !(asym <= 1e-10 * scale) {
            return Err(DistError::InvalidParameter(format!(
                "scale matrix is not symmetric (max asymmetry {asym:e})"
            )));
        }
        if !alpha.is_finite() || alpha <= (r as f64 - 1.0) / 2.0 {
            return Err(DistError::InvalidParameter(format!(
                "alpha = {alpha} must exceed (r - 1)/2 = {}",
                (r as f64 - 1.0) / 2.0
            )));
        }
        let v = symmetrize(&v);
        let v_lower = spd_cholesky(&v)?.l();
        Ok(Self { alpha, v, v_lower })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn dim(&self) -> usize {
        self.v.nrows()
    }

    /// `E[Y]` for `Y ~ W(α, V)`.
    pub fn wishart_mean(&self) -> DMatrix<f64> {
        let vinv = nalgebra::Cholesky::new(self.v.clone())
            .expect("validated at construction")
            .inverse();
        vinv * self.alpha
    }

    /// `E[Y]` for `Y ~ W⁻¹(α, V)`; `None` when `2α ≤ r + 1`.
    pub fn inv_wishart_mean(&self) -> Option<DMatrix<f64>> {
        let denom = 2.0 * self.alpha - self.dim() as f64 - 1.0;
        (denom > 0.0).then(|| &self.v * (2.0 / denom))
    }
}

/// Draw from `Gamma(shape, 1)` returned on the log scale.
///
/// Shapes below one use `G = G' · U^(1/a)` with `G' ~ Gamma(a + 1)`, which
/// keeps tiny shapes (e.g. 0.01) from underflowing to exactly zero.
fn log_gamma_draw<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        let g = Gamma::new(shape, 1.0).expect("shape checked positive");
        g.sample(rng).ln()
    } else {
        let g = Gamma::new(shape + 1.0, 1.0).expect("shape checked positive");
        let u: f64 = rng.random::<f64>();
        // u ∈ [0, 1); map to (0, 1]
        g.sample(rng).ln() + (1.0 - u).ln() / shape
    }
}

/// Draw a weight vector from `Dirichlet(e)`.
pub fn sample_dirichlet<R: Rng + ?Sized>(e: &[f64], rng: &mut R) -> Result<Vec<f64>, DistError> {
    if e.is_empty() {
        return Err(DistError::InvalidParameter(
            "empty Dirichlet parameter".into(),
        ));
    }
    if let Some(bad) = e.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(DistError::InvalidParameter(format!(
            "Dirichlet parameters must be positive, got {bad}"
        )));
    }
    if e.len() == 1 {
        return Ok(vec![1.0]);
    }
    let logs: Vec<f64> = e.iter().map(|&a| log_gamma_draw(a, rng)).collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    Ok(w)
}

/// Draw an index `k` (0-based) with probability `p_k / Σ p`.
pub fn sample_categorical<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> Result<usize, DistError> {
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(DistError::InvalidParameter(
            "categorical weights must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = p.iter().sum();
    if !(total > 0.0) {
        return Err(DistError::InvalidParameter(
            "categorical weights are all zero".into(),
        ));
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, &w) in p.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = k;
            if u < acc {
                return Ok(k);
            }
        }
    }
    Ok(last_positive)
}

/// Draw from a categorical distribution given unnormalized log weights.
///
/// Subtracts the maximum before exponentiating. Fails when every entry is
/// `-inf` or any entry is NaN.
pub fn sample_categorical_log<R: Rng + ?Sized>(
    log_p: &[f64],
    rng: &mut R,
) -> Result<usize, DistError> {
    let max = log_p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if log_p.iter().any(|x| x.is_nan()) || !max.is_finite() {
        return Err(DistError::InvalidParameter(
            "log weights are all -inf or contain NaN".into(),
        ));
    }
    let mut buf = [0.0f64; 64];
    let mut heap;
    let w: &mut [f64] = if log_p.len() <= buf.len() {
        &mut buf[..log_p.len()]
    } else {
        heap = vec![0.0; log_p.len()];
        &mut heap
    };
    for (dst, &l) in w.iter_mut().zip(log_p) {
        *dst = (l - max).exp();
    }
    sample_categorical(w, rng)
}

/// Draw `b + L z` with `z` standard normal and `L` a lower factor of the
/// covariance.
pub fn sample_mvnormal_with_factor<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    lower: &DMatrix<f64>,
    rng: &mut R,
) -> DVector<f64> {
    let z = DVector::from_fn(mean.len(), |_, _| StandardNormal.sample(rng));
    mean + lower * z
}

/// Draw from `N(b, B)`.
pub fn sample_mvnormal<R: Rng + ?Sized>(
    b: &DVector<f64>,
    cov: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DVector<f64>, DistError> {
    if cov.nrows() != b.len() {
        return Err(DistError::DimensionMismatch {
            expected: b.len(),
            found: cov.nrows(),
        });
    }
    let chol = spd_cholesky(cov)?;
    Ok(sample_mvnormal_with_factor(b, &chol.l(), rng))
}

/// Bartlett factor `A` for a standard Wishart with `2α` degrees of freedom:
/// lower triangular, `A_ii² ~ χ²(2α − i)` (0-based `i`), `A_ij ~ N(0, 1)`.
fn bartlett_factor<R: Rng + ?Sized>(alpha: f64, r: usize, rng: &mut R) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(r, r);
    for i in 0..r {
        // χ²(ν) = 2 · Gamma(ν/2, 1)
        let shape = alpha - i as f64 / 2.0;
        let g = Gamma::new(shape, 1.0).expect("alpha > (r-1)/2 validated");
        a[(i, i)] = (2.0 * g.sample(rng)).sqrt();
        for j in 0..i {
            a[(i, j)] = StandardNormal.sample(rng);
        }
    }
    a
}

/// Draw `Y ~ W(α, V)`.
///
/// With `V = U Uᵀ`, the matrix `M = U⁻ᵀ/√2` satisfies `M Mᵀ = (2V)⁻¹`, so
/// `Y = M A Aᵀ Mᵀ` for a Bartlett factor `A`.
pub fn sample_wishart<R: Rng + ?Sized>(params: &WishartParams, rng: &mut R) -> DMatrix<f64> {
    let r = params.dim();
    let a = bartlett_factor(params.alpha, r, rng);
    let ut = params.v_lower.transpose();
    let x = ut
        .solve_upper_triangular(&a)
        .expect("Cholesky factor has a positive diagonal");
    symmetrize(&(&x * x.transpose())) * 0.5
}

/// Draw `Y ~ W⁻¹(α, V)`, i.e. the inverse of a `W(α, V)` draw.
///
/// Computed without an explicit inversion: `Y = 2 U A⁻ᵀ A⁻¹ Uᵀ`.
pub fn sample_inv_wishart<R: Rng + ?Sized>(params: &WishartParams, rng: &mut R) -> DMatrix<f64> {
    let r = params.dim();
    let a = bartlett_factor(params.alpha, r, rng);
    let a_inv = a
        .solve_lower_triangular(&DMatrix::identity(r, r))
        .expect("Bartlett factor has a positive diagonal");
    let z = &params.v_lower * a_inv.transpose();
    symmetrize(&(&z * z.transpose())) * 2.0
}

/// `log f_N(y | μ, Σ)`.
pub fn log_mvnormal_density(
    y: &DVector<f64>,
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
) -> Result<f64, DistError> {
    if y.len() != mu.len() || sigma.nrows() != y.len() {
        return Err(DistError::DimensionMismatch {
            expected: y.len(),
            found: if mu.len() != y.len() {
                mu.len()
            } else {
                sigma.nrows()
            },
        });
    }
    let chol = spd_cholesky(sigma)?;
    let diff: Vec<f64> = y.iter().zip(mu.iter()).map(|(a, b)| a - b).collect();
    let quad = mahalanobis_sq(&chol.l(), &diff);
    Ok(-0.5 * (y.len() as f64 * LN_2PI + log_det(&chol) + quad))
}

/// Precomputed Gaussian log-density for repeated evaluation.
#[derive(Debug, Clone)]
pub struct GaussianLogDensity {
    mean: Vec<f64>,
    lower: DMatrix<f64>,
    norm: f64,
}

impl GaussianLogDensity {
    pub fn new(mu: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<Self, DistError> {
        let chol = spd_cholesky(sigma)?;
        let norm = -0.5 * (mu.len() as f64 * LN_2PI + log_det(&chol));
        Ok(Self {
            mean: mu.iter().cloned().collect(),
            lower: chol.l(),
            norm,
        })
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        let mut buf = [0.0f64; 16];
        let mut heap;
        let diff: &mut [f64] = if y.len() <= buf.len() {
            &mut buf[..y.len()]
        } else {
            heap = vec![0.0; y.len()];
            &mut heap
        };
        for ((d, a), b) in diff.iter_mut().zip(y).zip(&self.mean) {
            *d = a - b;
        }
        self.norm - 0.5 * mahalanobis_sq(&self.lower, diff)
    }
}

/// `log Γ_r(α) = r(r−1)/4 · log π + Σ_{j=1..r} log Γ((2α + 1 − j)/2)`.
pub fn log_multivariate_gamma(alpha: f64, r: usize) -> Result<f64, DistError> {
    if r == 0 {
        return Err(DistError::Domain("dimension must be at least 1".into()));
    }
    let mut total = (r * (r - 1)) as f64 / 4.0 * std::f64::consts::PI.ln();
    for j in 1..=r {
        let arg = (2.0 * alpha + 1.0 - j as f64) / 2.0;
        if !(arg > 0.0) {
            return Err(DistError::Domain(format!(
                "gamma argument {arg} is not positive (alpha = {alpha}, r = {r})"
            )));
        }
        total += ln_gamma(arg);
    }
    Ok(total)
}

/// Log pmf of the beta-negative-binomial distribution,
///
/// ```text
/// P(X = x) = Γ(a_l + x) / (x! Γ(a_l)) · B(a_π + a_l, b_π + x) / B(a_π, b_π)
/// ```
pub fn bnb_log_pmf(x: u64, a_l: f64, a_pi: f64, b_pi: f64) -> Result<f64, DistError> {
    for (name, v) in [("a_l", a_l), ("a_pi", a_pi), ("b_pi", b_pi)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(DistError::Domain(format!(
                "BNB parameter {name} = {v} must be positive"
            )));
        }
    }
    let x = x as f64;
    Ok(
        ln_gamma(a_l + x) - ln_gamma(x + 1.0) - ln_gamma(a_l) + ln_beta(a_pi + a_l, b_pi + x)
            - ln_beta(a_pi, b_pi),
    )
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn mc_mean<F: FnMut() -> DMatrix<f64>>(n: usize, mut f: F) -> DMatrix<f64> {
        let mut acc = f();
        for _ in 1..n {
            acc += f();
        }
        acc / n as f64
    }

    fn assert_rel(got: &DMatrix<f64>, want: &DMatrix<f64>, rel: f64) {
        let scale = want.amax();
        for (g, w) in got.iter().zip(want.iter()) {
            assert!(
                (g - w).abs() <= rel * scale,
                "got {got} want {want} (rel {rel})"
            );
        }
    }

    #[test]
    fn dirichlet_single_component() {
        assert_eq!(sample_dirichlet(&[3.7], &mut rng(1)).unwrap(), vec![1.0]);
    }

    #[test]
    fn dirichlet_rejects_nonpositive() {
        assert!(sample_dirichlet(&[1.0, 0.0], &mut rng(1)).is_err());
        assert!(sample_dirichlet(&[1.0, -2.0], &mut rng(1)).is_err());
    }

    #[test]
    fn dirichlet_symmetric_variance() {
        let mut r = rng(2);
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| sample_dirichlet(&[1.0, 1.0, 1.0], &mut r).unwrap()[0])
            .collect();
        let m = draws.iter().sum::<f64>() / n as f64;
        let v = draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        assert!((v - 2.0 / 36.0).abs() < 0.005, "variance {v}");
    }

    #[test]
    fn dirichlet_mean() {
        let mut r = rng(3);
        let n = 100_000;
        let m = (0..n)
            .map(|_| sample_dirichlet(&[2.0, 2.0], &mut r).unwrap()[0])
            .sum::<f64>()
            / n as f64;
        assert!((m - 0.5).abs() < 0.01);
    }

    #[test]
    fn dirichlet_tiny_shapes_stay_on_simplex() {
        let mut r = rng(4);
        for _ in 0..1000 {
            let w = sample_dirichlet(&[0.01; 10], &mut r).unwrap();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|x| *x >= 0.0 && x.is_finite()));
        }
    }

    #[test]
    fn categorical_degenerate_and_errors() {
        let mut r = rng(5);
        for _ in 0..1000 {
            assert_eq!(sample_categorical(&[1.0, 0.0, 0.0], &mut r).unwrap(), 0);
        }
        assert!(sample_categorical(&[0.0, 0.0], &mut r).is_err());
        assert!(sample_categorical(&[f64::NAN, 1.0], &mut r).is_err());
        assert!(sample_categorical_log(&[f64::NEG_INFINITY; 3], &mut r).is_err());
    }

    #[test]
    fn categorical_frequencies() {
        let mut r = rng(6);
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[sample_categorical(&[2.0, 3.0, 5.0], &mut r).unwrap()] += 1;
        }
        for (c, p) in counts.iter().zip([0.2, 0.3, 0.5]) {
            assert!((*c as f64 / n as f64 - p).abs() < 0.01);
        }
        let ones = (0..n)
            .filter(|_| sample_categorical(&[1.0, 1.0], &mut r).unwrap() == 0)
            .count();
        assert!((ones as f64 / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn mvnormal_moments() {
        let mut r = rng(7);
        let n = 100_000;
        let b = DVector::from_vec(vec![0.0]);
        let one = DMatrix::identity(1, 1);
        let m = (0..n)
            .map(|_| sample_mvnormal(&b, &one, &mut r).unwrap()[0])
            .sum::<f64>()
            / n as f64;
        assert!(m.abs() < 0.02);

        let b2 = DVector::zeros(2);
        let id = DMatrix::identity(2, 2);
        let cross = (0..n)
            .map(|_| {
                let x = sample_mvnormal(&b2, &id, &mut r).unwrap();
                x[0] * x[1]
            })
            .sum::<f64>()
            / n as f64;
        assert!(cross.abs() < 0.02);

        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let emp = mc_mean(n, || {
            let x = sample_mvnormal(&b2, &cov, &mut r).unwrap();
            &x * x.transpose()
        });
        for (g, w) in emp.iter().zip(cov.iter()) {
            assert!((g - w).abs() <= 0.03 * w.abs(), "{emp} vs {cov}");
        }
    }

    #[test]
    fn mvnormal_rejects_non_spd() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 1.0]);
        assert_eq!(
            sample_mvnormal(&DVector::zeros(2), &cov, &mut rng(1)).unwrap_err(),
            DistError::NotPositiveDefinite
        );
    }

    #[test]
    fn wishart_params_validation() {
        assert!(WishartParams::new(0.9, DMatrix::identity(3, 3)).is_err());
        assert!(WishartParams::new(1.01, DMatrix::identity(3, 3)).is_ok());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(WishartParams::new(3.0, asym).is_err());
    }

    #[test]
    fn wishart_means() {
        let n = 100_000;
        let mut r = rng(8);
        let p = WishartParams::new(1.0, DMatrix::identity(1, 1)).unwrap();
        let m = mc_mean(n, || sample_wishart(&p, &mut r));
        assert!((m[(0, 0)] - 1.0).abs() < 0.02);

        let p = WishartParams::new(3.0, DMatrix::identity(2, 2)).unwrap();
        let m = mc_mean(n, || sample_wishart(&p, &mut r));
        assert_rel(&m, &(DMatrix::identity(2, 2) * 3.0), 0.03);

        let v = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 4.0]));
        let p = WishartParams::new(3.0, v).unwrap();
        let m = mc_mean(n, || sample_wishart(&p, &mut r));
        let want = DMatrix::from_diagonal(&DVector::from_vec(vec![1.5, 0.75]));
        assert_rel(&m, &want, 0.03);
        assert_rel(&p.wishart_mean(), &want, 1e-12);
    }

    #[test]
    fn inv_wishart_means() {
        let n = 100_000;
        let mut r = rng(9);
        let p = WishartParams::new(2.0, DMatrix::identity(1, 1)).unwrap();
        let m = mc_mean(n, || sample_inv_wishart(&p, &mut r));
        assert!((m[(0, 0)] - 1.0).abs() < 0.03);

        // c0 = c + (r+1)/2 with c = 2.5, V = c φ S gives E = φ S
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0, 9.0]));
        let (c, phi) = (2.5, 0.75);
        let p = WishartParams::new(c + 2.0, &s * (c * phi)).unwrap();
        let m = mc_mean(n, || sample_inv_wishart(&p, &mut r));
        assert_rel(&m, &(&s * phi), 0.03);
    }

    #[test]
    fn inverted_wishart_draws_match_inverse_wishart_moments() {
        let n = 100_000;
        let v = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let p = WishartParams::new(4.0, v).unwrap();
        let mut r = rng(10);
        let m = mc_mean(n, || sample_wishart(&p, &mut r).try_inverse().unwrap());
        assert_rel(&m, &p.inv_wishart_mean().unwrap(), 0.03);
    }

    #[test]
    fn wishart_draws_are_spd() {
        let mut r = rng(11);
        for dim in 1..=3 {
            let p =
                WishartParams::new((dim as f64 + 1.0) / 2.0, DMatrix::identity(dim, dim)).unwrap();
            for _ in 0..10_000 {
                assert!(spd_cholesky(&sample_wishart(&p, &mut r)).is_ok());
                assert!(spd_cholesky(&sample_inv_wishart(&p, &mut r)).is_ok());
            }
        }
    }

    #[test]
    fn same_seed_same_draws() {
        let p = WishartParams::new(3.3, DMatrix::identity(3, 3)).unwrap();
        let a: Vec<_> = {
            let mut r = rng(12);
            (0..5).map(|_| sample_wishart(&p, &mut r)).collect()
        };
        let b: Vec<_> = {
            let mut r = rng(12);
            (0..5).map(|_| sample_wishart(&p, &mut r)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn mvnormal_log_density_values() {
        let one = DMatrix::identity(1, 1);
        let z = DVector::zeros(1);
        let v = log_mvnormal_density(&z, &z, &one).unwrap();
        assert!((v + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-14);

        let z2 = DVector::zeros(2);
        let v = log_mvnormal_density(&z2, &z2, &DMatrix::identity(2, 2)).unwrap();
        assert!((v + (2.0 * std::f64::consts::PI).ln()).abs() < 1e-14);

        let y = DVector::from_vec(vec![1.0, 1.0]);
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]));
        let v = log_mvnormal_density(&y, &z2, &s).unwrap();
        let want = -(2.0 * std::f64::consts::PI).ln() - 0.5 * 4.0f64.ln() - 0.5 * 1.25;
        assert!((v - want).abs() < 1e-14);

        let pre = GaussianLogDensity::new(&z2, &s).unwrap();
        assert!((pre.eval(&[1.0, 1.0]) - want).abs() < 1e-14);
    }

    #[test]
    fn multivariate_gamma_values() {
        assert!(log_multivariate_gamma(1.0, 1).unwrap().abs() < 1e-14);
        let half = log_multivariate_gamma(0.5, 1).unwrap();
        assert!((half - std::f64::consts::PI.sqrt().ln()).abs() < 1e-12);
        let want = 0.5 * std::f64::consts::PI.ln() + 0.0 + (0.5 * std::f64::consts::PI.sqrt()).ln();
        assert!((log_multivariate_gamma(2.0, 2).unwrap() - want).abs() < 1e-12);
        assert!(log_multivariate_gamma(0.4, 2).is_err());
    }

    // Beta function through factorials for integer arguments.
    fn beta_int(a: u64, b: u64) -> f64 {
        let f = |n: u64| (1..n).map(|x| x as f64).product::<f64>();
        f(a) * f(b) / f(a + b)
    }

    #[test]
    fn bnb_pmf_matches_beta_oracle() {
        let p0 = bnb_log_pmf(0, 1.0, 4.0, 3.0).unwrap().exp();
        assert!((p0 - beta_int(5, 3) / beta_int(4, 3)).abs() < 1e-12);
        assert!((p0 - 4.0 / 7.0).abs() < 1e-12);
        // x = 1: Γ(2)/(1! Γ(1)) · B(5, 4)/B(4, 3)
        let p1 = bnb_log_pmf(1, 1.0, 4.0, 3.0).unwrap().exp();
        assert!((p1 - beta_int(5, 4) / beta_int(4, 3)).abs() < 1e-12);
    }

    #[test]
    fn bnb_pmf_normalizes() {
        for (a_l, a_pi, b_pi) in [(1.0, 4.0, 3.0), (2.5, 3.0, 1.5)] {
            let total: f64 = (0..1_000_000u64)
                .map(|x| bnb_log_pmf(x, a_l, a_pi, b_pi).unwrap().exp())
                .sum();
            assert!((total - 1.0).abs() < 1e-6, "sum {total}");
        }
        assert!(bnb_log_pmf(0, 0.0, 1.0, 1.0).is_err());
    }
}
