//! Small dense linear-algebra helpers shared by the samplers.
//!
//! Every factorization goes through [`spd_cholesky`], which symmetrizes its
//! input first and reports failure instead of adding jitter.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::distributions::DistError;

/// Returns `(a + aᵀ) / 2`.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Cholesky factorization of the symmetrized input.
pub fn spd_cholesky(a: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>, DistError> {
    if !a.is_square() {
        return Err(DistError::DimensionMismatch {
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(DistError::NotPositiveDefinite);
    }
    symmetrize(a)
        .cholesky()
        .ok_or(DistError::NotPositiveDefinite)
}

/// Inverse of a symmetric positive-definite matrix, symmetrized on output.
pub fn spd_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>, DistError> {
    let chol = spd_cholesky(a)?;
    Ok(symmetrize(&chol.inverse()))
}

/// `log |A|` from a Cholesky factor.
pub fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol
        .l_dirty()
        .diagonal()
        .iter()
        .map(|d| d.ln())
        .sum::<f64>()
}

/// Quadratic form `xᵀ A⁻¹ x` given the lower factor `L` of `A`.
pub fn mahalanobis_sq(l: &DMatrix<f64>, x: &[f64]) -> f64 {
    // forward substitution, L z = x
    let r = x.len();
    let mut z = [0.0f64; 16];
    let mut heap;
    let z: &mut [f64] = if r <= z.len() {
        &mut z[..r]
    } else {
        heap = vec![0.0; r];
        &mut heap
    };
    let mut total = 0.0;
    for i in 0..r {
        let mut acc = x[i];
        for j in 0..i {
            acc -= l[(i, j)] * z[j];
        }
        z[i] = acc / l[(i, i)];
        total += z[i] * z[i];
    }
    total
}

/// Column-wise mean of the given rows.
pub fn mean_of_rows<'a, I>(rows: I, dim: usize) -> Option<DVector<f64>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut sum = DVector::zeros(dim);
    let mut n = 0usize;
    for row in rows {
        for (s, v) in sum.iter_mut().zip(row) {
            *s += v;
        }
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}
