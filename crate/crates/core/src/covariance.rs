//! Hermitian covariance matrices: sample estimation, PSD repair, and the
//! quadratic form `<C^{-1} v, v>` through a cached Cholesky factor.

use std::sync::OnceLock;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative ridge tried first when a factorization fails.
const BASE_RIDGE: f64 = 1e-8;
/// Ridge escalation steps (each multiplies the ridge by 100).
const RIDGE_STEPS: usize = 4;

#[derive(Debug, Clone)]
struct Factor {
    lower: DMatrix<Complex64>,
    ridge: f64,
}

/// Hermitian matrix with a lazily computed, cached factorization.
#[derive(Debug, Clone)]
pub struct HermitianCov {
    matrix: DMatrix<Complex64>,
    clipped: usize,
    factor: OnceLock<std::result::Result<Factor, Error>>,
}

impl PartialEq for HermitianCov {
    fn eq(&self, other: &Self) -> bool {
        self.matrix == other.matrix
    }
}

impl HermitianCov {
    /// Wraps a square matrix, rejecting it when it is not Hermitian up to
    /// rounding, and symmetrizing it exactly otherwise.
    pub fn new(mut matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::LengthMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        if matrix.nrows() == 0 {
            return Err(Error::Empty("covariance matrix"));
        }
        let scale = matrix.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
        let skew = (&matrix - matrix.adjoint()).iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
        if skew > 1e-9 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidParameter(format!(
                "matrix is not Hermitian (skew {skew:.3e})"
            )));
        }
        hermitize(&mut matrix);
        Ok(Self::from_hermitian(matrix))
    }

    fn from_hermitian(matrix: DMatrix<Complex64>) -> Self {
        Self {
            matrix,
            clipped: 0,
            factor: OnceLock::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_hermitian(DMatrix::identity(dim, dim))
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    /// Ridge `eps_r` added before factorization, once the factor exists.
    pub fn ridge(&self) -> Option<f64> {
        match self.factor.get() {
            Some(Ok(f)) => Some(f.ridge),
            _ => None,
        }
    }

    /// Number of eigenvalues raised by [`ensure_psd`].
    pub fn clipped_eigenvalues(&self) -> usize {
        self.clipped
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    fn factor(&self) -> Result<&Factor> {
        self.factor
            .get_or_init(|| factorize(&self.matrix))
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Forces the factorization, reporting the ridge that was needed.
    pub fn factorize(&self) -> Result<f64> {
        self.factor().map(|f| f.ridge)
    }

    /// `<(C + eps_r I)^{-1} v, v>`.
    pub fn quadratic_form(&self, v: &[Complex64]) -> Result<f64> {
        if v.len() != self.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                found: v.len(),
            });
        }
        let f = self.factor()?;
        let mut y = DVector::from_column_slice(v);
        f.lower.solve_lower_triangular_mut(&mut y);
        Ok(y.norm_squared())
    }

    /// Quadratic forms of every column of `v`.
    pub fn quadratic_forms(&self, v: &DMatrix<Complex64>) -> Result<Vec<f64>> {
        if v.nrows() != self.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                found: v.nrows(),
            });
        }
        let f = self.factor()?;
        let mut y = v.clone();
        f.lower.solve_lower_triangular_mut(&mut y);
        Ok(y.column_iter().map(|c| c.norm_squared()).collect())
    }
}

fn factorize(matrix: &DMatrix<Complex64>) -> std::result::Result<Factor, Error> {
    if let Some(ch) = Cholesky::<Complex64, Dyn>::new(matrix.clone()) {
        return Ok(Factor {
            lower: ch.unpack(),
            ridge: 0.0,
        });
    }
    let dim = matrix.nrows();
    let mean_diag = matrix.diagonal().iter().map(|z| z.re).sum::<f64>() / dim as f64;
    let scale = if mean_diag > 0.0 { mean_diag } else { 1.0 };
    let mut ridge = BASE_RIDGE * scale;
    for _ in 0..RIDGE_STEPS {
        let mut m = matrix.clone();
        for i in 0..dim {
            m[(i, i)].re += ridge;
        }
        if let Some(ch) = Cholesky::<Complex64, Dyn>::new(m) {
            return Ok(Factor {
                lower: ch.unpack(),
                ridge,
            });
        }
        ridge *= 100.0;
    }
    Err(Error::Factorization {
        dim,
        ridge: ridge / 100.0,
    })
}

/// Makes `c` exactly Hermitian by mirroring its upper triangle.
pub(crate) fn hermitize(c: &mut DMatrix<Complex64>) {
    let n = c.nrows();
    for i in 0..n {
        c[(i, i)].im = 0.0;
        for j in i + 1..n {
            c[(j, i)] = c[(i, j)].conj();
        }
    }
}

/// `(1/N) sum_n v_n v_n^*` over the given slices.
pub fn sample_covariance<'a, I>(slices: I) -> Result<HermitianCov>
where
    I: IntoIterator<Item = &'a [Complex64]>,
{
    let slices: Vec<&[Complex64]> = slices.into_iter().collect();
    let first = slices.first().ok_or(Error::Empty("no slices"))?;
    let dim = first.len();
    if dim == 0 {
        return Err(Error::Empty("zero-length slice"));
    }
    if let Some(bad) = slices.iter().find(|s| s.len() != dim) {
        return Err(Error::LengthMismatch {
            expected: dim,
            found: bad.len(),
        });
    }
    let v = DMatrix::from_iterator(dim, slices.len(), slices.iter().flat_map(|s| s.iter().copied()));
    Ok(sample_covariance_of_columns(&v))
}

/// Sample covariance of the columns of `v`.
pub fn sample_covariance_of_columns(v: &DMatrix<Complex64>) -> HermitianCov {
    let mut c = v * v.adjoint() / Complex64::new(v.ncols() as f64, 0.0);
    hermitize(&mut c);
    HermitianCov::from_hermitian(c)
}

/// `<(C + eps_r I)^{-1} v, v>`.
pub fn solve_quadratic_form(c: &HermitianCov, v: &[Complex64]) -> Result<f64> {
    c.quadratic_form(v)
}

/// Raises every eigenvalue below `floor * lambda_max` to that level. A
/// matrix already above the floor is returned unchanged.
pub fn ensure_psd(c: &HermitianCov, floor: f64) -> HermitianCov {
    let eig = SymmetricEigen::new(c.matrix.clone());
    let lambda_max = eig.eigenvalues.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let level = floor * lambda_max.max(0.0);
    let clipped = eig.eigenvalues.iter().filter(|&&l| l < level).count();
    if clipped == 0 {
        return c.clone();
    }
    let values = eig.eigenvalues.map(|l| l.max(level));
    let mut rebuilt = &eig.eigenvectors
        * DMatrix::from_diagonal(&values.map(|l| Complex64::new(l, 0.0)))
        * eig.eigenvectors.adjoint();
    hermitize(&mut rebuilt);
    HermitianCov {
        matrix: rebuilt,
        clipped,
        factor: OnceLock::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{circular_gaussian, rng_from_seed};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_pd(dim: usize, seed: u64) -> DMatrix<Complex64> {
        let mut rng = rng_from_seed(seed);
        let a = DMatrix::from_fn(dim, dim, |_, _| circular_gaussian(&mut rng, 1.0));
        &a * a.adjoint() + DMatrix::identity(dim, dim) * c(0.1, 0.0)
    }

    #[test]
    fn identity_and_diagonal_forms() {
        let v = vec![c(1.0, 2.0), c(-0.5, 0.0), c(0.0, 3.0)];
        let id = HermitianCov::identity(3);
        assert!((id.quadratic_form(&v).unwrap() - 14.25).abs() < 1e-14);
        let d = HermitianCov::new(DMatrix::from_diagonal(&DVector::from_vec(vec![
            c(2.0, 0.0),
            c(0.5, 0.0),
            c(4.0, 0.0),
        ])))
        .unwrap();
        let expected = 5.0 / 2.0 + 0.25 / 0.5 + 9.0 / 4.0;
        assert!((d.quadratic_form(&v).unwrap() - expected).abs() < 1e-14);
        assert_eq!(d.ridge(), Some(0.0));
    }

    #[test]
    fn matches_explicit_inverse() {
        let m = random_pd(6, 2);
        let cov = HermitianCov::new(m.clone()).unwrap();
        let mut rng = rng_from_seed(3);
        let v = DVector::from_fn(6, |_, _| circular_gaussian(&mut rng, 1.0));
        let inv = m.try_inverse().unwrap();
        let direct = (v.adjoint() * inv * &v)[(0, 0)].re;
        let fast = cov.quadratic_form(v.as_slice()).unwrap();
        assert!((fast - direct).abs() < 1e-8 * direct);
        let batch = cov
            .quadratic_forms(&DMatrix::from_column_slice(6, 1, v.as_slice()))
            .unwrap();
        assert!((batch[0] - fast).abs() < 1e-12 * fast);
    }

    #[test]
    fn singular_matrix_gets_ridge() {
        let v = DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0), c(1.0, 1.0)]);
        let cov = sample_covariance([v.as_slice()]).unwrap();
        let ridge = cov.factorize().unwrap();
        assert!(ridge > 0.0);
        assert!(cov.quadratic_form(v.as_slice()).unwrap() > 0.0);
    }

    #[test]
    fn single_slice_rank_one() {
        let v = [c(1.0, 1.0), c(2.0, 0.0)];
        let cov = sample_covariance([&v[..]]).unwrap();
        assert_eq!(cov.matrix()[(0, 1)], v[0] * v[1].conj());
        assert_eq!(cov.matrix()[(1, 1)], c(4.0, 0.0));
    }

    #[test]
    fn empty_input() {
        let none: Vec<&[Complex64]> = Vec::new();
        assert!(matches!(sample_covariance(none), Err(Error::Empty(_))));
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(HermitianCov::new(m).is_err());
    }

    #[test]
    fn psd_repair() {
        let pd = HermitianCov::new(random_pd(4, 8)).unwrap();
        assert_eq!(ensure_psd(&pd, 1e-12), pd);

        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), c(-1e-14, 0.0)]));
        let fixed = ensure_psd(&HermitianCov::new(m).unwrap(), 1e-10);
        assert_eq!(fixed.clipped_eigenvalues(), 1);
        assert!((fixed.min_eigenvalue() - 1e-10).abs() < 1e-16);
    }
}
