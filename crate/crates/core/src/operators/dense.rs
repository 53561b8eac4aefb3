use nalgebra::{DMatrix, DVectorView, DVectorViewMut};
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::LinearOperator;
use crate::error::{Error, Result};
use crate::rng;

/// An explicitly stored `n x N` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    matrix: DMatrix<f64>,
    seed: Option<u64>,
}

/// Dense operator drawn from the Gaussian ensemble.
pub type DenseGaussianOperator = DenseOperator;

impl DenseOperator {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::domain("operator matrix must be nonempty"));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("operator matrix has non-finite entries"));
        }
        Ok(DenseOperator { matrix, seed: None })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Seed the matrix was drawn from, if it is a Gaussian draw.
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }
}

/// `n x N` matrix with i.i.d. `N(0, 1/n)` entries, deterministic in `seed`.
pub fn gaussian_operator(rows: usize, cols: usize, seed: u64) -> Result<DenseGaussianOperator> {
    if rows == 0 || cols == 0 {
        return Err(Error::domain(format!(
            "gaussian operator needs n >= 1 and N >= 1, got {rows}x{cols}"
        )));
    }
    let mut rng = rng::seeded(seed);
    let scale = 1.0 / (rows as f64).sqrt();
    // column-major fill
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(DenseOperator {
        matrix: DMatrix::from_vec(rows, cols, data),
        seed: Some(seed),
    })
}

impl LinearOperator for DenseOperator {
    fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.cols());
        assert_eq!(out.len(), self.rows());
        let xv = DVectorView::from_slice(x, x.len());
        let n = out.len();
        let mut ov = DVectorViewMut::from_slice(out, n);
        ov.gemv(1.0, &self.matrix, &xv, 0.0);
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        assert_eq!(y.len(), self.rows());
        assert_eq!(out.len(), self.cols());
        let yv = DVectorView::from_slice(y, y.len());
        let n = out.len();
        let mut ov = DVectorViewMut::from_slice(out, n);
        ov.gemv_tr(1.0, &self.matrix, &yv, 0.0);
    }

    fn as_dense(&self) -> Option<&DMatrix<f64>> {
        Some(&self.matrix)
    }
}
