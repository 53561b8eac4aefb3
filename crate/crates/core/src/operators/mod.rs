//! Linear measurement operators `A: R^N -> R^n` with forward and adjoint
//! application, plus the orthonormal DCT used as a sparsifying basis.

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};

mod dct;
mod dense;
mod restriction;

pub use dct::{dct_1d, dct_2d, idct_1d, idct_2d, Dct1d, Dct2d};
pub use dense::{gaussian_operator, DenseGaussianOperator, DenseOperator};
pub use restriction::{restriction_operator, RestrictedTransformOperator, Synthesis};

/// Largest matrix [`materialize`] will build.
pub const MATERIALIZE_MAX_ENTRIES: usize = 40_000_000;

/// An abstract linear map with shape `(rows, cols)`.
///
/// Implementations must be pure: concurrent calls on a shared operator are
/// allowed.
pub trait LinearOperator: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;

    /// `out = A x`. Panics on length mismatch.
    fn apply_into(&self, x: &[f64], out: &mut [f64]);

    /// `out = Aᵀ y`. Panics on length mismatch.
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]);

    fn shape(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }

    /// The explicit matrix, for operators that store one.
    fn as_dense(&self) -> Option<&DMatrix<f64>> {
        None
    }

    fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("operator forward input", self.cols(), x.len())?;
        let mut out = vec![0.0; self.rows()];
        self.apply_into(x, &mut out);
        Ok(out)
    }

    fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("operator adjoint input", self.rows(), y.len())?;
        let mut out = vec![0.0; self.cols()];
        self.adjoint_into(y, &mut out);
        Ok(out)
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn rows(&self) -> usize {
        (**self).rows()
    }
    fn cols(&self) -> usize {
        (**self).cols()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).apply_into(x, out)
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        (**self).adjoint_into(y, out)
    }
    fn as_dense(&self) -> Option<&DMatrix<f64>> {
        (**self).as_dense()
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for Box<T> {
    fn rows(&self) -> usize {
        (**self).rows()
    }
    fn cols(&self) -> usize {
        (**self).cols()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).apply_into(x, out)
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        (**self).adjoint_into(y, out)
    }
    fn as_dense(&self) -> Option<&DMatrix<f64>> {
        (**self).as_dense()
    }
}

/// Builds the dense matrix of an operator by applying it to the standard
/// basis. Refuses matrices above [`MATERIALIZE_MAX_ENTRIES`].
pub fn materialize<A: LinearOperator + ?Sized>(op: &A) -> Result<DMatrix<f64>> {
    let (rows, cols) = op.shape();
    let entries = rows.saturating_mul(cols);
    if entries > MATERIALIZE_MAX_ENTRIES {
        return Err(Error::Resource(format!(
            "materializing a {rows}x{cols} operator needs {entries} entries (cap {MATERIALIZE_MAX_ENTRIES})"
        )));
    }
    let mut m = DMatrix::zeros(rows, cols);
    let mut e = vec![0.0; cols];
    let mut col = vec![0.0; rows];
    for j in 0..cols {
        e[j] = 1.0;
        op.apply_into(&e, &mut col);
        m.column_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    Ok(m)
}

/// Relative adjoint mismatch `|⟨Au, v⟩ − ⟨u, Aᵀv⟩| / (‖Au‖‖v‖ + ‖u‖‖Aᵀv‖)`
/// for one vector pair.
pub fn adjoint_mismatch<A: LinearOperator + ?Sized>(op: &A, u: &[f64], v: &[f64]) -> Result<f64> {
    use crate::model::{dot, l2_norm};
    let au = op.forward(u)?;
    let atv = op.adjoint(v)?;
    let lhs = dot(&au, v);
    let rhs = dot(u, &atv);
    let scale = l2_norm(&au) * l2_norm(v) + l2_norm(u) * l2_norm(&atv);
    Ok(if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale })
}
