use super::{Dct1d, Dct2d, LinearOperator};
use crate::error::{Error, Result};
use crate::model::SupportSet;

/// An orthonormal synthesis map `D` taking coefficients to samples.
#[derive(Debug, Clone)]
pub enum Synthesis {
    Identity(usize),
    /// Inverse 1-D DCT.
    Dct1d(Dct1d),
    /// Inverse 2-D DCT over a row-major block.
    Dct2d(Dct2d),
}

impl Synthesis {
    pub fn len(&self) -> usize {
        match self {
            Synthesis::Identity(n) => *n,
            Synthesis::Dct1d(d) => d.len(),
            Synthesis::Dct2d(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coefficients to samples, in place.
    pub fn synthesize_in_place(&self, buf: &mut [f64]) {
        match self {
            Synthesis::Identity(_) => {}
            Synthesis::Dct1d(d) => {
                let mut scratch = vec![0.0; d.scratch_len()];
                d.inverse_in_place(buf, &mut scratch);
            }
            Synthesis::Dct2d(d) => d.inverse_in_place(buf),
        }
    }

    /// Samples to coefficients (the adjoint of synthesis), in place.
    pub fn analyze_in_place(&self, buf: &mut [f64]) {
        match self {
            Synthesis::Identity(_) => {}
            Synthesis::Dct1d(d) => {
                let mut scratch = vec![0.0; d.scratch_len()];
                d.forward_in_place(buf, &mut scratch);
            }
            Synthesis::Dct2d(d) => d.forward_in_place(buf),
        }
    }
}

/// `A = R D`: synthesize with `D`, then keep the samples at `kept`.
#[derive(Debug, Clone)]
pub struct RestrictedTransformOperator {
    kept: SupportSet,
    transform: Synthesis,
}

impl RestrictedTransformOperator {
    pub fn kept(&self) -> &SupportSet {
        &self.kept
    }

    pub fn transform(&self) -> &Synthesis {
        &self.transform
    }
}

/// Builds `R D` from kept sample indices. Duplicate or out-of-range indices
/// are rejected; rows come out in increasing index order.
pub fn restriction_operator(kept: &[usize], transform: Synthesis) -> Result<RestrictedTransformOperator> {
    let n = transform.len();
    if n == 0 {
        return Err(Error::domain("restriction over an empty transform"));
    }
    let kept = SupportSet::new(kept.to_vec(), n)?;
    Ok(RestrictedTransformOperator { kept, transform })
}

impl LinearOperator for RestrictedTransformOperator {
    fn rows(&self) -> usize {
        self.kept.len()
    }

    fn cols(&self) -> usize {
        self.transform.len()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.cols());
        assert_eq!(out.len(), self.rows());
        let mut buf = x.to_vec();
        self.transform.synthesize_in_place(&mut buf);
        for (o, i) in out.iter_mut().zip(self.kept.iter()) {
            *o = buf[i];
        }
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        assert_eq!(y.len(), self.rows());
        assert_eq!(out.len(), self.cols());
        out.fill(0.0);
        for (v, i) in y.iter().zip(self.kept.iter()) {
            out[i] = *v;
        }
        self.transform.analyze_in_place(out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::l2_norm;
    use crate::operators::{adjoint_mismatch, idct_1d, idct_2d, materialize};
    use crate::rng;
    use nalgebra::DMatrix;
    use rand::seq::index;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn identity_restriction_is_identity() {
        let op = restriction_operator(&[0, 1, 2, 3, 4], Synthesis::Identity(5)).unwrap();
        assert_eq!(materialize(&op).unwrap(), DMatrix::identity(5, 5));
    }

    #[test]
    fn single_row_is_first_synthesis_row() {
        let op = restriction_operator(&[0], Synthesis::Dct1d(Dct1d::new(4).unwrap())).unwrap();
        let m = materialize(&op).unwrap();
        for j in 0..4 {
            let mut e = vec![0.0; 4];
            e[j] = 1.0;
            let col = idct_1d(&e).unwrap();
            assert!((m[(0, j)] - col[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn composite_rows_are_synthesis_rows() {
        let (h, w) = (4, 6);
        let kept = [1, 5, 7, 20, 23];
        let op = restriction_operator(&kept, Synthesis::Dct2d(Dct2d::new(h, w).unwrap())).unwrap();
        let m = materialize(&op).unwrap();
        for j in 0..h * w {
            let mut e = vec![0.0; h * w];
            e[j] = 1.0;
            let col = idct_2d(&e, h, w).unwrap();
            for (r, &i) in kept.iter().enumerate() {
                assert!((m[(r, j)] - col[i]).abs() < 1e-12);
            }
        }
        for r in 0..kept.len() {
            let norm = m.row(r).norm();
            assert!((norm - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn adjoint_consistency_all_transforms() {
        let mut r = rng::seeded(42);
        let transforms = [
            Synthesis::Identity(50),
            Synthesis::Dct1d(Dct1d::new(64).unwrap()),
            Synthesis::Dct2d(Dct2d::new(8, 12).unwrap()),
        ];
        for t in transforms {
            let n = t.len();
            let kept: Vec<usize> = index::sample(&mut r, n, n / 3).into_vec();
            let op = restriction_operator(&kept, t).unwrap();
            for _ in 0..100 {
                let u: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
                let v: Vec<f64> = (0..op.rows()).map(|_| StandardNormal.sample(&mut r)).collect();
                assert!(adjoint_mismatch(&op, &u, &v).unwrap() <= 1e-10);
            }
        }
    }

    #[test]
    fn rows_have_unit_norm() {
        let op = restriction_operator(&[0, 3, 9, 31], Synthesis::Dct1d(Dct1d::new(32).unwrap())).unwrap();
        let m = materialize(&op).unwrap();
        for r in 0..4 {
            assert!((l2_norm(m.row(r).transpose().as_slice()) - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn rejects_bad_indices() {
        assert!(restriction_operator(&[0, 0], Synthesis::Identity(3)).is_err());
        assert!(restriction_operator(&[3], Synthesis::Identity(3)).is_err());
    }
}
