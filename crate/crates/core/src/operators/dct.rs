//! Orthonormal (unitary) DCT-II and its inverse, in one and two dimensions.
//!
//! The unnormalized transforms come from `rustdct`; the scaling below makes the
//! pair orthonormal: `c_0 = √(1/N) Σ x_n`, `c_k = √(2/N) Σ x_n cos(πk(2n+1)/2N)`.

use std::fmt;
use std::sync::Arc;

use rustdct::{DctPlanner, TransformType2And3};

use crate::error::{check_len, Error, Result};

/// Planned orthonormal DCT of a fixed length.
#[derive(Clone)]
pub struct Dct1d {
    len: usize,
    plan: Arc<dyn TransformType2And3<f64>>,
    dc_scale: f64,
    ac_scale: f64,
}

impl fmt::Debug for Dct1d {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dct1d").field("len", &self.len).finish()
    }
}

impl Dct1d {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::domain("DCT length must be >= 1"));
        }
        let plan = DctPlanner::new().plan_dct2(len);
        let n = len as f64;
        Ok(Dct1d {
            len,
            plan,
            dc_scale: (1.0 / n).sqrt(),
            ac_scale: (2.0 / n).sqrt(),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub(crate) fn scratch_len(&self) -> usize {
        self.plan.get_scratch_len()
    }

    /// In-place analysis: signal to coefficients.
    pub fn forward_in_place(&self, buf: &mut [f64], scratch: &mut [f64]) {
        assert_eq!(buf.len(), self.len);
        self.plan.process_dct2_with_scratch(buf, scratch);
        buf[0] *= self.dc_scale;
        for v in &mut buf[1..] {
            *v *= self.ac_scale;
        }
    }

    /// In-place synthesis: coefficients to signal.
    pub fn inverse_in_place(&self, buf: &mut [f64], scratch: &mut [f64]) {
        assert_eq!(buf.len(), self.len);
        // DCT-III halves the first input
        buf[0] *= 2.0 * self.dc_scale;
        for v in &mut buf[1..] {
            *v *= self.ac_scale;
        }
        self.plan.process_dct3_with_scratch(buf, scratch);
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("dct input", self.len, x.len())?;
        let mut out = x.to_vec();
        let mut scratch = vec![0.0; self.scratch_len()];
        self.forward_in_place(&mut out, &mut scratch);
        Ok(out)
    }

    pub fn inverse(&self, c: &[f64]) -> Result<Vec<f64>> {
        check_len("idct input", self.len, c.len())?;
        let mut out = c.to_vec();
        let mut scratch = vec![0.0; self.scratch_len()];
        self.inverse_in_place(&mut out, &mut scratch);
        Ok(out)
    }
}

/// Separable orthonormal DCT on a row-major `height x width` array.
#[derive(Debug, Clone)]
pub struct Dct2d {
    height: usize,
    width: usize,
    along_rows: Dct1d,
    along_cols: Dct1d,
}

impl Dct2d {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        Ok(Dct2d {
            height,
            width,
            along_rows: Dct1d::new(width)?,
            along_cols: Dct1d::new(height)?,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn separable(&self, buf: &mut [f64], inverse: bool) {
        assert_eq!(buf.len(), self.len());
        let scratch_len = self.along_rows.scratch_len().max(self.along_cols.scratch_len());
        let mut scratch = vec![0.0; scratch_len];
        for row in buf.chunks_exact_mut(self.width) {
            if inverse {
                self.along_rows.inverse_in_place(row, &mut scratch);
            } else {
                self.along_rows.forward_in_place(row, &mut scratch);
            }
        }
        let mut col = vec![0.0; self.height];
        for j in 0..self.width {
            for (i, c) in col.iter_mut().enumerate() {
                *c = buf[i * self.width + j];
            }
            if inverse {
                self.along_cols.inverse_in_place(&mut col, &mut scratch);
            } else {
                self.along_cols.forward_in_place(&mut col, &mut scratch);
            }
            for (i, c) in col.iter().enumerate() {
                buf[i * self.width + j] = *c;
            }
        }
    }

    pub fn forward_in_place(&self, buf: &mut [f64]) {
        self.separable(buf, false);
    }

    pub fn inverse_in_place(&self, buf: &mut [f64]) {
        self.separable(buf, true);
    }

    pub fn forward(&self, frame: &[f64]) -> Result<Vec<f64>> {
        check_len("dct2 input", self.len(), frame.len())?;
        let mut out = frame.to_vec();
        self.forward_in_place(&mut out);
        Ok(out)
    }

    pub fn inverse(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        check_len("idct2 input", self.len(), coeffs.len())?;
        let mut out = coeffs.to_vec();
        self.inverse_in_place(&mut out);
        Ok(out)
    }
}

pub fn dct_1d(x: &[f64]) -> Result<Vec<f64>> {
    Dct1d::new(x.len())?.forward(x)
}

pub fn idct_1d(c: &[f64]) -> Result<Vec<f64>> {
    Dct1d::new(c.len())?.inverse(c)
}

/// 2-D DCT of a row-major `height x width` frame.
pub fn dct_2d(frame: &[f64], height: usize, width: usize) -> Result<Vec<f64>> {
    Dct2d::new(height, width)?.forward(frame)
}

pub fn idct_2d(coeffs: &[f64], height: usize, width: usize) -> Result<Vec<f64>> {
    Dct2d::new(height, width)?.inverse(coeffs)
}
