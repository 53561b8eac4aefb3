//! Exhaustive solver for tiny equality-constrained instances.
//!
//! Optimal points of `min ‖z‖_{1,w} s.t. Az = y` can be taken at a basic
//! solution, i.e. supported on linearly independent columns, so scanning every
//! such support and keeping the exact solutions finds the optimum.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::model::{weighted_l1_unchecked, WeightVector};

pub const ORACLE_MAX_COLS: usize = 12;
pub const ORACLE_MAX_ROWS: usize = 8;

/// Returns the optimal weighted norm and one minimiser.
pub fn oracle_solve_small(a: &DMatrix<f64>, y: &[f64], w: &WeightVector) -> Result<(f64, Vec<f64>)> {
    let (m, n) = a.shape();
    check_len("measurements", m, y.len())?;
    check_len("weights", n, w.len())?;
    if n > ORACLE_MAX_COLS || m > ORACLE_MAX_ROWS {
        return Err(Error::Resource(format!(
            "oracle handles at most {ORACLE_MAX_ROWS}x{ORACLE_MAX_COLS}, got {m}x{n}"
        )));
    }
    let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if y_norm == 0.0 {
        return Ok((0.0, vec![0.0; n]));
    }
    let tol = 1e-9 * y_norm.max(1.0);
    let yv = DVector::from_column_slice(y);
    let mut best: Option<(f64, Vec<f64>)> = None;

    let max_size = m.min(n);
    for mask in 1u32..(1u32 << n) {
        let size = mask.count_ones() as usize;
        if size > max_size {
            continue;
        }
        let cols: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let sub = a.select_columns(cols.iter());
        let svd = sub.clone().svd(true, true);
        let s_max = svd.singular_values.max();
        let s_min = svd.singular_values.min();
        if s_max == 0.0 || s_min <= 1e-10 * s_max {
            continue;
        }
        let Ok(coef) = svd.solve(&yv, 0.0) else {
            continue;
        };
        let res = (&sub * &coef - &yv).norm();
        if res > tol {
            continue;
        }
        let mut z = vec![0.0; n];
        for (k, &i) in cols.iter().enumerate() {
            z[i] = coef[k];
        }
        let obj = weighted_l1_unchecked(&z, w.as_slice());
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, z));
        }
    }
    best.ok_or_else(|| Error::Infeasible("no support reproduces the measurements".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_column_example() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let (obj, z) = oracle_solve_small(&a, &[2.0], &WeightVector::ones(2)).unwrap();
        assert_abs_diff_eq!(obj, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(z[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(z[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn identity_has_single_feasible_point() {
        let a = DMatrix::<f64>::identity(3, 3);
        let (obj, z) = oracle_solve_small(&a, &[1.0, 2.0, 3.0], &WeightVector::ones(3)).unwrap();
        assert_abs_diff_eq!(obj, 6.0, epsilon = 1e-12);
        assert_eq!(z, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn zero_weight_drops_mass() {
        let a = DMatrix::<f64>::identity(3, 3);
        let w = WeightVector::new(vec![1.0, 0.0, 1.0]).unwrap();
        let (obj, _) = oracle_solve_small(&a, &[1.0, 2.0, 3.0], &w).unwrap();
        assert_abs_diff_eq!(obj, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_weight_changes_choice() {
        // with w = (1,1) the cheaper column is the second; making the first free flips it
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let w = WeightVector::new(vec![0.0, 1.0]).unwrap();
        let (obj, z) = oracle_solve_small(&a, &[2.0], &w).unwrap();
        assert_abs_diff_eq!(obj, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(z[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn inconsistent_system_is_infeasible() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let err = oracle_solve_small(&a, &[1.0, 2.0], &WeightVector::ones(2)).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn rejects_large_instances() {
        let a = DMatrix::<f64>::zeros(9, 4);
        assert!(matches!(
            oracle_solve_small(&a, &[0.0; 9], &WeightVector::ones(4)),
            Err(Error::Resource(_))
        ));
    }
}
