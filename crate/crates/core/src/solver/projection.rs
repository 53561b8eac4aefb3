//! Euclidean projection onto the weighted ℓ1 ball `{z : Σ w_i |z_i| ≤ τ}`.
//!
//! The projection is a weighted soft threshold `z_i = sign(v_i)·max(|v_i| − θ w_i, 0)`
//! where `θ ≥ 0` is the root of the piecewise-linear equation
//! `Σ w_i max(|v_i| − θ w_i, 0) = τ`. Zero-weight coordinates never bind and
//! pass through unchanged.

use crate::error::{check_len, Error, Result};

/// Projects `v` onto the weighted ℓ1 ball of radius `tau`.
pub fn project_weighted_l1_ball(v: &[f64], w: &[f64], tau: f64) -> Result<Vec<f64>> {
    check_len("projection weights", v.len(), w.len())?;
    if !(tau >= 0.0) {
        return Err(Error::domain(format!("ball radius tau = {tau} must be >= 0")));
    }
    let mut out = vec![0.0; v.len()];
    project_into(v, w, tau, &mut out);
    Ok(out)
}

/// Writes the projection into `out` and returns the threshold `θ`.
pub(crate) fn project_into(v: &[f64], w: &[f64], tau: f64, out: &mut [f64]) -> f64 {
    let theta = threshold(v, w, tau);
    for ((o, &vi), &wi) in out.iter_mut().zip(v).zip(w) {
        *o = if theta == 0.0 || wi == 0.0 {
            vi
        } else {
            let m = vi.abs() - theta * wi;
            if m > 0.0 {
                m.copysign(vi)
            } else {
                0.0
            }
        };
    }
    theta
}

pub(crate) fn threshold(v: &[f64], w: &[f64], tau: f64) -> f64 {
    let total: f64 = v.iter().zip(w).map(|(vi, wi)| wi * vi.abs()).sum();
    if total <= tau {
        return 0.0;
    }
    // breakpoints |v_i| / w_i of the coordinates that can shrink
    let mut active: Vec<(f64, f64, f64)> = v
        .iter()
        .zip(w)
        .filter(|(vi, wi)| **wi > 0.0 && **vi != 0.0)
        .map(|(vi, wi)| (vi.abs() / wi, *wi, vi.abs()))
        .collect();
    active.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));

    let mut s1 = 0.0; // Σ w_i |v_i| over coordinates above θ
    let mut s2 = 0.0; // Σ w_i²
    let mut theta = 0.0;
    for (j, &(_, wi, ai)) in active.iter().enumerate() {
        s1 += wi * ai;
        s2 += wi * wi;
        theta = (s1 - tau) / s2;
        let next = active.get(j + 1).map_or(0.0, |a| a.0);
        if theta >= next {
            break;
        }
    }
    theta.max(0.0)
}
