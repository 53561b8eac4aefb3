//! Recovery-guarantee calculators for weighted ℓ1 minimization with a support
//! estimate, plus an exhaustive restricted-isometry estimator for tiny matrices.
//!
//! RIP constants are inputs here. Nothing in this module derives them from a
//! random ensemble except [`empirical_rip_delta`], which enumerates subsets.

use std::io::{Read, Write};

use itertools::Itertools;
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{best_k_term, SignalVector, SupportSet};

/// Largest number of column subsets [`empirical_rip_delta`] will visit.
pub const RIP_SUBSET_CAP: u128 = 1_000_000;

fn check_delta(name: &str, d: f64) -> Result<()> {
    if !(0.0..1.0).contains(&d) {
        return Err(Error::domain(format!("{name} = {d} must lie in [0, 1)")));
    }
    Ok(())
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::domain(format!("{name} = {v} must lie in [0, 1]")));
    }
    Ok(())
}

/// Parameters of the weighted recovery guarantee.
#[derive(Debug, Clone, PartialEq)]
pub struct GuaranteeInputs {
    /// Oversize factor; `a·k` must be an integer.
    pub a: f64,
    pub k: usize,
    /// Size of the support estimate relative to `k`.
    pub rho: f64,
    /// Fraction of the support estimate that is correct.
    pub alpha: f64,
    pub omega: f64,
    /// RIP constant at sparsity `a·k`.
    pub delta_ak: f64,
    /// RIP constant at sparsity `(a+1)·k`.
    pub delta_a1k: f64,
}

impl GuaranteeInputs {
    pub fn new(a: f64, k: usize, rho: f64, alpha: f64, omega: f64, delta_ak: f64, delta_a1k: f64) -> Result<Self> {
        let g = GuaranteeInputs {
            a,
            k,
            rho,
            alpha,
            omega,
            delta_ak,
            delta_a1k,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 1.0) || !self.a.is_finite() {
            return Err(Error::domain(format!("a = {} must exceed 1", self.a)));
        }
        if self.k == 0 {
            return Err(Error::domain("k must be at least 1"));
        }
        let ak = self.a * self.k as f64;
        if (ak - ak.round()).abs() > 1e-9 * ak.max(1.0) {
            return Err(Error::domain(format!("a·k = {ak} is not an integer")));
        }
        if !(self.rho >= 0.0) || !self.rho.is_finite() {
            return Err(Error::domain(format!("rho = {} must be nonnegative", self.rho)));
        }
        check_unit("alpha", self.alpha)?;
        check_unit("omega", self.omega)?;
        if self.a < (1.0 - self.alpha) * self.rho {
            return Err(Error::domain(format!(
                "a = {} is below (1 - alpha)·rho = {}",
                self.a,
                (1.0 - self.alpha) * self.rho
            )));
        }
        check_delta("delta_ak", self.delta_ak)?;
        check_delta("delta_a1k", self.delta_a1k)
    }
}

/// Error-bound constants. When the sufficient condition fails both are
/// `+∞` and `valid` is false.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub c0: f64,
    pub c1: f64,
    pub valid: bool,
}

impl BoundConstants {
    const INVALID: BoundConstants = BoundConstants {
        c0: f64::INFINITY,
        c1: f64::INFINITY,
        valid: false,
    };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuaranteeResult {
    pub gamma: f64,
    pub condition_holds: bool,
    pub delta_hat: f64,
    pub c0p: f64,
    pub c1p: f64,
}

/// `ω + (1−ω)·√(1 + ρ − 2αρ)`.
pub fn gamma(omega: f64, rho: f64, alpha: f64) -> Result<f64> {
    check_unit("omega", omega)?;
    let radicand = 1.0 + rho - 2.0 * alpha * rho;
    if !(radicand >= 0.0) {
        return Err(Error::domain(format!("1 + rho - 2·alpha·rho = {radicand} is negative")));
    }
    Ok(omega + (1.0 - omega) * radicand.sqrt())
}

/// `δ_ak + (a/γ²)·δ_(a+1)k < a/γ² − 1`. With `γ = 0` the ratio is infinite and
/// the condition holds for any admissible constants.
pub fn weighted_sufficient_condition(inp: &GuaranteeInputs) -> Result<bool> {
    inp.validate()?;
    let g = gamma(inp.omega, inp.rho, inp.alpha)?;
    if g == 0.0 {
        return Ok(true);
    }
    let ratio = inp.a / (g * g);
    Ok(inp.delta_ak + ratio * inp.delta_a1k < ratio - 1.0)
}

/// The unweighted condition `δ_ak + a·δ_(a+1)k < a − 1`.
pub fn standard_sufficient_condition(a: f64, delta_ak: f64, delta_a1k: f64) -> bool {
    delta_ak + a * delta_a1k < a - 1.0
}

/// Bound on `δ_(a+1)k` that suffices when `δ_ak = δ_(a+1)k`: `(a − γ²)/(a + γ²)`.
pub fn delta_hat(a: f64, omega: f64, rho: f64, alpha: f64) -> Result<f64> {
    if !(a > 1.0) {
        return Err(Error::domain(format!("a = {a} must exceed 1")));
    }
    let g2 = gamma(omega, rho, alpha)?.powi(2);
    Ok((a - g2) / (a + g2))
}

fn constants_with_factor(factor: f64, a: f64, delta_ak: f64, delta_a1k: f64) -> BoundConstants {
    let lo = (1.0 - delta_a1k).sqrt();
    let hi = (1.0 + delta_ak).sqrt();
    let denom = lo - factor * hi;
    if !(denom > 0.0) {
        return BoundConstants::INVALID;
    }
    BoundConstants {
        c0: 2.0 * (1.0 + factor) / denom,
        c1: 2.0 * (lo + hi) / (a.sqrt() * denom),
        valid: true,
    }
}

/// `C0′, C1′` of the weighted bound.
pub fn weighted_constants(inp: &GuaranteeInputs) -> Result<BoundConstants> {
    inp.validate()?;
    let g = gamma(inp.omega, inp.rho, inp.alpha)?;
    Ok(constants_with_factor(g / inp.a.sqrt(), inp.a, inp.delta_ak, inp.delta_a1k))
}

/// `C0, C1` of the unweighted bound.
pub fn standard_constants(a: f64, delta_ak: f64, delta_a1k: f64) -> BoundConstants {
    let inv = 1.0 / a.sqrt();
    let lo = (1.0 - delta_a1k).sqrt();
    let hi = (1.0 + delta_ak).sqrt();
    let denom = lo - inv * hi;
    if !(denom > 0.0) {
        return BoundConstants::INVALID;
    }
    BoundConstants {
        c0: 2.0 * (1.0 + inv) / denom,
        c1: 2.0 * inv * (lo + hi) / denom,
        valid: true,
    }
}

pub fn evaluate(inp: &GuaranteeInputs) -> Result<GuaranteeResult> {
    let consts = weighted_constants(inp)?;
    Ok(GuaranteeResult {
        gamma: gamma(inp.omega, inp.rho, inp.alpha)?,
        condition_holds: weighted_sufficient_condition(inp)?,
        delta_hat: delta_hat(inp.a, inp.omega, inp.rho, inp.alpha)?,
        c0p: consts.c0,
        c1p: consts.c1,
    })
}

/// Right-hand side of the weighted error bound for signal `x`, noise level
/// `epsilon` and support estimate `estimate`. The `rho` and `alpha` in `inp`
/// must describe `estimate` against the best `k`-term support of `x`.
pub fn error_bound(inp: &GuaranteeInputs, epsilon: f64, x: &SignalVector, estimate: &SupportSet) -> Result<f64> {
    inp.validate()?;
    if !(epsilon >= 0.0) {
        return Err(Error::domain(format!("epsilon = {epsilon} must be nonnegative")));
    }
    if estimate.ambient_dim() != x.len() {
        return Err(Error::Dimension {
            context: "support estimate",
            expected: x.len(),
            actual: estimate.ambient_dim(),
        });
    }
    let consts = weighted_constants(inp)?;
    if !consts.valid {
        return Err(Error::domain("sufficient condition fails; the bound does not apply"));
    }
    let (head, t0) = best_k_term(x.as_slice(), inp.k)?;
    let k = inp.k as f64;
    let rho = estimate.len() as f64 / k;
    if (rho - inp.rho).abs() > 1e-12 * rho.max(1.0) {
        return Err(Error::domain(format!("rho = {} does not match the estimate ({rho})", inp.rho)));
    }
    if !estimate.is_empty() {
        let alpha = estimate.intersection(&t0).len() as f64 / estimate.len() as f64;
        if (alpha - inp.alpha).abs() > 1e-12 {
            return Err(Error::domain(format!(
                "alpha = {} does not match the estimate ({alpha})",
                inp.alpha
            )));
        }
    }
    let tail: f64 = x.as_slice().iter().zip(head.as_slice()).map(|(a, b)| (a - b).abs()).sum();
    let outside = estimate.complement().intersection(&t0.complement());
    let off_estimate = x.l1_norm_on(&outside);
    let mixed = inp.omega * tail + (1.0 - inp.omega) * off_estimate;
    Ok(consts.c0 * epsilon + consts.c1 * mixed / k.sqrt())
}

/// Threshold `(√2·γ + 1)⁻¹` on `δ_2k` in the alternative sufficient condition.
pub fn candes_delta2k_conditions(omega: f64, rho: f64, alpha: f64) -> Result<f64> {
    let g = gamma(omega, rho, alpha)?;
    Ok(1.0 / (std::f64::consts::SQRT_2 * g + 1.0))
}

/// `2δ_2u + δ_3u + δ_k + δ²_(k+u) + 2δ²_(k+2u) < 1`.
pub fn vaswani_condition(delta_2u: f64, delta_3u: f64, delta_k: f64, delta_ku: f64, delta_k2u: f64) -> Result<bool> {
    for (name, d) in [
        ("delta_2u", delta_2u),
        ("delta_3u", delta_3u),
        ("delta_k", delta_k),
        ("delta_ku", delta_ku),
        ("delta_k2u", delta_k2u),
    ] {
        check_delta(name, d)?;
    }
    Ok(2.0 * delta_2u + delta_3u + delta_k + delta_ku * delta_ku + 2.0 * delta_k2u * delta_k2u < 1.0)
}

/// Positive root of `δ + 3δ² = 1`: the largest `δ_k` the previous condition
/// allows with no unknown support entries.
pub fn vaswani_zero_unknown_boundary() -> f64 {
    (13f64.sqrt() - 1.0) / 6.0
}

/// Largest `u/k` with `δ_2k < 1/(2√(u/k) + 1)`, namely `((1/δ_2k − 1)/2)²`.
pub fn reduced_condition_max_u_over_k(delta_2k: f64) -> Result<f64> {
    if !(delta_2k > 0.0 && delta_2k < 1.0) {
        return Err(Error::domain(format!("delta_2k = {delta_2k} must lie in (0, 1)")));
    }
    Ok(((1.0 / delta_2k - 1.0) / 2.0).powi(2))
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Exact `δ_k` by visiting every `k`-column submatrix.
pub fn empirical_rip_delta(a: &DMatrix<f64>, k: usize) -> Result<f64> {
    let n = a.ncols();
    if k == 0 || k > n {
        return Err(Error::domain(format!("k = {k} must lie in 1..={n}")));
    }
    let count = binomial(n, k);
    if count > RIP_SUBSET_CAP {
        return Err(Error::Resource(format!(
            "C({n}, {k}) = {count} subsets exceeds the cap of {RIP_SUBSET_CAP}"
        )));
    }
    let gram = a.transpose() * a;
    let worst = (0..n)
        .combinations(k)
        .par_bridge()
        .map(|cols| {
            let sub = gram.select_rows(cols.iter()).select_columns(cols.iter());
            let eig = sub.symmetric_eigenvalues();
            (eig.max() - 1.0).max(1.0 - eig.min())
        })
        .reduce(|| 0.0f64, f64::max);
    Ok(worst)
}

/// Externally sourced RIP constant, e.g. transcribed from a table.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaRecord {
    pub label: String,
    pub delta_name: String,
    pub value: f64,
}

/// Reads rows `label,delta_name,value`. A header row whose third field is not
/// numeric is skipped.
pub fn read_delta_csv<R: Read>(reader: R) -> Result<Vec<DeltaRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| {
            let offset = e.position().map_or(0, |p| p.byte());
            Error::format(offset, e.to_string())
        })?;
        let offset = rec.position().map_or(0, |p| p.byte());
        if rec.len() != 3 {
            return Err(Error::format(offset, format!("expected 3 fields, found {}", rec.len())));
        }
        let value: f64 = match rec[2].parse() {
            Ok(v) => v,
            Err(_) if row == 0 => continue,
            Err(_) => return Err(Error::format(offset, format!("value {:?} is not a number", &rec[2]))),
        };
        if !(0.0..1.0).contains(&value) {
            return Err(Error::format(offset, format!("RIP constant {value} outside [0, 1)")));
        }
        out.push(DeltaRecord {
            label: rec[0].to_string(),
            delta_name: rec[1].to_string(),
            value,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRow {
    pub omega: f64,
    pub alpha: f64,
    pub rho: f64,
    pub a: f64,
    pub delta_hat: f64,
    pub c0p: f64,
    pub c1p: f64,
}

/// `delta_hat`, `C0′` and `C1′` over a parameter grid with both RIP constants
/// set to `delta`. Points with `α·ρ > 1` cannot arise from a real estimate
/// (it holds at most `k` correct indices) and are left out.
pub fn condition_grid(omegas: &[f64], alphas: &[f64], rhos: &[f64], a: f64, delta: f64) -> Result<Vec<GridRow>> {
    if !(a > 1.0) {
        return Err(Error::domain(format!("a = {a} must exceed 1")));
    }
    check_delta("delta", delta)?;
    let mut rows = Vec::with_capacity(omegas.len() * alphas.len() * rhos.len());
    for &rho in rhos {
        for &omega in omegas {
            for &alpha in alphas {
                check_unit("alpha", alpha)?;
                if alpha * rho > 1.0 + 1e-12 {
                    continue;
                }
                let g = gamma(omega, rho, alpha)?;
                let consts = constants_with_factor(g / a.sqrt(), a, delta, delta);
                rows.push(GridRow {
                    omega,
                    alpha,
                    rho,
                    a,
                    delta_hat: delta_hat(a, omega, rho, alpha)?,
                    c0p: consts.c0,
                    c1p: consts.c1,
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_grid_csv<W: Write>(rows: &[GridRow], mut out: W) -> Result<()> {
    writeln!(out, "omega,alpha,rho,a,delta_hat,C0p,C1p")?;
    for r in rows {
        writeln!(
            out,
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.omega, r.alpha, r.rho, r.a, r.delta_hat, r.c0p, r.c1p
        )?;
    }
    Ok(())
}

/// `n` evenly spaced points from 0 to 1 inclusive.
pub fn unit_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}
