//! Seeded synthetic sweeps: recovery SNR of weighted ℓ1 minimization against
//! the number of measurements, the support-estimate size, and for compressible
//! signals, with CSV and plot-data output.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    best_k_term, build_weights, gen_compressible_signal, gen_sparse_signal, gen_support_estimate, l2_norm,
    SignalVector, SupportSet,
};
use crate::operators::{gaussian_operator, LinearOperator};
use crate::rng::{derive_seed, real_part, seeded};
use crate::solver::{solve_weighted_bpdn, SolveOptions};

/// SNR reported for an exact reconstruction.
pub const SNR_CAP_DB: f64 = 300.0;

/// `10·log10(‖x‖² / ‖x − x*‖²)`, capped at [`SNR_CAP_DB`].
pub fn snr_db(x: &[f64], x_star: &[f64]) -> Result<f64> {
    if x.len() != x_star.len() {
        return Err(Error::Dimension {
            context: "recovered signal",
            expected: x.len(),
            actual: x_star.len(),
        });
    }
    let signal: f64 = x.iter().map(|v| v * v).sum();
    if signal == 0.0 {
        return Err(Error::domain("SNR undefined for a zero signal"));
    }
    let err: f64 = x.iter().zip(x_star).map(|(a, b)| (a - b) * (a - b)).sum();
    if err == 0.0 {
        return Ok(SNR_CAP_DB);
    }
    Ok((10.0 * (signal / err).log10()).min(SNR_CAP_DB))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    NoiseFree,
    /// Noise uniform on the sphere of radius `noise_fraction·‖x‖₂`, which is
    /// also the constraint radius handed to the solver.
    Relative,
}

impl FromStr for NoiseMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noise_free" | "noise-free" | "none" => Ok(NoiseMode::NoiseFree),
            "relative" => Ok(NoiseMode::Relative),
            _ => Err(Error::domain(format!("unknown noise mode {s:?} (noise_free | relative)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Ambient dimension `N`.
    pub signal_len: usize,
    /// Sparsity, or for compressible signals the size of the reference
    /// best-term support.
    pub k: usize,
    pub n_values: Vec<usize>,
    pub rho_values: Vec<f64>,
    pub alpha_values: Vec<f64>,
    pub omega_values: Vec<f64>,
    /// Decay powers; only read by the compressible sweep.
    pub p_values: Vec<f64>,
    pub noise_mode: NoiseMode,
    pub noise_fraction: f64,
    pub trials: usize,
    pub base_seed: u64,
    pub solver: SolveOptions,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::domain("trials must be at least 1"));
        }
        if !(self.noise_fraction >= 0.0) || !self.noise_fraction.is_finite() {
            return Err(Error::domain(format!(
                "noise fraction {} must be finite and >= 0",
                self.noise_fraction
            )));
        }
        if self.signal_len == 0 || self.k == 0 || self.k > self.signal_len {
            return Err(Error::domain(format!(
                "need 1 <= k <= N, got k = {}, N = {}",
                self.k, self.signal_len
            )));
        }
        for (name, empty) in [
            ("n_values", self.n_values.is_empty()),
            ("rho_values", self.rho_values.is_empty()),
            ("alpha_values", self.alpha_values.is_empty()),
            ("omega_values", self.omega_values.is_empty()),
        ] {
            if empty {
                return Err(Error::domain(format!("{name} must not be empty")));
            }
        }
        if let Some(&n) = self.n_values.iter().find(|&&n| n == 0) {
            return Err(Error::domain(format!("measurement count {n} must be positive")));
        }
        if let Some(r) = self.rho_values.iter().find(|r| !(**r >= 0.0) || !r.is_finite()) {
            return Err(Error::domain(format!("rho = {r} must be finite and >= 0")));
        }
        for (name, vals) in [("alpha", &self.alpha_values), ("omega", &self.omega_values)] {
            if let Some(v) = vals.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::domain(format!("{name} = {v} outside [0, 1]")));
            }
        }
        self.solver.validate()
    }
}

/// Quantity on the horizontal axis of the plot data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Measurements,
    EstimateSize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub n: usize,
    pub rho: f64,
    pub alpha: f64,
    pub omega: f64,
    pub trial: usize,
    pub snr_db: f64,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellAggregate {
    pub n: usize,
    pub rho: f64,
    pub alpha: f64,
    pub omega: f64,
    pub mean_snr_db: f64,
    /// Sample standard deviation; zero for a single trial.
    pub std_snr_db: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub records: Vec<TrialRecord>,
    pub aggregates: Vec<CellAggregate>,
    /// `(n, ρ, α)` cells left out because `round(α·round(ρk))` exceeds `k`.
    pub skipped_cells: usize,
}

impl SweepResult {
    pub fn from_records(axis: SweepAxis, records: Vec<TrialRecord>) -> Self {
        let aggregates = aggregate(&records);
        SweepResult {
            axis,
            records,
            aggregates,
            skipped_cells: 0,
        }
    }

    pub fn mean_snr(&self, n: usize, rho: f64, alpha: f64, omega: f64) -> Option<f64> {
        self.aggregates
            .iter()
            .find(|a| a.n == n && a.rho == rho && a.alpha == alpha && a.omega == omega)
            .map(|a| a.mean_snr_db)
    }
}

/// Groups consecutive records sharing `(n, ρ, α, ω)` and summarizes each group.
pub fn aggregate(records: &[TrialRecord]) -> Vec<CellAggregate> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < records.len() {
        let r0 = records[start];
        let same = |r: &TrialRecord| r.n == r0.n && r.rho == r0.rho && r.alpha == r0.alpha && r.omega == r0.omega;
        let end = start + records[start..].iter().take_while(|r| same(r)).count();
        let group = &records[start..end];
        let count = group.len() as f64;
        let mean = group.iter().map(|r| r.snr_db).sum::<f64>() / count;
        let std = if group.len() > 1 {
            (group.iter().map(|r| (r.snr_db - mean).powi(2)).sum::<f64>() / (count - 1.0)).sqrt()
        } else {
            0.0
        };
        out.push(CellAggregate {
            n: r0.n,
            rho: r0.rho,
            alpha: r0.alpha,
            omega: r0.omega,
            mean_snr_db: mean,
            std_snr_db: std,
            trials: group.len(),
        });
        start = end;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SignalKind {
    Sparse,
    Compressible(f64),
}

fn realizable(k: usize, signal_len: usize, rho: f64, alpha: f64) -> bool {
    let total = (rho * k as f64).round() as usize;
    let inside = (alpha * total as f64).round() as usize;
    inside <= k && total - inside <= signal_len - k
}

/// Vector drawn uniformly from the sphere of the given radius in `R^len`.
pub fn sphere_noise(len: usize, radius: f64, seed: u64) -> Vec<f64> {
    let mut rng = seeded(seed);
    let mut e: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
    let norm = l2_norm(&e);
    if norm > 0.0 {
        e.iter_mut().for_each(|v| *v *= radius / norm);
    }
    e
}

/// One `(n, ρ, α, trial)` cell. All weights share the same draw so the ω
/// comparison is paired.
fn run_cell(
    cfg: &SweepConfig,
    kind: SignalKind,
    n: usize,
    rho: f64,
    alpha: f64,
    trial: usize,
) -> Result<Vec<TrialRecord>> {
    let p_tag = match kind {
        SignalKind::Sparse => 0,
        SignalKind::Compressible(p) => real_part(p),
    };
    let cell = derive_seed(cfg.base_seed, &[n as u64, real_part(rho), real_part(alpha), trial as u64, p_tag]);
    let big_n = cfg.signal_len;
    let (x, reference): (SignalVector, SupportSet) = match kind {
        SignalKind::Sparse => {
            let x = gen_sparse_signal(big_n, cfg.k, derive_seed(cell, &[1]))?;
            let s = x.support();
            (x, s)
        }
        SignalKind::Compressible(p) => {
            let x = gen_compressible_signal(big_n, p, derive_seed(cell, &[1]))?;
            let (_, s) = best_k_term(x.as_slice(), cfg.k)?;
            (x, s)
        }
    };
    let estimate = gen_support_estimate(&reference, rho, alpha, derive_seed(cell, &[2]))?;
    let a = gaussian_operator(n, big_n, derive_seed(cell, &[3]))?;
    let mut y = a.forward(x.as_slice())?;
    let epsilon = match cfg.noise_mode {
        NoiseMode::NoiseFree => 0.0,
        NoiseMode::Relative => cfg.noise_fraction * x.l2_norm(),
    };
    if epsilon > 0.0 {
        for (yi, ei) in y.iter_mut().zip(sphere_noise(n, epsilon, derive_seed(cell, &[4]))) {
            *yi += ei;
        }
    }
    let mut out = Vec::with_capacity(cfg.omega_values.len());
    for &omega in &cfg.omega_values {
        let w = build_weights(&estimate.estimate, omega, big_n)?;
        let rep = solve_weighted_bpdn(&a, &y, &w, epsilon, &cfg.solver)?;
        out.push(TrialRecord {
            n,
            rho,
            alpha,
            omega,
            trial,
            snr_db: snr_db(x.as_slice(), rep.solution.as_slice())?,
            residual: rep.residual_norm,
            converged: rep.converged,
        });
    }
    Ok(out)
}

fn run(cfg: &SweepConfig, kind: SignalKind, axis: SweepAxis) -> Result<SweepResult> {
    cfg.validate()?;
    let mut cells = Vec::new();
    let mut skipped = 0;
    for (ni, &n) in cfg.n_values.iter().enumerate() {
        for (ri, &rho) in cfg.rho_values.iter().enumerate() {
            for (ai, &alpha) in cfg.alpha_values.iter().enumerate() {
                if !realizable(cfg.k, cfg.signal_len, rho, alpha) {
                    skipped += 1;
                    continue;
                }
                for trial in 0..cfg.trials {
                    cells.push(((ni, ri, ai), n, rho, alpha, trial));
                }
            }
        }
    }
    let per_cell: Vec<Vec<TrialRecord>> = cells
        .par_iter()
        .map(|&(_, n, rho, alpha, trial)| run_cell(cfg, kind, n, rho, alpha, trial))
        .collect::<Result<_>>()?;
    // order rows by (n, ρ, α, ω, trial) following the config's grid order
    let mut keyed: Vec<((usize, usize, usize, usize, usize), TrialRecord)> = Vec::new();
    for (cell, recs) in cells.iter().zip(per_cell) {
        let (ni, ri, ai) = cell.0;
        for (wi, rec) in recs.into_iter().enumerate() {
            keyed.push(((ni, ri, ai, wi, rec.trial), rec));
        }
    }
    keyed.sort_by_key(|(k, _)| *k);
    let records: Vec<TrialRecord> = keyed.into_iter().map(|(_, r)| r).collect();
    let mut result = SweepResult::from_records(axis, records);
    result.skipped_cells = skipped;
    Ok(result)
}

/// Sparse signals; SNR against the number of measurements.
pub fn run_sparse_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    run(cfg, SignalKind::Sparse, SweepAxis::Measurements)
}

/// Sparse signals at a single measurement count; SNR against `ρ`.
pub fn run_rho_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    if cfg.n_values.len() != 1 {
        return Err(Error::domain(format!(
            "the rho sweep needs exactly one measurement count, got {}",
            cfg.n_values.len()
        )));
    }
    run(cfg, SignalKind::Sparse, SweepAxis::EstimateSize)
}

/// Compressible signals with magnitudes `j^{-p}`; `α` is measured against the
/// best `k`-term support. Exactly one `p` per run, since `k` is tied to it.
pub fn run_compressible_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    let p = match cfg.p_values.as_slice() {
        [p] => *p,
        other => {
            return Err(Error::domain(format!(
                "the compressible sweep takes one decay power per run, got {}",
                other.len()
            )))
        }
    };
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::domain(format!("decay power p = {p} must exceed 1")));
    }
    let axis = if cfg.rho_values.len() > 1 || cfg.n_values.len() == 1 {
        SweepAxis::EstimateSize
    } else {
        SweepAxis::Measurements
    };
    run(cfg, SignalKind::Compressible(p), axis)
}

/// Named experiment grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Sparse, noise-free, SNR against `n`.
    Fig4a,
    /// Sparse, 5% noise, SNR against `n`.
    Fig4b,
    /// Sparse, noise-free, SNR against `ρ`.
    Fig5a,
    /// Sparse, 5% noise, SNR against `ρ`.
    Fig5b,
    /// Compressible with `p = 1.1`, `k = 40`, 10% noise.
    Fig6,
    /// Compressible with `p = 1.5`, `k = 20`, 10% noise.
    Fig7,
    /// Compressible with `p = 2`, `k = 10`, 10% noise.
    Fig8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Sparse,
    Rho,
    Compressible,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::Fig4a,
        Preset::Fig4b,
        Preset::Fig5a,
        Preset::Fig5b,
        Preset::Fig6,
        Preset::Fig7,
        Preset::Fig8,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig4a => "fig4a",
            Preset::Fig4b => "fig4b",
            Preset::Fig5a => "fig5a",
            Preset::Fig5b => "fig5b",
            Preset::Fig6 => "fig6",
            Preset::Fig7 => "fig7",
            Preset::Fig8 => "fig8",
        }
    }

    pub fn kind(self) -> SweepKind {
        match self {
            Preset::Fig4a | Preset::Fig4b => SweepKind::Sparse,
            Preset::Fig5a | Preset::Fig5b => SweepKind::Rho,
            Preset::Fig6 | Preset::Fig7 | Preset::Fig8 => SweepKind::Compressible,
        }
    }

    pub fn config(self, base_seed: u64) -> SweepConfig {
        let omegas: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let alphas = vec![0.7, 0.5, 0.3];
        let rhos: Vec<f64> = (2..=8).map(|i| i as f64 * 0.25).collect();
        let sparse = |n_values: Vec<usize>, rho_values: Vec<f64>, noisy: bool| SweepConfig {
            signal_len: 500,
            k: 40,
            n_values,
            rho_values,
            alpha_values: alphas.clone(),
            omega_values: omegas.clone(),
            p_values: Vec::new(),
            noise_mode: if noisy { NoiseMode::Relative } else { NoiseMode::NoiseFree },
            noise_fraction: if noisy { 0.05 } else { 0.0 },
            trials: 20,
            base_seed,
            solver: SolveOptions::default(),
        };
        let compressible = |p: f64, k: usize| SweepConfig {
            signal_len: 500,
            k,
            n_values: vec![100],
            rho_values: rhos.clone(),
            alpha_values: alphas.clone(),
            omega_values: omegas.clone(),
            p_values: vec![p],
            noise_mode: NoiseMode::Relative,
            noise_fraction: 0.10,
            trials: 10,
            base_seed,
            solver: SolveOptions::default(),
        };
        let n_grid: Vec<usize> = (80..=200).step_by(20).collect();
        match self {
            Preset::Fig4a => sparse(n_grid, vec![1.0], false),
            Preset::Fig4b => sparse(n_grid, vec![1.0], true),
            Preset::Fig5a => sparse(vec![100], rhos.clone(), false),
            Preset::Fig5b => sparse(vec![100], rhos.clone(), true),
            Preset::Fig6 => compressible(1.1, 40),
            Preset::Fig7 => compressible(1.5, 20),
            Preset::Fig8 => compressible(2.0, 10),
        }
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "fig5" {
            return Ok(Preset::Fig5a);
        }
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::domain(format!("unknown preset {s:?}")))
    }
}

pub fn run_sweep(kind: SweepKind, cfg: &SweepConfig) -> Result<SweepResult> {
    match kind {
        SweepKind::Sparse => run_sparse_sweep(cfg),
        SweepKind::Rho => run_rho_sweep(cfg),
        SweepKind::Compressible => run_compressible_sweep(cfg),
    }
}

pub const RECORD_HEADER: &str = "n,rho,alpha,omega,trial,snr_db,residual,converged";
pub const AGGREGATE_HEADER: &str = "n,rho,alpha,omega,mean_snr_db,std_snr_db,trials";

pub fn write_records_csv<W: Write>(result: &SweepResult, mut out: W) -> Result<()> {
    let mut buf = String::new();
    buf.push_str(RECORD_HEADER);
    buf.push('\n');
    for r in &result.records {
        writeln!(
            buf,
            "{},{:.6},{:.6},{:.6},{},{:.6},{:.6},{}",
            r.n, r.rho, r.alpha, r.omega, r.trial, r.snr_db, r.residual, r.converged as u8
        )
        .expect("formatting into a String");
    }
    out.write_all(buf.as_bytes())?;
    Ok(())
}

pub fn write_aggregate_csv<W: Write>(result: &SweepResult, mut out: W) -> Result<()> {
    let mut buf = String::new();
    buf.push_str(AGGREGATE_HEADER);
    buf.push('\n');
    for a in &result.aggregates {
        writeln!(
            buf,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            a.n, a.rho, a.alpha, a.omega, a.mean_snr_db, a.std_snr_db, a.trials
        )
        .expect("formatting into a String");
    }
    out.write_all(buf.as_bytes())?;
    Ok(())
}

/// Wide table for plotting: one row per `(α, fixed parameter, axis value)`
/// and one mean-SNR column per weight. Missing cells print as `nan`.
pub fn write_plot_data<W: Write>(result: &SweepResult, mut out: W) -> Result<()> {
    let mut omegas: Vec<f64> = Vec::new();
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    let key = |a: &CellAggregate| match result.axis {
        SweepAxis::Measurements => (a.alpha, a.rho, a.n as f64),
        SweepAxis::EstimateSize => (a.alpha, a.n as f64, a.rho),
    };
    for a in &result.aggregates {
        if !omegas.contains(&a.omega) {
            omegas.push(a.omega);
        }
        let k = key(a);
        if !rows.contains(&k) {
            rows.push(k);
        }
    }
    let (fixed, axis) = match result.axis {
        SweepAxis::Measurements => ("rho", "n"),
        SweepAxis::EstimateSize => ("n", "rho"),
    };
    let mut buf = format!("alpha,{fixed},{axis}");
    for w in &omegas {
        write!(buf, ",omega_{w:.6}").expect("formatting into a String");
    }
    buf.push('\n');
    for row in &rows {
        write!(buf, "{:.6},{:.6},{:.6}", row.0, row.1, row.2).expect("formatting into a String");
        for w in &omegas {
            let v = result
                .aggregates
                .iter()
                .find(|a| key(a) == *row && a.omega == *w)
                .map_or(f64::NAN, |a| a.mean_snr_db);
            write!(buf, ",{v:.6}").expect("formatting into a String");
        }
        buf.push('\n');
    }
    out.write_all(buf.as_bytes())?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Per-trial records to `path`.
pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let mut f = create(path)?;
    write_records_csv(result, &mut f)?;
    f.flush()?;
    Ok(())
}

pub fn emit_aggregate_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let mut f = create(path)?;
    write_aggregate_csv(result, &mut f)?;
    f.flush()?;
    Ok(())
}

pub fn emit_plot_data(result: &SweepResult, path: &Path) -> Result<()> {
    let mut f = create(path)?;
    write_plot_data(result, &mut f)?;
    f.flush()?;
    Ok(())
}

fn csv_rows<R: Read>(reader: R, header: &str) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let found = rdr
        .headers()
        .map_err(|e| Error::format(0, e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if found != header {
        return Err(Error::format(0, format!("expected header {header:?}, found {found:?}")));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::format(e.position().map_or(0, |p| p.byte()), e.to_string()))?;
        let offset = rec.position().map_or(0, |p| p.byte());
        out.push((offset, rec));
    }
    Ok(out)
}

fn field<T: FromStr>(rec: &csv::StringRecord, i: usize, offset: u64) -> Result<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse()
        .map_err(|_| Error::format(offset, format!("field {} ({raw:?}) does not parse", i + 1)))
}

pub fn read_records_csv<R: Read>(reader: R) -> Result<Vec<TrialRecord>> {
    csv_rows(reader, RECORD_HEADER)?
        .into_iter()
        .map(|(off, rec)| {
            let flag: u8 = field(&rec, 7, off)?;
            Ok(TrialRecord {
                n: field(&rec, 0, off)?,
                rho: field(&rec, 1, off)?,
                alpha: field(&rec, 2, off)?,
                omega: field(&rec, 3, off)?,
                trial: field(&rec, 4, off)?,
                snr_db: field(&rec, 5, off)?,
                residual: field(&rec, 6, off)?,
                converged: flag != 0,
            })
        })
        .collect()
}

pub fn read_aggregate_csv<R: Read>(reader: R) -> Result<Vec<CellAggregate>> {
    csv_rows(reader, AGGREGATE_HEADER)?
        .into_iter()
        .map(|(off, rec)| {
            Ok(CellAggregate {
                n: field(&rec, 0, off)?,
                rho: field(&rec, 1, off)?,
                alpha: field(&rec, 2, off)?,
                omega: field(&rec, 3, off)?,
                mean_snr_db: field(&rec, 4, off)?,
                std_snr_db: field(&rec, 5, off)?,
                trials: field(&rec, 6, off)?,
            })
        })
        .collect()
}
