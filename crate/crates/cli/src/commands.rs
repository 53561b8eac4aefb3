use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use wl1_core::experiments::{self, sphere_noise, Preset, SweepKind};
use wl1_core::operators::DenseOperator;
use wl1_core::rng::derive_seed;
use wl1_core::solver::Algorithm;
use wl1_core::streaming::{self, AudioStream, FrameSequence, StreamingPolicy};
use wl1_core::theory::{self, GuaranteeInputs};
use wl1_core::{
    build_weights, gaussian_operator, gen_sparse_signal, gen_support_estimate, solve_weighted_bpdn,
    LinearOperator, SolveOptions, SupportSet, WeightVector,
};

use crate::{AudioArgs, CliError, Cmd, RipArgs, SolveArgs, SweepArgs, TheoryArgs, VideoArgs};

pub fn run(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Theory(a) => theory(a),
        Cmd::Solve(a) => solve(a),
        Cmd::SweepSparse(a) => sweep(a, SweepKind::Sparse),
        Cmd::SweepRho(a) => sweep(a, SweepKind::Rho),
        Cmd::SweepCompressible(a) => sweep(a, SweepKind::Compressible),
        Cmd::Video(a) => video(a),
        Cmd::Audio(a) => audio(a),
        Cmd::Rip(a) => rip(a),
    }
}

fn input_error(path: &Path) -> impl Fn(wl1_core::Error) -> CliError + '_ {
    move |e| match CliError::from(e) {
        CliError::Io(m) => CliError::Io(format!("{}: {m}", path.display())),
        other => other,
    }
}

fn domain(msg: impl Into<String>) -> CliError {
    CliError::Domain(msg.into())
}

fn write_output(text: &str, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<File>, CliError> {
    let file = File::open(path).map_err(|e| CliError::Io(format!("cannot open {}: {e}", path.display())))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file))
}

/// Rows of numbers; blank fields are ignored.
fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let mut rows = Vec::new();
    for rec in open_csv(path)?.records() {
        let rec = rec.map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let offset = rec.position().map_or(0, |p| p.byte());
        let mut row = Vec::with_capacity(rec.len());
        for field in rec.iter().filter(|f| !f.is_empty()) {
            let v: f64 = field.parse().map_err(|_| {
                CliError::Io(format!(
                    "{}: malformed number {field:?} in the record at byte offset {offset}",
                    path.display()
                ))
            })?;
            row.push(v);
        }
        if !row.is_empty() {
            rows.push(row);
        }
    }
    Ok(rows)
}

fn read_vector(path: &Path) -> Result<Vec<f64>, CliError> {
    Ok(read_rows(path)?.concat())
}

fn read_matrix(path: &Path) -> Result<DMatrix<f64>, CliError> {
    let rows = read_rows(path)?;
    let Some(first) = rows.first() else {
        return Err(CliError::Io(format!("{}: empty matrix", path.display())));
    };
    let cols = first.len();
    if let Some(i) = rows.iter().position(|r| r.len() != cols) {
        return Err(CliError::Io(format!(
            "{}: row {} has {} entries, expected {cols}",
            path.display(),
            i + 1,
            rows[i].len()
        )));
    }
    Ok(DMatrix::from_row_iterator(rows.len(), cols, rows.into_iter().flatten()))
}

fn theory(a: TheoryArgs) -> Result<(), CliError> {
    if let Some(d) = a.delta {
        if !(0.0..1.0).contains(&d) {
            return Err(domain(format!("--delta {d} must lie in [0, 1)")));
        }
    }
    if a.grid {
        if a.grid_omegas < 2 || a.grid_alphas < 2 {
            return Err(domain("--grid-omegas and --grid-alphas must be at least 2"));
        }
        let rows = theory::condition_grid(
            &theory::unit_grid(a.grid_omegas),
            &theory::unit_grid(a.grid_alphas),
            &a.grid_rhos,
            a.a,
            a.delta.unwrap_or(0.1),
        )?;
        let mut buf = Vec::new();
        theory::write_grid_csv(&rows, &mut buf)?;
        return write_output(&String::from_utf8_lossy(&buf), a.out.as_deref());
    }
    let mut text = String::new();
    if a.reduced_u {
        if let Some(path) = &a.delta_csv {
            let file = File::open(path).map_err(|e| CliError::Io(format!("cannot open {}: {e}", path.display())))?;
            let records = theory::read_delta_csv(file).map_err(input_error(path))?;
            let mut any = false;
            for r in records.iter().filter(|r| r.delta_name.eq_ignore_ascii_case("delta_2k")) {
                let u = theory::reduced_condition_max_u_over_k(r.value)?;
                writeln!(text, "{},{},{u}", r.label, r.value).unwrap();
                any = true;
            }
            if !any {
                return Err(domain(format!("{} has no delta_2k rows", path.display())));
            }
        } else {
            let d = a.delta2k.ok_or_else(|| domain("--reduced-u needs --delta2k or --delta-csv"))?;
            let u = theory::reduced_condition_max_u_over_k(d)?;
            writeln!(text, "max_u_over_k {u}").unwrap();
        }
        return write_output(&text, a.out.as_deref());
    }
    if a.vaswani_root {
        writeln!(text, "zero_unknown_root {}", theory::vaswani_zero_unknown_boundary()).unwrap();
        return write_output(&text, a.out.as_deref());
    }
    let gamma = theory::gamma(a.omega, a.rho, a.alpha).map_err(|e| domain(format!("--omega/--rho/--alpha: {e}")))?;
    let delta_hat = theory::delta_hat(a.a, a.omega, a.rho, a.alpha).map_err(|e| domain(format!("--a: {e}")))?;
    writeln!(text, "gamma {gamma}").unwrap();
    writeln!(text, "delta_hat {delta_hat}").unwrap();
    if let Ok(c) = theory::candes_delta2k_conditions(a.omega, a.rho, a.alpha) {
        writeln!(text, "delta2k_threshold {c}").unwrap();
    }
    let dak = a.delta_ak.or(a.delta);
    let da1k = a.delta_a1k.or(a.delta);
    if let (Some(dak), Some(da1k)) = (dak, da1k) {
        let inp = GuaranteeInputs::new(a.a, a.k, a.rho, a.alpha, a.omega, dak, da1k)?;
        let r = theory::evaluate(&inp)?;
        let std = theory::standard_constants(a.a, dak, da1k);
        writeln!(text, "condition_holds {}", r.condition_holds).unwrap();
        writeln!(text, "C0p {}", r.c0p).unwrap();
        writeln!(text, "C1p {}", r.c1p).unwrap();
        writeln!(
            text,
            "standard_condition_holds {}",
            theory::standard_sufficient_condition(a.a, dak, da1k)
        )
        .unwrap();
        writeln!(text, "C0 {}", std.c0).unwrap();
        writeln!(text, "C1 {}", std.c1).unwrap();
    } else if dak.is_some() || da1k.is_some() {
        return Err(domain("give both --delta-ak and --delta-a1k, or --delta"));
    }
    write_output(&text, a.out.as_deref())
}

fn solve(a: SolveArgs) -> Result<(), CliError> {
    if a.max_inner == 0 || a.max_outer == 0 {
        return Err(domain("--max-inner and --max-outer must be at least 1"));
    }
    if let Some(eps) = a.epsilon {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(domain(format!("--epsilon {eps} must be finite and >= 0")));
        }
    }
    let opts = SolveOptions {
        optimality_tol: a.tol,
        max_inner_iterations: a.max_inner,
        max_outer_iterations: a.max_outer,
        algorithm: if a.penalized { Algorithm::PenalizedFallback } else { Algorithm::ParetoRoot },
        ..SolveOptions::default()
    };
    opts.validate()?;
    let (op, y, estimate, truth, eps) = match (&a.matrix, &a.y) {
        (Some(mp), Some(yp)) => {
            let op = DenseOperator::new(read_matrix(mp)?)?;
            let y = read_vector(yp)?;
            if y.len() != op.rows() {
                return Err(CliError::Io(format!(
                    "{} has {} entries but the matrix has {} rows",
                    yp.display(),
                    y.len(),
                    op.rows()
                )));
            }
            let est = match &a.estimate {
                Some(idx) => SupportSet::new(idx.clone(), op.cols()).map_err(|e| domain(format!("--estimate: {e}")))?,
                None => SupportSet::empty(op.cols()),
            };
            (op, y, est, None, a.epsilon.unwrap_or(0.0))
        }
        _ => {
            if a.estimate.is_some() {
                return Err(domain("--estimate needs --matrix and --y"));
            }
            if !(a.noise_fraction >= 0.0) || !a.noise_fraction.is_finite() {
                return Err(domain(format!("--noise-fraction {} must be finite and >= 0", a.noise_fraction)));
            }
            let x = gen_sparse_signal(a.signal_len, a.k, derive_seed(a.seed, &[1]))?;
            let est = gen_support_estimate(&x.support(), a.rho, a.alpha, derive_seed(a.seed, &[2]))?;
            let op = gaussian_operator(a.measurements, a.signal_len, derive_seed(a.seed, &[3]))?;
            let mut y = op.forward(x.as_slice())?;
            let radius = a.noise_fraction * x.l2_norm();
            for (yi, e) in y.iter_mut().zip(sphere_noise(a.measurements, radius, derive_seed(a.seed, &[4]))) {
                *yi += e;
            }
            (op, y, est.estimate, Some(x), a.epsilon.unwrap_or(radius))
        }
    };
    let weights = match &a.weights {
        Some(p) => {
            let w = read_vector(p)?;
            if w.len() != op.cols() {
                return Err(CliError::Io(format!("{} has {} weights, expected {}", p.display(), w.len(), op.cols())));
            }
            WeightVector::new(w)?
        }
        None => build_weights(&estimate, a.omega, op.cols()).map_err(|e| domain(format!("--omega: {e}")))?,
    };
    let rep = solve_weighted_bpdn(&op, &y, &weights, eps, &opts)?;
    let mut text = String::new();
    writeln!(text, "status {:?}", rep.status).unwrap();
    writeln!(text, "converged {}", rep.converged).unwrap();
    writeln!(text, "epsilon {eps}").unwrap();
    writeln!(text, "residual_norm {}", rep.residual_norm).unwrap();
    writeln!(text, "weighted_objective {}", rep.weighted_objective).unwrap();
    writeln!(text, "lower_bound {}", rep.lower_bound).unwrap();
    writeln!(text, "outer_iterations {}", rep.outer_iterations).unwrap();
    writeln!(text, "inner_iterations {}", rep.inner_iterations).unwrap();
    if let Some(x) = &truth {
        writeln!(text, "snr_db {}", experiments::snr_db(x.as_slice(), rep.solution.as_slice())?).unwrap();
    }
    write_output(&text, None)?;
    if let Some(p) = &a.out {
        let mut s = String::new();
        for v in rep.solution.as_slice() {
            writeln!(s, "{v}").unwrap();
        }
        write_output(&s, Some(p))?;
    }
    if rep.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged)
    }
}

fn sweep(a: SweepArgs, kind: SweepKind) -> Result<(), CliError> {
    let default = match kind {
        SweepKind::Sparse => Preset::Fig4a,
        SweepKind::Rho => Preset::Fig5a,
        SweepKind::Compressible => Preset::Fig6,
    };
    let preset = match &a.preset {
        Some(name) => name.parse::<Preset>().map_err(|e| domain(format!("--preset: {e}")))?,
        None => default,
    };
    if preset.kind() != kind {
        return Err(domain(format!("--preset {} does not belong to this sweep", preset.name())));
    }
    let mut cfg = preset.config(a.seed);
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(o) = &a.omegas {
        cfg.omega_values = o.clone();
    }
    if let Some(al) = &a.alphas {
        cfg.alpha_values = al.clone();
    }
    cfg.validate()?;
    let result = match a.jobs {
        Some(0) => return Err(domain("--jobs must be at least 1")),
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| domain(format!("--jobs: {e}")))?
            .install(|| experiments::run_sweep(kind, &cfg))?,
        None => experiments::run_sweep(kind, &cfg)?,
    };
    experiments::emit_csv(&result, &a.out)?;
    if let Some(p) = &a.aggregate {
        experiments::emit_aggregate_csv(&result, p)?;
    }
    if let Some(p) = &a.plot {
        experiments::emit_plot_data(&result, p)?;
    }
    let failed = result.records.iter().filter(|r| !r.converged).count();
    println!(
        "preset {} records {} cells {} skipped_cells {} unconverged {failed}",
        preset.name(),
        result.records.len(),
        result.aggregates.len(),
        result.skipped_cells
    );
    Ok(())
}

fn video(a: VideoArgs) -> Result<(), CliError> {
    let seq = match (&a.input, a.synthetic) {
        (Some(p), _) => streaming::read_raw_frames(p, a.height, a.width, a.frames).map_err(input_error(p))?,
        (None, true) => streaming::synthetic_video(a.height, a.width, a.frames, a.sparsity, a.seed)?,
        (None, false) => return Err(domain("give --in PATH or --synthetic")),
    };
    let policy = StreamingPolicy {
        n0_fraction: a.n0,
        nj_fraction: a.nj,
        omega: a.omega,
        energy_fraction: a.energy,
        ..StreamingPolicy::default()
    };
    policy.validate()?;
    let result = streaming::video_pipeline(&seq, &policy, a.seed)?;
    let mut buf = Vec::new();
    streaming::write_video_metrics(&result, &mut buf)?;
    write_output(&String::from_utf8_lossy(&buf), a.out.as_deref())?;
    if let Some(p) = &a.recovered {
        let frames = result
            .frames
            .iter()
            .map(|f| f.recovered.iter().map(|v| v.round() as u8).collect())
            .collect();
        streaming::write_raw_frames(&FrameSequence::new(seq.height(), seq.width(), frames)?, p)?;
    }
    eprintln!("mean_psnr_db_after_first_frame {:.4}", result.mean_psnr_from(1));
    Ok(())
}

fn audio(a: AudioArgs) -> Result<(), CliError> {
    let stream = match (&a.input, a.synthetic) {
        (Some(p), _) => streaming::read_wav(p).map_err(input_error(p))?,
        (None, true) => streaming::synthetic_audio(a.block_len, a.blocks, a.sample_rate, a.seed)?,
        (None, false) => return Err(domain("give --in PATH or --synthetic")),
    };
    if a.omegas.is_empty() {
        return Err(domain("--omegas needs at least one value"));
    }
    if stream.len() < a.block_len {
        return Err(domain(format!(
            "stream has {} samples, fewer than one block of {}",
            stream.len(),
            a.block_len
        )));
    }
    let policy = StreamingPolicy {
        nj_fraction: a.fraction,
        lowfreq_cutoff_hz: a.cutoff,
        prev_topk_divisor: a.topk_divisor,
        ..StreamingPolicy::default()
    };
    policy.validate()?;
    let runs = streaming::audio_omega_sweep(&stream, a.block_len, &policy, &a.omegas, a.seed, &SolveOptions::default())?;
    let mut buf = Vec::new();
    streaming::write_audio_metrics(&runs, &mut buf)?;
    write_output(&String::from_utf8_lossy(&buf), a.out.as_deref())?;
    let best = runs
        .iter()
        .max_by(|x, y| x.snr_db.total_cmp(&y.snr_db))
        .expect("at least one weight");
    for r in &runs {
        let empty = r.blocks.iter().filter(|b| b.empty).count();
        eprintln!("omega {:.6} snr_db {:.4} empty_blocks {empty}", r.omega, r.snr_db);
    }
    eprintln!("best_omega {:.6}", best.omega);
    if let Some(p) = &a.recovered {
        streaming::write_wav(&AudioStream::new(best.recovered.clone(), stream.sample_rate())?, p)?;
    }
    Ok(())
}

fn rip(a: RipArgs) -> Result<(), CliError> {
    if a.k == 0 || a.k > a.cols {
        return Err(domain(format!("--k {} must lie in [1, N = {}]", a.k, a.cols)));
    }
    let op = gaussian_operator(a.n, a.cols, a.seed)?;
    let delta = theory::empirical_rip_delta(op.matrix(), a.k)?;
    let mut out = BufWriter::new(io::stdout().lock());
    writeln!(out, "delta_{} {delta}", a.k)?;
    Ok(())
}
