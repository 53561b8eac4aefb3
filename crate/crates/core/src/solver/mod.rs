//! Weighted basis pursuit denoise:
//! `minimize ‖z‖_{1,w} subject to ‖Az − y‖₂ ≤ ε`.

mod oracle;
mod pareto;
mod penalized;
mod projection;

pub use oracle::{oracle_solve_small, ORACLE_MAX_COLS, ORACLE_MAX_ROWS};
pub use pareto::ParetoState;
pub use projection::project_weighted_l1_ball;

use crate::error::{check_len, Error, Result};
use crate::model::{dot, l2_norm, weighted_l1_unchecked, SignalVector, WeightVector};
use crate::operators::LinearOperator;
use pareto::Problem;

/// Outer algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Algorithm {
    /// Newton root finding on the Pareto curve with projected-gradient inner solves.
    #[default]
    ParetoRoot,
    /// Accelerated proximal gradient on the penalized form with a bisection on
    /// the penalty. Slower and less accurate; meant for cross-checks.
    PenalizedFallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Residual slack, relative to `max(1, ‖y‖₂)`.
    pub feasibility_tol: f64,
    /// Relative duality gap accepted as optimal.
    pub optimality_tol: f64,
    pub max_outer_iterations: usize,
    /// Budget on inner iterations for each value of the ball radius.
    pub max_inner_iterations: usize,
    pub algorithm: Algorithm,
    /// With `ε = 0`, refit the recovered support by least squares at the end.
    pub polish: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            feasibility_tol: 1e-6,
            optimality_tol: 1e-6,
            max_outer_iterations: 100,
            max_inner_iterations: 10_000,
            algorithm: Algorithm::ParetoRoot,
            polish: true,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = |t: f64| t.is_finite() && t > 0.0;
        if !ok(self.feasibility_tol) || !ok(self.optimality_tol) {
            return Err(Error::domain("solver tolerances must be positive and finite"));
        }
        Ok(())
    }
}

/// How a solve ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Zero already meets the residual bound.
    ZeroFeasible,
    /// Feasible and within the optimality tolerance of the dual bound.
    Certified,
    /// Certified after refitting the support by least squares.
    Polished,
    /// Outer iteration budget exhausted.
    OuterLimit,
    /// Inner iteration budget exhausted.
    InnerLimit,
    /// Inner steps stopped making progress at rounding level.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: SignalVector,
    /// `‖A·solution − y‖₂`, recomputed after the solve.
    pub residual_norm: f64,
    /// `‖solution‖_{1,w}`, recomputed after the solve.
    pub weighted_objective: f64,
    /// Best dual lower bound on the optimal weighted norm.
    pub lower_bound: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub converged: bool,
    pub status: SolveStatus,
    /// `(τ, ‖r‖)` at each Newton update; empty for the penalized path.
    pub phi_history: Vec<(f64, f64)>,
    /// Outcome of [`SolveReport::check_cone`]; `None` until a reference is supplied.
    pub cone_check: Option<bool>,
}

impl SolveReport {
    /// Any `x` with `‖Ax − y‖₂ ≤ ε` is feasible, so an optimal solution cannot
    /// have a larger weighted norm. Records and returns whether that holds up
    /// to the optimality slack; `None` when `x` itself is not feasible.
    pub fn check_cone<A: LinearOperator + ?Sized>(
        &mut self,
        a: &A,
        y: &[f64],
        w: &WeightVector,
        epsilon: f64,
        x: &[f64],
        opts: &SolveOptions,
    ) -> Result<Option<bool>> {
        check_len("reference signal", a.cols(), x.len())?;
        check_len("weights", a.cols(), w.len())?;
        let ax = a.forward(x)?;
        check_len("measurements", ax.len(), y.len())?;
        let res = residual_norm(&ax, y);
        let y_norm = l2_norm(y);
        let outcome = if res <= epsilon + opts.feasibility_tol * y_norm.max(1.0) {
            let ref_obj = weighted_l1_unchecked(x, w.as_slice());
            Some(self.weighted_objective <= ref_obj + opts.optimality_tol * ref_obj.max(1.0))
        } else {
            None
        };
        self.cone_check = outcome;
        Ok(outcome)
    }
}

fn residual_norm(az: &[f64], y: &[f64]) -> f64 {
    az.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Solves the weighted basis-pursuit-denoise problem.
///
/// Returns [`Error::Infeasible`] when the residual cannot be brought down to
/// `epsilon`. Running out of iterations is not an error: the report carries
/// `converged = false`.
pub fn solve_weighted_bpdn<A: LinearOperator + ?Sized>(
    a: &A,
    y: &[f64],
    w: &WeightVector,
    epsilon: f64,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    opts.validate()?;
    check_len("measurements", a.rows(), y.len())?;
    check_len("weights", a.cols(), w.len())?;
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::domain(format!("epsilon must be finite and >= 0, got {epsilon}")));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("measurements must be finite"));
    }
    if a.cols() == 0 {
        return Err(Error::domain("operator has no columns"));
    }
    let problem = Problem::new(a, y, w.as_slice(), epsilon);
    match opts.algorithm {
        Algorithm::ParetoRoot => solve_pareto(&problem, opts),
        Algorithm::PenalizedFallback => penalized::solve(&problem, opts),
    }
}

/// Runs one outer step of the Pareto root finder: projected-gradient
/// iterations on the current τ subproblem followed by a Newton update of τ.
/// Once `state.exit` is set the state is returned unchanged.
pub fn pareto_root_iteration<A: LinearOperator + ?Sized>(
    a: &A,
    y: &[f64],
    w: &WeightVector,
    epsilon: f64,
    state: ParetoState,
    opts: &SolveOptions,
) -> Result<ParetoState> {
    check_len("measurements", a.rows(), y.len())?;
    check_len("weights", a.cols(), w.len())?;
    check_len("state iterate", a.cols(), state.z.len())?;
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::domain("epsilon must be finite and >= 0"));
    }
    let problem = Problem::new(a, y, w.as_slice(), epsilon);
    Ok(pareto::pareto_root_step(&problem, state, opts))
}

fn solve_pareto<A: LinearOperator + ?Sized>(p: &Problem<'_, A>, opts: &SolveOptions) -> Result<SolveReport> {
    let mut st = ParetoState::new(p.a, p.y);
    while st.exit.is_none() {
        st = pareto::pareto_root_step(p, st, opts);
    }
    let exit = st.exit.expect("loop exits with a status");
    let status = match exit {
        pareto::Exit::Infeasible => {
            return Err(Error::Infeasible(format!(
                "residual stalls at {:.6e} above epsilon {:.6e}",
                st.residual_norm(),
                p.eps
            )))
        }
        pareto::Exit::ZeroFeasible => SolveStatus::ZeroFeasible,
        pareto::Exit::Certified => SolveStatus::Certified,
        pareto::Exit::Stalled => SolveStatus::Stalled,
        pareto::Exit::OuterLimit => SolveStatus::OuterLimit,
        pareto::Exit::InnerLimit => SolveStatus::InnerLimit,
    };
    let mut z = std::mem::take(&mut st.z);
    let mut status = status;
    let mut lower = st.lower_bound;
    if opts.polish && p.eps == 0.0 && status != SolveStatus::ZeroFeasible {
        if let Some((zp, bound)) = polish_support(p, &z, &st.dual_estimate(p), lower, opts) {
            z = zp;
            lower = bound;
            status = SolveStatus::Polished;
        }
    }
    finish(p, z, lower, status, st.outer_iterations, st.inner_iterations, st.phi_history, opts)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn finish<A: LinearOperator + ?Sized>(
    p: &Problem<'_, A>,
    z: Vec<f64>,
    lower_bound: f64,
    status: SolveStatus,
    outer: usize,
    inner: usize,
    phi_history: Vec<(f64, f64)>,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let az = p.a.forward(&z)?;
    let residual = residual_norm(&az, p.y);
    let objective = weighted_l1_unchecked(&z, p.w);
    let feasible = residual <= p.eps + p.feas_slack(opts);
    let gap_ok = objective - lower_bound <= opts.optimality_tol * objective.max(1.0);
    let converged = match status {
        SolveStatus::ZeroFeasible => feasible,
        SolveStatus::Certified | SolveStatus::Polished => feasible && gap_ok,
        SolveStatus::OuterLimit | SolveStatus::InnerLimit | SolveStatus::Stalled => false,
    };
    Ok(SolveReport {
        solution: SignalVector::new(z)?,
        residual_norm: residual,
        weighted_objective: objective,
        lower_bound,
        outer_iterations: outer,
        inner_iterations: inner,
        converged,
        status,
        phi_history,
        cone_check: None,
    })
}

/// Least-squares refit on the dominant support of `z` for the equality
/// constrained case, together with a dual certificate built on that support.
/// Returns the refit and the improved lower bound when the refit is feasible
/// and certified.
fn polish_support<A: LinearOperator + ?Sized>(
    p: &Problem<'_, A>,
    z: &[f64],
    dual_guess: &[f64],
    lower_bound: f64,
    opts: &SolveOptions,
) -> Option<(Vec<f64>, f64)> {
    let (m, n) = p.a.shape();
    let scale = z.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    let mut order: Vec<usize> = (0..n).filter(|&i| z[i] != 0.0).collect();
    // free entries cost nothing, so they stay in every candidate support
    order.sort_by(|&i, &j| {
        let key = |k: usize| if p.w[k] == 0.0 { f64::INFINITY } else { z[k].abs() };
        key(j).total_cmp(&key(i)).then(i.cmp(&j))
    });
    let mut tried = Vec::new();
    // small entries of an inexact iterate blur the support; try a ladder of cuts
    for exp in 1..=12 {
        let cut = scale * 10f64.powi(-exp);
        let size = order.iter().take_while(|&&i| p.w[i] == 0.0 || z[i].abs() > cut).count().min(m);
        if size == 0 || tried.contains(&size) {
            continue;
        }
        tried.push(size);
        let mut support = order[..size].to_vec();
        support.sort_unstable();
        let zp = cgls_on_support(p, &support, z);
        let az = p.a.forward(&zp).ok()?;
        let obj = weighted_l1_unchecked(&zp, p.w);
        if residual_norm(&az, p.y) > p.feas_slack(opts) {
                continue;
        }
        let lower = lower_bound.max(support_certificate(p, &zp, dual_guess).unwrap_or(f64::NEG_INFINITY));
        if obj - lower <= opts.optimality_tol * obj.max(1.0) {
            return Some((zp, lower));
        }
    }
    if order.len() <= m {
        return None;
    }
    // too many nonzeros to truncate blindly: fit them all, then walk to a basic point
    let mut support = order.clone();
    support.sort_unstable();
    let fitted = cgls_on_support(p, &support, z);
    let zb = reduce_to_basic(p, fitted)?;
    let az = p.a.forward(&zb).ok()?;
    if residual_norm(&az, p.y) > p.feas_slack(opts) {
        return None;
    }
    let obj = weighted_l1_unchecked(&zb, p.w);
    let lower = lower_bound.max(support_certificate(p, &zb, dual_guess)?);
    (obj - lower <= opts.optimality_tol * obj.max(1.0)).then_some((zb, lower))
}

/// Moves an exact fit along null directions of its support columns, never
/// increasing the weighted norm, until those columns are independent.
/// Needs an explicit matrix.
fn reduce_to_basic<A: LinearOperator + ?Sized>(p: &Problem<'_, A>, mut z: Vec<f64>) -> Option<Vec<f64>> {
    let mat = p.a.as_dense()?;
    let m = mat.nrows();
    let mut support: Vec<usize> = (0..z.len()).filter(|&i| z[i] != 0.0).collect();
    if support.len() > 4 * m {
        return None;
    }
    loop {
        let sub = mat.select_columns(support.iter());
        let gram = sub.transpose() * &sub;
        let eig = gram.symmetric_eigen();
        let top = eig.eigenvalues.amax();
        let (k_min, e_min) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))?;
        if top == 0.0 || (support.len() <= m && *e_min > 1e-12 * top) {
            break;
        }
        let mut d: Vec<f64> = eig.eigenvectors.column(k_min).iter().copied().collect();
        let slope: f64 = support.iter().zip(&d).map(|(&i, di)| p.w[i] * z[i].signum() * di).sum();
        if slope > 0.0 {
            d.iter_mut().for_each(|v| *v = -*v);
        }
        let limit = |d: &[f64]| {
            support
                .iter()
                .zip(d)
                .enumerate()
                .filter(|(_, (&i, di))| z[i] * **di < 0.0)
                .map(|(k, (&i, di))| (k, -z[i] / di))
                .min_by(|a, b| a.1.total_cmp(&b.1))
        };
        let hit = match limit(&d) {
            Some(h) => h,
            None => {
                // flat direction: the opposite way costs nothing either
                if slope.abs() > 1e-12 * support.iter().map(|&i| p.w[i] * z[i].abs()).sum::<f64>() {
                    return None;
                }
                d.iter_mut().for_each(|v| *v = -*v);
                limit(&d)?
            }
        };
        for (&i, di) in support.iter().zip(&d) {
            z[i] += hit.1 * di;
        }
        z[support[hit.0]] = 0.0;
        support.remove(hit.0);
    }
    Some(cgls_on_support(p, &support, &z))
}

/// Dual vector `ν` with `A_iᵀν = w_i·sign(z_i)` on the support of `z` and
/// `A_iᵀν = 0` on unweighted columns, taken as the point of that affine set
/// closest to `guess`, turned into a lower bound on the optimal weighted norm.
/// Columns whose dual constraint is violated are pinned to the boundary and
/// the projection repeated a few times.
fn support_certificate<A: LinearOperator + ?Sized>(p: &Problem<'_, A>, z: &[f64], guess: &[f64]) -> Option<f64> {
    let (m, n) = p.a.shape();
    let mut cols: Vec<usize> = (0..n).filter(|&i| z[i] != 0.0 || p.w[i] == 0.0).collect();
    let mut targets: Vec<f64> = cols.iter().map(|&i| p.w[i] * z[i].signum()).collect();
    let mut best = None::<f64>;
    let mut atnu = vec![0.0; n];
    for _ in 0..6 {
        if cols.is_empty() || cols.len() > m {
            break;
        }
        let nu = affine_projection(p, &cols, &targets, guess);
        p.a.adjoint_into(&nu, &mut atnu);
        if let Some(b) = p.dual_bound(&nu, &atnu) {
            best = Some(best.map_or(b, |c: f64| c.max(b)));
        }
        let violated: Vec<usize> = (0..n)
            .filter(|&i| p.w[i] > 0.0 && atnu[i].abs() > p.w[i] * (1.0 + 1e-13) && !cols.contains(&i))
            .collect();
        if violated.is_empty() {
            break;
        }
        for i in violated {
            cols.push(i);
            targets.push(p.w[i] * atnu[i].signum());
        }
    }
    best
}

/// Point closest to `guess` with `A_iᵀν = targets[k]` for `i = cols[k]`,
/// by conjugate gradient on the Gram system of those columns.
fn affine_projection<A: LinearOperator + ?Sized>(
    p: &Problem<'_, A>,
    cols: &[usize],
    targets: &[f64],
    guess: &[f64],
) -> Vec<f64> {
    let (m, n) = p.a.shape();
    let mut full = vec![0.0; n];
    p.a.adjoint_into(guess, &mut full);
    let rhs: Vec<f64> = cols.iter().zip(targets).map(|(&i, t)| t - full[i]).collect();
    let apply_b = |v: &[f64], full: &mut Vec<f64>, out: &mut Vec<f64>| {
        full.iter_mut().for_each(|x| *x = 0.0);
        for (k, &i) in cols.iter().enumerate() {
            full[i] = v[k];
        }
        p.a.apply_into(full, out);
    };
    let mut u = vec![0.0; cols.len()];
    let mut res = rhs;
    let mut dir = res.clone();
    let mut rr = dot(&res, &res);
    let stop = 1e-30 * rr;
    let mut q = vec![0.0; m];
    for _ in 0..(4 * cols.len() + 20) {
        if rr <= stop {
            break;
        }
        apply_b(&dir, &mut full, &mut q);
        p.a.adjoint_into(&q, &mut full);
        let bdir: Vec<f64> = cols.iter().map(|&i| full[i]).collect();
        let curv = dot(&dir, &bdir);
        if curv <= 0.0 {
            break;
        }
        let alpha = rr / curv;
        for k in 0..u.len() {
            u[k] += alpha * dir[k];
            res[k] -= alpha * bdir[k];
        }
        let rr_new = dot(&res, &res);
        let beta = rr_new / rr;
        rr = rr_new;
        for k in 0..dir.len() {
            dir[k] = res[k] + beta * dir[k];
        }
    }
    let mut nu = vec![0.0; m];
    apply_b(&u, &mut full, &mut nu);
    for (a, b) in nu.iter_mut().zip(guess) {
        *a += b;
    }
    nu
}

/// Conjugate gradient on the normal equations of `A_S z_S ≈ y`, started at
/// the restriction of `start` to `support`.
fn cgls_on_support<A: LinearOperator + ?Sized>(p: &Problem<'_, A>, support: &[usize], start: &[f64]) -> Vec<f64> {
    let (m, n) = p.a.shape();
    let mut full = vec![0.0; n];
    let mut x = vec![0.0; n];
    for &i in support {
        x[i] = start[i];
    }
    let mut r = vec![0.0; m];
    p.a.apply_into(&x, &mut r);
    for (ri, yi) in r.iter_mut().zip(p.y) {
        *ri = yi - *ri;
    }
    let gather = |v: &[f64]| -> Vec<f64> { support.iter().map(|&i| v[i]).collect() };
    p.a.adjoint_into(&r, &mut full);
    let mut s = gather(&full);
    let mut d = s.clone();
    let mut gamma = dot(&s, &s);
    let stop = (1e-28 * gamma).max(1e-300);
    let mut q = vec![0.0; m];
    let max_iter = 4 * support.len() + 20;
    for _ in 0..max_iter {
        if gamma <= stop {
            break;
        }
        full.iter_mut().for_each(|v| *v = 0.0);
        for (k, &i) in support.iter().enumerate() {
            full[i] = d[k];
        }
        p.a.apply_into(&full, &mut q);
        let qq = dot(&q, &q);
        if qq == 0.0 {
            break;
        }
        let alpha = gamma / qq;
        for (k, &i) in support.iter().enumerate() {
            x[i] += alpha * d[k];
        }
        for (ri, qi) in r.iter_mut().zip(&q) {
            *ri -= alpha * qi;
        }
        p.a.adjoint_into(&r, &mut full);
        s = gather(&full);
        let gamma_new = dot(&s, &s);
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        for (dk, sk) in d.iter_mut().zip(&s) {
            *dk = sk + beta * *dk;
        }
    }
    x
}

#[cfg(test)]
mod tests;
