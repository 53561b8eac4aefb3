//! Root finding on the weighted Pareto curve
//! `φ(τ) = min { ‖Az − y‖₂ : ‖z‖_{1,w} ≤ τ }`.
//!
//! Each outer step approximately solves the τ-constrained least-squares
//! problem with a spectral projected gradient method, then moves τ by a Newton
//! step on `φ(τ) = ε` using the dual slope `φ'(τ) = −‖Aᵀr‖_{w,*} / ‖r‖`.
//! Any residual `r` also yields the dual-feasible point `u = r / ‖Aᵀr‖_{w,*}`
//! and with it the lower bound `yᵀu − ε‖u‖` on the optimal weighted norm; the
//! solve is declared converged once a feasible iterate sits within the
//! optimality tolerance of the best such bound.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use super::projection::project_into;
use super::SolveOptions;
use crate::model::{dot, l2_norm, weighted_l1_unchecked};
use crate::operators::LinearOperator;

const HISTORY: usize = 1;
const STEP_MIN: f64 = 1e-16;
const STEP_MAX: f64 = 1e5;
const ARMIJO: f64 = 1e-4;
const STALL_TOL: f64 = 1e-13;
/// Largest face solved by a dense factorisation instead of conjugate gradients.
const DIRECT_FACE_MAX: usize = 600;
/// Face minimisation kicks in once the sign pattern has held this long.
const STABLE_STEPS: usize = 1;
/// Residual is recomputed from scratch at this cadence to stop drift.
const REFRESH_EVERY: usize = 50;

/// Why the root finder stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    /// Zero is feasible (`ε ≥ ‖y‖`).
    ZeroFeasible,
    /// Feasible iterate certified by the dual bound.
    Certified,
    /// Projected-gradient steps are lost in rounding before the gap closes.
    Stalled,
    /// The residual cannot be pushed below ε.
    Infeasible,
    OuterLimit,
    InnerLimit,
}

/// Working state of the Pareto root finder.
#[derive(Debug, Clone)]
pub struct ParetoState {
    /// Current ball radius.
    pub tau: f64,
    /// Current iterate, always inside the ball of radius `tau`.
    pub z: Vec<f64>,
    /// `(τ, ‖r‖)` recorded at every Newton update.
    pub phi_history: Vec<(f64, f64)>,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// Best certified lower bound on the optimal weighted norm.
    pub lower_bound: f64,
    /// Relative duality gap at the last evaluation.
    pub rel_gap: f64,
    pub exit: Option<Exit>,
    r: Vec<f64>,
    atr: Vec<f64>,
    f: f64,
    f_old: f64,
    step: f64,
    recent: VecDeque<f64>,
    just_updated: bool,
    stuck: bool,
    since_refresh: usize,
    /// Iterations spent at the current `tau`.
    sub_iterations: usize,
    /// Sign pattern of `z` after the last step, and how many steps it has held.
    signs: Vec<i8>,
    stable_for: usize,
}

/// Quantities derived from the current residual.
#[derive(Debug, Clone, Copy)]
struct Measures {
    r_norm: f64,
    /// `max_{w_i > 0} |(Aᵀr)_i| / w_i`
    g_norm: f64,
    /// `max_{w_i = 0} |(Aᵀr)_i|`
    g_free: f64,
    /// Duality gap of the τ subproblem.
    sub_gap: f64,
    objective: f64,
}

pub(crate) struct Problem<'a, A: ?Sized> {
    pub a: &'a A,
    pub y: &'a [f64],
    pub w: &'a [f64],
    pub eps: f64,
    pub y_norm: f64,
    /// Orthonormal basis of the span of the unweighted columns.
    free_basis: Option<DMatrix<f64>>,
}

impl<'a, A: LinearOperator + ?Sized> Problem<'a, A> {
    pub fn new(a: &'a A, y: &'a [f64], w: &'a [f64], eps: f64) -> Self {
        Problem {
            a,
            y,
            w,
            eps,
            y_norm: l2_norm(y),
            free_basis: free_basis(a, w),
        }
    }

    pub(crate) fn has_free(&self) -> bool {
        self.free_basis.is_some()
    }

    /// Lower bound on the optimal weighted norm from a residual `r` with
    /// `atr = Aᵀr`. The residual is first made orthogonal to the unweighted
    /// columns so that the bound stays valid for an inexact `r`.
    pub(crate) fn dual_bound(&self, r: &[f64], atr: &[f64]) -> Option<f64> {
        let (v, atv) = match &self.free_basis {
            None => (r.to_vec(), atr.to_vec()),
            Some(q) => {
                let rv = DVector::from_column_slice(r);
                let v = &rv - q * (q.transpose() * &rv);
                let v = v.as_slice().to_vec();
                let mut atv = vec![0.0; self.a.cols()];
                self.a.adjoint_into(&v, &mut atv);
                (v, atv)
            }
        };
        let g = atv
            .iter()
            .zip(self.w)
            .filter(|(_, w)| **w > 0.0)
            .map(|(g, w)| g.abs() / w)
            .fold(0.0f64, f64::max);
        if g == 0.0 || !g.is_finite() {
            return None;
        }
        Some((dot(self.y, &v) - self.eps * l2_norm(&v)) / g)
    }

    /// Absolute residual slack allowed on top of ε.
    pub fn feas_slack(&self, opts: &SolveOptions) -> f64 {
        opts.feasibility_tol * self.y_norm.max(1.0)
    }

    pub(crate) fn residual(&self, z: &[f64], r: &mut [f64]) {
        self.a.apply_into(z, r);
        for (ri, yi) in r.iter_mut().zip(self.y) {
            *ri = yi - *ri;
        }
    }
}

fn free_basis<A: LinearOperator + ?Sized>(a: &A, w: &[f64]) -> Option<DMatrix<f64>> {
    let free: Vec<usize> = (0..w.len()).filter(|&i| w[i] == 0.0).collect();
    if free.is_empty() {
        return None;
    }
    let m = a.rows();
    let mut cols = DMatrix::zeros(m, free.len());
    let mut e = vec![0.0; a.cols()];
    let mut col = vec![0.0; m];
    for (k, &i) in free.iter().enumerate() {
        e[i] = 1.0;
        a.apply_into(&e, &mut col);
        e[i] = 0.0;
        cols.column_mut(k).copy_from_slice(&col);
    }
    let svd = cols.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let s_max = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&j| s_max > 0.0 && svd.singular_values[j] > 1e-12 * s_max)
        .collect();
    Some(u.select_columns(keep.iter()))
}

impl ParetoState {
    /// Starts from `z = 0`, `τ = 0`.
    pub fn new<A: LinearOperator + ?Sized>(a: &A, y: &[f64]) -> Self {
        let (rows, cols) = a.shape();
        assert_eq!(rows, y.len());
        let r = y.to_vec();
        let mut atr = vec![0.0; cols];
        a.adjoint_into(&r, &mut atr);
        let f = 0.5 * dot(&r, &r);
        ParetoState {
            tau: 0.0,
            z: vec![0.0; cols],
            phi_history: Vec::new(),
            outer_iterations: 0,
            inner_iterations: 0,
            sub_iterations: 0,
            lower_bound: 0.0,
            rel_gap: f64::INFINITY,
            exit: None,
            r,
            atr,
            f,
            f_old: f64::INFINITY,
            step: 1.0,
            recent: VecDeque::from(vec![f]),
            just_updated: false,
            stuck: false,
            since_refresh: 0,
            signs: vec![0; cols],
            stable_for: 0,
        }
    }

    /// Dual point suggested by the current residual, scaled so that
    /// `‖Aᵀν‖_{w,*} = 1`.
    pub(crate) fn dual_estimate<A: LinearOperator + ?Sized>(&self, p: &Problem<'_, A>) -> Vec<f64> {
        let g = self.measures(p).g_norm;
        if g > 0.0 {
            self.r.iter().map(|v| v / g).collect()
        } else {
            vec![0.0; self.r.len()]
        }
    }

    pub fn residual_norm(&self) -> f64 {
        l2_norm(&self.r)
    }

    fn measures<A: LinearOperator + ?Sized>(&self, p: &Problem<'_, A>) -> Measures {
        let mut g_norm = 0.0f64;
        let mut g_free = 0.0f64;
        for (gi, wi) in self.atr.iter().zip(p.w) {
            if *wi > 0.0 {
                g_norm = g_norm.max(gi.abs() / wi);
            } else {
                g_free = g_free.max(gi.abs());
            }
        }
        let r_norm = l2_norm(&self.r);
        let gap = dot(&self.r, &self.r) - dot(&self.r, p.y) + self.tau * g_norm;
        Measures {
            r_norm,
            g_norm,
            g_free,
            sub_gap: gap.abs(),
            objective: weighted_l1_unchecked(&self.z, p.w),
        }
    }

    fn certified(&self, objective: f64, opts: &SolveOptions) -> bool {
        objective - self.lower_bound <= opts.optimality_tol * objective.max(1.0)
    }

    fn refresh<A: LinearOperator + ?Sized>(&mut self, p: &Problem<'_, A>) {
        p.residual(&self.z, &mut self.r);
        p.a.adjoint_into(&self.r, &mut self.atr);
        self.f = 0.5 * dot(&self.r, &self.r);
        self.since_refresh = 0;
    }

    /// One spectral projected gradient step on the τ subproblem.
    /// Returns `false` when the projected step vanishes.
    fn spg_step<A: LinearOperator + ?Sized>(&mut self, p: &Problem<'_, A>) -> bool {
        let n = self.z.len();
        // trial point P(z + step·Aᵀr); the gradient of ½‖r‖² is −Aᵀr
        let trial: Vec<f64> = self
            .z
            .iter()
            .zip(&self.atr)
            .map(|(zi, gi)| zi + self.step * gi)
            .collect();
        let mut projected = vec![0.0; n];
        project_into(&trial, p.w, self.tau, &mut projected);
        let d: Vec<f64> = projected.iter().zip(&self.z).map(|(a, b)| a - b).collect();
        let d_inf = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let z_inf = self.z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if d_inf <= 1e-15 * z_inf.max(1e-300) || d_inf == 0.0 {
            return false;
        }
        let mut ad = vec![0.0; p.a.rows()];
        p.a.apply_into(&d, &mut ad);
        let r_ad = dot(&self.r, &ad);
        let ad2 = dot(&ad, &ad);
        // directional derivative gᵀd = −rᵀAd
        let gtd = -r_ad;
        if gtd >= 0.0 || ad2 == 0.0 {
            return false;
        }
        let f_max = self.recent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut lambda = 1.0;
        let f_full = self.f - r_ad + 0.5 * ad2;
        if f_full > f_max + ARMIJO * gtd {
            // exact minimiser along the segment; satisfies Armijo for γ < ½
            lambda = (r_ad / ad2).clamp(0.0, 1.0);
        }
        if lambda <= 0.0 {
            return false;
        }
        for (zi, di) in self.z.iter_mut().zip(&d) {
            *zi += lambda * di;
        }
        for (ri, adi) in self.r.iter_mut().zip(&ad) {
            *ri -= lambda * adi;
        }
        let atr_old = std::mem::replace(&mut self.atr, vec![0.0; n]);
        self.since_refresh += 1;
        if self.since_refresh >= REFRESH_EVERY {
            self.refresh(p);
        } else {
            p.a.adjoint_into(&self.r, &mut self.atr);
            self.f = 0.5 * dot(&self.r, &self.r);
        }
        // Barzilai–Borwein: s = λd, yv = g_new − g_old = −(Aᵀr_new − Aᵀr_old)
        let mut sts = 0.0;
        let mut sty = 0.0;
        for i in 0..n {
            let s = lambda * d[i];
            let yv = atr_old[i] - self.atr[i];
            sts += s * s;
            sty += s * yv;
        }
        self.step = if sty <= 0.0 {
            STEP_MAX
        } else {
            (sts / sty).clamp(STEP_MIN, STEP_MAX)
        };
        if self.recent.len() == HISTORY {
            self.recent.pop_front();
        }
        self.recent.push_back(self.f);
        true
    }

    /// Records the sign pattern of `z`; returns whether it changed.
    fn track_signs(&mut self) -> bool {
        let mut changed = false;
        for (s, z) in self.signs.iter_mut().zip(&self.z) {
            let now = if *z > 0.0 {
                1
            } else if *z < 0.0 {
                -1
            } else {
                0
            };
            if now != *s {
                *s = now;
                changed = true;
            }
        }
        if changed {
            self.stable_for = 0;
        } else {
            self.stable_for += 1;
        }
        changed
    }

    /// Minimises the residual over the current face of the ball (fixed support
    /// and signs, and `‖z‖_{1,w} = τ` when the ball constraint is active),
    /// then searches along that direction with sign changes clipped.
    fn face_step<A: LinearOperator + ?Sized>(&mut self, p: &Problem<'_, A>) -> bool {
        let n = self.z.len();
        let face: Vec<usize> = (0..n).filter(|&i| self.z[i] != 0.0 || p.w[i] == 0.0).collect();
        if face.is_empty() || face.len() >= n {
            return false;
        }
        let norm = weighted_l1_unchecked(&self.z, p.w);
        let c: Vec<f64> = face.iter().map(|&i| p.w[i] * self.z[i].signum()).collect();
        let cc = dot(&c, &c);
        let on_sphere = cc > 0.0 && norm >= self.tau * (1.0 - 1e-12);
        let b: Vec<f64> = face.iter().map(|&i| self.atr[i]).collect();
        let u = match p.a.as_dense() {
            Some(mat) if face.len() <= DIRECT_FACE_MAX => face_direction_direct(mat, &face, &b, &c, on_sphere),
            _ => None,
        };
        let u = match u {
            Some(u) => u,
            None => match face_direction_cg(p, &face, &self.r, &c, on_sphere) {
                Some(u) => u,
                None => return false,
            },
        };
        let f_before = self.f;
        let z_before = self.z.clone();
        let mut full_step = self.z.clone();
        let mut candidate = vec![0.0; n];
        // projected search along the face direction: coordinates that would
        // change sign are clipped to zero, then the point is pulled back into
        // the ball
        let mut t = 1.0;
        for _ in 0..4 {
            for (k, &i) in face.iter().enumerate() {
                let v = self.z[i] + t * u[k];
                full_step[i] = if p.w[i] > 0.0 && v * self.z[i] < 0.0 { 0.0 } else { v };
            }
            project_into(&full_step, p.w, self.tau, &mut candidate);
            p.residual(&candidate, &mut self.r);
            let f_new = 0.5 * dot(&self.r, &self.r);
            if f_new < f_before * (1.0 - 1e-10) {
                self.z.copy_from_slice(&candidate);
                self.refresh(p);
                self.recent.clear();
                self.recent.push_back(self.f);
                return true;
            }
            t *= 0.25;
        }
        // fall back to the longest sign-preserving step
        let mut t = 1.0f64;
        let mut blocking = None;
        for (k, &i) in face.iter().enumerate() {
            if p.w[i] > 0.0 && self.z[i] * u[k] < 0.0 {
                let ti = -self.z[i] / u[k];
                if ti < t {
                    t = ti;
                    blocking = Some(i);
                }
            }
        }
        if !on_sphere {
            let grow = dot(&c, &u);
            if grow > 0.0 {
                let room = (self.tau - norm).max(0.0) / grow;
                if room < t {
                    t = room;
                    blocking = None;
                }
            }
        }
        if t > 0.0 {
            for (k, &i) in face.iter().enumerate() {
                self.z[i] += t * u[k];
            }
            if let Some(i) = blocking {
                self.z[i] = 0.0;
            }
            self.refresh(p);
            if self.f < f_before * (1.0 - 1e-10) && weighted_l1_unchecked(&self.z, p.w) <= self.tau * (1.0 + 1e-12) {
                self.recent.clear();
                self.recent.push_back(self.f);
                return true;
            }
        }
        self.z = z_before;
        self.refresh(p);
        false
    }

    fn initial_step<A: LinearOperator + ?Sized>(&mut self, p: &Problem<'_, A>) {
        let trial: Vec<f64> = self.z.iter().zip(&self.atr).map(|(zi, gi)| zi + gi).collect();
        let mut projected = vec![0.0; trial.len()];
        project_into(&trial, p.w, self.tau, &mut projected);
        let dx = projected
            .iter()
            .zip(&self.z)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        self.step = if dx < 1.0 / STEP_MAX {
            STEP_MAX
        } else {
            (1.0 / dx).clamp(STEP_MIN, STEP_MAX)
        };
    }
}

/// Runs projected-gradient iterations until the next Newton update of τ (or
/// until the solve terminates), then returns the updated state.
pub(crate) fn pareto_root_step<A: LinearOperator + ?Sized>(
    p: &Problem<'_, A>,
    mut st: ParetoState,
    opts: &SolveOptions,
) -> ParetoState {
    if st.exit.is_some() {
        return st;
    }
    let slack = p.feas_slack(opts);
    if st.inner_iterations == 0 && st.outer_iterations == 0 {
        if p.eps >= p.y_norm {
            st.exit = Some(Exit::ZeroFeasible);
            st.lower_bound = 0.0;
            st.rel_gap = 0.0;
            return st;
        }
        st.initial_step(p);
    }
    loop {
        let m = st.measures(p);
        let feasible = m.r_norm <= p.eps + slack;
        if feasible || !p.has_free() {
            if let Some(b) = p.dual_bound(&st.r, &st.atr) {
                st.lower_bound = st.lower_bound.max(b);
            }
        }
        st.rel_gap = (m.objective - st.lower_bound).max(0.0) / m.objective.max(1.0);
        if feasible && st.certified(m.objective, opts) {
            st.exit = Some(Exit::Certified);
            return st;
        }
        // residual stuck above ε with a vanishing gradient: no feasible point
        let grad_scale = m.g_norm.max(m.g_free);
        if !feasible && grad_scale <= 1e-10 * m.r_norm {
            st.exit = Some(Exit::Infeasible);
            return st;
        }
        if st.sub_iterations >= opts.max_inner_iterations {
            st.exit = Some(Exit::InnerLimit);
            return st;
        }

        let free_ok = m.g_free <= opts.optimality_tol * m.g_norm;
        // the minorant step is at least 90% of the exact Newton step when the
        // subproblem gap is below a tenth of ‖r‖(‖r‖ − ε)
        let newton_room = m.r_norm * (m.r_norm - p.eps).max(0.0);
        let sub_solved = free_ok && m.sub_gap <= (0.1 * newton_room).max(1e-15 * st.f.max(1e-300));
        let stalled = st.stuck || (st.f_old - st.f).abs() <= STALL_TOL * st.f;
        if (sub_solved || stalled) && !st.just_updated && m.g_norm > 0.0 {
            let safe = p.dual_bound(&st.r, &st.atr).unwrap_or(f64::NEG_INFINITY);
            st.lower_bound = st.lower_bound.max(safe);
            let mut new_tau = safe;
            if safe <= st.tau * (1.0 + 1e-15) && stalled {
                if p.eps == 0.0 {
                    // at rounding level; the caller refits the support
                    st.exit = Some(Exit::Stalled);
                    return st;
                }
                if m.r_norm > p.eps {
                    // the minorant makes no progress and the subproblem
                    // cannot be improved; fall back to the plain Newton step
                    new_tau = st.tau + m.r_norm * (m.r_norm - p.eps) / m.g_norm;
                }
            }
            if new_tau > st.tau {
                st.phi_history.push((st.tau, m.r_norm));
                st.outer_iterations += 1;
                st.just_updated = true;
                st.stuck = false;
                st.f_old = st.f;
                // root of an affine minorant of φ: left of the true root
                st.tau = new_tau;
                st.sub_iterations = 0;
                st.recent.clear();
                st.recent.push_back(st.f);
                if st.outer_iterations >= opts.max_outer_iterations {
                    st.exit = Some(Exit::OuterLimit);
                }
                return st;
            }
        }
        st.just_updated = false;
        st.f_old = st.f;
        st.inner_iterations += 1;
        st.sub_iterations += 1;
        if st.stable_for >= STABLE_STEPS && st.face_step(p) {
            st.stuck = false;
            st.track_signs();
            st.stable_for = 0;
            continue;
        }
        st.stuck = !st.spg_step(p);
        st.track_signs();
    }
}

/// Face direction from the normal equations `(A_FᵀA_F) u = A_Fᵀr`, corrected
/// to keep `cᵀu = 0` on the sphere.
fn face_direction_direct(mat: &DMatrix<f64>, face: &[usize], b: &[f64], c: &[f64], on_sphere: bool) -> Option<Vec<f64>> {
    let sub = mat.select_columns(face.iter());
    let mut gram = sub.tr_mul(&sub);
    let ridge = 1e-13 * gram.diagonal().max().max(1e-300);
    for i in 0..gram.nrows() {
        gram[(i, i)] += ridge;
    }
    let chol = gram.cholesky()?;
    let mut u = chol.solve(&DVector::from_column_slice(b));
    if on_sphere {
        let cv = DVector::from_column_slice(c);
        let gc = chol.solve(&cv);
        let denom = cv.dot(&gc);
        if denom <= 0.0 {
            return None;
        }
        let mu = cv.dot(&u) / denom;
        u -= gc * mu;
    }
    u.iter().all(|v| v.is_finite()).then(|| u.as_slice().to_vec())
}

/// Same direction by conjugate gradients on the projected normal equations.
fn face_direction_cg<A: LinearOperator + ?Sized>(
    p: &Problem<'_, A>,
    face: &[usize],
    r: &[f64],
    c: &[f64],
    on_sphere: bool,
) -> Option<Vec<f64>> {
    let (m, n) = p.a.shape();
    let cc = dot(c, c);
    let project = |v: &mut [f64]| {
        if on_sphere {
            let t = dot(c, v) / cc;
            for (vi, ci) in v.iter_mut().zip(c) {
                *vi -= t * ci;
            }
        }
    };
    let mut full = vec![0.0; n];
    let mut q = vec![0.0; m];
    let mut r_ls = r.to_vec();
    let mut u = vec![0.0; face.len()];
    p.a.adjoint_into(r, &mut full);
    let mut s: Vec<f64> = face.iter().map(|&i| full[i]).collect();
    project(&mut s);
    let mut d = s.clone();
    let mut gamma = dot(&s, &s);
    if gamma == 0.0 {
        return None;
    }
    let stop = 1e-24 * gamma;
    let max_iter = (2 * face.len()).clamp(10, 200);
    for _ in 0..max_iter {
        full.iter_mut().for_each(|v| *v = 0.0);
        for (k, &i) in face.iter().enumerate() {
            full[i] = d[k];
        }
        p.a.apply_into(&full, &mut q);
        let qq = dot(&q, &q);
        if qq == 0.0 {
            break;
        }
        let alpha = gamma / qq;
        for (uk, dk) in u.iter_mut().zip(&d) {
            *uk += alpha * dk;
        }
        for (ri, qi) in r_ls.iter_mut().zip(&q) {
            *ri -= alpha * qi;
        }
        p.a.adjoint_into(&r_ls, &mut full);
        s = face.iter().map(|&i| full[i]).collect();
        project(&mut s);
        let gamma_new = dot(&s, &s);
        if gamma_new <= stop {
            break;
        }
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        for (dk, sk) in d.iter_mut().zip(&s) {
            *dk = sk + beta * *dk;
        }
    }
    Some(u)
}
