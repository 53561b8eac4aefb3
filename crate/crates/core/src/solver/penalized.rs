//! Penalized form `½‖Az − y‖² + λ‖z‖_{1,w}` solved by FISTA, with λ bisected
//! on a log scale until the residual meets ε.

use super::pareto::Problem;
use super::{finish, SolveOptions, SolveReport, SolveStatus};
use crate::error::{Error, Result};
use crate::model::{dot, l2_norm, weighted_l1_unchecked};
use crate::operators::LinearOperator;

const POWER_ITERS: usize = 60;
const LAMBDA_FLOOR: f64 = 1e-8;

fn lipschitz<A: LinearOperator + ?Sized>(a: &A) -> f64 {
    let (m, n) = a.shape();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64 * 0.1).collect();
    let mut av = vec![0.0; m];
    let mut est = 0.0;
    for _ in 0..POWER_ITERS {
        let nv = l2_norm(&v);
        if nv == 0.0 {
            return 1.0;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        a.apply_into(&v, &mut av);
        a.adjoint_into(&av, &mut v);
        est = l2_norm(&v);
    }
    (est * 1.02).max(1e-300)
}

struct Fista<'p, 'a, A: ?Sized> {
    p: &'p Problem<'a, A>,
    step: f64,
    budget: usize,
}

impl<A: LinearOperator + ?Sized> Fista<'_, '_, A> {
    /// Returns the iterate, its residual `y − Az` and the iterations used.
    fn run(&self, lambda: f64, start: &[f64]) -> (Vec<f64>, Vec<f64>, usize) {
        let (m, n) = self.p.a.shape();
        let mut x = start.to_vec();
        let mut x_prev = x.clone();
        let mut v = x.clone();
        let mut t = 1.0f64;
        let mut r = vec![0.0; m];
        let mut g = vec![0.0; n];
        let mut used = 0;
        for it in 0..self.budget {
            used = it + 1;
            self.p.residual(&v, &mut r);
            self.p.a.adjoint_into(&r, &mut g);
            x_prev.copy_from_slice(&x);
            let mut change = 0.0f64;
            let mut size = 0.0f64;
            for i in 0..n {
                let u = v[i] + self.step * g[i];
                let thr = self.step * lambda * self.p.w[i];
                x[i] = u.signum() * (u.abs() - thr).max(0.0);
                change = change.max((x[i] - x_prev[i]).abs());
                size = size.max(x[i].abs());
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let mom = (t - 1.0) / t_next;
            for i in 0..n {
                v[i] = x[i] + mom * (x[i] - x_prev[i]);
            }
            t = t_next;
            if it > 0 && change <= 1e-12 * size.max(1e-300) {
                break;
            }
        }
        self.p.residual(&x, &mut r);
        (x, r, used)
    }
}

fn dual_bound<A: LinearOperator + ?Sized>(p: &Problem<'_, A>, r: &[f64], opts: &SolveOptions) -> f64 {
    let mut g = vec![0.0; p.a.cols()];
    p.a.adjoint_into(r, &mut g);
    let mut g_norm = 0.0f64;
    let mut g_free = 0.0f64;
    for (gi, wi) in g.iter().zip(p.w) {
        if *wi > 0.0 {
            g_norm = g_norm.max(gi.abs() / wi);
        } else {
            g_free = g_free.max(gi.abs());
        }
    }
    if g_norm == 0.0 || g_free > opts.optimality_tol * g_norm {
        return 0.0;
    }
    ((dot(p.y, r) - p.eps * l2_norm(r)) / g_norm).max(0.0)
}

pub(crate) fn solve<A: LinearOperator + ?Sized>(p: &Problem<'_, A>, opts: &SolveOptions) -> Result<SolveReport> {
    let n = p.a.cols();
    if p.eps >= p.y_norm {
        return finish(p, vec![0.0; n], 0.0, SolveStatus::ZeroFeasible, 0, 0, Vec::new(), opts);
    }
    let mut aty = vec![0.0; n];
    p.a.adjoint_into(p.y, &mut aty);
    let lambda_max = aty
        .iter()
        .zip(p.w)
        .filter(|(_, w)| **w > 0.0)
        .map(|(g, w)| g.abs() / w)
        .fold(0.0f64, f64::max);
    let slack = p.feas_slack(opts);
    let fista = Fista {
        p,
        step: 1.0 / lipschitz(p.a),
        budget: opts.max_inner_iterations,
    };

    let mut lo = (lambda_max * LAMBDA_FLOOR).max(1e-300).ln();
    let mut hi = lambda_max.max(1e-300).ln();
    let mut best: Option<Vec<f64>> = None;
    let mut lower = 0.0f64;
    let mut warm = vec![0.0; n];
    let mut inner = 0;
    let mut outer = 0;

    // smallest penalty first: if even that cannot reach ε the problem is infeasible
    let (z_lo, r_lo, used) = fista.run(lo.exp(), &warm);
    inner += used;
    outer += 1;
    let res_lo = l2_norm(&r_lo);
    if res_lo > p.eps + slack {
        let mut g = vec![0.0; n];
        p.a.adjoint_into(&r_lo, &mut g);
        if l2_norm(&g) <= 1e-8 * res_lo {
            return Err(Error::Infeasible(format!(
                "residual stalls at {res_lo:.6e} above epsilon {:.6e}",
                p.eps
            )));
        }
    } else {
        lower = lower.max(dual_bound(p, &r_lo, opts));
        best = Some(z_lo.clone());
    }
    warm.copy_from_slice(&z_lo);

    while outer < opts.max_outer_iterations && hi - lo > 1e-3 {
        let mid = 0.5 * (lo + hi);
        let (z, r, used) = fista.run(mid.exp(), &warm);
        inner += used;
        outer += 1;
        let res = l2_norm(&r);
        if res <= p.eps + slack {
            lower = lower.max(dual_bound(p, &r, opts));
            let obj = weighted_l1_unchecked(&z, p.w);
            let better = best
                .as_ref()
                .is_none_or(|b| obj <= weighted_l1_unchecked(b, p.w));
            if better {
                best = Some(z.clone());
            }
            lo = mid;
        } else {
            hi = mid;
        }
        warm = z;
    }
    let (z, status) = match best {
        Some(z) => (z, SolveStatus::Certified),
        None => (warm, SolveStatus::OuterLimit),
    };
    finish(p, z, lower, status, outer, inner, Vec::new(), opts)
}
