use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;

use super::*;
use crate::model::{build_weights, gen_sparse_signal, weighted_l1_norm, SupportSet};
use crate::operators::{gaussian_operator, DenseOperator};
use crate::rng::{derive_seed, seeded};

fn dense(rows: usize, cols: usize, data: &[f64]) -> DenseOperator {
    DenseOperator::new(DMatrix::from_row_slice(rows, cols, data)).unwrap()
}

#[test]
fn identity_returns_measurements() {
    let a = DenseOperator::new(DMatrix::identity(4, 4)).unwrap();
    let y = [1.0, -2.0, 0.5, 3.0];
    let w = WeightVector::new(vec![0.2, 1.0, 0.7, 0.4]).unwrap();
    let rep = solve_weighted_bpdn(&a, &y, &w, 0.0, &SolveOptions::default()).unwrap();
    assert!(rep.converged);
    for (z, yi) in rep.solution.as_slice().iter().zip(&y) {
        assert_abs_diff_eq!(*z, *yi, epsilon = 1e-9);
    }
}

#[test]
fn one_row_prefers_cheaper_column() {
    let a = dense(1, 2, &[1.0, 2.0]);
    let rep = solve_weighted_bpdn(&a, &[2.0], &WeightVector::ones(2), 0.0, &SolveOptions::default()).unwrap();
    assert!(rep.converged);
    assert_abs_diff_eq!(rep.solution.as_slice()[0], 0.0, epsilon = 1e-9);
    assert_abs_diff_eq!(rep.solution.as_slice()[1], 1.0, epsilon = 1e-9);
    assert_abs_diff_eq!(rep.weighted_objective, 1.0, epsilon = 1e-9);
}

#[test]
fn heavy_weight_flips_choice() {
    let a = dense(1, 2, &[1.0, 2.0]);
    let w = WeightVector::new(vec![0.1, 1.0]).unwrap();
    // scaled to stay in [0,1]: (0.1, 1) is the same problem as (1, 10)
    let rep = solve_weighted_bpdn(&a, &[2.0], &w, 0.0, &SolveOptions::default()).unwrap();
    assert!(rep.converged);
    assert_abs_diff_eq!(rep.solution.as_slice()[0], 2.0, epsilon = 1e-9);
    assert_abs_diff_eq!(rep.solution.as_slice()[1], 0.0, epsilon = 1e-9);
    assert_abs_diff_eq!(rep.weighted_objective, 0.2, epsilon = 1e-9);
}

#[test]
fn weights_above_one_are_rejected() {
    assert!(WeightVector::new(vec![1.0, 10.0]).is_err());
}

#[test]
fn large_epsilon_gives_zero() {
    let a = gaussian_operator(5, 10, 3).unwrap();
    let y = [1.0, 0.0, -1.0, 0.5, 0.0];
    let eps = crate::model::l2_norm(&y);
    let rep = solve_weighted_bpdn(&a, &y, &WeightVector::ones(10), eps, &SolveOptions::default()).unwrap();
    assert_eq!(rep.status, SolveStatus::ZeroFeasible);
    assert!(rep.converged);
    assert!(rep.solution.as_slice().iter().all(|v| *v == 0.0));
    assert_eq!(rep.outer_iterations, 0);
}

#[test]
fn zero_measurements_give_zero() {
    let a = gaussian_operator(4, 8, 1).unwrap();
    let rep = solve_weighted_bpdn(&a, &[0.0; 4], &WeightVector::ones(8), 0.0, &SolveOptions::default()).unwrap();
    assert!(rep.converged);
    assert_eq!(rep.weighted_objective, 0.0);
}

#[test]
fn square_invertible_root() {
    let m = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 0.5, 3.0, -1.0, 0.0, 1.0, 4.0]);
    let a = DenseOperator::new(m.clone()).unwrap();
    let y = [1.0, -2.0, 3.0];
    let w = WeightVector::new(vec![0.5, 1.0, 0.25]).unwrap();
    let x = m.clone().lu().solve(&nalgebra::DVector::from_column_slice(&y)).unwrap();
    let target = weighted_l1_norm(x.as_slice(), &w).unwrap();
    let rep = solve_weighted_bpdn(&a, &y, &w, 0.0, &SolveOptions::default()).unwrap();
    assert!(rep.converged);
    assert_abs_diff_eq!(rep.weighted_objective, target, epsilon = 1e-6 * target.max(1.0));
    let last_tau = rep.phi_history.last().map(|p| p.0).unwrap();
    assert!((last_tau - target).abs() <= 1e-3 * target.max(1.0), "{last_tau} vs {target}");
}

#[test]
fn phi_history_nonincreasing() {
    for seed in 0..5 {
        let a = gaussian_operator(40, 120, seed).unwrap();
        let x = gen_sparse_signal(120, 8, seed + 100).unwrap();
        let y = a.forward(x.as_slice()).unwrap();
        let rep = solve_weighted_bpdn(&a, &y, &WeightVector::ones(120), 0.01, &SolveOptions::default()).unwrap();
        assert!(rep.converged);
        for pair in rep.phi_history.windows(2) {
            assert!(pair[1].1 <= pair[0].1 * (1.0 + 1e-9) + 1e-12, "{pair:?}");
        }
        for pair in rep.phi_history.windows(2) {
            assert!(pair[1].0 >= 0.0);
        }
    }
}

#[test]
fn iteration_by_iteration_matches_solve() {
    let a = gaussian_operator(20, 50, 9).unwrap();
    let x = gen_sparse_signal(50, 4, 10).unwrap();
    let y = a.forward(x.as_slice()).unwrap();
    let w = WeightVector::ones(50);
    let opts = SolveOptions::default();
    let mut st = ParetoState::new(&a, &y);
    let mut steps = 0;
    while st.exit.is_none() && steps < 1000 {
        st = pareto_root_iteration(&a, &y, &w, 0.05, st, &opts).unwrap();
        assert!(st.tau >= 0.0);
        steps += 1;
    }
    let rep = solve_weighted_bpdn(&a, &y, &w, 0.05, &opts).unwrap();
    assert_eq!(st.z, rep.solution.as_slice());
    assert_eq!(st.outer_iterations, rep.outer_iterations);
}

#[test]
fn noisy_solution_is_feasible_and_certified() {
    let a = gaussian_operator(60, 150, 4).unwrap();
    let x = gen_sparse_signal(150, 10, 5).unwrap();
    let mut y = a.forward(x.as_slice()).unwrap();
    let mut rng = seeded(6);
    use rand::Rng;
    for v in y.iter_mut() {
        *v += 0.01 * (rng.random::<f64>() - 0.5);
    }
    let eps = 0.05;
    let est = SupportSet::new(x.support().indices()[..5].to_vec(), 150).unwrap();
    let w = build_weights(&est, 0.3, 150).unwrap();
    let opts = SolveOptions::default();
    let mut rep = solve_weighted_bpdn(&a, &y, &w, eps, &opts).unwrap();
    assert!(rep.converged, "{:?}", rep.status);
    assert!(rep.residual_norm <= eps + opts.feasibility_tol * crate::model::l2_norm(&y).max(1.0));
    // x is feasible when its residual is within eps
    let cone = rep.check_cone(&a, &y, &w, eps, x.as_slice(), &opts).unwrap();
    assert_eq!(cone, Some(true));
}

#[test]
fn infeasible_epsilon_is_reported() {
    // rank one operator, measurements outside its range
    let a = dense(2, 2, &[1.0, 1.0, 1.0, 1.0]);
    let err = solve_weighted_bpdn(&a, &[1.0, -1.0], &WeightVector::ones(2), 0.1, &SolveOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Infeasible(_)), "{err:?}");
}

#[test]
fn budget_exhaustion_is_not_silent() {
    let a = gaussian_operator(40, 120, 2).unwrap();
    let x = gen_sparse_signal(120, 12, 3).unwrap();
    let y = a.forward(x.as_slice()).unwrap();
    let opts = SolveOptions {
        max_inner_iterations: 3,
        polish: false,
        ..SolveOptions::default()
    };
    let rep = solve_weighted_bpdn(&a, &y, &WeightVector::ones(120), 0.0, &opts).unwrap();
    assert!(!rep.converged);
    assert_eq!(rep.status, SolveStatus::InnerLimit);
}

#[test]
fn bad_inputs_rejected() {
    let a = gaussian_operator(3, 5, 0).unwrap();
    let w = WeightVector::ones(5);
    let opts = SolveOptions::default();
    assert!(solve_weighted_bpdn(&a, &[1.0, 2.0], &w, 0.0, &opts).is_err());
    assert!(solve_weighted_bpdn(&a, &[1.0; 3], &WeightVector::ones(4), 0.0, &opts).is_err());
    assert!(solve_weighted_bpdn(&a, &[1.0; 3], &w, -1.0, &opts).is_err());
    let bad = SolveOptions {
        optimality_tol: 0.0,
        ..SolveOptions::default()
    };
    assert!(solve_weighted_bpdn(&a, &[1.0; 3], &w, 0.0, &bad).is_err());
}

#[test]
fn unit_weights_reproduce_unweighted_run() {
    let a = gaussian_operator(30, 80, 12).unwrap();
    let x = gen_sparse_signal(80, 6, 13).unwrap();
    let y = a.forward(x.as_slice()).unwrap();
    let opts = SolveOptions::default();
    let est = SupportSet::new(vec![1, 2, 3], 80).unwrap();
    let w1 = build_weights(&est, 1.0, 80).unwrap();
    let r1 = solve_weighted_bpdn(&a, &y, &w1, 0.0, &opts).unwrap();
    let r2 = solve_weighted_bpdn(&a, &y, &WeightVector::ones(80), 0.0, &opts).unwrap();
    assert_eq!(r1.solution.as_slice(), r2.solution.as_slice());
    assert_eq!(r1.inner_iterations, r2.inner_iterations);
}

#[test]
fn penalized_fallback_agrees_roughly() {
    let a = gaussian_operator(30, 60, 21).unwrap();
    let x = gen_sparse_signal(60, 4, 22).unwrap();
    let y = a.forward(x.as_slice()).unwrap();
    let w = WeightVector::ones(60);
    let eps = 0.05;
    let main = solve_weighted_bpdn(&a, &y, &w, eps, &SolveOptions::default()).unwrap();
    let opts = SolveOptions {
        algorithm: Algorithm::PenalizedFallback,
        max_inner_iterations: 20_000,
        ..SolveOptions::default()
    };
    let alt = solve_weighted_bpdn(&a, &y, &w, eps, &opts).unwrap();
    assert!(alt.residual_norm <= eps + 1e-5);
    let rel = (alt.weighted_objective - main.weighted_objective).abs() / main.weighted_objective;
    assert!(rel < 1e-2, "{} vs {}", alt.weighted_objective, main.weighted_objective);
}

fn tiny_instance(seed: u64) -> (DenseOperator, Vec<f64>, WeightVector, Vec<f64>) {
    use rand::Rng;
    let mut rng = seeded(derive_seed(seed, &[1]));
    let n_cols = rng.random_range(3..=12usize);
    let n_rows = rng.random_range(1..=n_cols.min(8));
    let k = rng.random_range(1..=n_rows);
    let a = gaussian_operator(n_rows, n_cols, derive_seed(seed, &[2])).unwrap();
    let x = gen_sparse_signal(n_cols, k, derive_seed(seed, &[3])).unwrap();
    let y = a.forward(x.as_slice()).unwrap();
    let grid = [0.0, 0.3, 1.0];
    let w: Vec<f64> = (0..n_cols).map(|_| grid[rng.random_range(0..3)]).collect();
    (a, y, WeightVector::new(w).unwrap(), x.into_vec())
}

#[test]
fn matches_oracle_on_tiny_instances() {
    let opts = SolveOptions::default();
    for seed in 0..150 {
        let (a, y, w, _) = tiny_instance(seed);
        let (best, _) = oracle_solve_small(a.matrix(), &y, &w).unwrap();
        let rep = solve_weighted_bpdn(&a, &y, &w, 0.0, &opts).unwrap();
        assert!(rep.converged, "seed {seed}: {:?}", rep.status);
        assert!(rep.residual_norm <= 1e-8, "seed {seed}: residual {}", rep.residual_norm);
        let tol = 1e-6 * best.max(1.0);
        assert!(
            (rep.weighted_objective - best).abs() <= tol,
            "seed {seed}: {} vs {}",
            rep.weighted_objective,
            best
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cone_property_holds(seed in 0u64..10_000, omega in 0.0f64..=1.0) {
        let a = gaussian_operator(25, 60, seed).unwrap();
        let x = gen_sparse_signal(60, 5, seed ^ 0xabc).unwrap();
        let y = a.forward(x.as_slice()).unwrap();
        let est = x.support();
        let w = build_weights(&est, omega, 60).unwrap();
        let opts = SolveOptions::default();
        let mut rep = solve_weighted_bpdn(&a, &y, &w, 0.0, &opts).unwrap();
        prop_assert!(rep.converged);
        prop_assert_eq!(rep.check_cone(&a, &y, &w, 0.0, x.as_slice(), &opts).unwrap(), Some(true));
    }
}

#[test]
fn reduce_to_basic_drops_dependent_columns() {
    let a = dense(2, 3, &[1.0, 1.0, 1.0, 1.0, -1.0, 0.0]);
    let y = [2.0, 0.0];
    let w = [1.0, 1.0, 1.0];
    let p = Problem::new(&a, &y, &w, 0.0);
    // feasible with all three columns active
    let z = vec![0.5, 0.5, 1.0];
    let before = weighted_l1_unchecked(&z, &w);
    let zb = reduce_to_basic(&p, z).unwrap();
    assert!(zb.iter().filter(|v| **v != 0.0).count() <= 2);
    let az = a.forward(&zb).unwrap();
    assert!(residual_norm(&az, &y) < 1e-12);
    assert!(weighted_l1_unchecked(&zb, &w) <= before + 1e-12);
}
