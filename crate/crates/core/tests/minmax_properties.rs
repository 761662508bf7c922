//! Structural properties of the Schur-complement forms and the min-max
//! levels on random admissible operators.

use gap_minmax::fuzz::{self, case_rng, property_margins, random_admissible, random_vector, PROPERTY_SLACK};
use gap_minmax::{Execution, SolveOptions, SplitOperator};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::RngExt;

fn operator(seed: u64, dim: usize) -> SplitOperator {
    random_admissible(&mut case_rng(seed, 0), dim)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn graph_norms_and_forms_are_ordered_in_energy(seed in any::<u64>(), dim in 2usize..16) {
        let op = operator(seed, dim);
        let mut rng = case_rng(seed, 1);
        let (e, e2) = fuzz::random_energy_pair(&mut rng, op.gap_constant());
        let x = random_vector(&mut rng, op.dim_plus());
        let probes: Vec<_> = (0..3).map(|_| random_vector(&mut rng, op.dim_minus())).collect();
        let m = property_margins(&op, e, e2, &x, &probes).unwrap();
        prop_assert!(m.holds(PROPERTY_SLACK), "{m:?}");
    }

    #[test]
    fn schur_value_is_the_supremum_over_minus_vectors(seed in any::<u64>(), dim in 2usize..16) {
        let op = operator(seed, dim);
        let mut rng = case_rng(seed, 2);
        let (e, _) = fuzz::random_energy_pair(&mut rng, op.gap_constant());
        let x = random_vector(&mut rng, op.dim_plus());
        let q = op.schur_pencil(e).unwrap().q_value(&x);
        let y = op.maximizer(e, &x).unwrap();
        prop_assert!((op.phi(e, &x, &y) - q).abs() <= 1e-10 * q.abs().max(1.0));
        for _ in 0..20 {
            let dy = random_vector(&mut rng, op.dim_minus()) * rng.random_range(1e-3..10.0);
            prop_assert!(op.phi(e, &x, &(&y + dy)) <= q + 1e-10 * q.abs().max(1.0));
        }
    }

    #[test]
    fn ell_k_changes_sign_at_lambda_k(seed in any::<u64>(), dim in 2usize..12) {
        let op = operator(seed, dim);
        let opts = SolveOptions::default();
        for k in 1..=op.dim_plus() {
            let lambda = op.solve_level(k, &opts).unwrap().lambda;
            let below = lambda - 1e-4 * (1.0 + lambda.abs());
            let above = lambda + 1e-4 * (1.0 + lambda.abs());
            if below > op.gap_constant() {
                prop_assert!(op.ell_k(below, k).unwrap() > 0.0);
            }
            prop_assert!(op.ell_k(above, k).unwrap() < 0.0);
        }
    }

    #[test]
    fn levels_are_nondecreasing_in_k(seed in any::<u64>(), dim in 3usize..14) {
        let op = operator(seed, dim);
        let opts = SolveOptions::default();
        let levels: Vec<f64> = (1..=op.dim_plus())
            .map(|k| op.solve_level(k, &opts).unwrap().lambda)
            .collect();
        for w in levels.windows(2) {
            prop_assert!(w[0] <= w[1] + 1e-9);
        }
    }

    #[test]
    fn positive_perturbations_raise_levels(seed in any::<u64>(), dim in 2usize..12) {
        let op = operator(seed, dim);
        let mut rng = case_rng(seed, 3);
        let n = op.dim_plus() + op.dim_minus();
        // P = c·S keeps the hypothesis and shifts every level by exactly c;
        // adding a small PSD rank-one term on top can only raise them.
        let c = rng.random_range(0.0..0.5);
        let v = random_vector(&mut rng, n);
        let p = op.full_s() * c + &v * v.transpose() * 1e-2;
        let raised = op.perturbed(&p).unwrap();
        let opts = SolveOptions::default();
        for k in 1..=op.dim_plus() {
            let before = op.solve_level(k, &opts).unwrap().lambda;
            let after = raised.solve_level(k, &opts).unwrap().lambda;
            prop_assert!(after >= before + c - 1e-9, "k={k}: {before} -> {after} (shift {c})");
        }
    }

    #[test]
    fn rayleigh_level_is_scale_invariant(seed in any::<u64>(), dim in 2usize..12, t in 1e-3f64..1e3) {
        let op = operator(seed, dim);
        let x = random_vector(&mut case_rng(seed, 4), op.dim_plus());
        let l1 = op.lambda_of_vector(&x, 1e-12).unwrap();
        let lt = op.lambda_of_vector(&(&x * t), 1e-12).unwrap();
        prop_assert!((l1 - lt).abs() <= 1e-9 * (1.0 + l1.abs()));
        // and it bounds the lowest level from above
        let lambda1 = op.solve_level(1, &SolveOptions::default()).unwrap().lambda;
        prop_assert!(l1 >= lambda1 - 1e-9);
    }
}

#[test]
fn levels_match_dense_oracle_on_a_seeded_batch() {
    let summary = fuzz::oracle_fuzz(60, 10, 4..=20, 99, &SolveOptions::default(), Execution::Parallel).unwrap();
    assert!(summary.passed(), "{:?}", summary.failures);
    assert!(summary.max_abs_error <= fuzz::ORACLE_TOL);
}

#[test]
fn reconstructed_vectors_are_eigenvectors() {
    let opts = SolveOptions::default();
    for i in 0..30 {
        let mut rng = case_rng(5, i);
        let dim = rng.random_range(4..=20);
        let op = random_admissible(&mut rng, dim);
        for k in 1..=op.dim_plus() {
            let sol = op.solve_level(k, &opts).unwrap();
            let pair = op.reconstruct_eigenvector(&sol).unwrap();
            assert!(pair.residual <= 1e-8, "case {i} k={k}: residual {:e}", pair.residual);
        }
    }
}

#[test]
fn decoupled_counterexample_is_rejected() {
    let a = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&[-2.0, -1.0]));
    let op = SplitOperator::from_full(&a, None, 1).unwrap();
    let err = op.solve_level(1, &SolveOptions::default()).unwrap_err();
    assert!(matches!(err, gap_minmax::Error::HypothesisViolated { .. }));
}

#[test]
fn hand_computed_two_by_two_level() {
    // [[1,1],[1,-1]] has eigenvalues ±√2 and a = -1
    let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]);
    let op = SplitOperator::from_full(&a, None, 1).unwrap();
    let sol = op.solve_level(1, &SolveOptions::default()).unwrap();
    assert!((sol.lambda - 2f64.sqrt()).abs() <= 1e-10);
    let pair = op.reconstruct_eigenvector(&sol).unwrap();
    let ratio = pair.vector[1] / pair.vector[0];
    assert!((ratio - (2f64.sqrt() - 1.0)).abs() <= 1e-9);
}
