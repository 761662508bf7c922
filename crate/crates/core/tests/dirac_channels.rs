//! Radial Dirac-Coulomb channels against the closed-form spectrum, and the
//! variational structure of the upper/lower-component splitting.

use gap_minmax::dirac::{
    analytic_level, assemble_channel, channel_spectrum, chi_from_phi, coulomb_ground_state, split,
    talman_lambda_functional, talman_split, Discretization, RadialChannel, Splitting,
};
use gap_minmax::fuzz::{case_rng, property_suite_on, random_vector};
use gap_minmax::potential::PotentialSpec;
use gap_minmax::{Execution, SolveOptions};
use nalgebra::DVector;

fn coulomb(nu: f64, kappa: i32) -> RadialChannel {
    assemble_channel(kappa, 1.0, PotentialSpec::Coulomb { nu }, Discretization::reference(nu)).unwrap()
}

#[test]
fn coulomb_levels_match_closed_form() {
    let opts = SolveOptions::default();
    for &nu in &[0.2, 0.6, 0.9] {
        for &kappa in &[-1, 1, -2] {
            let sol = channel_spectrum(&coulomb(nu, kappa), Splitting::Talman, 3, &opts).unwrap();
            for (k, lambda) in sol.lambdas().into_iter().enumerate() {
                let exact = analytic_level(nu, kappa, k + 1).unwrap();
                let rel = (lambda - exact).abs() / exact;
                assert!(rel <= 1e-6, "nu={nu} kappa={kappa} k={}: {lambda} vs {exact}", k + 1);
            }
        }
    }
}

#[test]
fn both_splittings_give_the_same_levels() {
    let opts = SolveOptions::default();
    let ch = coulomb(0.7, -1);
    let talman = channel_spectrum(&ch, Splitting::Talman, 3, &opts).unwrap().lambdas();
    let free = channel_spectrum(&ch, Splitting::FreeEnergy, 3, &opts).unwrap().lambdas();
    for (t, f) in talman.iter().zip(&free) {
        assert!((t - f).abs() <= 1e-6, "{t} vs {f}");
    }
}

#[test]
fn refined_grid_resolves_strong_coupling() {
    let nu = 0.95;
    let exact = analytic_level(nu, -1, 1).unwrap();
    let opts = SolveOptions::default();
    let solve = |disc: Discretization| {
        let ch = assemble_channel(-1, 1.0, PotentialSpec::Coulomb { nu }, disc).unwrap();
        channel_spectrum(&ch, Splitting::Talman, 1, &opts).unwrap().lambdas()[0]
    };
    let coarse = (solve(Discretization::reference(nu)) - exact).abs();
    let fine = (solve(Discretization::refined(nu)) - exact).abs();
    assert!(fine <= coarse, "refined {fine:e} vs reference {coarse:e}");
    assert!(fine / exact <= 1e-5);
}

#[test]
fn no_level_below_the_ground_state() {
    let opts = SolveOptions::default();
    for &(nu, kappa) in &[(0.3, -1), (0.9, -1), (0.5, 1), (0.5, -2)] {
        let ch = coulomb(nu, kappa);
        let lambda1 = channel_spectrum(&ch, Splitting::Talman, 1, &opts).unwrap().lambdas()[0];
        // sup V = 0, so the gap starts at −m = −1
        let spurious = talman_split(&ch).dense_oracle(-1.0, lambda1 - 10.0 * opts.tol).unwrap();
        assert!(spurious.is_empty(), "nu={nu} kappa={kappa}: {spurious:?}");
    }
}

#[test]
fn functional_dominates_the_discrete_value() {
    let ch = coulomb(0.5, -1);
    let op = ch.assembled();
    for i in 0..100 {
        let f = random_vector(&mut case_rng(17, i), op.dim_plus());
        let functional = talman_lambda_functional(&ch, &f, 1e-12).unwrap();
        let matrix = op.lambda_of_vector(&f, 1e-12).unwrap();
        assert!(functional >= matrix - 1e-9 * (1.0 + matrix.abs()), "sample {i}: {functional} < {matrix}");
    }
}

#[test]
fn lower_component_maximizes_the_energy_form() {
    let ch = coulomb(0.5, -1);
    let op = ch.assembled();
    let f = ch.project_upper(coulomb_ground_state(0.5)).unwrap();
    let lambda = 0.8660254037844386;
    let chi = chi_from_phi(&ch, &f, lambda).unwrap();
    let best = op.phi(lambda, &f, &chi);
    let scale = best.abs().max(1.0);
    for i in 0..100 {
        let y: DVector<f64> = random_vector(&mut case_rng(23, i), op.dim_minus()) * 1e-2;
        assert!(op.phi(lambda, &f, &(&chi + y)) <= best + 1e-10 * scale);
    }
}

#[test]
fn energy_ordering_holds_on_a_channel() {
    let ch = coulomb(0.5, -1);
    let summary = property_suite_on(&split(&ch, Splitting::Talman).unwrap(), 50, 3, Execution::Parallel).unwrap();
    assert!(summary.passed(), "worst {:e}", summary.worst_relative);
}

#[test]
fn eigenvectors_have_small_residuals() {
    let sol = channel_spectrum(&coulomb(0.5, -1), Splitting::Talman, 2, &SolveOptions::default()).unwrap();
    for level in &sol.levels {
        assert!(!level.suspect, "k={} residual {:e}", level.k, level.residual);
    }
}
