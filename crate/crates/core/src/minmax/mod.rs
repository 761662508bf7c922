//! Finite-dimensional min-max engine for eigenvalues in a spectral gap.
//!
//! A [`SplitOperator`] is a symmetric matrix `A` written in a basis that is
//! split into a "+" block and a "−" block, with a block-diagonal Gram matrix
//! `S` (the two blocks are orthogonal). For an energy `E` above the gap
//! constant `a` (the largest Rayleigh quotient of `A` on the "−" block) the
//! "−" block can be maximized out exactly, leaving the Schur-complement form
//!
//! ```text
//! Q_E(x) = xᵀ(A₊₊ − E S₊₊)x + bᵀ(E S₋₋ − A₋₋)⁻¹ b,     b = A₊₋ᵀ x
//! ```
//!
//! and the squared graph norm `n_E(x)² = ‖x‖² + ‖L_E x‖²` with maximizer map
//! `L_E = (E S₋₋ − A₋₋)⁻¹ A₊₋ᵀ`. The `k`-th gap eigenvalue `λ_k` is the unique
//! root in `(a, ∞)` of `E ↦ ℓ_k(E)`, the `k`-th eigenvalue of the pencil
//! `(Q_E, n_E²)`.

mod io;
mod solve;

pub use io::{read_matrix_file, parse_matrix_text, write_matrix_text, LevelRecord};
pub use solve::{MinMaxSolution, SolveOptions, Eigenpair};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, GeneralizedEigen};

/// Relative tolerance for the symmetry of the diagonal blocks.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Default threshold on the smallest eigenvalue of `(Q_E, S₊₊)` below which
/// the positivity criterion is declared violated.
pub const HYPOTHESIS_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SplitOperator {
    a_pp: DMatrix<f64>,
    a_mm: DMatrix<f64>,
    a_pm: DMatrix<f64>,
    s_pp: DMatrix<f64>,
    s_mm: DMatrix<f64>,
    /// Upper Cholesky factors `Rᵀ R = S₊₊` and `Rᵀ R = S₋₋`.
    r_pp: DMatrix<f64>,
    r_mm: DMatrix<f64>,
    gap: f64,
}

impl SplitOperator {
    /// Validates shapes, symmetry and Gram definiteness, and computes the gap
    /// constant once.
    pub fn new(
        a_pp: DMatrix<f64>,
        a_mm: DMatrix<f64>,
        a_pm: DMatrix<f64>,
        s_pp: DMatrix<f64>,
        s_mm: DMatrix<f64>,
    ) -> Result<Self> {
        let (np, nm) = (a_pp.nrows(), a_mm.nrows());
        if np == 0 || nm == 0 {
            return Err(Error::InvalidInput("both blocks must be nonempty".into()));
        }
        let square = |m: &DMatrix<f64>, n: usize| m.nrows() == n && m.ncols() == n;
        if !square(&a_pp, np) || !square(&s_pp, np) || !square(&a_mm, nm) || !square(&s_mm, nm) {
            return Err(Error::InvalidInput("diagonal blocks must be square and consistent".into()));
        }
        if a_pm.nrows() != np || a_pm.ncols() != nm {
            return Err(Error::InvalidInput(format!(
                "coupling block is {}x{}, expected {np}x{nm}",
                a_pm.nrows(),
                a_pm.ncols()
            )));
        }
        let all = [&a_pp, &a_mm, &a_pm, &s_pp, &s_mm];
        if all.iter().any(|m| m.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidInput("non-finite matrix entry".into()));
        }
        for (name, m) in [("A++", &a_pp), ("A--", &a_mm), ("S++", &s_pp), ("S--", &s_mm)] {
            let asym = linalg::relative_asymmetry(m);
            if asym > SYMMETRY_TOL {
                return Err(Error::InvalidInput(format!("{name} is not symmetric (relative {asym:e})")));
            }
        }
        let r_pp = linalg::cholesky(&s_pp, "Gram block S++")?.l().transpose();
        let r_mm = linalg::cholesky(&s_mm, "Gram block S--")?.l().transpose();
        let values = linalg::generalized_eigenvalues(&a_mm, &s_mm)?;
        let gap = *values.last().expect("nonempty block");
        Ok(Self { a_pp, a_mm, a_pm, s_pp, s_mm, r_pp, r_mm, gap })
    }

    /// Splits a full symmetric pencil `(A, S)` after the first `dim_plus`
    /// coordinates. `S = None` means the identity. The off-diagonal blocks of
    /// `S` must vanish.
    pub fn from_full(a: &DMatrix<f64>, s: Option<&DMatrix<f64>>, dim_plus: usize) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || dim_plus == 0 || dim_plus >= n {
            return Err(Error::InvalidInput(format!(
                "cannot split a {}x{} matrix after {dim_plus} coordinates",
                a.nrows(),
                a.ncols()
            )));
        }
        let nm = n - dim_plus;
        let identity = DMatrix::identity(n, n);
        let s = s.unwrap_or(&identity);
        if s.nrows() != n || s.ncols() != n {
            return Err(Error::InvalidInput("Gram matrix shape differs from A".into()));
        }
        let cross = s.view((0, dim_plus), (dim_plus, nm)).amax();
        if cross > SYMMETRY_TOL * s.amax() {
            return Err(Error::InvalidInput(format!(
                "cross-Gram block is nonzero ({cross:e}); the two subspaces must be orthogonal"
            )));
        }
        if linalg::relative_asymmetry(a) > SYMMETRY_TOL {
            return Err(Error::InvalidInput("A is not symmetric".into()));
        }
        Self::new(
            a.view((0, 0), (dim_plus, dim_plus)).into_owned(),
            a.view((dim_plus, dim_plus), (nm, nm)).into_owned(),
            a.view((0, dim_plus), (dim_plus, nm)).into_owned(),
            s.view((0, 0), (dim_plus, dim_plus)).into_owned(),
            s.view((dim_plus, dim_plus), (nm, nm)).into_owned(),
        )
    }

    pub fn dim_plus(&self) -> usize {
        self.a_pp.nrows()
    }

    pub fn dim_minus(&self) -> usize {
        self.a_mm.nrows()
    }

    pub fn a_pp(&self) -> &DMatrix<f64> {
        &self.a_pp
    }

    pub fn a_mm(&self) -> &DMatrix<f64> {
        &self.a_mm
    }

    pub fn a_pm(&self) -> &DMatrix<f64> {
        &self.a_pm
    }

    pub fn s_pp(&self) -> &DMatrix<f64> {
        &self.s_pp
    }

    pub fn s_mm(&self) -> &DMatrix<f64> {
        &self.s_mm
    }

    /// The gap constant `a`: the largest eigenvalue of the pencil `(A₋₋, S₋₋)`.
    pub fn gap_constant(&self) -> f64 {
        self.gap
    }

    pub fn full_a(&self) -> DMatrix<f64> {
        let (np, nm) = (self.dim_plus(), self.dim_minus());
        let mut a = linalg::block_diag(&self.a_pp, &self.a_mm);
        a.view_mut((0, np), (np, nm)).copy_from(&self.a_pm);
        a.view_mut((np, 0), (nm, np)).copy_from(&self.a_pm.transpose());
        a
    }

    pub fn full_s(&self) -> DMatrix<f64> {
        linalg::block_diag(&self.s_pp, &self.s_mm)
    }

    /// Returns a copy with `A₊₊` replaced by `A₊₊ + shift·S₊₊`.
    pub fn with_plus_shift(&self, shift: f64) -> Self {
        let mut out = self.clone();
        out.a_pp += &self.s_pp * shift;
        out
    }

    /// Returns a copy with `A` replaced by `A + P` for a symmetric `P` of the
    /// full dimension.
    pub fn perturbed(&self, p: &DMatrix<f64>) -> Result<Self> {
        let a = self.full_a() + p;
        Self::from_full(&a, Some(&self.full_s()), self.dim_plus())
    }

    /// `E S₋₋ − A₋₋` (the matrix of `B + E`) after checking `E > a`.
    fn shifted_minus(&self, energy: f64) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
        if !(energy > self.gap) {
            return Err(Error::EnergyBelowGap { energy, gap: self.gap });
        }
        let m = &self.s_mm * energy - &self.a_mm;
        linalg::cholesky(&m, "B + E").map_err(|_| Error::EnergyBelowGap { energy, gap: self.gap })
    }

    /// The unique maximizer `y₋ = L_E x₊` of `y ↦ φ_{E,x₊}(y)`, i.e. the
    /// solution of `(B + E) y₋ = Λ₋ A x₊`.
    pub fn maximizer(&self, energy: f64, x_plus: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_plus_len(x_plus)?;
        let chol = self.shifted_minus(energy)?;
        Ok(chol.solve(&(self.a_pm.transpose() * x_plus)))
    }

    /// `φ_{E,x₊}(y₋) = (x, A x) − E ‖x‖²` for `x = x₊ + y₋`, evaluated on the
    /// full matrices.
    pub fn phi(&self, energy: f64, x_plus: &DVector<f64>, y_minus: &DVector<f64>) -> f64 {
        linalg::quad(&self.a_pp, x_plus) + 2.0 * x_plus.dot(&(&self.a_pm * y_minus))
            + linalg::quad(&self.a_mm, y_minus)
            - energy * (linalg::quad(&self.s_pp, x_plus) + linalg::quad(&self.s_mm, y_minus))
    }

    pub fn schur_pencil(&self, energy: f64) -> Result<SchurPencil> {
        let chol = self.shifted_minus(energy)?;
        let l_map = chol.solve(&self.a_pm.transpose());
        let mut q = &self.a_pp - &self.s_pp * energy + &self.a_pm * &l_map;
        linalg::symmetrize(&mut q);
        let mut g = &self.s_pp + l_map.transpose() * &self.s_mm * &l_map;
        linalg::symmetrize(&mut g);
        // Near `a` the map L_E blows up and G_E becomes too ill-conditioned for
        // a direct Cholesky; the QR factor of the stacked square roots is not.
        let (np, nm) = (self.dim_plus(), self.dim_minus());
        let mut stacked = DMatrix::zeros(np + nm, np);
        stacked.rows_mut(0, np).copy_from(&self.r_pp);
        stacked.rows_mut(np, nm).copy_from(&(&self.r_mm * &l_map));
        let g_factor = stacked.qr().r();
        Ok(SchurPencil {
            energy,
            q_matrix: q,
            g_matrix: g,
            g_factor,
            b_matrix: -&self.a_mm,
            maximizer_map: l_map,
        })
    }

    /// `ℓ_k(T_E)`, the `k`-th smallest eigenvalue of `(Q_E, n_E²)`.
    pub fn ell_k(&self, energy: f64, k: usize) -> Result<f64> {
        self.check_level(k)?;
        self.schur_pencil(energy)?.ell(k)
    }

    pub fn check_hypotheses(&self, probe_energy: f64) -> Result<HypothesisReport> {
        let pencil = self.schur_pencil(probe_energy)?;
        let q_min = linalg::generalized_eigenvalues(&pencil.q_matrix, &self.s_pp)?[0];
        let tolerance = HYPOTHESIS_TOL;
        Ok(HypothesisReport {
            a_value: self.gap,
            probe_energy,
            q_min_eigenvalue: q_min,
            tolerance,
            gap_finite: self.gap.is_finite(),
            positivity: q_min >= -tolerance,
        })
    }

    /// All eigenvalues of the full pencil `(A, S)` in the open interval
    /// `(lo, hi)`, ascending with multiplicity.
    pub fn dense_oracle(&self, lo: f64, hi: f64) -> Result<Vec<f64>> {
        Ok(self
            .full_eigenvalues()?
            .into_iter()
            .filter(|&v| v > lo && v < hi)
            .collect())
    }

    pub fn full_eigenvalues(&self) -> Result<Vec<f64>> {
        linalg::generalized_eigenvalues(&self.full_a(), &self.full_s())
    }

    fn check_plus_len(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim_plus() {
            return Err(Error::InvalidInput(format!(
                "vector has length {}, the + block has dimension {}",
                x.len(),
                self.dim_plus()
            )));
        }
        Ok(())
    }

    fn check_level(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.dim_plus() {
            return Err(Error::LevelOutOfRange { k, dim: self.dim_plus() });
        }
        Ok(())
    }
}

/// The reduced pencil at one energy.
#[derive(Debug, Clone)]
pub struct SchurPencil {
    pub energy: f64,
    /// Matrix of `Q_E` on the "+" block.
    pub q_matrix: DMatrix<f64>,
    /// Matrix of `n_E²`.
    pub g_matrix: DMatrix<f64>,
    /// Upper triangular `R` with `Rᵀ R = G_E`, computed without forming `G_E`.
    g_factor: DMatrix<f64>,
    /// Matrix of `B`, i.e. `−A₋₋`.
    pub b_matrix: DMatrix<f64>,
    /// `L_E` as a `dim_minus × dim_plus` matrix.
    pub maximizer_map: DMatrix<f64>,
}

impl SchurPencil {
    pub fn q_value(&self, x: &DVector<f64>) -> f64 {
        linalg::quad(&self.q_matrix, x)
    }

    pub fn graph_norm_sq(&self, x: &DVector<f64>) -> f64 {
        linalg::quad(&self.g_matrix, x)
    }

    pub fn eigen(&self) -> Result<GeneralizedEigen> {
        linalg::generalized_eigen_factored(&self.q_matrix, &self.g_factor)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        linalg::generalized_eigenvalues_factored(&self.q_matrix, &self.g_factor)
    }

    pub fn ell(&self, k: usize) -> Result<f64> {
        let values = self.eigenvalues()?;
        if k == 0 || k > values.len() {
            return Err(Error::LevelOutOfRange { k, dim: values.len() });
        }
        Ok(values[k - 1])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub a_value: f64,
    pub probe_energy: f64,
    pub q_min_eigenvalue: f64,
    pub tolerance: f64,
    /// The gap constant is finite.
    pub gap_finite: bool,
    /// Positivity of `Q_E` at the probe energy, which licenses the min-max.
    pub positivity: bool,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.gap_finite && self.positivity
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) fn two_by_two(a11: f64, a12: f64, a22: f64) -> SplitOperator {
        let a = DMatrix::from_row_slice(2, 2, &[a11, a12, a12, a22]);
        SplitOperator::from_full(&a, None, 1).unwrap()
    }

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn gap_constant_examples() {
        assert_eq!(two_by_two(2.0, 0.0, -3.0).gap_constant(), -3.0);
        assert_eq!(two_by_two(0.0, 1.0, 0.0).gap_constant(), 0.0);
    }

    #[test]
    fn gap_constant_is_top_of_lower_block() {
        // lower-right block [[1, 2], [2, -2]] has eigenvalues 2 and -3
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[
                5.0, 0.1, 0.3, 0.0, //
                0.1, 4.0, 0.0, 0.2, //
                0.3, 0.0, 1.0, 2.0, //
                0.0, 0.2, 2.0, -2.0,
            ],
        );
        let op = SplitOperator::from_full(&a, None, 2).unwrap();
        assert_relative_eq!(op.gap_constant(), 2.0, epsilon = 1e-13);
    }

    #[test]
    fn rejects_bad_gram() {
        let a = DMatrix::identity(2, 2);
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            SplitOperator::from_full(&a, Some(&s), 1),
            Err(Error::NotPositiveDefinite { .. })
        ));
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        assert!(matches!(SplitOperator::from_full(&a, Some(&s), 1), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn maximizer_examples() {
        assert_eq!(two_by_two(0.3, 0.0, -1.0).maximizer(0.0, &v(&[2.0])).unwrap()[0], 0.0);
        let op = two_by_two(1.0, 1.0, -1.0);
        assert_relative_eq!(op.maximizer(0.0, &v(&[1.0])).unwrap()[0], 1.0, epsilon = 1e-15);
        assert!(matches!(op.maximizer(-1.0, &v(&[1.0])), Err(Error::EnergyBelowGap { .. })));
        assert!(matches!(op.maximizer(-2.0, &v(&[1.0])), Err(Error::EnergyBelowGap { .. })));
    }

    #[test]
    fn schur_pencil_examples() {
        let op = two_by_two(1.0, 1.0, -1.0);
        let p0 = op.schur_pencil(0.0).unwrap();
        assert_relative_eq!(p0.q_matrix[(0, 0)], 2.0, epsilon = 1e-15);
        assert_relative_eq!(p0.g_matrix[(0, 0)], 2.0, epsilon = 1e-15);
        let p = op.schur_pencil(0.5).unwrap();
        assert_relative_eq!(p.q_matrix[(0, 0)], 0.5 + 1.0 / 1.5, epsilon = 1e-15);
        assert!(p.q_matrix[(0, 0)] < p0.q_matrix[(0, 0)]);

        let decoupled = two_by_two(0.3, 0.0, -1.0).schur_pencil(0.5).unwrap();
        assert_relative_eq!(decoupled.q_matrix[(0, 0)], 0.3 - 0.5);
        assert_eq!(decoupled.g_matrix[(0, 0)], 1.0);
    }

    #[test]
    fn schur_value_matches_brute_force_sup() {
        // sup over a fine grid of scalar y of φ_{0,1}(y) = 1 + 2y − y²
        let op = two_by_two(1.0, 1.0, -1.0);
        let x = v(&[1.0]);
        let best = (-4000..=4000)
            .map(|i| op.phi(0.0, &x, &v(&[i as f64 * 1e-3])))
            .fold(f64::NEG_INFINITY, f64::max);
        assert_relative_eq!(best, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn ell_examples() {
        let a = DMatrix::from_row_slice(
            3,
            3,
            &[0.3, 0.0, 0.0, 0.0, 0.7, 0.0, 0.0, 0.0, -1.0],
        );
        let op = SplitOperator::from_full(&a, None, 2).unwrap();
        assert_relative_eq!(op.ell_k(0.5, 1).unwrap(), -0.2, epsilon = 1e-15);
        assert_relative_eq!(op.ell_k(0.5, 2).unwrap(), 0.2, epsilon = 1e-15);
        assert!(matches!(op.ell_k(0.5, 3), Err(Error::LevelOutOfRange { .. })));
        assert!(matches!(op.ell_k(0.5, 0), Err(Error::LevelOutOfRange { .. })));

        let op = two_by_two(1.0, 1.0, -1.0);
        assert_relative_eq!(op.ell_k(0.0, 1).unwrap(), 1.0, epsilon = 1e-15);
        let g = 1.0 + 1.0 / 6.25;
        assert_relative_eq!(op.ell_k(1.5, 1).unwrap(), -0.1 / g, epsilon = 1e-14);
    }

    #[test]
    fn hypothesis_examples() {
        let rep = two_by_two(1.0, 0.0, -1.0).check_hypotheses(0.0).unwrap();
        assert!(rep.passed());
        assert_relative_eq!(rep.q_min_eigenvalue, 1.0);
        let rep = two_by_two(1.0, 1.0, -1.0).check_hypotheses(0.0).unwrap();
        assert!(rep.passed());
        assert_relative_eq!(rep.q_min_eigenvalue, 2.0, epsilon = 1e-14);
        for e in [-0.5, 0.0, 3.0] {
            let rep = two_by_two(-2.0, 0.0, -1.0).check_hypotheses(e).unwrap();
            assert!(!rep.passed());
            assert_relative_eq!(rep.q_min_eigenvalue, -2.0 - e);
        }
    }

    #[test]
    fn dense_oracle_examples() {
        assert_eq!(two_by_two(0.5, 0.0, -2.0).dense_oracle(-1.0, 1.0).unwrap(), vec![0.5]);
        let found = two_by_two(1.0, 1.0, -1.0).dense_oracle(0.0, 3.0).unwrap();
        assert_eq!(found.len(), 1);
        assert_relative_eq!(found[0], 2f64.sqrt(), epsilon = 1e-14);
    }
}
