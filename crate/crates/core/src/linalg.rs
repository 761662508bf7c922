//! Dense symmetric helpers on top of `nalgebra`: Cholesky with typed
//! failures and the Hermitian-definite generalized eigenproblem.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

pub(crate) fn cholesky(m: &DMatrix<f64>, what: &'static str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone()).ok_or(Error::NotPositiveDefinite { what })
}

/// Largest entry of `|m - mᵀ|` relative to the largest entry of `|m|`.
pub fn relative_asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax();
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0_f64;
    for j in 0..m.ncols() {
        for i in 0..j {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst / scale
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..j {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Solution of `A v = θ B v` with `B` positive definite.
///
/// Eigenvalues are ascending; eigenvector columns are `B`-orthonormal.
#[derive(Debug, Clone)]
pub struct GeneralizedEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

fn reduce(a: &DMatrix<f64>, chol: &Cholesky<f64, Dyn>) -> DMatrix<f64> {
    reduce_lower(a, &chol.l()).expect("Cholesky factor has a nonzero diagonal")
}

/// `L⁻¹ A L⁻ᵀ`, using symmetry of `A` for the second solve.
fn reduce_lower(a: &DMatrix<f64>, l: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let x = l.solve_lower_triangular(a)?;
    let mut c = l.solve_lower_triangular(&x.transpose())?;
    symmetrize(&mut c);
    Some(c)
}

fn singular_factor() -> Error {
    Error::NotPositiveDefinite { what: "metric factor" }
}

/// Like [`generalized_eigen`] with `B = Rᵀ R` given by its upper triangular
/// factor.
pub fn generalized_eigen_factored(a: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<GeneralizedEigen> {
    let l = r.transpose();
    let c = reduce_lower(a, &l).ok_or_else(singular_factor)?;
    let (values, u) = sorted(SymmetricEigen::new(c));
    let vectors = r.solve_upper_triangular(&u).ok_or_else(singular_factor)?;
    Ok(GeneralizedEigen { values, vectors })
}

pub fn generalized_eigenvalues_factored(a: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<Vec<f64>> {
    let c = reduce_lower(a, &r.transpose()).ok_or_else(singular_factor)?;
    let mut values: Vec<f64> = c.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

fn sorted(eig: SymmetricEigen<f64, Dyn>) -> (Vec<f64>, DMatrix<f64>) {
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn generalized_eigen(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<GeneralizedEigen> {
    let chol = cholesky(b, "metric matrix")?;
    let c = reduce(a, &chol);
    let (values, u) = sorted(SymmetricEigen::new(c));
    let vectors = chol
        .l()
        .tr_solve_lower_triangular(&u)
        .expect("Cholesky factor has a nonzero diagonal");
    Ok(GeneralizedEigen { values, vectors })
}

pub fn generalized_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    let chol = cholesky(b, "metric matrix")?;
    let c = reduce(a, &chol);
    let mut values: Vec<f64> = c.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Quadratic form `xᵀ M x`.
pub fn quad(m: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(m * x))
}

pub fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (p, q) = (a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(p + q, p + q);
    out.view_mut((0, 0), (p, p)).copy_from(a);
    out.view_mut((p, p), (q, q)).copy_from(b);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn generalized_eigen_matches_hand_example() {
        // A = diag(2, 6), B = diag(1, 2) -> θ = {2, 3}
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 6.0]));
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        let eig = generalized_eigen(&a, &b).unwrap();
        assert_relative_eq!(eig.values[0], 2.0, epsilon = 1e-14);
        assert_relative_eq!(eig.values[1], 3.0, epsilon = 1e-14);
        let v = eig.vectors.column(1).into_owned();
        assert_relative_eq!(quad(&b, &v), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn rejects_indefinite_metric() {
        let a = DMatrix::identity(2, 2);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            generalized_eigen(&a, &b),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn asymmetry_is_relative() {
        let m = DMatrix::from_row_slice(2, 2, &[100.0, 1.0, 1.5, 0.0]);
        assert_relative_eq!(relative_asymmetry(&m), 0.005);
    }
}
