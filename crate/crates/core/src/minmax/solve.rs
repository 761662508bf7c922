use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{HypothesisReport, SplitOperator};
use crate::error::{Error, Result};
use crate::linalg;

/// Number of times the lower bracket end is moved closer to `a` when the
/// positivity check fails there.
const PROBE_RETRIES: usize = 3;
const SECANT_STEPS: usize = 5;
const MAX_ITERATIONS: usize = 400;

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Final bracket width for `λ_k`.
    pub tol: f64,
    /// Dual-norm residual above which a solution is flagged as suspect.
    pub residual_tol: f64,
    /// Optional upper end of the search interval (the top of the gap). When
    /// `None`, the largest eigenvalue of `(A, S)` plus one is used.
    pub upper_limit: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-10, residual_tol: 1e-9, upper_limit: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MinMaxSolution {
    pub k: usize,
    pub lambda: f64,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    pub iterations: usize,
    pub residual: f64,
    pub multiplicity: usize,
    /// The reconstructed eigenvector missed the residual tolerance, which
    /// usually signals a near-degenerate level.
    pub suspect: bool,
}

#[derive(Debug, Clone)]
pub struct Eigenpair {
    /// Full coefficient vector `x₊ + L_λ x₊`, normalized to `‖x‖_S = 1`.
    pub vector: DVector<f64>,
    /// `‖A x − λ S x‖` measured in the dual norm of `S`.
    pub residual: f64,
}

impl SplitOperator {
    /// First energy just above `a` at which the hypotheses verify, with the
    /// report from that probe.
    pub fn lower_probe(&self) -> Result<HypothesisReport> {
        let a = self.gap_constant();
        let mut delta = 1e-8 * (1.0 + a.abs());
        let mut last = None;
        for _ in 0..=PROBE_RETRIES {
            let report = self.check_hypotheses(a + delta)?;
            if report.passed() {
                return Ok(report);
            }
            last = Some(report);
            delta *= 0.1;
        }
        let report = last.expect("at least one probe");
        Err(Error::HypothesisViolated { q_min: report.q_min_eigenvalue, probe: report.probe_energy })
    }

    /// Computes `λ_k` as the root of `E ↦ ℓ_k(T_E)` on `(a, ∞)`.
    ///
    /// Bisection down to ten times the tolerance, then a few secant steps
    /// kept inside the bracket, then bisection again until the bracket width
    /// is at most `tol`.
    pub fn solve_level(&self, k: usize, opts: &SolveOptions) -> Result<MinMaxSolution> {
        self.check_level(k)?;
        let tol = opts.tol;
        let lo = self.lower_probe()?.probe_energy;
        let hi = match opts.upper_limit {
            Some(top) => top,
            None => self.full_eigenvalues()?.last().copied().unwrap_or(lo) + 1.0,
        };
        if hi <= lo {
            return Err(Error::NoBracket { k, lo, hi });
        }
        let ell = |e: f64| self.ell_k(e, k);
        let mut br = Bracket { lo, hi, f_lo: ell(lo)?, f_hi: ell(hi)? };
        let mut iterations = 2;
        // ℓ_k(a⁺) ≤ 0 with Q_E ≥ 0 at the probe would put λ_k at the probe itself
        if br.f_lo <= 0.0 || br.f_hi >= 0.0 {
            return Err(Error::NoBracket { k, lo, hi });
        }

        while br.width() > 10.0 * tol && iterations < MAX_ITERATIONS {
            let mid = br.mid();
            br.update(mid, ell(mid)?);
            iterations += 1;
        }

        for _ in 0..SECANT_STEPS {
            if br.width() <= tol {
                break;
            }
            let x = br.secant();
            let fx = ell(x)?;
            iterations += 1;
            br.update(x, fx);
            if fx.abs() < tol * (1.0 + x.abs()) {
                // try to close the bracket around the secant estimate
                for y in [x - 0.5 * tol, x + 0.5 * tol] {
                    if y > br.lo && y < br.hi {
                        br.update(y, ell(y)?);
                        iterations += 1;
                    }
                }
                break;
            }
        }

        while br.width() > tol && iterations < MAX_ITERATIONS {
            let mid = br.mid();
            br.update(mid, ell(mid)?);
            iterations += 1;
        }
        let (lo, hi) = (br.lo, br.hi);

        let lambda = br.secant();
        let pencil = self.schur_pencil(lambda)?;
        let values = pencil.eigenvalues()?;
        let multiplicity = values.iter().filter(|v| v.abs() <= 10.0 * tol).count().max(1);
        let mut sol = MinMaxSolution {
            k,
            lambda,
            bracket_lo: lo,
            bracket_hi: hi,
            iterations,
            residual: f64::NAN,
            multiplicity,
            suspect: false,
        };
        let pair = self.reconstruct_eigenvector(&sol)?;
        sol.residual = pair.residual;
        sol.suspect = pair.residual > opts.residual_tol;
        Ok(sol)
    }

    /// `Q_λ(x₊)` and its derivative `−n_λ(x₊)²`.
    fn q_and_slope(&self, energy: f64, x: &DVector<f64>) -> Result<(f64, f64)> {
        let y = self.maximizer(energy, x)?;
        let b = self.a_pm.transpose() * x;
        let q = linalg::quad(&self.a_pp, x) - energy * linalg::quad(&self.s_pp, x) + b.dot(&y);
        let n2 = linalg::quad(&self.s_pp, x) + linalg::quad(&self.s_mm, &y);
        Ok((q, -n2))
    }

    /// The one-vector level `λ(x₊)`: the unique root in `(a, ∞)` of
    /// `λ ↦ Q_λ(x₊)`.
    ///
    /// `Q_λ(x₊)` is convex and decreasing with slope `−n_λ(x₊)² ≤ −‖x₊‖²`, so
    /// the root lies in `[E₀, E₀ + Q_{E₀}(x₊)/‖x₊‖²]`. Newton steps from the
    /// left end never overshoot; bisection takes over if they stall.
    pub fn lambda_of_vector(&self, x_plus: &DVector<f64>, tol: f64) -> Result<f64> {
        self.check_plus_len(x_plus)?;
        if x_plus.iter().all(|v| *v == 0.0) {
            return Err(Error::ZeroVector);
        }
        let norm2 = linalg::quad(&self.s_pp, x_plus);
        let mut lo = self.lower_probe()?.probe_energy;
        let (mut q_lo, mut slope_lo) = self.q_and_slope(lo, x_plus)?;
        if q_lo < 0.0 {
            return Err(Error::HypothesisViolated { q_min: q_lo / norm2, probe: lo });
        }
        let mut hi = lo + q_lo / norm2 + tol;
        for _ in 0..MAX_ITERATIONS {
            if hi - lo <= tol {
                break;
            }
            let newton = lo - q_lo / slope_lo;
            let x = if newton > lo + 0.25 * tol && newton < hi {
                newton
            } else if newton <= lo + 0.25 * tol {
                (lo + tol).min(0.5 * (lo + hi))
            } else {
                0.5 * (lo + hi)
            };
            let (q, slope) = self.q_and_slope(x, x_plus)?;
            if q > 0.0 {
                lo = x;
                q_lo = q;
                slope_lo = slope;
            } else {
                hi = x;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Rebuilds the full eigenvector from the kernel of `(Q_λ, G_λ)` and the
    /// maximizer map.
    pub fn reconstruct_eigenvector(&self, sol: &MinMaxSolution) -> Result<Eigenpair> {
        let pencil = self.schur_pencil(sol.lambda)?;
        let eig = pencil.eigen()?;
        let idx = (0..eig.values.len())
            .min_by(|&i, &j| eig.values[i].abs().total_cmp(&eig.values[j].abs()))
            .expect("nonempty pencil");
        let x_plus = eig.vectors.column(idx).into_owned();
        let y_minus = &pencil.maximizer_map * &x_plus;
        let (np, nm) = (self.dim_plus(), self.dim_minus());
        let mut x = DVector::zeros(np + nm);
        x.rows_mut(0, np).copy_from(&x_plus);
        x.rows_mut(np, nm).copy_from(&y_minus);

        let s = self.full_s();
        let norm = linalg::quad(&s, &x).sqrt();
        x /= norm;
        let r = self.full_a() * &x - &s * &x * sol.lambda;
        Ok(Eigenpair { residual: dual_norm(&s, &r)?, vector: x })
    }
}

/// Sign bracket with `f(lo) > 0 > f(hi)`.
struct Bracket {
    lo: f64,
    hi: f64,
    f_lo: f64,
    f_hi: f64,
}

impl Bracket {
    fn width(&self) -> f64 {
        self.hi - self.lo
    }

    fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    fn update(&mut self, x: f64, fx: f64) {
        if fx > 0.0 {
            self.lo = x;
            self.f_lo = fx;
        } else {
            self.hi = x;
            self.f_hi = fx;
        }
    }

    /// Secant point of the two ends, clamped to the bracket.
    fn secant(&self) -> f64 {
        let x = self.lo - self.f_lo * (self.hi - self.lo) / (self.f_hi - self.f_lo);
        if x.is_finite() {
            x.clamp(self.lo, self.hi)
        } else {
            self.mid()
        }
    }
}

/// `‖r‖_{S⁻¹} = ‖L⁻¹ r‖` with `S = L Lᵀ`.
fn dual_norm(s: &DMatrix<f64>, r: &DVector<f64>) -> Result<f64> {
    let chol = linalg::cholesky(s, "Gram matrix")?;
    let z = chol
        .l()
        .solve_lower_triangular(r)
        .expect("Cholesky factor has a nonzero diagonal");
    Ok(z.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_by_two(a11: f64, a12: f64, a22: f64) -> SplitOperator {
        let a = DMatrix::from_row_slice(2, 2, &[a11, a12, a12, a22]);
        SplitOperator::from_full(&a, None, 1).unwrap()
    }

    #[test]
    fn decoupled_level() {
        let sol = two_by_two(0.5, 0.0, -2.0).solve_level(1, &SolveOptions::default()).unwrap();
        assert!((sol.lambda - 0.5).abs() <= 1e-10);
        assert!(sol.bracket_hi - sol.bracket_lo <= 1e-10);
        assert!(sol.bracket_lo <= sol.lambda && sol.lambda <= sol.bracket_hi);
        assert!(!sol.suspect);
    }

    #[test]
    fn coupled_two_by_two_gives_sqrt_two() {
        let op = two_by_two(1.0, 1.0, -1.0);
        let sol = op.solve_level(1, &SolveOptions::default()).unwrap();
        assert!((sol.lambda - 2f64.sqrt()).abs() <= 1e-10, "{}", sol.lambda);
        assert_eq!(sol.multiplicity, 1);
        assert!(sol.residual <= 1e-9);
    }

    #[test]
    fn reconstructed_vector_is_eigenvector() {
        let op = two_by_two(1.0, 1.0, -1.0);
        let sol = op.solve_level(1, &SolveOptions::default()).unwrap();
        let x = op.reconstruct_eigenvector(&sol).unwrap().vector;
        // proportional to (1, √2 − 1)
        assert_relative_eq!(x[1] / x[0], 2f64.sqrt() - 1.0, epsilon = 1e-9);
    }

    #[test]
    fn lambda_of_vector_examples() {
        let op = two_by_two(1.0, 1.0, -1.0);
        let one = DVector::from_element(1, 1.0);
        assert_relative_eq!(op.lambda_of_vector(&one, 1e-12).unwrap(), 2f64.sqrt(), epsilon = 1e-11);
        let neg = DVector::from_element(1, -3.5);
        assert_relative_eq!(op.lambda_of_vector(&neg, 1e-12).unwrap(), 2f64.sqrt(), epsilon = 1e-11);
        assert!(matches!(op.lambda_of_vector(&DVector::zeros(1), 1e-12), Err(Error::ZeroVector)));

        let a = DMatrix::from_row_slice(3, 3, &[0.3, 0.0, 0.0, 0.0, 0.7, 0.0, 0.0, 0.0, -1.0]);
        let op = SplitOperator::from_full(&a, None, 2).unwrap();
        let e2 = DVector::from_column_slice(&[0.0, 2.0]);
        assert_relative_eq!(op.lambda_of_vector(&e2, 1e-12).unwrap(), 0.7, epsilon = 1e-11);
    }

    #[test]
    fn counterexample_is_rejected() {
        let op = two_by_two(-2.0, 0.0, -1.0);
        assert!(matches!(
            op.solve_level(1, &SolveOptions::default()),
            Err(Error::HypothesisViolated { .. })
        ));
    }

    #[test]
    fn cap_below_level_is_a_bracket_failure() {
        let op = two_by_two(0.5, 0.0, -2.0);
        let opts = SolveOptions { upper_limit: Some(0.25), ..Default::default() };
        assert!(matches!(op.solve_level(1, &opts), Err(Error::NoBracket { .. })));
    }
}
