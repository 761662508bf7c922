//! Hardy-type inequalities checked as nonnegativity of `rhs − lhs` over
//! families of radial test functions.
//!
//! All forms are radial with measure `dr`, `D_κ f = f′ + κf/r`, and
//! `E_ν = √(1−ν²)`:
//!
//! ```text
//! inhomogeneous   ν∫f²/r + E_ν∫f²  ≤  ∫(D_κf)²/(ν/r + 1 + E_ν) + ∫f²
//! homogeneous     ∫f²/r            ≤  ∫ r (D_κf)²
//! classical       ∫u²/r²           ≤  4∫u′²
//! ```
//!
//! The free-energy inequality is checked on the discretized channel only.

use nalgebra::DVector;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dirac::{RadialChannel, ZeroModePolicy, coulomb_ground_state, free_energy_frame};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::cholesky;
use crate::spline::QuadratureRule;

/// Relative slack for the continuum (Talman and classical) forms.
pub const TALMAN_TOL: f64 = 1e-10;
/// Relative slack for the discretized free-energy forms.
pub const FREE_ENERGY_TOL: f64 = 1e-8;
/// Relative margin expected at the projected ground state.
pub const EQUALITY_TOL: f64 = 1e-6;
/// Allowed relative gap between rescaled inhomogeneous and homogeneous
/// margins at the smallest bump scale.
pub const SCALING_TOL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case")]
pub enum Generator {
    /// Uniform coefficients in `[−1, 1]` on the channel's upper basis.
    RandomSpline,
    /// `(r/s)^α (1 − r/s)^β` on `[0, s]` with random `α ∈ [1, 3]`,
    /// `β ∈ [2, 4]`; member `i` uses `scales[i % len]`.
    NearOriginBumps { scales: Vec<f64> },
    /// `r^γ e^{−νr}` projected onto the channel's upper basis.
    GroundState { nu: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFamily {
    #[serde(flatten)]
    pub generator: Generator,
    pub count: usize,
    pub seed: u64,
}

/// A test function tabulated on its own quadrature rule.
#[derive(Debug, Clone)]
pub struct Sampled {
    pub id: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub f: Vec<f64>,
    /// `f′`
    pub df: Vec<f64>,
}

impl Sampled {
    pub fn integrate(&self, g: impl Fn(f64, f64, f64) -> f64) -> f64 {
        (0..self.nodes.len()).map(|q| self.weights[q] * g(self.nodes[q], self.f[q], self.df[q])).sum()
    }

    fn from_coefficients(ch: &RadialChannel, id: usize, c: &DVector<f64>) -> Self {
        let rule = ch.quadrature();
        let (f, df) = (0..rule.len()).map(|q| ch.upper_table().combine(q, c.as_slice())).unzip();
        Self { id, nodes: rule.nodes.clone(), weights: rule.weights.clone(), f, df }
    }

    fn bump(id: usize, scale: f64, alpha: f64, beta: f64) -> Self {
        let breaks: Vec<f64> = (0..=16).map(|i| scale * i as f64 / 16.0).collect();
        let rule = QuadratureRule::composite(&breaks, 16, 24);
        let (f, df) = rule
            .nodes
            .iter()
            .map(|&r| {
                let (x, y) = (r / scale, 1.0 - r / scale);
                let v = x.powf(alpha) * y.powf(beta);
                let dv = (alpha * x.powf(alpha - 1.0) * y.powf(beta) - beta * x.powf(alpha) * y.powf(beta - 1.0)) / scale;
                (v, dv)
            })
            .unzip();
        Self { id, nodes: rule.nodes, weights: rule.weights, f, df }
    }
}

impl TestFamily {
    pub fn new(generator: Generator, count: usize, seed: u64) -> Self {
        Self { generator, count, seed }
    }

    /// Generates the members; spline-based generators use `ch`'s upper basis
    /// and quadrature.
    pub fn sample(&self, ch: &RadialChannel) -> Result<Vec<Sampled>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let n = ch.upper_basis().len();
        let members: Vec<Sampled> = match &self.generator {
            Generator::RandomSpline => (0..self.count)
                .map(|id| {
                    let c = DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0));
                    Sampled::from_coefficients(ch, id, &c)
                })
                .collect(),
            Generator::NearOriginBumps { scales } => {
                if scales.is_empty() || scales.iter().any(|&s| !(s > 0.0)) {
                    return Err(Error::InvalidInput("bump scales must be positive".into()));
                }
                (0..self.count)
                    .map(|id| {
                        let alpha = rng.random_range(1.0..=3.0);
                        let beta = rng.random_range(2.0..=4.0);
                        Sampled::bump(id, scales[id % scales.len()], alpha, beta)
                    })
                    .collect()
            }
            Generator::GroundState { nu } => {
                let c = ch.project_upper(coulomb_ground_state(*nu))?;
                vec![Sampled::from_coefficients(ch, 0, &c)]
            }
        };
        if let Some(m) = members.iter().find(|m| m.integrate(|_, f, _| f * f) <= 0.0) {
            return Err(Error::InvalidInput(format!("test function {} vanishes", m.id)));
        }
        Ok(members)
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct MarginRecord {
    pub tag: String,
    pub id: usize,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`
    pub margin: f64,
    /// Sum of the magnitudes of all terms.
    pub scale: f64,
}

impl MarginRecord {
    fn new(tag: &str, id: usize, lhs: f64, rhs: f64, scale: f64) -> Self {
        Self { tag: tag.into(), id, lhs, rhs, margin: rhs - lhs, scale }
    }

    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 { self.margin / self.scale } else { 0.0 }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct MarginSummary {
    pub tag: String,
    pub count: usize,
    pub min_relative: f64,
    pub median_relative: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn summarize(tag: &str, records: &[MarginRecord], tolerance: f64) -> MarginSummary {
    let mut rel: Vec<f64> = records.iter().map(MarginRecord::relative).collect();
    rel.sort_by(f64::total_cmp);
    let min_relative = rel.first().copied().unwrap_or(f64::NAN);
    MarginSummary {
        tag: tag.into(),
        count: rel.len(),
        min_relative,
        median_relative: rel.get(rel.len() / 2).copied().unwrap_or(f64::NAN),
        tolerance,
        passed: !rel.is_empty() && min_relative >= -tolerance,
    }
}

pub fn margins_csv(records: &[MarginRecord]) -> String {
    let mut out = String::from("tag,id,lhs,rhs,margin\n");
    for r in records {
        out.push_str(&format!("{},{},{:.15e},{:.15e},{:.15e}\n", r.tag, r.id, r.lhs, r.rhs, r.margin));
    }
    out
}

fn inhomogeneous_one(s: &Sampled, nu: f64, kappa: i32) -> MarginRecord {
    let k = kappa as f64;
    let e = (1.0 - nu * nu).max(0.0).sqrt();
    let coulomb = nu * s.integrate(|r, f, _| f * f / r);
    let mass = s.integrate(|_, f, _| f * f);
    let kinetic = s.integrate(|r, f, df| {
        let d = df + k * f / r;
        d * d / (nu / r + 1.0 + e)
    });
    let lhs = coulomb + e * mass;
    let rhs = kinetic + mass;
    MarginRecord::new("talman-inhomogeneous", s.id, lhs, rhs, lhs.abs() + rhs.abs())
}

fn homogeneous_one(s: &Sampled, kappa: i32) -> MarginRecord {
    let k = kappa as f64;
    let lhs = s.integrate(|r, f, _| f * f / r);
    let rhs = s.integrate(|r, f, df| {
        let d = df + k * f / r;
        r * d * d
    });
    MarginRecord::new("talman-homogeneous", s.id, lhs, rhs, lhs.abs() + rhs.abs())
}

fn classical_one(s: &Sampled) -> MarginRecord {
    let lhs = s.integrate(|r, f, _| f * f / (r * r));
    let rhs = 4.0 * s.integrate(|_, _, df| df * df);
    MarginRecord::new("classical-hardy", s.id, lhs, rhs, lhs.abs() + rhs.abs())
}

pub fn talman_inhomogeneous_margin(family: &[Sampled], nu: f64, kappa: i32, exec: Execution) -> Vec<MarginRecord> {
    exec.map(family, |s| inhomogeneous_one(s, nu, kappa))
}

pub fn talman_homogeneous_margin(family: &[Sampled], kappa: i32, exec: Execution) -> Vec<MarginRecord> {
    exec.map(family, |s| homogeneous_one(s, kappa))
}

pub fn classical_hardy_margin(family: &[Sampled], exec: Execution) -> Vec<MarginRecord> {
    exec.map(family, classical_one)
}

/// Inhomogeneous margins at `ν = 1` for one bump shape at each scale,
/// against the homogeneous margin of the same shape.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingCheck {
    pub scales: Vec<f64>,
    pub inhomogeneous: Vec<f64>,
    pub homogeneous: f64,
    /// `|inhomogeneous − homogeneous| / homogeneous` per scale.
    pub gaps: Vec<f64>,
    pub monotone: bool,
    /// Gap of the linear extrapolation to scale 0 from the last two scales.
    pub extrapolated_gap: f64,
    pub passed: bool,
}

/// With `f_s(r) = b(r/s)`, the `ν = 1` inhomogeneous margin equals the
/// homogeneous margin of `b` plus terms of order `s`.
pub fn bump_scaling_check(kappa: i32, scales: &[f64]) -> Result<ScalingCheck> {
    if scales.len() < 2 || scales.iter().any(|&s| !(s > 0.0)) || scales.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("need at least two positive, strictly decreasing scales".into()));
    }
    let (alpha, beta) = (2.0, 3.0);
    let inhomogeneous: Vec<f64> =
        scales.iter().map(|&s| inhomogeneous_one(&Sampled::bump(0, s, alpha, beta), 1.0, kappa).margin).collect();
    let homogeneous = homogeneous_one(&Sampled::bump(0, 1.0, alpha, beta), kappa).margin;
    let gap = |m: f64| (m - homogeneous).abs() / homogeneous.abs();
    let gaps: Vec<f64> = inhomogeneous.iter().map(|&m| gap(m)).collect();
    let n = scales.len();
    let tail: Vec<(f64, f64)> = (n - 2..n).map(|i| (scales[i], inhomogeneous[i])).collect();
    let extrapolated_gap = gap(crate::continuation::extrapolate_to_zero(&tail));
    let monotone = gaps.windows(2).all(|w| w[1] <= w[0]);
    Ok(ScalingCheck {
        scales: scales.to_vec(),
        inhomogeneous,
        homogeneous,
        gaps,
        monotone,
        extrapolated_gap,
        passed: monotone && extrapolated_gap <= SCALING_TOL,
    })
}

/// Discretized free-energy inequality in the channel `ch`:
///
/// ```text
/// ν xᵀW₊₊x + E‖x‖² ≤ xᵀD₊x + ν² (W₋₊x)ᵀ (D₋ + E + νW₋₋)⁻¹ (W₋₊x)
/// ```
///
/// with `x` the "+" part of a random coefficient vector (even ids) or a
/// random combination of "+" modes damped by `1/(1+e²)` (odd ids, which
/// probe the low-energy end), `D±` the moduli of the free energies, `W` the `1/r` overlaps in free coordinates, and
/// `E = √(1−ν²)` for `m > 0`, `E = 0` for `m = 0`.
pub fn free_energy_inequality_margin(
    ch: &RadialChannel,
    nu: f64,
    count: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<MarginRecord>> {
    if !(0.0..=1.0).contains(&nu) {
        return Err(Error::InvalidInput(format!("coupling must satisfy 0 <= nu <= 1, got {nu}")));
    }
    let frame = free_energy_frame(ch, ZeroModePolicy::Minus)?;
    let e = if ch.mass() > 0.0 { (1.0 - nu * nu).sqrt() } else { 0.0 };
    let (wu, wl) = ch.inverse_r_overlaps();
    let w = crate::linalg::block_diag(&wu, &wl);
    let (cp, cm) = (&frame.plus_vectors, &frame.minus_vectors);
    let w_pp = cp.transpose() * &w * cp;
    let w_mp = cm.transpose() * &w * cp;
    let d_plus = DVector::from_iterator(frame.plus_energies.len(), frame.plus_energies.iter().map(|v| v.abs()));
    let mut block = cm.transpose() * &w * cm * nu;
    for (i, v) in frame.minus_energies.iter().enumerate() {
        block[(i, i)] += v.abs() + e;
    }
    crate::linalg::symmetrize(&mut block);
    let resolvent = cholesky(&block, "compressed negative-energy block")
        .map_err(|_| Error::Assembly("compressed negative-energy block is not positive definite".into()))?;

    let s = ch.assembled().full_s();
    let tag = if ch.mass() > 0.0 { "free-energy-massive" } else { "free-energy-massless" };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vectors: Vec<DVector<f64>> = (0..count)
        .map(|id| {
            if id % 2 == 0 {
                // S-orthogonal projection onto the "+" free subspace
                let v = DVector::from_fn(s.nrows(), |_, _| rng.random_range(-1.0..=1.0));
                cp.transpose() * (&s * v)
            } else {
                DVector::from_fn(d_plus.len(), |i, _| rng.random_range(-1.0..=1.0) / (1.0 + d_plus[i] * d_plus[i]))
            }
        })
        .collect();
    let ids: Vec<usize> = (0..count).collect();
    Ok(exec.map(&ids, |&id| {
        let x = &vectors[id];
        let norm = x.norm_squared();
        let coulomb = nu * x.dot(&(&w_pp * x));
        let kinetic = x.dot(&d_plus.component_mul(x));
        let y = &w_mp * x;
        let coupling = nu * nu * y.dot(&resolvent.solve(&y));
        let lhs = coulomb + e * norm;
        let rhs = kinetic + coupling;
        MarginRecord::new(tag, id, lhs, rhs, lhs.abs() + rhs.abs())
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirac::{Discretization, assemble_channel};
    use crate::potential::PotentialSpec;
    use approx::assert_relative_eq;

    fn free_channel(kappa: i32, mass: f64) -> RadialChannel {
        assemble_channel(kappa, mass, PotentialSpec::Free, Discretization::reference(0.5)).unwrap()
    }

    #[test]
    fn zero_coupling_margin_is_half_the_kinetic_term() {
        let ch = free_channel(-1, 1.0);
        let fam = TestFamily::new(Generator::RandomSpline, 3, 1).sample(&ch).unwrap();
        for (s, rec) in fam.iter().zip(talman_inhomogeneous_margin(&fam, 0.0, -1, Execution::Sequential)) {
            let half = 0.5 * s.integrate(|r, f, df| (df - f / r).powi(2));
            assert_relative_eq!(rec.margin, half, max_relative = 1e-12);
        }
    }

    #[test]
    fn closed_form_homogeneous_example() {
        // f = r e^{−r}, κ = −1: ∫f²/r = 1/4, ∫ r (f′ − f/r)² = ∫ r³ e^{−2r} = 3/8
        let breaks: Vec<f64> = (0..=200).map(|i| i as f64 * 0.25).collect();
        let rule = QuadratureRule::composite(&breaks, 12, 12);
        let f: Vec<f64> = rule.nodes.iter().map(|&r| r * (-r).exp()).collect();
        let df: Vec<f64> = rule.nodes.iter().map(|&r| (1.0 - r) * (-r).exp()).collect();
        let s = Sampled { id: 0, nodes: rule.nodes, weights: rule.weights, f, df };
        let rec = homogeneous_one(&s, -1);
        assert_relative_eq!(rec.lhs, 0.25, epsilon = 1e-12);
        assert_relative_eq!(rec.rhs, 0.375, epsilon = 1e-12);
    }

    #[test]
    fn bumps_stay_in_their_support() {
        let ch = free_channel(-1, 1.0);
        let fam = TestFamily::new(Generator::NearOriginBumps { scales: vec![1.0, 0.25] }, 4, 3).sample(&ch).unwrap();
        for s in &fam {
            let scale = if s.id % 2 == 0 { 1.0 } else { 0.25 };
            assert!(s.nodes.iter().all(|&r| r > 0.0 && r < scale));
        }
    }

    #[test]
    fn free_energy_margin_at_zero_coupling_is_kinetic_excess() {
        let ch = free_channel(-1, 1.0);
        let recs = free_energy_inequality_margin(&ch, 0.0, 5, 9, Execution::Sequential).unwrap();
        assert!(recs.iter().all(|r| r.margin >= 0.0 && r.lhs >= 0.0));
    }

    #[test]
    fn summary_reports_minimum() {
        let recs = vec![MarginRecord::new("t", 0, 1.0, 2.0, 3.0), MarginRecord::new("t", 1, 1.0, 1.5, 2.5)];
        let s = summarize("t", &recs, 1e-10);
        assert_relative_eq!(s.min_relative, 0.2);
        assert!(s.passed);
        assert!(margins_csv(&recs).starts_with("tag,id,lhs,rhs,margin\nt,0,"));
    }
}
