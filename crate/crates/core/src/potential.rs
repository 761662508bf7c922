//! Radial potentials with declared bounds `−ν/r − c₁ ≤ V ≤ c₂` and the
//! admissibility check used before any gap computation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::{Check, VerificationReport};

/// Decay threshold for numerically checked tails at the outer radius.
pub const DECAY_TOL: f64 = 1e-8;
/// Slack allowed when sampling the declared bounds.
pub const BOUND_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    #[default]
    Linear,
    /// Natural cubic spline.
    Cubic,
}

/// Samples `(r_i, V_i)` with strictly increasing `r_i`. Values are held
/// constant outside the sampled range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableSamples", into = "TableSamples")]
pub struct TabulatedPotential {
    r: Vec<f64>,
    v: Vec<f64>,
    interpolation: Interpolation,
    /// Second derivatives at the samples; empty for linear interpolation.
    curvature: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TableSamples {
    r: Vec<f64>,
    v: Vec<f64>,
    #[serde(default)]
    interpolation: Interpolation,
}

impl TryFrom<TableSamples> for TabulatedPotential {
    type Error = Error;
    fn try_from(s: TableSamples) -> Result<Self> {
        Self::new(s.r, s.v, s.interpolation)
    }
}

impl From<TabulatedPotential> for TableSamples {
    fn from(t: TabulatedPotential) -> Self {
        Self { r: t.r, v: t.v, interpolation: t.interpolation }
    }
}

impl TabulatedPotential {
    pub fn new(r: Vec<f64>, v: Vec<f64>, interpolation: Interpolation) -> Result<Self> {
        if r.len() != v.len() {
            return Err(Error::InvalidInput("sample columns differ in length".into()));
        }
        if r.len() < 2 {
            return Err(Error::InvalidInput("at least two samples are required".into()));
        }
        if r[0] < 0.0 || r.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("sample radii must be nonnegative and strictly increasing".into()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("sample values must be finite".into()));
        }
        let mut table = Self { r, v, interpolation, curvature: Vec::new() };
        table.prepare();
        Ok(table)
    }

    /// Reads whitespace- or comma-separated `r V(r)` lines; `#` starts a comment.
    pub fn parse(text: &str, interpolation: Interpolation) -> Result<Self> {
        let (mut r, mut v) = (Vec::new(), Vec::new());
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> =
                line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
            if cols.len() != 2 {
                return Err(Error::Parse { line: idx + 1, msg: "expected two columns: r V(r)".into() });
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse { line: idx + 1, msg: format!("bad number {s:?}: {e}") })
            };
            let (ri, vi) = (parse(cols[0])?, parse(cols[1])?);
            if let Some(&last) = r.last() {
                if !(ri > last) {
                    return Err(Error::Parse { line: idx + 1, msg: "r must be strictly increasing".into() });
                }
            }
            r.push(ri);
            v.push(vi);
        }
        Self::new(r, v, interpolation)
    }

    pub fn load(path: &Path, interpolation: Interpolation) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, interpolation)
    }

    pub fn radii(&self) -> &[f64] {
        &self.r
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }

    fn prepare(&mut self) {
        if self.interpolation != Interpolation::Cubic || !self.curvature.is_empty() {
            return;
        }
        // Tridiagonal solve for the natural spline; end curvatures are zero.
        let n = self.r.len();
        let mut m = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 1..n - 1 {
            let (h0, h1) = (self.r[i] - self.r[i - 1], self.r[i + 1] - self.r[i]);
            diag[i] = 2.0 * (h0 + h1);
            rhs[i] = 6.0 * ((self.v[i + 1] - self.v[i]) / h1 - (self.v[i] - self.v[i - 1]) / h0);
            if i > 1 {
                let w = h0 / diag[i - 1];
                diag[i] -= w * h0;
                rhs[i] -= w * rhs[i - 1];
            }
        }
        for i in (1..n - 1).rev() {
            let h1 = self.r[i + 1] - self.r[i];
            let upper = if i + 1 < n - 1 { h1 * m[i + 1] } else { 0.0 };
            m[i] = (rhs[i] - upper) / diag[i];
        }
        self.curvature = m;
    }

    pub fn value(&self, x: f64) -> f64 {
        let n = self.r.len();
        if x <= self.r[0] {
            return self.v[0];
        }
        if x >= self.r[n - 1] {
            return self.v[n - 1];
        }
        let i = self.r.partition_point(|&ri| ri <= x) - 1;
        let h = self.r[i + 1] - self.r[i];
        let t = (x - self.r[i]) / h;
        let lin = (1.0 - t) * self.v[i] + t * self.v[i + 1];
        if self.curvature.is_empty() {
            return lin;
        }
        let (m0, m1) = (self.curvature[i], self.curvature[i + 1]);
        lin + h * h / 6.0 * (((1.0 - t).powi(3) - (1.0 - t)) * m0 + (t.powi(3) - t) * m1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    /// `−ν/r`
    Coulomb { nu: f64 },
    /// `−ν/(r+ε)`
    RegularizedCoulomb { nu: f64, epsilon: f64 },
    /// `−ν/r + b(r)` with `b` tabulated.
    CoulombPlusBounded { nu: f64, bounded: TabulatedPotential, c1: f64, c2: f64 },
    /// Fully tabulated `V`, verified against `−ν/r − c₁ ≤ V ≤ c₂`.
    Tabulated { table: TabulatedPotential, nu: f64, c1: f64, c2: f64 },
    /// `V = 0`, the free operator.
    Free,
}

impl PotentialSpec {
    pub fn nu(&self) -> f64 {
        match self {
            Self::Coulomb { nu }
            | Self::RegularizedCoulomb { nu, .. }
            | Self::CoulombPlusBounded { nu, .. }
            | Self::Tabulated { nu, .. } => *nu,
            Self::Free => 0.0,
        }
    }

    /// Declared `(c₁, c₂)`.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Self::Coulomb { .. } | Self::RegularizedCoulomb { .. } | Self::Free => (0.0, 0.0),
            Self::CoulombPlusBounded { c1, c2, .. } | Self::Tabulated { c1, c2, .. } => (*c1, *c2),
        }
    }

    /// Same shape with the coupling replaced; `Free` and `Tabulated` are
    /// returned unchanged apart from the declared coupling.
    pub fn with_nu(&self, nu: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            Self::Coulomb { nu: n }
            | Self::RegularizedCoulomb { nu: n, .. }
            | Self::CoulombPlusBounded { nu: n, .. }
            | Self::Tabulated { nu: n, .. } => *n = nu,
            Self::Free => {}
        }
        out
    }

    /// Whether `V(0)` is finite.
    pub fn regular_at_origin(&self) -> bool {
        match self {
            Self::Coulomb { nu } | Self::CoulombPlusBounded { nu, .. } => *nu == 0.0,
            Self::RegularizedCoulomb { nu, epsilon } => *epsilon > 0.0 || *nu == 0.0,
            Self::Tabulated { .. } | Self::Free => true,
        }
    }

    pub fn evaluate(&self, r: f64) -> Result<f64> {
        if r < 0.0 || !r.is_finite() {
            return Err(Error::InvalidInput(format!("radius must be finite and nonnegative, got {r}")));
        }
        if r == 0.0 && !self.regular_at_origin() {
            return Err(Error::InvalidInput("Coulomb potential is singular at r = 0".into()));
        }
        Ok(self.value(r))
    }

    /// Unchecked evaluation for `r > 0`.
    pub fn value(&self, r: f64) -> f64 {
        match self {
            Self::Coulomb { nu } => -nu / r,
            Self::RegularizedCoulomb { nu, epsilon } => -nu / (r + epsilon),
            Self::CoulombPlusBounded { nu, bounded, .. } => -nu / r + bounded.value(r),
            Self::Tabulated { table, .. } => table.value(r),
            Self::Free => 0.0,
        }
    }

    fn validate_parameters(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let nu = self.nu();
        if !(0.0..1.0).contains(&nu) {
            problems.push(format!("coupling must satisfy 0 <= nu < 1, got {nu}"));
        }
        if let Self::RegularizedCoulomb { epsilon, .. } = self {
            if !(*epsilon >= 0.0) {
                problems.push(format!("epsilon must be >= 0, got {epsilon}"));
            }
        }
        let (c1, c2) = self.bounds();
        if !(c1 >= 0.0 && c2 >= 0.0) {
            problems.push(format!("declared bounds must be nonnegative, got c1 = {c1}, c2 = {c2}"));
        }
        problems
    }

    /// `√(1−ν²) − (c₁+c₂−1)`; admissible iff positive.
    pub fn admissibility_margin(&self) -> f64 {
        let (c1, c2) = self.bounds();
        let nu = self.nu();
        (1.0 - nu * nu).max(0.0).sqrt() - (c1 + c2 - 1.0)
    }

    fn sample_radii(&self, r_max: f64) -> Vec<f64> {
        let n = 4000;
        let lo: f64 = 1e-6;
        let mut out: Vec<f64> =
            (0..=n).map(|i| lo * (r_max / lo).powf(i as f64 / n as f64)).collect();
        let table = match self {
            Self::CoulombPlusBounded { bounded, .. } => Some(bounded),
            Self::Tabulated { table, .. } => Some(table),
            _ => None,
        };
        if let Some(t) = table {
            out.extend(t.radii().iter().copied().filter(|&r| r > 0.0 && r <= r_max));
            // midpoints catch cubic overshoot between samples
            out.extend(t.radii().windows(2).map(|w| 0.5 * (w[0] + w[1])).filter(|&r| r > 0.0 && r <= r_max));
        }
        out
    }

    /// Checks parameter ranges, decay at `r_max`, the declared bounds on a
    /// dense logarithmic sample and the margin condition.
    pub fn check_admissible(&self, r_max: f64) -> VerificationReport {
        let mut report = VerificationReport::new("potential admissibility");
        let problems = self.validate_parameters();
        report.checks.push(Check {
            name: "parameters".into(),
            passed: problems.is_empty(),
            value: self.nu(),
            detail: if problems.is_empty() { "in range".into() } else { problems.join("; ") },
        });

        // Coulomb tails decay in closed form; only tabulated parts are sampled.
        let tail = match self {
            Self::Coulomb { .. } | Self::RegularizedCoulomb { .. } | Self::Free => None,
            Self::CoulombPlusBounded { bounded, .. } => Some(bounded.value(r_max)),
            Self::Tabulated { table, .. } => Some(table.value(r_max)),
        };
        report.checks.push(match tail {
            None => Check {
                name: "decay".into(),
                passed: true,
                value: 0.0,
                detail: "closed-form decay like 1/r".into(),
            },
            Some(t) => Check {
                name: "decay".into(),
                passed: t.abs() <= DECAY_TOL,
                value: t.abs(),
                detail: format!("|tabulated part at r_max = {r_max}| = {:.3e}, threshold {DECAY_TOL:e}", t.abs()),
            },
        });

        let (c1, c2) = self.bounds();
        let nu = self.nu();
        let mut worst = f64::INFINITY;
        let mut worst_r = 0.0;
        for r in self.sample_radii(r_max) {
            let v = self.value(r);
            let slack = (v - (-nu / r - c1)).min(c2 - v);
            if slack < worst {
                worst = slack;
                worst_r = r;
            }
        }
        report.checks.push(Check {
            name: "bounds".into(),
            passed: worst >= -BOUND_TOL,
            value: worst,
            detail: format!("smallest slack {worst:.3e} at r = {worst_r:.4e} (c1 = {c1}, c2 = {c2})"),
        });

        let margin = self.admissibility_margin();
        report.checks.push(Check {
            name: "margin".into(),
            passed: margin > 0.0 && problems.is_empty(),
            value: margin,
            detail: format!("sqrt(1-nu^2) - (c1+c2-1) = {margin:.6}"),
        });
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn pointwise_values() {
        assert_relative_eq!(PotentialSpec::Coulomb { nu: 0.5 }.evaluate(2.0).unwrap(), -0.25);
        let reg = PotentialSpec::RegularizedCoulomb { nu: 0.5, epsilon: 0.5 };
        assert_relative_eq!(reg.evaluate(0.0).unwrap(), -1.0);
        assert!(PotentialSpec::Coulomb { nu: 0.5 }.evaluate(0.0).is_err());
    }

    #[test]
    fn coulomb_and_regularized_are_admissible() {
        let report = PotentialSpec::Coulomb { nu: 0.5 }.check_admissible(300.0);
        assert!(report.passed(), "{report:?}");
        assert_relative_eq!(report.get("margin").unwrap().value, 0.75f64.sqrt() + 1.0, epsilon = 1e-12);
        assert!(PotentialSpec::RegularizedCoulomb { nu: 0.5, epsilon: 0.1 }.check_admissible(300.0).passed());
    }

    #[test]
    fn margin_failure_is_reported() {
        let table = TabulatedPotential::new(vec![0.0, 1.0, 100.0], vec![0.0, 0.0, 0.0], Interpolation::Linear).unwrap();
        let p = PotentialSpec::CoulombPlusBounded { nu: 0.9, bounded: table, c1: 1.0, c2: 0.5 };
        let report = p.check_admissible(100.0);
        assert!(!report.passed());
        assert_eq!(report.failed_names(), vec!["margin"]);
        assert_relative_eq!(report.get("margin").unwrap().value, 0.19f64.sqrt() - 0.5, epsilon = 1e-12);
    }

    #[test]
    fn violated_bound_and_slow_tail_are_reported() {
        let table = TabulatedPotential::new(vec![0.0, 1.0, 50.0], vec![0.3, 0.0, 1e-3], Interpolation::Linear).unwrap();
        let p = PotentialSpec::Tabulated { table, nu: 0.0, c1: 0.0, c2: 0.1 };
        let report = p.check_admissible(50.0);
        let failed = report.failed_names();
        assert!(failed.contains(&"bounds") && failed.contains(&"decay"), "{failed:?}");
    }

    #[test]
    fn tabulated_reproduces_samples() {
        let r = vec![0.0, 0.5, 1.5, 3.0, 7.0];
        let v = vec![-1.0, -0.7, -0.2, -0.05, 0.0];
        for interp in [Interpolation::Linear, Interpolation::Cubic] {
            let t = TabulatedPotential::new(r.clone(), v.clone(), interp).unwrap();
            for (ri, vi) in r.iter().zip(&v) {
                assert_eq!(t.value(*ri), *vi);
            }
        }
    }

    #[test]
    fn cubic_spline_is_exact_for_lines() {
        let r: Vec<f64> = (0..8).map(|i| i as f64 * 0.7).collect();
        let v: Vec<f64> = r.iter().map(|x| 2.0 - 0.5 * x).collect();
        let t = TabulatedPotential::new(r, v, Interpolation::Cubic).unwrap();
        assert_relative_eq!(t.value(2.3), 2.0 - 1.15, epsilon = 1e-13);
    }

    #[test]
    fn parser_rejects_nonincreasing_radii() {
        assert!(TabulatedPotential::parse("0 1\n1 2\n# c\n2, 3\n", Interpolation::Linear).is_ok());
        assert!(matches!(
            TabulatedPotential::parse("0 1\n1 2\n1 3\n", Interpolation::Linear),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    proptest! {
        #[test]
        fn regularization_dominates_coulomb(nu in 0.01f64..0.99, eps in 1e-4f64..2.0, r in 1e-4f64..100.0) {
            let c = PotentialSpec::Coulomb { nu }.value(r);
            let v = PotentialSpec::RegularizedCoulomb { nu, epsilon: eps }.value(r);
            let v2 = PotentialSpec::RegularizedCoulomb { nu, epsilon: 1.5 * eps }.value(r);
            prop_assert!(v >= c);
            prop_assert!(v2 > v);
        }

        #[test]
        fn admissibility_is_monotone_in_nu(nu in 0.0f64..0.999, frac in 0.0f64..1.0, c1 in 0.0f64..1.5, c2 in 0.0f64..1.5) {
            let table = TabulatedPotential::new(vec![0.0, 1.0], vec![0.0, 0.0], Interpolation::Linear).unwrap();
            let p = PotentialSpec::CoulombPlusBounded { nu, bounded: table, c1, c2 };
            if p.admissibility_margin() > 0.0 {
                prop_assert!(p.with_nu(nu * frac).admissibility_margin() > 0.0);
            }
        }
    }
}
