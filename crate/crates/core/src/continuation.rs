//! Continuation in the coupling `ν` at fixed regularization `ε`, and the
//! limit `ε → 0` at fixed `ν`.
//!
//! Along a sweep the perturbation `V_ν − V_ν′ = −(ν−ν′)/(r+ε)` has sup norm
//! `|ν−ν′|/ε`, which bounds how far `λ₁` can move between adjacent nodes.

use serde::Serialize;

use crate::dirac::{Discretization, RadialChannel, Splitting, split};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::minmax::SolveOptions;
use crate::potential::PotentialSpec;

/// Lower end of the gap of the free operator in units of the mass.
pub const A_MINUS: f64 = -1.0;
/// Anchor that every `λ₁` must stay above.
pub const A_PLUS: f64 = 0.0;
/// Allowed shortfall of `λ₁(ν, ε)` against the Coulomb value `√(1−ν²)`.
pub const DOMINANCE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SweepNode {
    pub nu: f64,
    pub epsilon: f64,
    pub lambda1: f64,
    pub a_nu: f64,
    pub hypothesis_pass: bool,
    pub residual: f64,
    /// `√(1−ν²)`, the `ε = 0` value.
    pub coulomb_value: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct StepCheck {
    pub from_nu: f64,
    pub to_nu: f64,
    pub jump: f64,
    /// `|Δν|/ε + 2·tol`.
    pub budget: f64,
    pub lipschitz_ok: bool,
    /// `λ₁` at the left node minus the budget stays above `a₋`.
    pub safe: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuationRun {
    pub kappa: i32,
    pub epsilon: f64,
    pub nodes: Vec<SweepNode>,
    pub steps: Vec<StepCheck>,
    pub failures: Vec<String>,
}

impl ContinuationRun {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// CSV with header `nu,epsilon,lambda1,a_nu,pass`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("nu,epsilon,lambda1,a_nu,pass\n");
        for n in &self.nodes {
            let pass = n.hypothesis_pass && n.lambda1 >= A_PLUS;
            out.push_str(&format!("{},{},{:.15e},{:.15e},{}\n", n.nu, n.epsilon, n.lambda1, n.a_nu, pass));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub kappa: i32,
    pub epsilon: f64,
    pub nu_grid: Vec<f64>,
    pub disc: Discretization,
    pub opts: SolveOptions,
    pub execution: Execution,
}

impl SweepConfig {
    /// Reference discretization sized for the smallest positive coupling.
    pub fn new(kappa: i32, epsilon: f64, nu_grid: Vec<f64>) -> Self {
        let nu_min = nu_grid.iter().copied().filter(|&v| v > 0.0).fold(1.0, f64::min);
        Self {
            kappa,
            epsilon,
            nu_grid,
            disc: Discretization::reference(nu_min),
            opts: SolveOptions::default(),
            execution: Execution::default(),
        }
    }
}

/// `lo, lo+step, …` up to and including `hi` (within rounding).
pub fn linear_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || hi < lo {
        return Err(Error::InvalidInput(format!("bad grid {lo}:{hi}:{step}")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| lo + i as f64 * step).map(|v| (v * 1e12).round() / 1e12).collect())
}

/// `(λ₁, a, hypothesis passed, residual)`; a failed hypothesis yields NaN
/// for `λ₁` instead of an error so the sweep can record it.
fn lowest_level(ch: &RadialChannel, opts: &SolveOptions) -> Result<(f64, f64, bool, f64)> {
    let op = split(ch, Splitting::Talman)?;
    let a = op.gap_constant();
    // No cap at the threshold: at ν = 0 the lowest level sits at the gap edge.
    let capped = SolveOptions { upper_limit: Some(ch.mass() + 1.0), ..*opts };
    match op.solve_level(1, &capped) {
        Ok(sol) => Ok((sol.lambda, a, true, sol.residual)),
        Err(Error::HypothesisViolated { .. }) => Ok((f64::NAN, a, false, f64::NAN)),
        Err(e) => Err(e),
    }
}

fn base_channel(kappa: i32, disc: Discretization) -> Result<RadialChannel> {
    RadialChannel::assemble(kappa, 1.0, PotentialSpec::Free, disc)
}

pub fn nu_sweep(cfg: &SweepConfig) -> Result<ContinuationRun> {
    if !(cfg.epsilon > 0.0) {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {}", cfg.epsilon)));
    }
    if cfg.nu_grid.is_empty() {
        return Err(Error::InvalidInput("empty coupling grid".into()));
    }
    if cfg.nu_grid.iter().any(|v| !(0.0..1.0).contains(v)) || cfg.nu_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("coupling grid must be ascending inside [0, 1)".into()));
    }
    let base = base_channel(cfg.kappa, cfg.disc)?;
    // Nodes share the bases and differ only in the potential.
    let solved = cfg.execution.map(&cfg.nu_grid, |&nu| -> Result<SweepNode> {
        let ch = base.with_potential(PotentialSpec::RegularizedCoulomb { nu, epsilon: cfg.epsilon })?;
        let (lambda1, a_nu, hypothesis_pass, residual) = lowest_level(&ch, &cfg.opts)?;
        Ok(SweepNode {
            nu,
            epsilon: cfg.epsilon,
            lambda1,
            a_nu,
            hypothesis_pass,
            residual,
            coulomb_value: (1.0 - nu * nu).sqrt(),
        })
    });
    let nodes = solved.into_iter().collect::<Result<Vec<_>>>()?;

    let mut failures = Vec::new();
    for n in &nodes {
        if !n.hypothesis_pass {
            failures.push(format!("hypothesis fails at nu = {}", n.nu));
        }
        if !(n.lambda1 >= A_PLUS) {
            failures.push(format!("lambda1 = {} < 0 at nu = {}", n.lambda1, n.nu));
        }
        if n.a_nu > A_PLUS || n.a_nu < A_MINUS - 1.0 {
            failures.push(format!("gap constant {} out of range at nu = {}", n.a_nu, n.nu));
        }
        if n.lambda1 < n.coulomb_value - DOMINANCE_TOL {
            failures.push(format!("lambda1 = {} below the Coulomb value {} at nu = {}", n.lambda1, n.coulomb_value, n.nu));
        }
    }
    let steps: Vec<StepCheck> = nodes
        .windows(2)
        .map(|w| {
            let budget = (w[1].nu - w[0].nu).abs() / cfg.epsilon + 2.0 * cfg.opts.tol;
            let jump = (w[1].lambda1 - w[0].lambda1).abs();
            StepCheck {
                from_nu: w[0].nu,
                to_nu: w[1].nu,
                jump,
                budget,
                lipschitz_ok: jump <= budget,
                safe: w[0].lambda1 - budget > A_MINUS,
            }
        })
        .collect();
    for s in &steps {
        if !s.lipschitz_ok {
            failures.push(format!("jump {} exceeds budget {} on [{}, {}]", s.jump, s.budget, s.from_nu, s.to_nu));
        }
        if !s.safe {
            failures.push(format!("step [{}, {}] may leave the gap", s.from_nu, s.to_nu));
        }
    }
    Ok(ContinuationRun { kappa: cfg.kappa, epsilon: cfg.epsilon, nodes, steps, failures })
}

#[derive(Debug, Clone, Serialize)]
pub struct RefinementRun {
    pub kappa: i32,
    pub nu: f64,
    /// `(ε, λ₁)` in the order given.
    pub records: Vec<(f64, f64)>,
    pub monotone: bool,
    /// Largest increase of `λ₁` between consecutive entries.
    pub max_increase: f64,
    pub raw_final: f64,
    /// Value at `ε = 0` of the quadratic through the last three records;
    /// the rate in `ε` is an empirical assumption.
    pub extrapolated: f64,
    pub extrapolation: &'static str,
}

impl RefinementRun {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epsilon,lambda1\n");
        for (e, l) in &self.records {
            out.push_str(&format!("{e},{l:.15e}\n"));
        }
        out
    }
}

/// Polynomial through the points, evaluated at 0 (Neville).
pub fn extrapolate_to_zero(points: &[(f64, f64)]) -> f64 {
    let x: Vec<f64> = points.iter().map(|p| p.0).collect();
    let mut p: Vec<f64> = points.iter().map(|p| p.1).collect();
    let n = p.len();
    for m in 1..n {
        for i in 0..n - m {
            p[i] = (x[i + m] * p[i] - x[i] * p[i + 1]) / (x[i + m] - x[i]);
        }
    }
    p[0]
}

pub fn epsilon_refine(
    kappa: i32,
    nu: f64,
    epsilons: &[f64],
    disc: Discretization,
    opts: &SolveOptions,
    execution: Execution,
) -> Result<RefinementRun> {
    if epsilons.is_empty() || epsilons.iter().any(|&e| !(e > 0.0)) || epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("epsilons must be positive and strictly descending".into()));
    }
    if !(0.0..1.0).contains(&nu) {
        return Err(Error::InvalidInput(format!("coupling must satisfy 0 <= nu < 1, got {nu}")));
    }
    let base = base_channel(kappa, disc)?;
    let solved = execution.map(epsilons, |&epsilon| -> Result<(f64, f64)> {
        let ch = base.with_potential(PotentialSpec::RegularizedCoulomb { nu, epsilon })?;
        Ok((epsilon, lowest_level(&ch, opts)?.0))
    });
    let records = solved.into_iter().collect::<Result<Vec<_>>>()?;
    let max_increase = records.windows(2).map(|w| w[1].1 - w[0].1).fold(f64::NEG_INFINITY, f64::max);
    let tail = &records[records.len().saturating_sub(3)..];
    Ok(RefinementRun {
        kappa,
        nu,
        monotone: records.len() < 2 || max_increase <= opts.tol,
        max_increase: max_increase.max(0.0),
        raw_final: records.last().expect("nonempty").1,
        extrapolated: extrapolate_to_zero(tail),
        extrapolation: "quadratic in epsilon through the last three points",
        records,
    })
}
