//! Seeded random split operators, the dense-oracle fuzz driver, and the
//! monotonicity property suite for the Schur-complement forms.
//!
//! Every case draws from its own ChaCha stream (`seed`, case index), so
//! results are identical under sequential and parallel execution.

use std::ops::RangeInclusive;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::minmax::{write_matrix_text, SolveOptions, SplitOperator};

/// Absolute agreement required between `solve_level` and the dense oracle.
pub const ORACLE_TOL: f64 = 1e-9;
/// Relative slack allowed in the monotonicity and sandwich inequalities.
pub const PROPERTY_SLACK: f64 = 1e-10;

fn symmetric<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    m = (&m + m.transpose()) * 0.5;
    m
}

fn gram<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let r = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    DMatrix::identity(n, n) * 0.5 + &r * r.transpose() / n as f64
}

/// Unconstrained random operator; `with_gram = false` gives `S = I`.
pub fn random_split_operator<R: Rng>(
    rng: &mut R,
    dim_plus: usize,
    dim_minus: usize,
    with_gram: bool,
) -> SplitOperator {
    let (np, nm) = (dim_plus, dim_minus);
    let (s_pp, s_mm) = if with_gram {
        (gram(rng, np), gram(rng, nm))
    } else {
        (DMatrix::identity(np, np), DMatrix::identity(nm, nm))
    };
    let coupling = rng.random_range(0.1..2.0);
    let a_pm = DMatrix::from_fn(np, nm, |_, _| rng.random_range(-1.0..1.0) * coupling);
    SplitOperator::new(symmetric(rng, np) * 2.0, symmetric(rng, nm) * 2.0, a_pm, s_pp, s_mm)
        .expect("random Gram blocks are positive definite")
}

/// Random operator shifted on the "+" block so that `Q_E ≥ margin·S₊₊` just
/// above the gap constant; such operators satisfy the positivity hypothesis.
pub fn random_admissible<R: Rng>(rng: &mut R, dim: usize) -> SplitOperator {
    let dim_plus = rng.random_range(1..dim);
    let with_gram = rng.random_bool(0.5);
    let op = random_split_operator(rng, dim_plus, dim - dim_plus, with_gram);
    let a = op.gap_constant();
    let probe = a + 1e-8 * (1.0 + a.abs());
    let q_min = op.check_hypotheses(probe).expect("probe above gap").q_min_eigenvalue;
    let margin = rng.random_range(0.05..1.0);
    op.with_plus_shift((margin - q_min).max(0.0))
}

/// Random operator pushed down on the "+" block until the full pencil has
/// fewer than `dim_plus` eigenvalues above `a`, which rules out the
/// positivity hypothesis for every energy above the gap.
pub fn random_counterexample<R: Rng>(rng: &mut R, dim: usize) -> SplitOperator {
    let dim_plus = rng.random_range(1..dim);
    let with_gram = rng.random_bool(0.5);
    let op = random_split_operator(rng, dim_plus, dim - dim_plus, with_gram);
    let a = op.gap_constant();
    let mut shift = 1.0;
    loop {
        let candidate = op.with_plus_shift(-shift);
        let above = candidate
            .full_eigenvalues()
            .expect("Gram positive definite")
            .iter()
            .filter(|&&v| v > a)
            .count();
        if above < dim_plus {
            return candidate;
        }
        shift *= 2.0;
    }
}

/// Deterministic generator for case `index` of a run seeded with `seed`.
pub fn case_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// A fuzz case that failed, kept in the plain-text matrix format for replay.
#[derive(Debug, Clone, Serialize)]
pub struct FuzzFailure {
    pub index: usize,
    pub detail: String,
    pub matrix: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleFuzzSummary {
    pub seed: u64,
    pub cases: usize,
    pub levels_checked: usize,
    pub agreements: usize,
    pub max_abs_error: f64,
    pub counterexamples: usize,
    pub counterexamples_rejected: usize,
    pub failures: Vec<FuzzFailure>,
}

impl OracleFuzzSummary {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
            && self.agreements == self.cases
            && self.counterexamples_rejected == self.counterexamples
    }
}

enum CaseOutcome {
    Agree { levels: usize, err: f64 },
    Disagree { levels: usize, err: f64, failure: FuzzFailure },
    Rejected,
    Accepted(FuzzFailure),
}

fn oracle_case(op: &SplitOperator, index: usize, opts: &SolveOptions) -> CaseOutcome {
    let fail = |detail: String| FuzzFailure { index, detail, matrix: write_matrix_text(op) };
    let a = op.gap_constant();
    let oracle = match op.dense_oracle(a, f64::INFINITY) {
        Ok(v) => v,
        Err(e) => return CaseOutcome::Disagree { levels: 0, err: f64::NAN, failure: fail(e.to_string()) },
    };
    if oracle.len() < op.dim_plus() {
        let failure = fail(format!("{} eigenvalues above a for {} \"+\" dimensions", oracle.len(), op.dim_plus()));
        return CaseOutcome::Disagree { levels: 0, err: f64::NAN, failure };
    }
    let mut err: f64 = 0.0;
    for k in 1..=op.dim_plus() {
        match op.solve_level(k, opts) {
            Ok(sol) => err = err.max((sol.lambda - oracle[k - 1]).abs()),
            Err(e) => {
                let failure = fail(format!("level {k}: {e}"));
                return CaseOutcome::Disagree { levels: k - 1, err, failure };
            }
        }
    }
    if err <= ORACLE_TOL {
        CaseOutcome::Agree { levels: op.dim_plus(), err }
    } else {
        let failure = fail(format!("max |λ_k − oracle| = {err:e}"));
        CaseOutcome::Disagree { levels: op.dim_plus(), err, failure }
    }
}

fn counterexample_case(op: &SplitOperator, index: usize, opts: &SolveOptions) -> CaseOutcome {
    match op.solve_level(1, opts) {
        Err(Error::HypothesisViolated { .. }) => CaseOutcome::Rejected,
        Err(e) => CaseOutcome::Accepted(FuzzFailure {
            index,
            detail: format!("rejected with the wrong error: {e}"),
            matrix: write_matrix_text(op),
        }),
        Ok(sol) => CaseOutcome::Accepted(FuzzFailure {
            index,
            detail: format!("counterexample accepted with λ₁ = {}", sol.lambda),
            matrix: write_matrix_text(op),
        }),
    }
}

/// Runs `cases` admissible operators of dimension in `dims` against the dense
/// oracle, plus `counterexamples` operators that must be rejected.
pub fn oracle_fuzz(
    cases: usize,
    counterexamples: usize,
    dims: RangeInclusive<usize>,
    seed: u64,
    opts: &SolveOptions,
    execution: Execution,
) -> Result<OracleFuzzSummary> {
    if *dims.start() < 2 || dims.is_empty() {
        return Err(Error::InvalidInput(format!("fuzz dimensions {dims:?} must be at least 2")));
    }
    let indices: Vec<usize> = (0..cases + counterexamples).collect();
    let outcomes = execution.map(&indices, |&i| {
        let mut rng = case_rng(seed, i);
        let dim = rng.random_range(dims.clone());
        if i < cases {
            oracle_case(&random_admissible(&mut rng, dim), i, opts)
        } else {
            counterexample_case(&random_counterexample(&mut rng, dim), i, opts)
        }
    });
    let mut summary = OracleFuzzSummary {
        seed,
        cases,
        levels_checked: 0,
        agreements: 0,
        max_abs_error: 0.0,
        counterexamples,
        counterexamples_rejected: 0,
        failures: Vec::new(),
    };
    for outcome in outcomes {
        match outcome {
            CaseOutcome::Agree { levels, err } => {
                summary.levels_checked += levels;
                summary.agreements += 1;
                summary.max_abs_error = summary.max_abs_error.max(err);
            }
            CaseOutcome::Disagree { levels, err, failure } => {
                summary.levels_checked += levels;
                if err.is_finite() {
                    summary.max_abs_error = summary.max_abs_error.max(err);
                }
                summary.failures.push(failure);
            }
            CaseOutcome::Rejected => summary.counterexamples_rejected += 1,
            CaseOutcome::Accepted(failure) => summary.failures.push(failure),
        }
    }
    Ok(summary)
}

/// Signed margins (`rhs − lhs`, nonnegative when the inequality holds) for
/// one `(operator, E, E′, x₊)` sample with `a < E < E′`.
#[derive(Debug, Clone, Serialize)]
pub struct PropertyMargins {
    /// `n_{E′} − ‖x₊‖`.
    pub norm_floor: f64,
    /// `n_E − n_{E′}`.
    pub norm_order: f64,
    /// `r·n_{E′} − n_E` with `r = (E′ − a)/(E − a)`.
    pub norm_ratio: f64,
    /// `Q_E − Q_{E′} − (E′ − E) n_{E′}²`.
    pub sandwich_lower: f64,
    /// `(E′ − E) n_E² − (Q_E − Q_{E′})`.
    pub sandwich_upper: f64,
    /// `|Q_E − φ_E(x₊, L_E x₊)|`, which should vanish.
    pub sup_defect: f64,
    /// `min_y Q_E − φ_E(x₊, y)` over the random probes `y`.
    pub sup_dominance: f64,
    pub norm_scale: f64,
    pub form_scale: f64,
}

impl PropertyMargins {
    /// Worst margin relative to its scale; the sample passes when this is at
    /// least `−slack`.
    pub fn worst_relative(&self) -> f64 {
        let norms = [self.norm_floor, self.norm_order, self.norm_ratio]
            .into_iter()
            .fold(f64::INFINITY, f64::min)
            / self.norm_scale;
        let forms = [self.sandwich_lower, self.sandwich_upper, self.sup_dominance, -self.sup_defect]
            .into_iter()
            .fold(f64::INFINITY, f64::min)
            / self.form_scale;
        norms.min(forms)
    }

    pub fn holds(&self, slack: f64) -> bool {
        self.worst_relative() >= -slack
    }
}

/// Evaluates all monotonicity, sandwich and sup-consistency margins at one
/// sample. `probes` are trial "−" vectors for the sup check.
pub fn property_margins(
    op: &SplitOperator,
    energy: f64,
    energy_hi: f64,
    x_plus: &DVector<f64>,
    probes: &[DVector<f64>],
) -> Result<PropertyMargins> {
    if !(energy_hi > energy) {
        return Err(Error::InvalidInput(format!("need E < E′, got {energy} and {energy_hi}")));
    }
    let a = op.gap_constant();
    let lo = op.schur_pencil(energy)?;
    let hi = op.schur_pencil(energy_hi)?;
    let plain = crate::linalg::quad(op.s_pp(), x_plus).sqrt();
    let (n_lo, n_hi) = (lo.graph_norm_sq(x_plus).sqrt(), hi.graph_norm_sq(x_plus).sqrt());
    let ratio = (energy_hi - a) / (energy - a);
    let (q_lo, q_hi) = (lo.q_value(x_plus), hi.q_value(x_plus));
    let de = energy_hi - energy;

    let y_star = op.maximizer(energy, x_plus)?;
    let phi_star = op.phi(energy, x_plus, &y_star);
    let sup_dominance = probes
        .iter()
        .map(|y| q_lo - op.phi(energy, x_plus, y))
        .fold(f64::INFINITY, f64::min);

    let form_scale = [q_lo.abs(), q_hi.abs(), de * n_lo * n_lo, phi_star.abs()]
        .into_iter()
        .fold(f64::MIN_POSITIVE, f64::max);
    Ok(PropertyMargins {
        norm_floor: n_hi - plain,
        norm_order: n_lo - n_hi,
        norm_ratio: ratio * n_hi - n_lo,
        sandwich_lower: (q_lo - q_hi) - de * n_hi * n_hi,
        sandwich_upper: de * n_lo * n_lo - (q_lo - q_hi),
        sup_defect: (q_lo - phi_star).abs(),
        sup_dominance,
        norm_scale: (ratio * n_hi).max(f64::MIN_POSITIVE),
        form_scale,
    })
}

/// Energies `a < E < E′` spread over several decades above the gap constant.
pub fn random_energy_pair<R: Rng>(rng: &mut R, gap: f64) -> (f64, f64) {
    let unit = 1.0 + gap.abs();
    let e = gap + unit * 10f64.powf(rng.random_range(-4.0..1.0));
    let e2 = e + unit * 10f64.powf(rng.random_range(-4.0..1.0));
    (e, e2)
}

pub fn random_vector<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertySuiteSummary {
    pub seed: u64,
    pub samples: usize,
    pub slack: f64,
    pub worst_relative: f64,
    pub violations: usize,
    pub failures: Vec<FuzzFailure>,
}

impl PropertySuiteSummary {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.failures.is_empty()
    }
}

/// Random `(operator, E, E′, x₊)` samples from [`random_admissible`].
pub fn property_suite(
    samples: usize,
    dims: RangeInclusive<usize>,
    seed: u64,
    execution: Execution,
) -> Result<PropertySuiteSummary> {
    if *dims.start() < 2 || dims.is_empty() {
        return Err(Error::InvalidInput(format!("property dimensions {dims:?} must be at least 2")));
    }
    let indices: Vec<usize> = (0..samples).collect();
    let results = execution.map(&indices, |&i| {
        let mut rng = case_rng(seed, i);
        let dim = rng.random_range(dims.clone());
        let op = random_admissible(&mut rng, dim);
        (op.clone(), sample_margins(&mut rng, &op))
    });
    summarize_properties(seed, results)
}

/// Property margins on a fixed operator with random energies and vectors,
/// for instance an assembled Dirac channel.
pub fn property_suite_on(
    op: &SplitOperator,
    samples: usize,
    seed: u64,
    execution: Execution,
) -> Result<PropertySuiteSummary> {
    let indices: Vec<usize> = (0..samples).collect();
    let results = execution.map(&indices, |&i| {
        let mut rng = case_rng(seed, i);
        (op.clone(), sample_margins(&mut rng, op))
    });
    summarize_properties(seed, results)
}

fn sample_margins<R: Rng>(rng: &mut R, op: &SplitOperator) -> Result<PropertyMargins> {
    let (e, e2) = random_energy_pair(rng, op.gap_constant());
    let x = random_vector(rng, op.dim_plus());
    let probes: Vec<_> = (0..4).map(|_| random_vector(rng, op.dim_minus())).collect();
    property_margins(op, e, e2, &x, &probes)
}

fn summarize_properties(
    seed: u64,
    results: Vec<(SplitOperator, Result<PropertyMargins>)>,
) -> Result<PropertySuiteSummary> {
    let mut summary = PropertySuiteSummary {
        seed,
        samples: results.len(),
        slack: PROPERTY_SLACK,
        worst_relative: f64::INFINITY,
        violations: 0,
        failures: Vec::new(),
    };
    for (index, (op, res)) in results.into_iter().enumerate() {
        let margins = res?;
        let worst = margins.worst_relative();
        summary.worst_relative = summary.worst_relative.min(worst);
        if !margins.holds(PROPERTY_SLACK) {
            summary.violations += 1;
            summary.failures.push(FuzzFailure {
                index,
                detail: format!("worst relative margin {worst:e}"),
                matrix: write_matrix_text(&op),
            });
        }
    }
    Ok(summary)
}
