//! Radial Dirac operators per angular channel `κ` in a B-spline Galerkin
//! basis.
//!
//! With `D_κ = d/dr + κ/r` the channel operator acts on `(f, g)` as
//!
//! ```text
//! H = [ m + V    D_κ†   ]
//!     [ D_κ     −m + V  ]
//! ```
//!
//! so `κ = −1` holds the ground state. Both components use splines on the
//! same knots. For `κ < 0` the upper component gets order `p` and the lower
//! one order `p − 1`; for `κ > 0` the orders are swapped. With equal orders
//! a spurious level appears in the gap for `κ > 0`, and with the unswapped
//! orders `D_κ` has a null vector concentrated at the origin that drops a
//! "+" level far below the gap.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, cholesky};
use crate::minmax::{HypothesisReport, MinMaxSolution, SolveOptions, SplitOperator};
use crate::potential::PotentialSpec;
use crate::spline::{BasisTable, QuadratureRule, RadialGrid, SplineBasis};

/// Free eigenvalues with `|e|` at most this are treated as zero modes.
pub const ZERO_MODE_TOL: f64 = 1e-6;

/// Spline order and knot grid shared by both components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    /// Larger of the two component orders; the other is one less.
    pub order: usize,
    pub grid: RadialGrid,
}

impl Discretization {
    pub const DEFAULT_ORDER: usize = 7;

    /// Order 7 on 96 exponentially stretched intervals out to `150/ν`.
    pub fn reference(nu: f64) -> Self {
        Self {
            order: Self::DEFAULT_ORDER,
            grid: RadialGrid::for_coupling(nu, RadialGrid::DEFAULT_INTERVALS, RadialGrid::DEFAULT_STRETCH)
                .expect("default grid is valid"),
        }
    }

    /// Finer grid for couplings close to 1, where `f ~ r^γ` with small `γ`.
    pub fn refined(nu: f64) -> Self {
        Self {
            order: Self::DEFAULT_ORDER,
            grid: RadialGrid::for_coupling(nu, 200, 1.2).expect("refined grid is valid"),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.order < 3 {
            return Err(Error::InvalidInput(format!("spline order must be >= 3, got {}", self.order)));
        }
        self.grid.validate()
    }
}

/// Which block decomposition of the channel operator the min-max runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Splitting {
    /// Upper component in "+", lower in "−".
    Talman,
    /// Positive and negative spectral subspaces of the free operator.
    FreeEnergy,
}

impl std::str::FromStr for Splitting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "talman" => Ok(Self::Talman),
            "free-energy" | "free" => Ok(Self::FreeEnergy),
            other => Err(Error::InvalidInput(format!("unknown splitting {other:?}"))),
        }
    }
}

impl std::fmt::Display for Splitting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Talman => "talman",
            Self::FreeEnergy => "free-energy",
        })
    }
}

/// Assembled channel. Immutable once built.
#[derive(Debug, Clone)]
pub struct RadialChannel {
    kappa: i32,
    mass: f64,
    potential: PotentialSpec,
    disc: Discretization,
    upper: SplineBasis,
    lower: SplineBasis,
    rule: QuadratureRule,
    upper_table: BasisTable,
    lower_table: BasisTable,
    s_upper: DMatrix<f64>,
    s_lower: DMatrix<f64>,
    /// `d_kappa[(j, i)] = ∫ g_j (f_i′ + κ f_i/r)`.
    d_kappa: DMatrix<f64>,
    v_upper: DMatrix<f64>,
    v_lower: DMatrix<f64>,
    op: SplitOperator,
}

/// `(upper, lower)` spline orders for channel `κ`.
pub fn component_orders(kappa: i32, order: usize) -> (usize, usize) {
    if kappa < 0 {
        (order, order - 1)
    } else {
        (order - 1, order)
    }
}

/// `Σ_q w_q(r_q) B_i(r_q) C_j(r_q)` over the quadrature nodes.
fn weighted_overlap(rule: &QuadratureRule, a: &BasisTable, b: &BasisTable, weight: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.dim(), b.dim());
    for (q, (&r, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
        let ww = w * weight(r);
        if ww == 0.0 {
            continue;
        }
        for (i, vi, _) in a.at(q) {
            for (j, vj, _) in b.at(q) {
                out[(i, j)] += ww * vi * vj;
            }
        }
    }
    out
}

impl RadialChannel {
    pub fn assemble(kappa: i32, mass: f64, potential: PotentialSpec, disc: Discretization) -> Result<Self> {
        if kappa == 0 {
            return Err(Error::InvalidInput("kappa must be a nonzero integer".into()));
        }
        if !(mass >= 0.0 && mass.is_finite()) {
            return Err(Error::InvalidInput(format!("mass must be >= 0, got {mass}")));
        }
        disc.validate()?;
        let (p_upper, p_lower) = component_orders(kappa, disc.order);
        let upper = SplineBasis::new(&disc.grid, p_upper)?;
        let lower = SplineBasis::new(&disc.grid, p_lower)?;
        let p = disc.order;
        let rule = QuadratureRule::composite(upper.breakpoints(), p + 4, p + 6);
        let upper_table = upper.tabulate(&rule);
        let lower_table = lower.tabulate(&rule);

        let s_upper = weighted_overlap(&rule, &upper_table, &upper_table, |_| 1.0);
        let s_lower = weighted_overlap(&rule, &lower_table, &lower_table, |_| 1.0);
        let k = kappa as f64;
        let mut d_kappa = DMatrix::zeros(lower.len(), upper.len());
        for (q, (&r, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
            for (i, fi, dfi) in upper_table.at(q) {
                let df = dfi + k * fi / r;
                for (j, gj, _) in lower_table.at(q) {
                    d_kappa[(j, i)] += w * gj * df;
                }
            }
        }
        let mut ch = Self {
            kappa,
            mass,
            potential: PotentialSpec::Free,
            disc,
            upper,
            lower,
            rule,
            upper_table,
            lower_table,
            s_upper,
            s_lower,
            d_kappa,
            v_upper: DMatrix::zeros(0, 0),
            v_lower: DMatrix::zeros(0, 0),
            op: SplitOperator::from_full(&DMatrix::identity(2, 2), None, 1)?,
        };
        ch.set_potential(potential)?;
        Ok(ch)
    }

    /// The same bases and kinetic part with a different potential.
    pub fn with_potential(&self, potential: PotentialSpec) -> Result<Self> {
        let mut ch = self.clone();
        ch.set_potential(potential)?;
        Ok(ch)
    }

    fn set_potential(&mut self, potential: PotentialSpec) -> Result<()> {
        let values: Vec<f64> = self.rule.nodes.iter().map(|&r| potential.value(r)).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Assembly("potential is not finite at a quadrature node".into()));
        }
        let lookup = |r: f64| potential.value(r);
        self.v_upper = weighted_overlap(&self.rule, &self.upper_table, &self.upper_table, lookup);
        self.v_lower = weighted_overlap(&self.rule, &self.lower_table, &self.lower_table, lookup);
        let mut a_pp = &self.s_upper * self.mass + &self.v_upper;
        let mut a_mm = &self.s_lower * (-self.mass) + &self.v_lower;
        linalg::symmetrize(&mut a_pp);
        linalg::symmetrize(&mut a_mm);
        let mut s_pp = self.s_upper.clone();
        let mut s_mm = self.s_lower.clone();
        linalg::symmetrize(&mut s_pp);
        linalg::symmetrize(&mut s_mm);
        self.op = SplitOperator::new(a_pp, a_mm, self.d_kappa.transpose(), s_pp, s_mm)?;
        self.potential = potential;
        Ok(())
    }

    pub fn kappa(&self) -> i32 {
        self.kappa
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    pub fn upper_basis(&self) -> &SplineBasis {
        &self.upper
    }

    pub fn lower_basis(&self) -> &SplineBasis {
        &self.lower
    }

    pub fn quadrature(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn upper_table(&self) -> &BasisTable {
        &self.upper_table
    }

    pub fn lower_table(&self) -> &BasisTable {
        &self.lower_table
    }

    pub fn overlap_upper(&self) -> &DMatrix<f64> {
        &self.s_upper
    }

    pub fn overlap_lower(&self) -> &DMatrix<f64> {
        &self.s_lower
    }

    pub fn d_kappa(&self) -> &DMatrix<f64> {
        &self.d_kappa
    }

    pub fn v_overlap_upper(&self) -> &DMatrix<f64> {
        &self.v_upper
    }

    pub fn v_overlap_lower(&self) -> &DMatrix<f64> {
        &self.v_lower
    }

    /// Block form with upper component "+" and lower component "−".
    pub fn assembled(&self) -> &SplitOperator {
        &self.op
    }

    /// `(∫ f_i f_j / r, ∫ g_i g_j / r)`.
    pub fn inverse_r_overlaps(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        (
            weighted_overlap(&self.rule, &self.upper_table, &self.upper_table, |r| 1.0 / r),
            weighted_overlap(&self.rule, &self.lower_table, &self.lower_table, |r| 1.0 / r),
        )
    }

    /// Free operator `(H₀, S)` on the full two-component space.
    pub fn free_pencil(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let (np, nm) = (self.upper.len(), self.lower.len());
        let mut h0 = DMatrix::zeros(np + nm, np + nm);
        h0.view_mut((0, 0), (np, np)).copy_from(&(&self.s_upper * self.mass));
        h0.view_mut((np, np), (nm, nm)).copy_from(&(&self.s_lower * (-self.mass)));
        h0.view_mut((0, np), (np, nm)).copy_from(&self.d_kappa.transpose());
        h0.view_mut((np, 0), (nm, np)).copy_from(&self.d_kappa);
        linalg::symmetrize(&mut h0);
        (h0, linalg::block_diag(&self.s_upper, &self.s_lower))
    }

    /// `f(r_q)` and `D_κ f(r_q)` at every quadrature node.
    pub fn upper_on_nodes(&self, f: &DVector<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
        if f.len() != self.upper.len() {
            return Err(Error::InvalidInput(format!(
                "coefficient vector has length {}, the upper basis has {}",
                f.len(),
                self.upper.len()
            )));
        }
        let k = self.kappa as f64;
        let coeffs = f.as_slice();
        Ok((0..self.rule.len())
            .map(|q| {
                let (v, d) = self.upper_table.combine(q, coeffs);
                (v, d + k * v / self.rule.nodes[q])
            })
            .unzip())
    }

    /// `L²` projection of a radial function onto the upper basis.
    pub fn project_upper(&self, f: impl Fn(f64) -> f64) -> Result<DVector<f64>> {
        let mut rhs = DVector::zeros(self.upper.len());
        for (q, (&r, &w)) in self.rule.nodes.iter().zip(&self.rule.weights).enumerate() {
            let fr = f(r);
            for (i, v, _) in self.upper_table.at(q) {
                rhs[i] += w * v * fr;
            }
        }
        Ok(cholesky(&self.s_upper, "upper overlap")?.solve(&rhs))
    }
}

pub fn assemble_channel(kappa: i32, mass: f64, potential: PotentialSpec, disc: Discretization) -> Result<RadialChannel> {
    RadialChannel::assemble(kappa, mass, potential, disc)
}

pub fn talman_split(ch: &RadialChannel) -> SplitOperator {
    ch.assembled().clone()
}

/// Where free eigenvalues numerically equal to zero are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZeroModePolicy {
    Plus,
    #[default]
    Minus,
}

/// The channel operator in free-eigenvector coordinates.
#[derive(Debug, Clone)]
pub struct FreeEnergyFrame {
    /// Split operator with identity Gram blocks.
    pub op: SplitOperator,
    /// Columns are `S`-orthonormal free eigenvectors spanning "+".
    pub plus_vectors: DMatrix<f64>,
    pub minus_vectors: DMatrix<f64>,
    pub plus_energies: Vec<f64>,
    pub minus_energies: Vec<f64>,
    pub zero_modes: usize,
}

fn columns(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), idx.len(), |r, c| m[(r, idx[c])])
}

pub fn free_energy_frame(ch: &RadialChannel, policy: ZeroModePolicy) -> Result<FreeEnergyFrame> {
    let (h0, s) = ch.free_pencil();
    let eig = linalg::generalized_eigen(&h0, &s)?;
    let zero_modes = eig.values.iter().filter(|e| e.abs() <= ZERO_MODE_TOL).count();
    if zero_modes > 0 {
        warn!("free operator in channel kappa = {} has {zero_modes} zero mode(s), placed in {policy:?}", ch.kappa);
    }
    let is_plus = |e: f64| e > ZERO_MODE_TOL || (e.abs() <= ZERO_MODE_TOL && policy == ZeroModePolicy::Plus);
    let (plus, minus): (Vec<usize>, Vec<usize>) = (0..eig.values.len()).partition(|&i| is_plus(eig.values[i]));
    if plus.is_empty() || minus.is_empty() {
        return Err(Error::Assembly("free operator has an empty spectral half".into()));
    }
    let cp = columns(&eig.vectors, &plus);
    let cm = columns(&eig.vectors, &minus);
    // H = H₀ + V with H₀ diagonal in these coordinates, so a_pm is exactly
    // the potential coupling.
    let v = linalg::block_diag(ch.v_overlap_upper(), ch.v_overlap_lower());
    let diag = |idx: &[usize]| DMatrix::from_diagonal(&DVector::from_iterator(idx.len(), idx.iter().map(|&i| eig.values[i])));
    let mut a_pp = diag(&plus) + cp.transpose() * &v * &cp;
    let mut a_mm = diag(&minus) + cm.transpose() * &v * &cm;
    let a_pm = cp.transpose() * &v * &cm;
    linalg::symmetrize(&mut a_pp);
    linalg::symmetrize(&mut a_mm);
    let op = SplitOperator::new(
        a_pp,
        a_mm,
        a_pm,
        DMatrix::identity(plus.len(), plus.len()),
        DMatrix::identity(minus.len(), minus.len()),
    )?;
    Ok(FreeEnergyFrame {
        op,
        plus_energies: plus.iter().map(|&i| eig.values[i]).collect(),
        minus_energies: minus.iter().map(|&i| eig.values[i]).collect(),
        plus_vectors: cp,
        minus_vectors: cm,
        zero_modes,
    })
}

pub fn free_energy_split(ch: &RadialChannel) -> Result<SplitOperator> {
    Ok(free_energy_frame(ch, ZeroModePolicy::default())?.op)
}

/// `λ` solving `λ∫f² = ∫ (D_κf)²/(m − V + λ) + (m + V) f²`, the unique
/// root above `sup V − m`.
pub fn talman_lambda_functional(ch: &RadialChannel, f: &DVector<f64>, tol: f64) -> Result<f64> {
    let (fv, dv) = ch.upper_on_nodes(f)?;
    let rule = ch.quadrature();
    let m = ch.mass();
    let vq: Vec<f64> = rule.nodes.iter().map(|&r| ch.potential().value(r)).collect();
    let norm: f64 = rule.weights.iter().zip(&fv).map(|(w, x)| w * x * x).sum();
    if !(norm > 0.0) {
        return Err(Error::ZeroVector);
    }
    let sup_v = vq.iter().copied().fold(ch.potential().bounds().1, f64::max);
    let lo = sup_v - m;
    // F(λ) is convex and strictly decreasing; F′ = −∫(D_κf)²/den² − ∫f².
    let eval = |lam: f64| -> (f64, f64) {
        let mut val = 0.0;
        let mut der = -norm;
        for q in 0..vq.len() {
            let w = rule.weights[q];
            let den = m - vq[q] + lam;
            let d2 = dv[q] * dv[q];
            val += w * (d2 / den + (m + vq[q] - lam) * fv[q] * fv[q]);
            der -= w * d2 / (den * den);
        }
        (val, der)
    };
    let mut a = lo + 1e-12 * (1.0 + lo.abs());
    let mut fa = eval(a).0;
    if !(fa > 0.0) {
        return Err(Error::NoRoot { lo });
    }
    let mut b = a + 1.0;
    while eval(b).0 >= 0.0 {
        b = a + 2.0 * (b - a);
        if b - a > 1e12 {
            return Err(Error::NoRoot { lo });
        }
    }
    // Newton from the left stays left of the root for a convex decreasing F.
    for _ in 0..200 {
        let scale = tol * (1.0 + a.abs());
        let (_, da) = eval(a);
        let newton = a - fa / da;
        if newton - a <= scale {
            return Ok(newton.min(b));
        }
        let next = if newton < b { newton } else { 0.5 * (a + b) };
        let fn_ = eval(next).0;
        if fn_ > 0.0 {
            a = next;
            fa = fn_;
        } else {
            b = next;
        }
        if b - a <= scale {
            return Ok(0.5 * (a + b));
        }
    }
    Ok(0.5 * (a + b))
}

/// Best lower component for `f` at energy `λ`: the projection of
/// `D_κf/(m − V + λ)` onto the lower basis in the inner product weighted by
/// `m − V + λ`.
pub fn chi_from_phi(ch: &RadialChannel, f: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    let (_, dv) = ch.upper_on_nodes(f)?;
    let rule = ch.quadrature();
    let m = ch.mass();
    let table = ch.lower_table();
    let n = table.dim();
    let mut gram = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    for (q, (&r, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
        let den = m - ch.potential().value(r) + lambda;
        if !(den > 0.0) {
            return Err(Error::EnergyBelowGap { energy: lambda, gap: ch.potential().value(r) - m });
        }
        for (i, gi, _) in table.at(q) {
            rhs[i] += w * gi * dv[q];
            for (j, gj, _) in table.at(q) {
                gram[(i, j)] += w * den * gi * gj;
            }
        }
    }
    linalg::symmetrize(&mut gram);
    Ok(cholesky(&gram, "weighted lower overlap")?.solve(&rhs))
}

/// Point-nucleus Dirac–Coulomb level with `n_r` radial nodes, in units of
/// the mass.
pub fn analytic_dirac_coulomb(nu: f64, kappa: i32, n_r: u32) -> Result<f64> {
    if !(0.0..1.0).contains(&nu) {
        return Err(Error::InvalidInput(format!("coupling must satisfy 0 <= nu < 1, got {nu}")));
    }
    if kappa == 0 {
        return Err(Error::InvalidInput("kappa must be nonzero".into()));
    }
    if kappa > 0 && n_r == 0 {
        return Err(Error::InvalidInput("kappa > 0 channels start at n_r = 1".into()));
    }
    let k = kappa as f64;
    let d = n_r as f64 + (k * k - nu * nu).sqrt();
    Ok((1.0 + nu * nu / (d * d)).powf(-0.5))
}

/// `k`-th analytic level of a channel, counting from 1.
pub fn analytic_level(nu: f64, kappa: i32, k: usize) -> Result<f64> {
    let first = if kappa > 0 { 1 } else { 0 };
    analytic_dirac_coulomb(nu, kappa, first + k as u32 - 1)
}

/// Upper component `r^γ e^{−νr}` of the `κ = −1` Coulomb ground state,
/// `γ = √(1−ν²)`.
pub fn coulomb_ground_state(nu: f64) -> impl Fn(f64) -> f64 {
    let gamma = (1.0 - nu * nu).sqrt();
    move |r: f64| r.powf(gamma) * (-nu * r).exp()
}

#[derive(Debug, Clone, Serialize)]
pub struct ChannelSolution {
    pub kappa: i32,
    pub mass: f64,
    pub splitting: Splitting,
    pub hypothesis: HypothesisReport,
    pub levels: Vec<MinMaxSolution>,
}

impl ChannelSolution {
    pub fn lambdas(&self) -> Vec<f64> {
        self.levels.iter().map(|s| s.lambda).collect()
    }
}

pub fn split(ch: &RadialChannel, splitting: Splitting) -> Result<SplitOperator> {
    match splitting {
        Splitting::Talman => Ok(talman_split(ch)),
        Splitting::FreeEnergy => free_energy_split(ch),
    }
}

/// Relative distance below the continuum threshold `m` at which levels stop
/// counting as gap eigenvalues.
pub const THRESHOLD_GUARD: f64 = 1e-9;

/// Levels `1..=k_max` strictly below the continuum threshold `m` unless
/// `opts.upper_limit` says otherwise.
pub fn channel_spectrum(
    ch: &RadialChannel,
    splitting: Splitting,
    k_max: usize,
    opts: &SolveOptions,
) -> Result<ChannelSolution> {
    let op = split(ch, splitting)?;
    if k_max == 0 || k_max > op.dim_plus() {
        return Err(Error::LevelOutOfRange { k: k_max, dim: op.dim_plus() });
    }
    let hypothesis = op.lower_probe()?;
    let cap = ch.mass() - THRESHOLD_GUARD * (1.0 + ch.mass());
    let opts = SolveOptions { upper_limit: opts.upper_limit.or(Some(cap)), ..*opts };
    let levels = (1..=k_max).map(|k| op.solve_level(k, &opts)).collect::<Result<Vec<_>>>()?;
    Ok(ChannelSolution { kappa: ch.kappa(), mass: ch.mass(), splitting, hypothesis, levels })
}
