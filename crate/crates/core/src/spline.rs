//! Clamped B-spline bases on exponentially stretched radial grids, and the
//! Gauss–Legendre rules used for Galerkin assembly.

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Knot intervals on `[0, r_max]` whose widths grow geometrically by
/// `stretch`, densest at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub r_max: f64,
    pub n_intervals: usize,
    pub stretch: f64,
}

impl RadialGrid {
    pub const DEFAULT_STRETCH: f64 = 1.25;
    pub const DEFAULT_INTERVALS: usize = 96;

    pub fn new(r_max: f64, n_intervals: usize, stretch: f64) -> Result<Self> {
        let grid = Self { r_max, n_intervals, stretch };
        grid.validate()?;
        Ok(grid)
    }

    /// Grid whose outer radius keeps a bound state decaying like `e^{−νr}`
    /// far below double precision at the wall.
    pub fn for_coupling(nu: f64, n_intervals: usize, stretch: f64) -> Result<Self> {
        Self::new(150.0 / nu.max(0.1), n_intervals, stretch)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_max > 0.0 && self.r_max.is_finite()) {
            return Err(Error::InvalidInput(format!("r_max must be positive, got {}", self.r_max)));
        }
        if self.n_intervals < 2 {
            return Err(Error::InvalidInput("at least two knot intervals are required".into()));
        }
        if !(self.stretch >= 1.0 && self.stretch.is_finite()) {
            return Err(Error::InvalidInput(format!("stretch must be >= 1, got {}", self.stretch)));
        }
        let first = self.breakpoints()[1];
        if !(first > 0.0) {
            return Err(Error::InvalidInput("grid too stretched: first interval underflows".into()));
        }
        Ok(())
    }

    /// Strictly increasing breakpoints from `0` to `r_max`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let n = self.n_intervals;
        let widths: Vec<f64> = (0..n).map(|i| self.stretch.powi(i as i32)).collect();
        let total: f64 = widths.iter().sum();
        let mut out = Vec::with_capacity(n + 1);
        out.push(0.0);
        let mut acc = 0.0;
        for w in &widths[..n - 1] {
            acc += w;
            out.push(self.r_max * acc / total);
        }
        out.push(self.r_max);
        out
    }
}

/// Composite Gauss–Legendre rule over a set of breakpoints.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Interval index of each node.
    pub interval: Vec<usize>,
}

impl QuadratureRule {
    /// `points` nodes per interval, `first_points` on the first one.
    pub fn composite(breaks: &[f64], points: usize, first_points: usize) -> Self {
        let rule = |n: usize| -> Vec<(f64, f64)> {
            GaussLegendre::new(n.try_into().expect("at least two points"))
                .iter()
                .map(|(x, w)| (*x, *w))
                .collect()
        };
        let (base, first) = (rule(points), rule(first_points));
        let mut out = Self { nodes: Vec::new(), weights: Vec::new(), interval: Vec::new() };
        for (i, pair) in breaks.windows(2).enumerate() {
            let (a, b) = (pair[0], pair[1]);
            let (half, mid) = (0.5 * (b - a), 0.5 * (a + b));
            for &(x, w) in if i == 0 { &first } else { &base } {
                out.nodes.push(mid + half * x);
                out.weights.push(half * w);
                out.interval.push(i);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&r, &w)| w * f(r)).sum()
    }
}

/// Clamped B-splines of a given order with the first and last function
/// removed, so every retained function vanishes at `0` and at `r_max`.
///
/// Retained functions are rescaled to unit `L²` norm, which keeps the Gram
/// matrix well conditioned on strongly stretched grids.
#[derive(Debug, Clone)]
pub struct SplineBasis {
    order: usize,
    knots: Vec<f64>,
    breaks: Vec<f64>,
    scale: Vec<f64>,
}

impl SplineBasis {
    pub fn new(grid: &RadialGrid, order: usize) -> Result<Self> {
        grid.validate()?;
        if order < 2 {
            return Err(Error::InvalidInput(format!("spline order must be >= 2, got {order}")));
        }
        let breaks = grid.breakpoints();
        let mut knots = vec![0.0; order - 1];
        knots.extend_from_slice(&breaks);
        knots.extend(std::iter::repeat_n(grid.r_max, order - 1));
        let raw = knots.len() - order;
        if raw < 3 {
            return Err(Error::InvalidInput("grid too coarse for the spline order".into()));
        }
        let mut basis = Self { order, knots, breaks, scale: vec![1.0; raw - 2] };

        let rule = QuadratureRule::composite(&basis.breaks, order + 1, order + 1);
        let mut norm2 = vec![0.0; basis.len()];
        let mut vals = vec![0.0; order];
        let mut ders = vec![0.0; order];
        for ((&r, &w), &iv) in rule.nodes.iter().zip(&rule.weights).zip(&rule.interval) {
            let first = basis.eval_raw(iv, r, &mut vals, &mut ders);
            for (j, v) in vals.iter().enumerate() {
                if let Some(idx) = basis.retained(first + j) {
                    norm2[idx] += w * v * v;
                }
            }
        }
        basis.scale = norm2.iter().map(|n| 1.0 / n.sqrt()).collect();
        Ok(basis)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of retained basis functions.
    pub fn len(&self) -> usize {
        self.scale.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scale.is_empty()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breaks
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn r_max(&self) -> f64 {
        *self.breaks.last().expect("nonempty grid")
    }

    fn retained(&self, raw: usize) -> Option<usize> {
        (raw >= 1 && raw <= self.len()).then(|| raw - 1)
    }

    pub fn interval_of(&self, r: f64) -> usize {
        let n = self.breaks.len() - 1;
        match self.breaks.partition_point(|&b| b <= r) {
            0 => 0,
            p => (p - 1).min(n - 1),
        }
    }

    /// Values and derivatives of the `order` raw B-splines that are nonzero
    /// on interval `iv`; returns the raw index of the first one.
    fn eval_raw(&self, iv: usize, x: f64, vals: &mut [f64], ders: &mut [f64]) -> usize {
        let k = self.order;
        let t = &self.knots;
        let mu = iv + k - 1;
        // Cox–de Boor triangle; `low` keeps the order k−1 values for derivatives.
        let mut left = vec![0.0; k];
        let mut right = vec![0.0; k];
        vals.iter_mut().for_each(|v| *v = 0.0);
        vals[0] = 1.0;
        let mut low = vec![0.0; k];
        for j in 1..k {
            if j == k - 1 {
                low[..j].copy_from_slice(&vals[..j]);
            }
            left[j] = x - t[mu + 1 - j];
            right[j] = t[mu + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = vals[r] / (right[r + 1] + left[j - r]);
                vals[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            vals[j] = saved;
        }
        if k == 1 {
            ders[0] = 0.0;
        } else {
            // raw index of vals[j] is mu-k+1+j; of low[j] it is mu-k+2+j
            let first = mu + 1 - k;
            let p = (k - 1) as f64;
            for j in 0..k {
                let i = first + j;
                let a = if j >= 1 { low[j - 1] / (t[i + k - 1] - t[i]) } else { 0.0 };
                let b = if j + 1 < k { low[j] / (t[i + k] - t[i + 1]) } else { 0.0 };
                ders[j] = p * (a - b);
            }
        }
        mu + 1 - k
    }

    /// Evaluates the retained functions nonzero at `r` on interval `iv`:
    /// returns `(index of the first, values, derivatives)`. Entries whose
    /// raw function was removed are zero.
    pub fn eval_local(&self, iv: usize, r: f64) -> (isize, Vec<f64>, Vec<f64>) {
        let k = self.order;
        let mut vals = vec![0.0; k];
        let mut ders = vec![0.0; k];
        let first = self.eval_raw(iv, r, &mut vals, &mut ders);
        for j in 0..k {
            match self.retained(first + j) {
                Some(idx) => {
                    vals[j] *= self.scale[idx];
                    ders[j] *= self.scale[idx];
                }
                None => {
                    vals[j] = 0.0;
                    ders[j] = 0.0;
                }
            }
        }
        (first as isize - 1, vals, ders)
    }

    /// `(f(r), f′(r))` for the expansion with the given coefficients.
    pub fn eval(&self, coeffs: &[f64], r: f64) -> (f64, f64) {
        let iv = self.interval_of(r);
        let (first, vals, ders) = self.eval_local(iv, r);
        let mut f = 0.0;
        let mut df = 0.0;
        for j in 0..self.order {
            let idx = first + j as isize;
            if idx >= 0 && (idx as usize) < self.len() {
                f += coeffs[idx as usize] * vals[j];
                df += coeffs[idx as usize] * ders[j];
            }
        }
        (f, df)
    }

    /// Tabulates the basis on the nodes of `rule`.
    pub fn tabulate(&self, rule: &QuadratureRule) -> BasisTable {
        let k = self.order;
        let mut table = BasisTable {
            order: k,
            dim: self.len(),
            first: Vec::with_capacity(rule.len()),
            values: Vec::with_capacity(rule.len() * k),
            derivs: Vec::with_capacity(rule.len() * k),
        };
        for (&r, &iv) in rule.nodes.iter().zip(&rule.interval) {
            let (first, v, d) = self.eval_local(iv, r);
            table.first.push(first);
            table.values.extend(v);
            table.derivs.extend(d);
        }
        table
    }
}

/// Basis values and derivatives at every node of a quadrature rule.
#[derive(Debug, Clone)]
pub struct BasisTable {
    order: usize,
    dim: usize,
    first: Vec<isize>,
    values: Vec<f64>,
    derivs: Vec<f64>,
}

impl BasisTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `(basis index, value, derivative)` triples for the functions that are
    /// nonzero at node `q`.
    pub fn at(&self, q: usize) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        let k = self.order;
        let first = self.first[q];
        (0..k).filter_map(move |j| {
            let idx = first + j as isize;
            (idx >= 0 && (idx as usize) < self.dim)
                .then(|| (idx as usize, self.values[q * k + j], self.derivs[q * k + j]))
        })
    }

    /// `(f, f′)` at node `q` for the given coefficients.
    pub fn combine(&self, q: usize, coeffs: &[f64]) -> (f64, f64) {
        self.at(q).fold((0.0, 0.0), |(f, d), (i, v, dv)| (f + coeffs[i] * v, d + coeffs[i] * dv))
    }
}
