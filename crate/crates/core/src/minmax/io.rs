//! Plain-text matrix exchange format.
//!
//! ```text
//! # comment lines are ignored
//! dim_plus dim_minus
//! <n×n entries of A, row-major>
//! <optional n×n entries of S, row-major>
//! ```
//!
//! Entries may be separated by whitespace or commas, so CSV files work too.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use super::{MinMaxSolution, SplitOperator};
use crate::error::{Error, Result};

/// One solved level as emitted in JSON results.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct LevelRecord {
    pub k: usize,
    pub lambda: f64,
    pub residual: f64,
    pub iterations: usize,
    pub bracket: [f64; 2],
}

impl From<&MinMaxSolution> for LevelRecord {
    fn from(sol: &MinMaxSolution) -> Self {
        Self {
            k: sol.k,
            lambda: sol.lambda,
            residual: sol.residual,
            iterations: sol.iterations,
            bracket: [sol.bracket_lo, sol.bracket_hi],
        }
    }
}

pub fn parse_matrix_text(text: &str) -> Result<SplitOperator> {
    let mut header: Option<(usize, usize)> = None;
    let mut values = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty());
        if header.is_none() {
            let dims: Vec<usize> = fields
                .map(|f| f.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse { line: line_no, msg: format!("bad header: {e}") })?;
            if dims.len() != 2 || dims[0] == 0 || dims[1] == 0 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "header must be two positive integers: dim_plus dim_minus".into(),
                });
            }
            header = Some((dims[0], dims[1]));
            continue;
        }
        for f in fields {
            let v: f64 = f
                .parse()
                .map_err(|e| Error::Parse { line: line_no, msg: format!("bad entry {f:?}: {e}") })?;
            values.push(v);
        }
    }
    let (np, nm) = header.ok_or(Error::Parse { line: 0, msg: "missing header".into() })?;
    let n = np + nm;
    let gram = match values.len() {
        c if c == n * n => None,
        c if c == 2 * n * n => Some(DMatrix::from_row_slice(n, n, &values[n * n..])),
        c => {
            return Err(Error::Parse {
                line: 0,
                msg: format!("expected {} or {} entries for n = {n}, found {c}", n * n, 2 * n * n),
            })
        }
    };
    let a = DMatrix::from_row_slice(n, n, &values[..n * n]);
    SplitOperator::from_full(&a, gram.as_ref(), np)
}

pub fn read_matrix_file(path: &Path) -> Result<SplitOperator> {
    parse_matrix_text(&std::fs::read_to_string(path)?)
}

/// Writes `A` and, unless it is the identity, `S`.
pub fn write_matrix_text(op: &SplitOperator) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", op.dim_plus(), op.dim_minus());
    let write_rows = |out: &mut String, m: &DMatrix<f64>| {
        for i in 0..m.nrows() {
            let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:e}", m[(i, j)])).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
    };
    write_rows(&mut out, &op.full_a());
    let s = op.full_s();
    let n = s.nrows();
    if s != DMatrix::identity(n, n) {
        write_rows(&mut out, &s);
    }
    out
}
