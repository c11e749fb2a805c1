//! Generator matrix of the truncated two-patch chain.
//!
//! States `(x, y)` with `0 <= x, y <= N` are flattened by
//! `f(x, y) = (N + 1) x + y + 1` (1-based). Internally everything is 0-based;
//! the 1-based index is used at the API surface and in exports.

use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::reaction_network::{for_each_move, StochasticRates};

/// Dense conversion is refused above this many states.
pub const MAX_DENSE_DIM: usize = 2500;

/// Nonzero count of the generator for truncation `n`: `7N^2 + 4N - 2`.
pub fn expected_nonzeros(n: usize) -> usize {
    7 * n * n + 4 * n - 2
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct StateSpace {
    pub n_max: usize,
}

impl StateSpace {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::validation("n_max", "must be at least 1"));
        }
        Ok(StateSpace { n_max })
    }

    pub fn size(&self) -> usize {
        (self.n_max + 1) * (self.n_max + 1)
    }

    fn check(&self, x: usize, y: usize) -> Result<()> {
        if x > self.n_max || y > self.n_max {
            return Err(Error::Bounds {
                what: "state",
                detail: format!("({x}, {y}) outside [0, {}]^2", self.n_max),
            });
        }
        Ok(())
    }

    /// 1-based flattened index.
    pub fn index(&self, x: usize, y: usize) -> Result<usize> {
        self.check(x, y)?;
        Ok(self.offset(x, y) + 1)
    }

    /// Inverse of [`StateSpace::index`].
    pub fn state(&self, index: usize) -> Result<(usize, usize)> {
        if index == 0 || index > self.size() {
            return Err(Error::Bounds {
                what: "index",
                detail: format!("{index} outside [1, {}]", self.size()),
            });
        }
        Ok(self.state_at(index - 1))
    }

    /// 0-based offset; caller guarantees the state is in range.
    pub(crate) fn offset(&self, x: usize, y: usize) -> usize {
        (self.n_max + 1) * x + y
    }

    pub(crate) fn state_at(&self, offset: usize) -> (usize, usize) {
        (offset / (self.n_max + 1), offset % (self.n_max + 1))
    }

    pub fn states(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..=self.n_max).flat_map(move |x| (0..=self.n_max).map(move |y| (x, y)))
    }
}

/// One stored generator entry, 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Triplet {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Sparse generator, triplets sorted row-major then by column.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorMatrix {
    space: StateSpace,
    triplets: Vec<Triplet>,
    row_ptr: Vec<usize>,
    exit_rates: Vec<f64>,
}

impl GeneratorMatrix {
    /// Builds from arbitrary 0-based triplets; duplicates are summed.
    pub fn from_triplets(space: StateSpace, mut triplets: Vec<Triplet>) -> Result<Self> {
        let dim = space.size();
        if let Some(t) = triplets.iter().find(|t| t.row >= dim || t.col >= dim) {
            return Err(Error::Bounds {
                what: "triplet",
                detail: format!("({}, {}) outside dimension {dim}", t.row, t.col),
            });
        }
        triplets.sort_by_key(|t| (t.row, t.col));
        let mut merged: Vec<Triplet> = Vec::with_capacity(triplets.len());
        for t in triplets {
            match merged.last_mut() {
                Some(last) if last.row == t.row && last.col == t.col => last.value += t.value,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.value != 0.0);
        let mut row_ptr = vec![0; dim + 1];
        for t in &merged {
            row_ptr[t.row + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut exit_rates = vec![0.0; dim];
        for t in &merged {
            if t.row != t.col {
                exit_rates[t.row] += t.value;
            }
        }
        Ok(GeneratorMatrix {
            space,
            triplets: merged,
            row_ptr,
            exit_rates,
        })
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.space.size()
    }

    pub fn nonzeros(&self) -> usize {
        self.triplets.len()
    }

    pub fn triplets(&self) -> &[Triplet] {
        &self.triplets
    }

    /// Stored entries of row `row` (0-based).
    pub fn row(&self, row: usize) -> &[Triplet] {
        &self.triplets[self.row_ptr[row]..self.row_ptr[row + 1]]
    }

    /// Sum of off-diagonal entries of each row (0-based).
    pub fn exit_rates(&self) -> &[f64] {
        &self.exit_rates
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let r = self.row(row);
        r.binary_search_by_key(&col, |t| t.col).map(|i| r[i].value).unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        let dim = self.dim();
        if dim > MAX_DENSE_DIM {
            return Err(Error::validation(
                "n_max",
                format!("dense conversion limited to {MAX_DENSE_DIM} states, got {dim}"),
            ));
        }
        let mut m = DMatrix::zeros(dim, dim);
        for t in &self.triplets {
            m[(t.row, t.col)] = t.value;
        }
        Ok(m)
    }

    /// Matrix Market coordinate export with 1-based indices.
    pub fn write_matrix_market<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(out, "{} {} {}", self.dim(), self.dim(), self.nonzeros())?;
        for t in &self.triplets {
            writeln!(out, "{} {} {:e}", t.row + 1, t.col + 1, t.value)?;
        }
        Ok(())
    }
}

pub fn build_generator(rates: &StochasticRates) -> Result<GeneratorMatrix> {
    let space = StateSpace::new(rates.n_max)?;
    let mut triplets = Vec::with_capacity(expected_nonzeros(rates.n_max));
    for (x, y) in space.states() {
        let row = space.offset(x, y);
        let mut exit = 0.0;
        let start = triplets.len();
        for_each_move((x, y), rates, |m| {
            let (tx, ty) = m.apply((x, y));
            triplets.push(Triplet {
                row,
                col: space.offset(tx, ty),
                value: m.rate,
            });
            exit += m.rate;
        });
        debug_assert!(
            {
                let mut cols: Vec<_> = triplets[start..].iter().map(|t| t.col).collect();
                cols.sort_unstable();
                cols.windows(2).all(|w| w[0] != w[1])
            },
            "two moves out of ({x}, {y}) share a target"
        );
        if exit > 0.0 {
            triplets.push(Triplet {
                row,
                col: row,
                value: -exit,
            });
        }
    }
    GeneratorMatrix::from_triplets(space, triplets)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub dim: usize,
    pub nonzeros: usize,
    pub expected_nonzeros: usize,
    /// Max over rows of `|row sum| / (1 + exit rate)`.
    pub max_row_sum_deviation: f64,
    /// 1-based `(row, col)` of entries with the wrong sign.
    pub sign_violations: Vec<(usize, usize)>,
    /// States whose row is identically zero.
    pub absorbing_states: Vec<(usize, usize)>,
    pub row_sums_ok: bool,
    pub signs_ok: bool,
    pub count_ok: bool,
    pub absorbing_ok: bool,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.row_sums_ok && self.signs_ok && self.count_ok && self.absorbing_ok
    }
}

pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

pub fn validate_generator(q: &GeneratorMatrix) -> ValidationReport {
    let space = q.space();
    let mut max_dev: f64 = 0.0;
    let mut sign_violations = Vec::new();
    let mut absorbing_states = Vec::new();
    for row in 0..q.dim() {
        let entries = q.row(row);
        let mut sum = 0.0;
        let mut off = 0.0;
        for t in entries {
            sum += t.value;
            if t.col == row {
                if t.value > 0.0 {
                    sign_violations.push((row + 1, t.col + 1));
                }
            } else {
                off += t.value.abs();
                if t.value < 0.0 {
                    sign_violations.push((row + 1, t.col + 1));
                }
            }
        }
        max_dev = max_dev.max(sum.abs() / (1.0 + off));
        if entries.iter().all(|t| t.value == 0.0) {
            absorbing_states.push(space.state_at(row));
        }
    }
    let expected = expected_nonzeros(space.n_max);
    ValidationReport {
        dim: q.dim(),
        nonzeros: q.nonzeros(),
        expected_nonzeros: expected,
        max_row_sum_deviation: max_dev,
        row_sums_ok: max_dev < ROW_SUM_TOLERANCE,
        signs_ok: sign_violations.is_empty(),
        count_ok: q.nonzeros() == expected,
        absorbing_ok: absorbing_states == [(0, 0)],
        sign_violations,
        absorbing_states,
    }
}
