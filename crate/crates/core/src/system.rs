//! Sparse linear constraint systems `Ax <= b`.
//!
//! Entries are kept in row-major order (sorted by `(row, col)`), which gives
//! every constraint a contiguous slice of its support `N_i`. Derived data
//! (row norms, the per-variable constraint counts `l_j`) is computed once at
//! construction; a system is immutable afterwards.

use serde::{Deserialize, Serialize};

use crate::error::SystemError;

/// One constraint row as a sparse vector.
#[derive(Debug, Clone, Copy)]
pub struct SparseRow<'a> {
    pub cols: &'a [usize],
    pub values: &'a [f64],
}

impl SparseRow<'_> {
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.cols
            .iter()
            .zip(self.values)
            .map(|(&j, &a)| a * x[j])
            .sum()
    }

    pub fn norm_squared(&self) -> f64 {
        self.values.iter().map(|a| a * a).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }
}

/// Findings of [`SparseConstraintSystem::validate`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub empty_rows: Vec<usize>,
    pub zero_norm_rows: Vec<usize>,
    pub duplicate_entries: Vec<(usize, usize)>,
    pub non_finite_entries: Vec<(usize, usize)>,
    pub non_finite_rhs: Vec<usize>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.empty_rows.is_empty()
            && self.zero_norm_rows.is_empty()
            && self.duplicate_entries.is_empty()
            && self.non_finite_entries.is_empty()
            && self.non_finite_rhs.is_empty()
    }

    /// Short human readable list of problems, one per line.
    pub fn findings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for i in &self.empty_rows {
            out.push(format!("empty row {i}"));
        }
        for i in &self.zero_norm_rows {
            out.push(format!("zero-norm row {i}"));
        }
        for (i, j) in &self.duplicate_entries {
            out.push(format!("duplicate entry ({i}, {j})"));
        }
        for (i, j) in &self.non_finite_entries {
            out.push(format!("non-finite entry ({i}, {j})"));
        }
        for i in &self.non_finite_rhs {
            out.push(format!("non-finite rhs {i}"));
        }
        out
    }
}

/// A sparse system of `m` linear inequalities over `n` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseConstraintSystem {
    n: usize,
    m: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
    row_ptr: Vec<usize>,
    b: Vec<f64>,
    row_norms: Vec<f64>,
    var_degrees: Vec<usize>,
    valid: bool,
}

impl SparseConstraintSystem {
    /// Builds a system from `(row, col, value)` triplets and checks it with
    /// [`validate`](Self::validate). Invalid systems are rejected.
    pub fn new(
        n: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
        b: Vec<f64>,
    ) -> Result<Self, SystemError> {
        let system = Self::from_triplets(n, b.len(), triplets, b)?;
        let report = system.validate();
        if report.is_valid() {
            Ok(system)
        } else {
            Err(SystemError::Invalid(report))
        }
    }

    /// Structural construction only: indices are bounds-checked and exact
    /// zeros dropped, but duplicates, empty rows and non-finite values are
    /// kept so that [`validate`](Self::validate) can report them.
    pub fn from_triplets(
        n: usize,
        m: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
        b: Vec<f64>,
    ) -> Result<Self, SystemError> {
        if b.len() != m {
            return Err(SystemError::RhsLength {
                expected: m,
                found: b.len(),
            });
        }
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, v) in triplets {
            if i >= m {
                return Err(SystemError::RowOutOfRange { row: i, m });
            }
            if j >= n {
                return Err(SystemError::ColumnOutOfRange { col: j, n });
            }
            if v != 0.0 {
                entries.push((i, j, v));
            }
        }
        // stable: duplicates keep their input order
        entries.sort_by_key(|&(i, j, _)| (i, j));

        let mut rows = Vec::with_capacity(entries.len());
        let mut cols = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut row_ptr = vec![0usize; m + 1];
        let mut var_degrees = vec![0usize; n];
        for &(i, j, v) in &entries {
            rows.push(i);
            cols.push(j);
            values.push(v);
            row_ptr[i + 1] += 1;
            var_degrees[j] += 1;
        }
        for i in 0..m {
            row_ptr[i + 1] += row_ptr[i];
        }
        let row_norms = (0..m)
            .map(|i| {
                values[row_ptr[i]..row_ptr[i + 1]]
                    .iter()
                    .map(|a| a * a)
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();

        let mut system = Self {
            n,
            m,
            rows,
            cols,
            values,
            row_ptr,
            b,
            row_norms,
            var_degrees,
            valid: false,
        };
        system.valid = system.validate().is_valid();
        Ok(system)
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        for i in 0..self.m {
            let range = self.row_ptr[i]..self.row_ptr[i + 1];
            if range.is_empty() {
                report.empty_rows.push(i);
                continue;
            }
            let norm = self.row_norms[i];
            if norm == 0.0 {
                report.zero_norm_rows.push(i);
            }
            for e in range.clone() {
                if !self.values[e].is_finite() {
                    report.non_finite_entries.push((i, self.cols[e]));
                }
                if e > range.start && self.cols[e] == self.cols[e - 1] {
                    let dup = (i, self.cols[e]);
                    if report.duplicate_entries.last() != Some(&dup) {
                        report.duplicate_entries.push(dup);
                    }
                }
            }
        }
        for (i, bi) in self.b.iter().enumerate() {
            if !bi.is_finite() {
                report.non_finite_rhs.push(i);
            }
        }
        report
    }

    pub fn is_valid(&self) -> bool {
        self.valid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// `‖A_i‖₂` for every row.
    pub fn row_norms(&self) -> &[f64] {
        &self.row_norms
    }

    /// `l_j`: how many constraints touch variable `j`.
    pub fn var_degrees(&self) -> &[usize] {
        &self.var_degrees
    }

    /// Row index of every stored entry.
    pub fn entry_rows(&self) -> &[usize] {
        &self.rows
    }

    /// Column index of every stored entry.
    pub fn entry_cols(&self) -> &[usize] {
        &self.cols
    }

    pub fn entry_values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> SparseRow<'_> {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        SparseRow {
            cols: &self.cols[range.clone()],
            values: &self.values[range],
        }
    }

    /// The sorted support `N_i` of constraint `i`.
    pub fn support(&self, i: usize) -> &[usize] {
        &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nnz()).map(move |e| (self.rows[e], self.cols[e], self.values[e]))
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.m).map(|i| self.row(i).dot(x)).collect()
    }

    /// `A x - b`.
    pub fn residuals(&self, x: &[f64]) -> Vec<f64> {
        (0..self.m).map(|i| self.row(i).dot(x) - self.b[i]).collect()
    }

    /// `max_i (A_i x - b_i)`, or `-inf` for a system with no rows.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        (0..self.m)
            .map(|i| self.row(i).dot(x) - self.b[i])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max_i (A_i x - b_i) / ‖A_i‖`, the signed distance to the nearest
    /// violated hyperplane. This is the quantity the solvers stop on.
    pub fn max_normalized_violation(&self, x: &[f64]) -> f64 {
        (0..self.m)
            .map(|i| (self.row(i).dot(x) - self.b[i]) / self.row_norms[i])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Dense row-major copy of `A`.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n]; self.m];
        for (i, j, v) in self.triplets() {
            dense[i][j] += v;
        }
        dense
    }

    /// Same constraints with every row scaled to unit norm.
    pub fn normalized(&self) -> Self {
        let mut out = self.clone();
        for e in 0..out.nnz() {
            out.values[e] /= self.row_norms[out.rows[e]];
        }
        for i in 0..out.m {
            out.b[i] /= self.row_norms[i];
            out.row_norms[i] = 1.0;
        }
        out
    }

    /// Same `A` with a different right-hand side.
    pub fn with_rhs(&self, b: Vec<f64>) -> Result<Self, SystemError> {
        if b.len() != self.m {
            return Err(SystemError::RhsLength {
                expected: self.m,
                found: b.len(),
            });
        }
        let mut out = self.clone();
        out.valid = out.valid && b.iter().all(|v| v.is_finite());
        out.b = b;
        Ok(out)
    }

    /// Restriction to a subset of constraints, re-indexed locally.
    ///
    /// Returns the subsystem together with the global index of each local
    /// variable (the union of the chosen supports, ascending).
    pub fn restrict(&self, constraints: &[usize]) -> (Self, Vec<usize>) {
        let mut vars: Vec<usize> = constraints
            .iter()
            .flat_map(|&i| self.support(i).iter().copied())
            .collect();
        vars.sort_unstable();
        vars.dedup();
        let mut local = vec![usize::MAX; self.n];
        for (k, &j) in vars.iter().enumerate() {
            local[j] = k;
        }
        let triplets: Vec<_> = constraints
            .iter()
            .enumerate()
            .flat_map(|(r, &i)| {
                let row = self.row(i);
                row.cols
                    .iter()
                    .zip(row.values)
                    .map(|(&j, &v)| (r, local[j], v))
                    .collect::<Vec<_>>()
            })
            .collect();
        let b = constraints.iter().map(|&i| self.b[i]).collect();
        let sub = Self::from_triplets(vars.len(), constraints.len(), triplets, b)
            .expect("restriction of a well-formed system is well-formed");
        (sub, vars)
    }
}

/// Several independent systems concatenated block-diagonally.
#[derive(Debug, Clone)]
pub struct BatchedSystem {
    systems: Vec<SparseConstraintSystem>,
    var_offsets: Vec<usize>,
    con_offsets: Vec<usize>,
    combined: SparseConstraintSystem,
}

impl BatchedSystem {
    pub fn systems(&self) -> &[SparseConstraintSystem] {
        &self.systems
    }

    /// Offset of each block's first variable; has one extra trailing entry.
    pub fn var_offsets(&self) -> &[usize] {
        &self.var_offsets
    }

    /// Offset of each block's first constraint; has one extra trailing entry.
    pub fn con_offsets(&self) -> &[usize] {
        &self.con_offsets
    }

    pub fn combined(&self) -> &SparseConstraintSystem {
        &self.combined
    }

    /// Slices a concatenated point back into per-block points.
    pub fn split<'a>(&self, x: &'a [f64]) -> Vec<&'a [f64]> {
        self.var_offsets
            .windows(2)
            .map(|w| &x[w[0]..w[1]])
            .collect()
    }

    pub fn join(&self, parts: &[Vec<f64>]) -> Vec<f64> {
        parts.iter().flatten().copied().collect()
    }
}

/// Concatenates systems into one block-diagonal system.
pub fn concat(systems: &[SparseConstraintSystem]) -> Result<BatchedSystem, SystemError> {
    if systems.is_empty() {
        return Err(SystemError::EmptyBatch);
    }
    let mut var_offsets = vec![0];
    let mut con_offsets = vec![0];
    let mut triplets = Vec::new();
    let mut b = Vec::new();
    for s in systems {
        let (vo, co) = (*var_offsets.last().unwrap(), *con_offsets.last().unwrap());
        triplets.extend(s.triplets().map(|(i, j, v)| (i + co, j + vo, v)));
        b.extend_from_slice(s.b());
        var_offsets.push(vo + s.n());
        con_offsets.push(co + s.m());
    }
    let combined = SparseConstraintSystem::from_triplets(
        *var_offsets.last().unwrap(),
        *con_offsets.last().unwrap(),
        triplets,
        b,
    )?;
    Ok(BatchedSystem {
        systems: systems.to_vec(),
        var_offsets,
        con_offsets,
        combined,
    })
}
