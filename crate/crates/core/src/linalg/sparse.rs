use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Square sparse matrix in compressed-row storage.
///
/// Column indices are sorted and unique within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_offsets: Vec<usize>,
    columns: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_offsets: (0..=n).collect(),
            columns: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a matrix from unordered `(row, col, value)` triplets. Duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut builder = CsrBuilder::new(n);
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(r, c, v) in triplets {
            if r >= n || c >= n {
                return Err(Error::Dimension {
                    expected: n,
                    found: r.max(c) + 1,
                });
            }
            rows[r].push((c, v));
        }
        for row in rows.iter_mut() {
            row.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for &(c, v) in row.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => merged.push((c, v)),
                }
            }
            builder.push_row(&merged);
        }
        builder.finish()
    }

    pub fn from_dense(n: usize, dense: &[f64]) -> Result<Self> {
        if dense.len() != n * n {
            return Err(Error::Dimension {
                expected: n * n,
                found: dense.len(),
            });
        }
        let mut b = CsrBuilder::new(n);
        let mut row = Vec::new();
        for r in 0..n {
            row.clear();
            for c in 0..n {
                let v = dense[r * n + c];
                if v != 0.0 {
                    row.push((c, v));
                }
            }
            b.push_row(&row);
        }
        b.finish()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(columns, values)` of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let range = self.row_offsets[r]..self.row_offsets[r + 1];
        (&self.columns[range.clone()], &self.values[range])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.get(r, r)).collect()
    }

    /// `y = A x`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for (r, out) in y.iter_mut().enumerate() {
            let start = self.row_offsets[r];
            let end = self.row_offsets[r + 1];
            let mut acc = 0.0;
            for k in start..end {
                acc += self.values[k] * x[self.columns[k]];
            }
            *out = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: x.len(),
            });
        }
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        Ok(y)
    }

    pub fn transpose(&self) -> Self {
        let mut triplets = Vec::with_capacity(self.nnz());
        for r in 0..self.n {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                triplets.push((c, r, v));
            }
        }
        // indices are in range by construction
        Self::from_triplets(self.n, &triplets).expect("transpose of a valid matrix")
    }

    /// Largest |a_ij - a_ji| over stored entries.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.n {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `self + alpha * other`, entrywise over the union of sparsity patterns.
    pub fn add_scaled(&self, alpha: f64, other: &CsrMatrix) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: other.n,
            });
        }
        let mut b = CsrBuilder::new(self.n);
        let mut row = Vec::new();
        for r in 0..self.n {
            row.clear();
            let (ca, va) = self.row(r);
            let (cb, vb) = other.row(r);
            let (mut p, mut q) = (0, 0);
            while p < ca.len() || q < cb.len() {
                if q == cb.len() || (p < ca.len() && ca[p] < cb[q]) {
                    row.push((ca[p], va[p]));
                    p += 1;
                } else if p == ca.len() || cb[q] < ca[p] {
                    row.push((cb[q], alpha * vb[q]));
                    q += 1;
                } else {
                    row.push((ca[p], va[p] + alpha * vb[q]));
                    p += 1;
                    q += 1;
                }
            }
            b.push_row(&row);
        }
        b.finish()
    }
}

/// Row-by-row CSR construction. Each row must be pushed with sorted, unique columns.
#[derive(Debug)]
pub struct CsrBuilder {
    n: usize,
    row_offsets: Vec<usize>,
    columns: Vec<usize>,
    values: Vec<f64>,
}

impl CsrBuilder {
    pub fn new(n: usize) -> Self {
        let mut row_offsets = Vec::with_capacity(n + 1);
        row_offsets.push(0);
        Self {
            n,
            row_offsets,
            columns: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn with_capacity(n: usize, nnz: usize) -> Self {
        let mut b = Self::new(n);
        b.columns.reserve(nnz);
        b.values.reserve(nnz);
        b
    }

    pub fn push_row(&mut self, entries: &[(usize, f64)]) {
        for &(c, v) in entries {
            self.columns.push(c);
            self.values.push(v);
        }
        self.row_offsets.push(self.columns.len());
    }

    pub fn finish(self) -> Result<CsrMatrix> {
        if self.row_offsets.len() != self.n + 1 {
            return Err(Error::Dimension {
                expected: self.n,
                found: self.row_offsets.len() - 1,
            });
        }
        for r in 0..self.n {
            let cols = &self.columns[self.row_offsets[r]..self.row_offsets[r + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) || cols.iter().any(|&c| c >= self.n) {
                return Err(Error::Input(alloc::format!(
                    "row {r} has unsorted, duplicate or out-of-range columns"
                )));
            }
        }
        if self.values.iter().any(|v| v.is_nan()) {
            return Err(Error::Input("matrix contains NaN entries".into()));
        }
        Ok(CsrMatrix {
            n: self.n,
            row_offsets: self.row_offsets,
            columns: self.columns,
            values: self.values,
        })
    }
}
