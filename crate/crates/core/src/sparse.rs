//! Compressed sparse row storage and element-wise assembly into a fixed pattern.

use crate::error::{Error, Result};

/// Sparse matrix in CSR form. Column indices are strictly increasing within
/// each row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_raw_parts(
        nrows: usize,
        ncols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != nrows + 1 {
            return Err(Error::invalid("row offsets must have nrows + 1 entries"));
        }
        if col_indices.len() != values.len() || row_offsets[nrows] != values.len() {
            return Err(Error::invalid("inconsistent CSR array lengths"));
        }
        for r in 0..nrows {
            let (s, e) = (row_offsets[r], row_offsets[r + 1]);
            if s > e {
                return Err(Error::invalid("row offsets must be non-decreasing"));
            }
            let cols = &col_indices[s..e];
            if cols.windows(2).any(|w| w[0] >= w[1]) || cols.iter().any(|&c| c >= ncols) {
                return Err(Error::invalid(format!(
                    "row {r}: column indices must be strictly increasing and < ncols"
                )));
            }
        }
        Ok(CsrMatrix {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Builds a matrix from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        if sorted.iter().any(|&(r, c, _)| r >= nrows || c >= ncols) {
            return Err(Error::invalid("triplet index out of bounds"));
        }
        // stable sort keeps the summation order of duplicates deterministic
        sorted.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_offsets = vec![0usize; nrows + 1];
        let mut col_indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &sorted {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_indices.push(c);
                values.push(v);
                row_offsets[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_offsets[r + 1] += row_offsets[r];
        }
        Ok(CsrMatrix {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Copy keeping only the entries whose (row, col) satisfies `keep`.
    pub fn filtered(&self, keep: impl Fn(usize, usize) -> bool) -> CsrMatrix {
        let mut row_offsets = Vec::with_capacity(self.nrows + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for r in 0..self.nrows {
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                if keep(r, self.col_indices[k]) {
                    col_indices.push(self.col_indices[k]);
                    values.push(self.values[k]);
                }
            }
            row_offsets.push(col_indices.len());
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        CsrMatrix {
            nrows: n,
            ncols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Column indices and values of row `r`.
    #[inline]
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_offsets[r], self.row_offsets[r + 1]);
        (&self.col_indices[s..e], &self.values[s..e])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "matvec: x has wrong length");
        assert_eq!(y.len(), self.nrows, "matvec: y has wrong length");
        for (yr, w) in y.iter_mut().zip(self.row_offsets.windows(2)) {
            let (s, e) = (w[0], w[1]);
            *yr = self.values[s..e]
                .iter()
                .zip(&self.col_indices[s..e])
                .map(|(v, &c)| v * x[c])
                .sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `y += alpha * A^T x`
    pub fn mul_transpose_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                y[c] += alpha * v * xr;
            }
        }
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; self.nnz()];
        let mut vals = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            let (rc, rv) = self.row(r);
            for (&c, &v) in rc.iter().zip(rv) {
                let dst = next[c];
                cols[dst] = r;
                vals[dst] = v;
                next[c] += 1;
            }
        }
        CsrMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_offsets: counts,
            col_indices: cols,
            values: vals,
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest absolute asymmetry `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                row[c] = v;
            }
        }
        d
    }
}

/// A CSR sparsity pattern together with, for every element, the positions of
/// its local dense block inside the value array. Assembly then reduces to
/// scattering element matrices without any searching.
#[derive(Debug, Clone)]
pub struct ElementPattern {
    template: CsrMatrix,
    rows_per_elem: usize,
    cols_per_elem: usize,
    positions: Vec<usize>,
}

impl ElementPattern {
    /// `elem_rows[e]` / `elem_cols[e]` are the global row/column dofs of
    /// element `e`, flattened with fixed stride.
    pub fn new(
        nrows: usize,
        ncols: usize,
        rows_per_elem: usize,
        cols_per_elem: usize,
        elem_rows: &[usize],
        elem_cols: &[usize],
    ) -> Self {
        let nelem = elem_rows.len() / rows_per_elem;
        assert_eq!(elem_cols.len(), nelem * cols_per_elem);
        let mut row_cols: Vec<Vec<usize>> = vec![Vec::new(); nrows];
        for e in 0..nelem {
            let rs = &elem_rows[e * rows_per_elem..(e + 1) * rows_per_elem];
            let cs = &elem_cols[e * cols_per_elem..(e + 1) * cols_per_elem];
            for &r in rs {
                row_cols[r].extend_from_slice(cs);
            }
        }
        let mut row_offsets = Vec::with_capacity(nrows + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        for cols in &mut row_cols {
            cols.sort_unstable();
            cols.dedup();
            col_indices.extend_from_slice(cols);
            row_offsets.push(col_indices.len());
        }
        let values = vec![0.0; col_indices.len()];
        let template = CsrMatrix {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        };
        let mut positions = Vec::with_capacity(nelem * rows_per_elem * cols_per_elem);
        for e in 0..nelem {
            let rs = &elem_rows[e * rows_per_elem..(e + 1) * rows_per_elem];
            let cs = &elem_cols[e * cols_per_elem..(e + 1) * cols_per_elem];
            for &r in rs {
                let s = template.row_offsets[r];
                let (cols, _) = template.row(r);
                for &c in cs {
                    let k = cols.binary_search(&c).expect("pattern contains entry");
                    positions.push(s + k);
                }
            }
        }
        ElementPattern {
            template,
            rows_per_elem,
            cols_per_elem,
            positions,
        }
    }

    pub fn num_elements(&self) -> usize {
        self.positions.len() / (self.rows_per_elem * self.cols_per_elem)
    }

    /// A zero-valued matrix with this pattern.
    pub fn zeros(&self) -> CsrMatrix {
        self.template.clone()
    }

    /// Adds the row-major element block `local` of element `e` into `m`,
    /// which must have been created by [`ElementPattern::zeros`].
    #[inline]
    pub fn add_element(&self, m: &mut CsrMatrix, e: usize, local: &[f64]) {
        let stride = self.rows_per_elem * self.cols_per_elem;
        let pos = &self.positions[e * stride..(e + 1) * stride];
        for (&p, &v) in pos.iter().zip(local) {
            m.values[p] += v;
        }
    }
}
