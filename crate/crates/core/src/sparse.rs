//! Compressed sparse row operators and triplet assembly.

use std::io::Write;

use faer::sparse::{SparseColMat, SymbolicSparseColMat};

use crate::error::{FsiError, Result};

/// Accumulates `(row, col, value)` contributions; duplicates are summed on
/// conversion in insertion order, so identical input gives bitwise identical output.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        TripletBuilder {
            nrows,
            ncols,
            rows: Vec::new(),
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        TripletBuilder {
            nrows,
            ncols,
            rows: Vec::with_capacity(cap),
            cols: Vec::with_capacity(cap),
            vals: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.rows.push(row);
        self.cols.push(col);
        self.vals.push(value);
    }

    /// Adds every stored entry of `op` scaled by `scale`, shifted by the given offsets.
    pub fn push_operator(&mut self, op: &SparseOperator, scale: f64, row_offset: usize, col_offset: usize) {
        for i in 0..op.nrows {
            for k in op.row_ptr[i]..op.row_ptr[i + 1] {
                self.push(i + row_offset, op.col_idx[k] + col_offset, scale * op.values[k]);
            }
        }
    }

    /// Adds the transpose of `op` scaled by `scale`.
    pub fn push_transpose(&mut self, op: &SparseOperator, scale: f64, row_offset: usize, col_offset: usize) {
        for i in 0..op.nrows {
            for k in op.row_ptr[i]..op.row_ptr[i + 1] {
                self.push(op.col_idx[k] + row_offset, i + col_offset, scale * op.values[k]);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    pub fn build(self, symmetric: bool) -> SparseOperator {
        let TripletBuilder {
            nrows,
            ncols,
            rows,
            cols,
            vals,
        } = self;
        // counting sort by row keeps insertion order inside each row
        let mut counts = vec![0usize; nrows + 1];
        for &r in &rows {
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut order = vec![0usize; rows.len()];
        for (k, &r) in rows.iter().enumerate() {
            order[next[r]] = k;
            next[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(rows.len());
        let mut values = Vec::with_capacity(rows.len());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, usize)> = Vec::new();
        for i in 0..nrows {
            scratch.clear();
            for &k in &order[counts[i]..counts[i + 1]] {
                scratch.push((cols[k], k));
            }
            scratch.sort_by_key(|&(c, k)| (c, k));
            let mut iter = scratch.iter().peekable();
            while let Some(&(c, k)) = iter.next() {
                let mut v = vals[k];
                while let Some(&&(c2, k2)) = iter.peek() {
                    if c2 != c {
                        break;
                    }
                    v += vals[k2];
                    iter.next();
                }
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        SparseOperator {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
            symmetric,
        }
    }
}

/// Sparse matrix in CSR layout with an advisory symmetry flag.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseOperator {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseOperator {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
            symmetric: nrows == ncols,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = TripletBuilder::with_capacity(n, n, n);
        for i in 0..n {
            t.push(i, i, 1.0);
        }
        t.build(true)
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

    pub fn is_symmetric_flagged(&self) -> bool {
        self.symmetric
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates the stored entries of row `i` as `(col, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    /// `y = Aᵀ x`
    pub fn mul_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[k]] += self.values[k] * xi;
            }
        }
        y
    }

    pub fn transpose(&self) -> SparseOperator {
        let nnz = self.nnz();
        let mut row_ptr = vec![0usize; self.ncols + 1];
        for &j in &self.col_idx {
            row_ptr[j + 1] += 1;
        }
        for j in 0..self.ncols {
            row_ptr[j + 1] += row_ptr[j];
        }
        let mut next = row_ptr.clone();
        let mut col_idx = vec![0usize; nnz];
        let mut values = vec![0.0; nnz];
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let p = &mut next[self.col_idx[k]];
                col_idx[*p] = i;
                values[*p] = self.values[k];
                *p += 1;
            }
        }
        SparseOperator {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr,
            col_idx,
            values,
            symmetric: self.symmetric,
        }
    }

    /// Upper triangle of `(A + Aᵀ)/2 + diag(shift)`; square operators only.
    pub fn symmetric_part_upper(&self, shift: &[f64]) -> Result<SparseOperator> {
        if self.nrows != self.ncols || shift.len() != self.nrows {
            return Err(FsiError::DimensionMismatch {
                context: "symmetric part",
                expected: self.nrows,
                actual: if self.nrows != self.ncols { self.ncols } else { shift.len() },
            });
        }
        let t = self.transpose();
        let n = self.nrows;
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(self.nnz() + n);
        let mut values = Vec::with_capacity(self.nnz() + n);
        row_ptr.push(0);
        for i in 0..n {
            let mut a = self.row(i).filter(|&(j, _)| j >= i).peekable();
            let mut b = t.row(i).filter(|&(j, _)| j >= i).peekable();
            let mut diag_done = false;
            loop {
                let (j, v) = match (a.peek().copied(), b.peek().copied()) {
                    (None, None) => break,
                    (Some((ja, va)), Some((jb, vb))) if ja == jb => {
                        a.next();
                        b.next();
                        (ja, 0.5 * (va + vb))
                    }
                    (Some((ja, va)), Some((jb, _))) if ja < jb => {
                        a.next();
                        (ja, 0.5 * va)
                    }
                    (Some((ja, va)), None) => {
                        a.next();
                        (ja, 0.5 * va)
                    }
                    (_, Some((jb, vb))) => {
                        b.next();
                        (jb, 0.5 * vb)
                    }
                };
                if !diag_done && j > i && shift[i] != 0.0 {
                    col_idx.push(i);
                    values.push(shift[i]);
                }
                let extra = if j == i { shift[i] } else { 0.0 };
                diag_done |= j >= i;
                col_idx.push(j);
                values.push(v + extra);
            }
            if !diag_done && shift[i] != 0.0 {
                col_idx.push(i);
                values.push(shift[i]);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(SparseOperator {
            nrows: n,
            ncols: n,
            row_ptr,
            col_idx,
            values,
            symmetric: false,
        })
    }

    /// CSR arrays of `self` read as the CSC arrays of `selfᵀ`.
    fn into_faer_transposed(self) -> Result<SparseColMat<usize, f64>> {
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(FsiError::Solver {
                stage: "sparse-conversion",
                message: "non-finite matrix entry".into(),
                residual_history: Vec::new(),
            });
        }
        let symbolic = SymbolicSparseColMat::new_checked(self.ncols, self.nrows, self.row_ptr, None, self.col_idx);
        Ok(SparseColMat::new(symbolic, self.values))
    }

    pub fn scaled(&self, s: f64) -> SparseOperator {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `a·self + b·other`
    pub fn linear_combination(&self, a: f64, other: &SparseOperator, b: f64) -> SparseOperator {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t = TripletBuilder::with_capacity(self.nrows, self.ncols, self.nnz() + other.nnz());
        t.push_operator(self, a, 0, 0);
        t.push_operator(other, b, 0, 0);
        t.build(self.symmetric && other.symmetric)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// max |Aᵢⱼ − Aⱼᵢ| over stored entries.
    pub fn symmetry_error(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let mut err = 0.0f64;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                err = err.max((v - self.get(j, i)).abs());
            }
        }
        err
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] += v;
            }
        }
        d
    }

    pub fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        self.transpose().into_faer_transposed()
    }

    /// Upper triangle as the CSC lower triangle of the symmetric matrix.
    pub fn upper_to_faer_lower(&self) -> Result<SparseColMat<usize, f64>> {
        self.filtered(|i, j| j >= i).into_faer_transposed()
    }

    /// Writes the operator as a MatrixMarket coordinate file (1-based indices).
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v)?;
            }
        }
        Ok(())
    }

    /// Sparse product `self · other` (row-by-row accumulation, columns sorted).
    pub fn matmul(&self, other: &SparseOperator) -> Result<SparseOperator> {
        if self.ncols != other.nrows {
            return Err(FsiError::DimensionMismatch {
                context: "sparse product",
                expected: self.ncols,
                actual: other.nrows,
            });
        }
        let mut acc = vec![0.0; other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut touched: Vec<usize> = Vec::new();
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..self.nrows {
            touched.clear();
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = 0.0;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                col_idx.push(j);
                values.push(acc[j]);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(SparseOperator {
            nrows: self.nrows,
            ncols: other.ncols,
            row_ptr,
            col_idx,
            values,
            symmetric: false,
        })
    }

    /// Keeps only entries for which `keep(row, col)` is true.
    pub fn filtered(&self, mut keep: impl FnMut(usize, usize) -> bool) -> SparseOperator {
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let mut col_idx = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        row_ptr.push(0);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                if keep(i, j) {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        SparseOperator {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
            symmetric: self.symmetric,
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let mut t = TripletBuilder::new(2, 2);
        t.push(0, 1, 1.5);
        t.push(0, 1, 2.0);
        t.push(1, 0, -1.0);
        let a = t.build(false);
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(0, 1), 3.5);
        assert_eq!(a.get(1, 0), -1.0);
        assert_eq!(a.get(1, 1), 0.0);
    }

    #[test]
    fn transpose_product_matches() {
        let mut t = TripletBuilder::new(2, 3);
        t.push(0, 0, 1.0);
        t.push(0, 2, 2.0);
        t.push(1, 1, 3.0);
        let a = t.build(false);
        let x = [1.0, -1.0];
        assert_eq!(a.mul_transpose_vec(&x), vec![1.0, -3.0, 2.0]);
        assert_eq!(a.transpose().mul_vec(&x), vec![1.0, -3.0, 2.0]);
    }

    #[test]
    fn product_matches_dense() {
        let mut t = TripletBuilder::new(2, 3);
        t.push(0, 0, 1.0);
        t.push(0, 2, 2.0);
        t.push(1, 1, 3.0);
        let a = t.build(false);
        let c = a.matmul(&a.transpose()).unwrap();
        assert_eq!(c.to_dense(), vec![vec![5.0, 0.0], vec![0.0, 9.0]]);
        assert!(a.matmul(&a).is_err());
    }

    #[test]
    fn matrix_market_header() {
        let a = SparseOperator::identity(2);
        let mut buf = Vec::new();
        a.write_matrix_market(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("%%MatrixMarket matrix coordinate real general\n2 2 2\n"));
    }

    #[test]
    fn symmetric_part_inserts_missing_diagonal() {
        let mut t = TripletBuilder::new(3, 3);
        t.push(0, 0, 2.0);
        t.push(0, 2, 4.0);
        t.push(1, 0, 6.0);
        t.push(2, 1, -2.0);
        let a = t.build(false);
        let s = a.symmetric_part_upper(&[1.0, -1.0, 0.5]).unwrap().to_dense();
        assert_eq!(s[0], vec![3.0, 3.0, 2.0]);
        assert_eq!(s[1], vec![0.0, -1.0, -1.0]);
        assert_eq!(s[2], vec![0.0, 0.0, 0.5]);
        let f = a.to_faer().unwrap();
        for (i, row) in a.to_dense().iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_eq!(f.as_ref().get(i, j).copied().unwrap_or(0.0), *v);
            }
        }
    }
}
