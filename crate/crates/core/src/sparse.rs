//! Compressed sparse-row storage and the kernels the multigrid code is built on.
//!
//! Symmetric matrices store both triangles. Every constructor returns a matrix
//! in canonical form: sorted, duplicate-free column indices in each row.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

/// Summary of the graph behind a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GraphMeta {
    pub n_vertices: usize,
    pub n_edges: usize,
    pub weights_positive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepDirection {
    Forward,
    Backward,
}

impl SparseMatrix {
    /// Builds a matrix from raw CSR arrays, validating canonical form.
    pub fn from_csr(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let m = SparseMatrix {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        };
        m.validate()?;
        Ok(m)
    }

    /// Builds a matrix from (row, col, value) triplets. Duplicates are summed;
    /// explicit zeros are kept as structural entries.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; n_rows + 1];
        for &(i, j, _) in triplets {
            if i >= n_rows || j >= n_cols {
                return Err(Error::InvalidMatrix(format!(
                    "entry ({i}, {j}) outside {n_rows}x{n_cols}"
                )));
            }
            counts[i + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(i, j, v) in triplets {
            cols[next[i]] = j;
            vals[next[i]] = v;
            next[i] += 1;
        }

        let mut row_offsets = Vec::with_capacity(n_rows + 1);
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_offsets.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for i in 0..n_rows {
            scratch.clear();
            scratch.extend((counts[i]..counts[i + 1]).map(|k| (cols[k], vals[k])));
            scratch.sort_by_key(|&(j, _)| j);
            for &(j, v) in &scratch {
                if col_indices.len() > row_offsets[i] && *col_indices.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Ok(SparseMatrix {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut triplets = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::DimensionMismatch {
                    op: "from_dense",
                    expected: n_cols,
                    got: row.len(),
                });
            }
            triplets.extend(
                row.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(j, &v)| (i, j, v)),
            );
        }
        Self::from_triplets(n_rows, n_cols, &triplets)
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
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

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[range.clone()], &self.values[range])
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).ok().map(|k| vals[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols))
            .map(|i| self.get(i, i).unwrap_or(0.0))
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (i, row) in out.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                row[j] = v;
            }
        }
        out
    }

    /// Checks the canonical-form invariants.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidMatrix(msg));
        if self.row_offsets.len() != self.n_rows + 1 {
            return bad(format!(
                "row_offsets has length {}, expected {}",
                self.row_offsets.len(),
                self.n_rows + 1
            ));
        }
        if self.row_offsets[0] != 0 {
            return bad("row_offsets[0] != 0".into());
        }
        if self.row_offsets[self.n_rows] != self.col_indices.len() || self.col_indices.len() != self.values.len() {
            return bad("row_offsets[n_rows], col_indices and values disagree on nnz".into());
        }
        for i in 0..self.n_rows {
            if self.row_offsets[i] > self.row_offsets[i + 1] {
                return bad(format!("row_offsets decreases at row {i}"));
            }
            let (cols, _) = self.row(i);
            for w in cols.windows(2) {
                if w[0] >= w[1] {
                    return bad(format!("row {i} columns not strictly increasing"));
                }
            }
            if let Some(&last) = cols.last() {
                if last >= self.n_cols {
                    return bad(format!("row {i} has column {last} >= {}", self.n_cols));
                }
            }
        }
        Ok(())
    }

    /// Structural and numerical symmetry within `tol` (absolute).
    pub fn is_symmetric(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        (0..self.n_rows).all(|i| {
            let (cols, vals) = self.row(i);
            cols.iter()
                .zip(vals)
                .all(|(&j, &v)| self.get(j, i).is_some_and(|u| (u - v).abs() <= tol))
        })
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &j in &self.col_indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                col_indices[next[j]] = i;
                values[next[j]] = v;
                next[j] += 1;
            }
        }
        SparseMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_offsets: counts,
            col_indices,
            values,
        }
    }

    /// y = A x.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_cols {
            return Err(Error::DimensionMismatch {
                op: "spmv",
                expected: self.n_cols,
                got: x.len(),
            });
        }
        let mut y = vec![0.0; self.n_rows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// Unchecked kernel behind [`spmv`](Self::spmv); panics on bad lengths.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    /// y = Aᵀ x without forming the transpose.
    pub fn spmv_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_rows {
            return Err(Error::DimensionMismatch {
                op: "spmv_transpose",
                expected: self.n_rows,
                got: x.len(),
            });
        }
        let mut y = vec![0.0; self.n_cols];
        for (i, &xi) in x.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                y[j] += v * xi;
            }
        }
        Ok(y)
    }

    /// r = b − A x.
    pub fn residual(&self, b: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n_rows {
            return Err(Error::DimensionMismatch {
                op: "residual",
                expected: self.n_rows,
                got: b.len(),
            });
        }
        let mut r = self.spmv(x)?;
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        Ok(r)
    }

    /// Sparse product `self · other` (row-wise Gustavson accumulation).
    pub fn matmul(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.n_cols != other.n_rows {
            return Err(Error::DimensionMismatch {
                op: "matmul",
                expected: self.n_cols,
                got: other.n_rows,
            });
        }
        let n = other.n_cols;
        let mut marker = vec![usize::MAX; n];
        let mut acc = vec![0.0; n];
        let mut row_cols: Vec<usize> = Vec::new();
        let mut row_offsets = Vec::with_capacity(self.n_rows + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for i in 0..self.n_rows {
            row_cols.clear();
            let (acols, avals) = self.row(i);
            for (&k, &a) in acols.iter().zip(avals) {
                let (bcols, bvals) = other.row(k);
                for (&j, &b) in bcols.iter().zip(bvals) {
                    if marker[j] != i {
                        marker[j] = i;
                        acc[j] = 0.0;
                        row_cols.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            row_cols.sort_unstable();
            for &j in &row_cols {
                col_indices.push(j);
                values.push(acc[j]);
            }
            row_offsets.push(col_indices.len());
        }
        Ok(SparseMatrix {
            n_rows: self.n_rows,
            n_cols: n,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Drops entries with |v| < `rel · max|v|` of their row.
    fn drop_relative(self, rel: f64) -> SparseMatrix {
        let mut row_offsets = Vec::with_capacity(self.n_rows + 1);
        let mut col_indices = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        row_offsets.push(0);
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            let max = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let cut = rel * max;
            for (&j, &v) in cols.iter().zip(vals) {
                if v.abs() >= cut && !(max == 0.0 && v == 0.0) {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        SparseMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Copy with the diagonal removed and every value replaced by its absolute value.
    pub fn to_adjacency(&self) -> SparseMatrix {
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if i != j && v != 0.0 {
                    triplets.push((i, j, v.abs()));
                }
            }
        }
        SparseMatrix::from_triplets(self.n_rows, self.n_cols, &triplets).expect("indices come from a valid matrix")
    }

    pub fn graph_meta(&self) -> GraphMeta {
        let mut off = 0;
        let mut positive = true;
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j != i {
                    off += 1;
                    // Laplacians carry negated weights off the diagonal.
                    positive &= v != 0.0;
                }
            }
        }
        GraphMeta {
            n_vertices: self.n_rows,
            n_edges: off / 2,
            weights_positive: positive,
        }
    }
}

/// Coarse operator Pᵀ A P.
///
/// Entries smaller than 1e-15 times the largest magnitude in their row are
/// treated as cancellation noise and dropped.
pub fn galerkin_product(p: &SparseMatrix, a: &SparseMatrix) -> Result<SparseMatrix> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            op: "galerkin_product",
            expected: a.n_rows,
            got: a.n_cols,
        });
    }
    if p.n_rows != a.n_rows {
        return Err(Error::DimensionMismatch {
            op: "galerkin_product",
            expected: a.n_rows,
            got: p.n_rows,
        });
    }
    let ap = a.matmul(p)?;
    let coarse = p.transpose().matmul(&ap)?;
    Ok(coarse.drop_relative(1e-15))
}

/// Off-diagonal sparsity pattern of A·A, together with that of A itself, with
/// unit values. Including A matters when the input has an empty diagonal.
pub fn square_pattern(a: &SparseMatrix) -> Result<SparseMatrix> {
    square_pattern_capped(a, None)
}

/// [`square_pattern`] with an optional per-row fill cap.
///
/// With a cap, the neighbours of A are always kept and the remaining slots of
/// each row go to the distance-two candidates with the largest |A|² value. The
/// kept set is then symmetrized, so a row may end up slightly above the cap.
pub fn square_pattern_capped(a: &SparseMatrix, row_cap: Option<usize>) -> Result<SparseMatrix> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            op: "square_pattern",
            expected: a.n_rows,
            got: a.n_cols,
        });
    }
    let n = a.n_rows;
    let mut marker = vec![usize::MAX; n];
    let mut score = vec![0.0; n];
    let mut fill: Vec<usize> = Vec::new();
    let mut triplets = Vec::new();
    for i in 0..n {
        fill.clear();
        let (cols, vals) = a.row(i);
        let mut direct = 0;
        for &j in cols {
            if j != i {
                marker[j] = i;
                score[j] = f64::INFINITY;
                triplets.push((i, j, 1.0));
                direct += 1;
            }
        }
        for (&k, &aik) in cols.iter().zip(vals) {
            let (kcols, kvals) = a.row(k);
            for (&j, &akj) in kcols.iter().zip(kvals) {
                if j == i {
                    continue;
                }
                if marker[j] != i {
                    marker[j] = i;
                    score[j] = 0.0;
                    fill.push(j);
                }
                if row_cap.is_some() {
                    score[j] += (aik * akj).abs();
                }
            }
        }
        if let Some(cap) = row_cap {
            let room = cap.saturating_sub(direct);
            if fill.len() > room {
                fill.sort_by(|&x, &y| score[y].total_cmp(&score[x]).then(x.cmp(&y)));
                fill.truncate(room);
            }
        }
        for &j in &fill {
            triplets.push((i, j, 1.0));
            if row_cap.is_some() {
                triplets.push((j, i, 1.0));
            }
        }
    }
    let m = SparseMatrix::from_triplets(n, n, &triplets)?;
    // Symmetrized duplicates were summed; reset to unit values.
    Ok(SparseMatrix {
        values: vec![1.0; m.nnz()],
        ..m
    })
}

/// L = D − W.
pub fn laplacian_from_adjacency(w: &SparseMatrix) -> Result<SparseMatrix> {
    if !w.is_square() {
        return Err(Error::DimensionMismatch {
            op: "laplacian_from_adjacency",
            expected: w.n_rows,
            got: w.n_cols,
        });
    }
    let mut triplets = Vec::with_capacity(w.nnz() + w.n_rows);
    for i in 0..w.n_rows {
        let (cols, vals) = w.row(i);
        let mut degree = 0.0;
        for (&j, &v) in cols.iter().zip(vals) {
            if v < 0.0 {
                return Err(Error::NegativeWeight {
                    row: i,
                    col: j,
                    weight: v,
                });
            }
            if j != i {
                degree += v;
                triplets.push((i, j, -v));
            }
        }
        triplets.push((i, i, degree));
    }
    SparseMatrix::from_triplets(w.n_rows, w.n_cols, &triplets)
}

/// W = D − L, i.e. the negated off-diagonal part.
pub fn adjacency_from_laplacian(l: &SparseMatrix) -> Result<SparseMatrix> {
    let mut triplets = Vec::with_capacity(l.nnz());
    for i in 0..l.n_rows {
        let (cols, vals) = l.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if j == i {
                continue;
            }
            if v > 0.0 {
                return Err(Error::PositiveOffDiagonal {
                    row: i,
                    col: j,
                    value: v,
                });
            }
            triplets.push((i, j, -v));
        }
    }
    SparseMatrix::from_triplets(l.n_rows, l.n_cols, &triplets)
}

/// One Gauss–Seidel sweep over `x` in place.
///
/// Rows that are entirely zero are skipped. A zero diagonal in a row with
/// off-diagonal entries is an error; rows before it have already been updated.
pub fn gauss_seidel(a: &SparseMatrix, b: &[f64], x: &mut [f64], direction: SweepDirection) -> Result<()> {
    if !a.is_square() || b.len() != a.n_rows || x.len() != a.n_rows {
        return Err(Error::DimensionMismatch {
            op: "gauss_seidel",
            expected: a.n_rows,
            got: if b.len() != a.n_rows { b.len() } else { x.len() },
        });
    }
    let mut relax = |i: usize| -> Result<()> {
        let (cols, vals) = a.row(i);
        let mut sum = b[i];
        let mut diag = 0.0;
        let mut off = false;
        for (&j, &v) in cols.iter().zip(vals) {
            if j == i {
                diag = v;
            } else {
                sum -= v * x[j];
                off |= v != 0.0;
            }
        }
        if diag == 0.0 {
            if off {
                return Err(Error::ZeroDiagonal(i));
            }
            return Ok(());
        }
        x[i] = sum / diag;
        Ok(())
    };
    match direction {
        SweepDirection::Forward => (0..a.n_rows).try_for_each(&mut relax),
        SweepDirection::Backward => (0..a.n_rows).rev().try_for_each(&mut relax),
    }
}

/// x − mean(x)·1.
pub fn project_out_constant(x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    project_out_constant_in_place(&mut y);
    y
}

pub fn project_out_constant_in_place(x: &mut [f64]) {
    if x.is_empty() {
        return;
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= mean);
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// y += alpha · x
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}
