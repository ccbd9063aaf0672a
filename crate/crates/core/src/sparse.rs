//! Sparse symmetric matrices and the two linear solvers used by the finite
//! element stages: a profile (skyline) Cholesky factorization on a reverse
//! Cuthill-McKee ordering, and Jacobi-preconditioned conjugate gradients.

use std::collections::VecDeque;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("matrix is not positive definite: pivot {pivot:e} at row {row}")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("conjugate gradients did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Compressed sparse row matrix with a fixed sparsity pattern.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds the pattern from `(row, col)` pairs; duplicates are merged and
    /// all values start at zero.
    pub fn from_pattern(n: usize, entries: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (r, c) in entries {
            rows[r].push(c);
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        CsrMatrix { n, row_ptr, col_idx, values: vec![0.0; nnz] }
    }

    /// Builds a matrix from triplets, summing duplicates.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut m = Self::from_pattern(n, triplets.iter().map(|&(r, c, _)| (r, c)));
        for &(r, c, v) in triplets {
            let k = m.position(r, c).expect("entry is in pattern");
            m.values[k] += v;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Index of `(row, col)` in the value array, if it is part of the pattern.
    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let cols = &self.col_idx[self.row_ptr[row]..self.row_ptr[row + 1]];
        cols.binary_search(&col).ok().map(|k| self.row_ptr[row] + k)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.position(row, col).map_or(0.0, |k| self.values[k])
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn clear_values(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yr = acc;
        }
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0_f64;
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst / scale
    }

    /// Imposes `x[d] = value` for every constrained dof while keeping the
    /// matrix symmetric: the known values are moved to the right-hand side,
    /// the row and column are zeroed and the diagonal is kept.
    pub fn apply_dirichlet(&mut self, rhs: &mut [f64], constrained: &[Option<f64>]) {
        for r in 0..self.n {
            if constrained[r].is_some() {
                continue;
            }
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                if let Some(g) = constrained[c] {
                    rhs[r] -= self.values[k] * g;
                    self.values[k] = 0.0;
                }
            }
        }
        for r in 0..self.n {
            if let Some(g) = constrained[r] {
                let mut diag = 0.0;
                for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                    if self.col_idx[k] == r {
                        diag = self.values[k];
                    } else {
                        self.values[k] = 0.0;
                    }
                }
                if diag == 0.0 {
                    diag = 1.0;
                    let k = self.position(r, r).expect("diagonal in pattern");
                    self.values[k] = 1.0;
                }
                rhs[r] = diag * g;
            }
        }
    }

    /// Same as [`apply_dirichlet`](Self::apply_dirichlet) but only touches the
    /// right-hand side; used when the matrix was already constrained.
    pub fn dirichlet_rhs(&self, unconstrained: &CsrMatrix, rhs: &mut [f64], constrained: &[Option<f64>]) {
        for r in 0..self.n {
            if constrained[r].is_some() {
                continue;
            }
            for (c, v) in unconstrained.row(r) {
                if let Some(g) = constrained[c] {
                    rhs[r] -= v * g;
                }
            }
        }
        for r in 0..self.n {
            if let Some(g) = constrained[r] {
                rhs[r] = self.get(r, r) * g;
            }
        }
    }
}

/// Reverse Cuthill-McKee ordering of the matrix graph. Returns `perm` with
/// `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.dim();
    let degree: Vec<usize> = (0..n).map(|r| a.row(r).count()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    while order.len() < n {
        let start = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| degree[i])
            .expect("unvisited node remains");
        let start = pseudo_peripheral(a, start, &degree);
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = a.row(v).map(|(c, _)| c).filter(|&c| !visited[c]).collect();
            nbrs.sort_by_key(|&c| (degree[c], c));
            for c in nbrs {
                visited[c] = true;
                queue.push_back(c);
            }
        }
    }
    order.reverse();
    order
}

fn pseudo_peripheral(a: &CsrMatrix, start: usize, degree: &[usize]) -> usize {
    let mut node = start;
    let mut ecc = 0;
    for _ in 0..8 {
        let levels = bfs_levels(a, node);
        let max_level = levels.iter().filter_map(|l| *l).max().unwrap_or(0);
        if max_level <= ecc {
            break;
        }
        ecc = max_level;
        node = levels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == Some(max_level))
            .min_by_key(|(i, _)| degree[*i])
            .map(|(i, _)| i)
            .unwrap_or(node);
    }
    node
}

fn bfs_levels(a: &CsrMatrix, start: usize) -> Vec<Option<usize>> {
    let mut level = vec![None; a.dim()];
    let mut queue = VecDeque::new();
    level[start] = Some(0);
    queue.push_back(start);
    while let Some(v) = queue.pop_front() {
        let lv = level[v].unwrap_or(0);
        for (c, _) in a.row(v) {
            if level[c].is_none() {
                level[c] = Some(lv + 1);
                queue.push_back(c);
            }
        }
    }
    level
}

/// Cholesky factor `L` stored by rows in a variable-band profile.
#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    n: usize,
    perm: Vec<usize>,
    inv_perm: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl SkylineCholesky {
    /// Factorizes a symmetric positive definite matrix. Only the lower
    /// triangle (in the permuted numbering) is read.
    pub fn factor(a: &CsrMatrix, perm: &[usize]) -> Result<Self, SolverError> {
        let n = a.dim();
        let mut inv_perm = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv_perm[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (new, &old) in perm.iter().enumerate() {
            for (c, _) in a.row(old) {
                let cn = inv_perm[c];
                if cn < first[new] {
                    first[new] = cn;
                }
            }
        }
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for i in 0..n {
            offset.push(offset[i] + (i - first[i] + 1));
        }
        let mut data = vec![0.0; offset[n]];
        for (new, &old) in perm.iter().enumerate() {
            for (c, v) in a.row(old) {
                let cn = inv_perm[c];
                if cn <= new {
                    data[offset[new] + cn - first[new]] += v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            let row_i = offset[i];
            for j in fi..i {
                let fj = first[j];
                let start = fi.max(fj);
                let row_j = offset[j];
                let mut s = data[row_i + j - fi];
                let li = &data[row_i + start - fi..row_i + j - fi];
                let lj = &data[row_j + start - fj..row_j + j - fj];
                s -= dot(li, lj);
                let ljj = data[row_j + j - fj];
                data[row_i + j - fi] = s / ljj;
            }
            let li = &data[row_i..row_i + i - fi];
            let d = data[row_i + i - fi] - dot(li, li);
            if !(d > 0.0) || !d.is_finite() {
                return Err(SolverError::NotPositiveDefinite { row: perm[i], pivot: d });
            }
            data[row_i + i - fi] = d.sqrt();
        }
        Ok(SkylineCholesky { n, perm: perm.to_vec(), inv_perm, first, offset, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored factor entries.
    pub fn profile_size(&self) -> usize {
        self.data.len()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, SolverError> {
        if b.len() != self.n {
            return Err(SolverError::Dimension { expected: self.n, got: b.len() });
        }
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            let s = dot(&row[..i - fi], &y[fi..i]);
            y[i] = (y[i] - s) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            y[i] /= row[i - fi];
            let yi = y[i];
            for (k, l) in row[..i - fi].iter().enumerate() {
                y[fi + k] -= l * yi;
            }
        }
        Ok((0..n).map(|old| y[self.inv_perm[old]]).collect())
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Jacobi-preconditioned conjugate gradients on an SPD matrix.
pub fn conjugate_gradient(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, CgStats), SolverError> {
    let n = a.dim();
    if b.len() != n {
        return Err(SolverError::Dimension { expected: n, got: b.len() });
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut x = x0.map_or_else(|| vec![0.0; n], |x| x.to_vec());
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], CgStats { iterations: 0, residual: 0.0 }));
    }
    let mut r = a.mul_vec(&x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut res = norm(&r) / bnorm;
    for it in 0..max_iter {
        if res <= rel_tol {
            return Ok((x, CgStats { iterations: it, residual: res }));
        }
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(SolverError::NotPositiveDefinite { row: it, pivot: pap });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = norm(&r) / bnorm;
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if res <= rel_tol {
        Ok((x, CgStats { iterations: max_iter, residual: res }))
    } else {
        Err(SolverError::NotConverged { iterations: max_iter, residual: res })
    }
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}
