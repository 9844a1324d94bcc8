//! Small dense linear algebra: matrices, one-sided Jacobi SVD, symmetric
//! eigen-solvers and Gaussian elimination.
//!
//! Matrices here are tiny (layer weights, Gram matrices of a handful of
//! vectors) except for the centred distance matrices handed to
//! [`top_symmetric_eigenpairs`], which only ever needs a few leading pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
                context: "matrix buffer",
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    actual: r.len(),
                    context: "matrix row",
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                actual: other.rows,
                context: "matrix product",
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = out.row_mut(i);
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        Ok(out)
    }

    /// `self · x` written into `out` (no allocation).
    #[inline]
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                actual: x.len(),
                context: "matrix-vector product",
            });
        }
        let mut out = vec![0.0; self.rows];
        self.matvec_into(x, &mut out);
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                actual: other.rows * other.cols,
                context: "matrix difference",
            });
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// Determinant via LU with partial pivoting. Square matrices only.
    pub fn determinant(&self) -> Result<f64> {
        if self.rows != self.cols {
            return Err(Error::InvalidArgument(format!(
                "determinant of a non-square {}x{} matrix",
                self.rows, self.cols
            )));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut det = 1.0;
        for k in 0..n {
            let pivot = (k..n)
                .max_by(|&i, &j| a[(i, k)].abs().total_cmp(&a[(j, k)].abs()))
                .unwrap_or(k);
            if a[(pivot, k)] == 0.0 {
                return Ok(0.0);
            }
            if pivot != k {
                a.swap_rows(pivot, k);
                det = -det;
            }
            let p = a[(k, k)];
            det *= p;
            for i in k + 1..n {
                let factor = a[(i, k)] / p;
                if factor != 0.0 {
                    for j in k..n {
                        let v = a[(k, j)];
                        a[(i, j)] -= factor * v;
                    }
                }
            }
        }
        Ok(det)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Full singular value decomposition `A = U Σ Vᵀ` with square orthogonal
/// factors: `u` is m×m, `v` is n×n, and `singular_values` holds the
/// min(m, n) diagonal entries of Σ in nonincreasing order.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub v: Matrix,
}

impl Svd {
    pub fn reconstruct(&self) -> Matrix {
        let m = self.u.rows();
        let n = self.v.rows();
        let mut out = Matrix::zeros(m, n);
        for (k, &s) in self.singular_values.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            for i in 0..m {
                let us = self.u[(i, k)] * s;
                for j in 0..n {
                    out[(i, j)] += us * self.v[(j, k)];
                }
            }
        }
        out
    }
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi SVD.
///
/// Wide inputs are padded with zero rows to a square matrix so that the right
/// factor always comes out as a full n×n orthogonal matrix; its trailing
/// columns then span the kernel.
pub fn svd(a: &Matrix) -> Svd {
    let m = a.rows();
    let n = a.cols();
    let p = m.max(n);

    // Column-major working copy of the (possibly padded) p×n matrix.
    let mut cols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut c = vec![0.0; p];
            for i in 0..m {
                c[i] = a[(i, j)];
            }
            c
        })
        .collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut c = vec![0.0; n];
            c[j] = 1.0;
            c
        })
        .collect();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha: f64 = cols[i].iter().map(|x| x * x).sum();
                let beta: f64 = cols[j].iter().map(|x| x * x).sum();
                let gamma: f64 = cols[i].iter().zip(&cols[j]).map(|(x, y)| x * y).sum();
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut cols, i, j, c, s);
                rotate_pair(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(f64, usize)> = cols
        .iter()
        .enumerate()
        .map(|(j, c)| (c.iter().map(|x| x * x).sum::<f64>().sqrt(), j))
        .collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));

    let k = m.min(n);
    let sigma_max = order.first().map_or(0.0, |o| o.0);
    let negligible = sigma_max * f64::EPSILON * p as f64;
    let mut v_sorted = Matrix::zeros(n, n);
    let mut singular_values = Vec::with_capacity(k);
    let mut u_columns: Vec<Vec<f64>> = Vec::with_capacity(m);
    for (rank, &(s, j)) in order.iter().enumerate() {
        for r in 0..n {
            v_sorted[(r, rank)] = v[j][r];
        }
        if rank < k {
            singular_values.push(s);
            if s > negligible {
                u_columns.push(cols[j][..m].iter().map(|x| x / s).collect());
            }
        }
    }
    complete_orthonormal_basis(&mut u_columns, m);
    let mut u = Matrix::zeros(m, m);
    for (c, col) in u_columns.iter().enumerate() {
        for r in 0..m {
            u[(r, c)] = col[r];
        }
    }

    Svd {
        u,
        singular_values,
        v: v_sorted,
    }
}

fn rotate_pair(vectors: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (left, right) = vectors.split_at_mut(j);
    let a = &mut left[i];
    let b = &mut right[0];
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let xi = *x;
        let yj = *y;
        *x = c * xi - s * yj;
        *y = s * xi + c * yj;
    }
}

/// Extends an orthonormal set to a basis of ℝ^dim by Gram–Schmidt against the
/// standard basis vectors.
fn complete_orthonormal_basis(basis: &mut Vec<Vec<f64>>, dim: usize) {
    // Re-orthonormalise what we were given; Jacobi output is orthogonal only
    // to working precision.
    let given = std::mem::take(basis);
    for vec in given {
        push_orthonormalized(basis, vec);
    }
    let mut e = 0;
    while basis.len() < dim && e < dim {
        let mut candidate = vec![0.0; dim];
        candidate[e] = 1.0;
        push_orthonormalized(basis, candidate);
        e += 1;
    }
}

fn push_orthonormalized(basis: &mut Vec<Vec<f64>>, mut vec: Vec<f64>) -> bool {
    for _ in 0..2 {
        for b in basis.iter() {
            let proj: f64 = b.iter().zip(&vec).map(|(x, y)| x * y).sum();
            for (v, bv) in vec.iter_mut().zip(b) {
                *v -= proj * bv;
            }
        }
    }
    let n: f64 = vec.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n < 1e-8 {
        return false;
    }
    vec.iter_mut().for_each(|x| *x /= n);
    basis.push(vec);
    true
}

/// Eigen-decomposition of a symmetric matrix by the cyclic Jacobi method.
///
/// Returns eigenvalues in nonincreasing order and the matching eigenvectors as
/// the columns of the returned matrix. Cost is O(n³) per sweep; meant for
/// small matrices.
pub fn symmetric_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = a.rows();
    if n != a.cols() {
        return Err(Error::InvalidArgument("eigen-decomposition of a non-square matrix".into()));
    }
    let mut m = a.clone();
    let mut vecs = Matrix::identity(n);
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = vecs[(k, p)];
                    let vkq = vecs[(k, q)];
                    vecs[(k, p)] = c * vkp - s * vkq;
                    vecs[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut sorted = Matrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        for r in 0..n {
            sorted[(r, c)] = vecs[(r, i)];
        }
    }
    Ok((values, sorted))
}

/// Leading eigenpairs of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct Eigenpairs {
    /// Largest eigenvalues, nonincreasing.
    pub values: Vec<f64>,
    /// One eigenvector per value, unit length.
    pub vectors: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest-algebraic `count` eigenpairs of a symmetric matrix by block
/// (orthogonal) iteration with Rayleigh–Ritz extraction.
///
/// Block iteration converges to the eigenvalues of largest magnitude. When
/// the block might be hiding a large positive eigenvalue behind large
/// negative ones, the matrix is shifted by the most negative Ritz value's
/// magnitude and the iteration is repeated, which makes every eigenvalue
/// nonnegative without changing eigenvectors.
pub fn top_symmetric_eigenpairs(a: &Matrix, count: usize, tol: f64) -> Result<Eigenpairs> {
    let n = a.rows();
    if n != a.cols() {
        return Err(Error::InvalidArgument("eigenpairs of a non-square matrix".into()));
    }
    if count == 0 || count > n {
        return Err(Error::InvalidArgument(format!(
            "requested {count} eigenpairs of a {n}x{n} matrix"
        )));
    }
    if n <= 64 {
        let (values, vecs) = symmetric_eigen(a)?;
        return Ok(Eigenpairs {
            values: values[..count].to_vec(),
            vectors: (0..count).map(|c| vecs.column(c)).collect(),
            iterations: 0,
            converged: true,
        });
    }
    let first = block_iteration(a, count, 0.0, tol);
    let smallest_in_block = first.ritz_magnitude_floor;
    let kth = first.pairs.values[count - 1];
    if first.most_negative >= 0.0 || kth >= smallest_in_block {
        return Ok(first.pairs);
    }
    let shift = -first.most_negative;
    let mut shifted = block_iteration(a, count, shift, tol);
    shifted.pairs.iterations += first.pairs.iterations;
    Ok(shifted.pairs)
}

struct BlockResult {
    pairs: Eigenpairs,
    ritz_magnitude_floor: f64,
    most_negative: f64,
}

fn block_iteration(a: &Matrix, count: usize, shift: f64, tol: f64) -> BlockResult {
    let n = a.rows();
    let block = (count + 6).min(n);
    let max_iters = 20_000;

    // Deterministic, non-degenerate start block.
    let mut q: Vec<Vec<f64>> = (0..block)
        .map(|b| {
            (0..n)
                .map(|i| {
                    let x = ((i + 1) as f64 * (b as f64 + 1.618_033_988_7)).sin();
                    x + if i % block == b { 1.0 } else { 0.0 }
                })
                .collect()
        })
        .collect();
    orthonormalize(&mut q);

    let apply = |x: &[f64], out: &mut [f64]| {
        a.matvec_into(x, out);
        if shift != 0.0 {
            for (o, xi) in out.iter_mut().zip(x) {
                *o += shift * xi;
            }
        }
    };

    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE) + shift.abs();
    let mut z: Vec<Vec<f64>> = vec![vec![0.0; n]; block];
    let mut values = vec![0.0; block];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        iterations += 1;
        for (qb, zb) in q.iter().zip(z.iter_mut()) {
            apply(qb, zb);
        }
        // Rayleigh–Ritz on span(q): H = Qᵀ A Q.
        let mut h = Matrix::zeros(block, block);
        for i in 0..block {
            for j in i..block {
                let v: f64 = q[i].iter().zip(&z[j]).map(|(x, y)| x * y).sum();
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        let (ritz, y) = symmetric_eigen(&h).expect("square Rayleigh quotient");
        // Rotate both Q and AQ into the Ritz basis.
        let rotate = |src: &[Vec<f64>]| -> Vec<Vec<f64>> {
            (0..block)
                .map(|c| {
                    let mut out = vec![0.0; n];
                    for (r, s) in src.iter().enumerate() {
                        let w = y[(r, c)];
                        if w != 0.0 {
                            for (o, v) in out.iter_mut().zip(s) {
                                *o += w * v;
                            }
                        }
                    }
                    out
                })
                .collect()
        };
        let ritz_vectors = rotate(&q);
        let applied = rotate(&z);
        values = ritz;

        let mut max_residual = 0.0f64;
        for c in 0..count {
            let r: f64 = applied[c]
                .iter()
                .zip(&ritz_vectors[c])
                .map(|(av, v)| {
                    let d = av - values[c] * v;
                    d * d
                })
                .sum::<f64>()
                .sqrt();
            max_residual = max_residual.max(r);
        }
        q = ritz_vectors;
        if max_residual <= tol * scale {
            converged = true;
            break;
        }
        q = applied;
        orthonormalize(&mut q);
    }

    let unshifted: Vec<f64> = values.iter().map(|v| v - shift).collect();
    let most_negative = unshifted.iter().copied().fold(0.0f64, f64::min);
    let ritz_magnitude_floor = unshifted.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    BlockResult {
        pairs: Eigenpairs {
            values: unshifted[..count].to_vec(),
            vectors: q.into_iter().take(count).collect(),
            iterations,
            converged,
        },
        ritz_magnitude_floor,
        most_negative,
    }
}

/// Modified Gram–Schmidt with one reorthogonalisation pass. Vectors that
/// collapse numerically are replaced by a fresh direction.
fn orthonormalize(vectors: &mut [Vec<f64>]) {
    let n = vectors.first().map_or(0, Vec::len);
    for i in 0..vectors.len() {
        for _ in 0..2 {
            for j in 0..i {
                let (done, rest) = vectors.split_at_mut(i);
                let proj: f64 = done[j].iter().zip(&rest[0]).map(|(x, y)| x * y).sum();
                for (v, b) in rest[0].iter_mut().zip(&done[j]) {
                    *v -= proj * b;
                }
            }
        }
        let norm: f64 = vectors[i].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-300 {
            vectors[i].iter_mut().for_each(|x| *x /= norm);
        } else {
            let mut fresh = vec![0.0; n];
            fresh[i % n.max(1)] = 1.0;
            vectors[i] = fresh;
        }
    }
}

/// Solves the square system `a x = b` by Gaussian elimination with partial
/// pivoting. Returns `None` for a numerically singular matrix.
pub fn solve(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.rows();
    if n != a.cols() || b.len() != n {
        return None;
    }
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    let scale = a.as_slice().iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    for k in 0..n {
        let pivot = (k..n).max_by(|&i, &j| m[(i, k)].abs().total_cmp(&m[(j, k)].abs()))?;
        if m[(pivot, k)].abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
            return None;
        }
        m.swap_rows(pivot, k);
        rhs.swap(pivot, k);
        for i in k + 1..n {
            let factor = m[(i, k)] / m[(k, k)];
            if factor == 0.0 {
                continue;
            }
            for j in k..n {
                let v = m[(k, j)];
                m[(i, j)] -= factor * v;
            }
            rhs[i] -= factor * rhs[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[(i, j)] * x[j]).sum();
        x[i] = (rhs[i] - s) / m[(i, i)];
    }
    Some(x)
}
