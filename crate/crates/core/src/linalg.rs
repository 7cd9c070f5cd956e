//! Dense row-major matrices and the handful of factorizations the solvers use:
//! thin SVD, the trace-maximizing orthonormal factor, and orthonormalization.

use std::fmt;
use std::ops::{Index, IndexMut};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows.min(8) {
            writeln!(f, "  {:?}", &self.row(r)[..self.cols.min(8)])?;
        }
        write!(f, "]")
    }
}

impl DenseMatrix {
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

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "buffer of length {} cannot hold a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows. Panics on ragged input; meant for literals.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Entries drawn i.i.d. from N(0, 1).
    pub fn random_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
        Self { rows, cols, data }
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
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn set_column(&mut self, c: usize, values: &[f64]) {
        debug_assert_eq!(values.len(), self.rows);
        for (r, v) in values.iter().enumerate() {
            self[(r, c)] = *v;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// First non-finite entry as `(row, col)`.
    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|i| (i / self.cols, i % self.cols))
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "sub")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// `self += s * other`
    pub fn add_scaled(&mut self, s: f64, other: &Self) -> Result<()> {
        self.check_same_shape(other, "add_scaled")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(())
    }

    fn check_same_shape(&self, other: &Self, op: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Dimension(format!(
                "{op}: shapes {:?} and {:?} differ",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    /// `self · other`
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "matmul: {:?} · {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (p, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, b) in out_row.iter_mut().zip(other.row(p)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other` without materializing the transpose.
    pub fn t_matmul(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::Dimension(format!(
                "t_matmul: {:?}ᵀ · {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let mut out = Self::zeros(self.cols, other.cols);
        for p in 0..self.rows {
            let b_row = other.row(p);
            for (i, &a) in self.row(p).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · otherᵀ` without materializing the transpose.
    pub fn matmul_t(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::Dimension(format!(
                "matmul_t: {:?} · {:?}ᵀ",
                self.shape(),
                other.shape()
            )));
        }
        let mut out = Self::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                out.data[i * other.rows + j] = dot(a, other.row(j));
            }
        }
        Ok(out)
    }

    /// Frobenius distance of `selfᵀ·self` from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let gram = self.t_matmul(self).expect("square gram");
        let mut s = 0.0;
        for i in 0..gram.rows {
            for j in 0..gram.cols {
                let e = gram[(i, j)] - if i == j { 1.0 } else { 0.0 };
                s += e * e;
            }
        }
        s.sqrt()
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

#[inline]
/// Inner product with four independent partial sums (vectorizes; the
/// summation order is fixed, so results are reproducible).
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[2]) + (acc[1] + acc[3]) + tail
}

/// Thin singular value decomposition `A = U · diag(S) · Vᵀ`.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    /// p×r, orthonormal columns.
    pub u: DenseMatrix,
    /// r values, non-negative and non-increasing.
    pub s: Vec<f64>,
    /// q×r, orthonormal columns.
    pub v: DenseMatrix,
}

impl ThinSvd {
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for r in 0..us.rows() {
            for (c, s) in self.s.iter().enumerate() {
                us[(r, c)] *= s;
            }
        }
        us.matmul_t(&self.v).expect("consistent factor shapes")
    }

    pub fn nuclear_norm(&self) -> f64 {
        self.s.iter().sum()
    }
}

/// Thin SVD with `r = min(p, q)`.
///
/// Signs are normalized so that the largest-magnitude entry of each column of
/// `U` is positive (the matching column of `V` flips with it), which makes the
/// factors reproducible.
pub fn thin_svd(a: &DenseMatrix) -> Result<ThinSvd> {
    let (p, q) = a.shape();
    if p == 0 || q == 0 {
        return Err(Error::Dimension(format!("thin_svd of empty {p}x{q} matrix")));
    }
    if let Some((r, c)) = a.first_non_finite() {
        return Err(Error::Numeric(format!(
            "thin_svd: non-finite entry at ({r},{c}) of {p}x{q} matrix"
        )));
    }
    let m = faer::Mat::<f64>::from_fn(p, q, |r, c| a[(r, c)]);
    let svd = m
        .thin_svd()
        .map_err(|e| Error::Numeric(format!("SVD failed on {p}x{q} matrix: {e:?}")))?;
    let r = p.min(q);
    let (fu, fv) = (svd.U(), svd.V());
    let mut u = DenseMatrix::from_fn(p, r, |i, j| fu[(i, j)]);
    let mut v = DenseMatrix::from_fn(q, r, |i, j| fv[(i, j)]);
    let s: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    debug_assert_eq!(s.len(), r);

    for c in 0..r {
        let mut best = 0.0_f64;
        let mut best_abs = -1.0_f64;
        for row in 0..p {
            let x = u[(row, c)];
            if x.abs() > best_abs {
                best_abs = x.abs();
                best = x;
            }
        }
        if best < 0.0 {
            for row in 0..p {
                u[(row, c)] = -u[(row, c)];
            }
            for row in 0..q {
                v[(row, c)] = -v[(row, c)];
            }
        }
    }
    Ok(ThinSvd { u, s, v })
}

/// Solves `max Tr(Gᵀ H)` over column-orthonormal `G` via `G = U Vᵀ`.
///
/// When `H` has fewer rows than columns the result has orthonormal rows
/// instead (rank `p`), which is still the maximizer over matrices of
/// spectral norm at most one.
pub fn procrustes_max_trace(h: &DenseMatrix) -> Result<DenseMatrix> {
    let svd = thin_svd(h)?;
    if h.rows() < h.cols() {
        log::debug!(
            "procrustes on {}x{}: orthonormal columns infeasible, returning rank-{} factor",
            h.rows(),
            h.cols(),
            h.rows()
        );
    }
    svd.u.matmul_t(&svd.v)
}

/// Output of [`orthonormal_columns`].
#[derive(Debug, Clone)]
pub struct Orthonormalized {
    pub q: DenseMatrix,
    /// Set when some input columns were (numerically) dependent and had to be
    /// replaced by seeded random directions.
    pub used_fallback: bool,
}

/// Orthonormalizes the columns of `a` with modified Gram-Schmidt (two passes).
///
/// Columns that are numerically dependent on their predecessors are replaced by
/// seeded Gaussian directions, so the result always has `QᵀQ = I`.
pub fn orthonormal_columns(a: &DenseMatrix, seed: u64) -> Result<Orthonormalized> {
    let (p, q) = a.shape();
    if q > p {
        return Err(Error::Dimension(format!(
            "cannot orthonormalize {q} columns in dimension {p}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(q);
    let mut used_fallback = false;
    for c in 0..q {
        let mut v = a.column(c);
        let original = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut norm = project_out(&mut v, &basis);
        if original == 0.0 || norm <= 1e-10 * original.max(1e-300) || norm <= 1e-14 * scale {
            used_fallback = true;
            loop {
                v = (0..p).map(|_| rng.sample(StandardNormal)).collect();
                norm = project_out(&mut v, &basis);
                if norm > 1e-6 {
                    break;
                }
            }
        }
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }
    let q_mat = DenseMatrix::from_fn(p, q, |r, c| basis[c][r]);
    Ok(Orthonormalized {
        q: q_mat,
        used_fallback,
    })
}

/// Seeded Gaussian draw orthonormalized into a `rows × cols` matrix.
pub fn random_orthonormal<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> Result<DenseMatrix> {
    let a = DenseMatrix::random_normal(rows, cols, rng);
    let seed = rng.random::<u64>();
    Ok(orthonormal_columns(&a, seed)?.q)
}

/// Removes the components along `basis` (two MGS passes) and returns the
/// remaining norm.
fn project_out(v: &mut [f64], basis: &[Vec<f64>]) -> f64 {
    for _ in 0..2 {
        for b in basis {
            let c = dot(v, b);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
    }
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
