//! Small dense linear-algebra kernels.
//!
//! Matrices are stored column-major so that the hot loops (column axpy,
//! column dot products, trailing updates of the factorizations) run over
//! contiguous memory.

use crate::error::{Error, Result};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len().min(b.len());
    #[cfg(target_arch = "x86_64")]
    if n >= 32 && std::is_x86_feature_detected!("avx2") && std::is_x86_feature_detected!("fma") {
        // SAFETY: the required CPU features were detected above
        return unsafe { dot_fma(&a[..n], &b[..n]) };
    }
    dot_lanes(&a[..n], &b[..n])
}

#[inline(always)]
fn dot_lanes(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let [a0, a1, a2, a3, a4, a5, a6, a7] = acc;
    ((a0 + a4) + (a2 + a6)) + ((a1 + a5) + (a3 + a7)) + tail
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn dot_fma(a: &[f64], b: &[f64]) -> f64 {
    use std::arch::x86_64::*;
    let n = a.len();
    let (pa, pb) = (a.as_ptr(), b.as_ptr());
    let mut acc = [_mm256_setzero_pd(); 4];
    let mut i = 0;
    while i + 16 <= n {
        for (k, ak) in acc.iter_mut().enumerate() {
            *ak = _mm256_fmadd_pd(_mm256_loadu_pd(pa.add(i + 4 * k)), _mm256_loadu_pd(pb.add(i + 4 * k)), *ak);
        }
        i += 16;
    }
    let s = _mm256_add_pd(_mm256_add_pd(acc[0], acc[1]), _mm256_add_pd(acc[2], acc[3]));
    let mut lanes = [0.0; 4];
    _mm256_storeu_pd(lanes.as_mut_ptr(), s);
    let tail: f64 = a[i..].iter().zip(&b[i..]).map(|(x, y)| x * y).sum();
    (lanes[0] + lanes[2]) + (lanes[1] + lanes[3]) + tail
}

/// `S[p, q] += ⟨B_p, B_q⟩` for `p ≥ q`, where row `p` of `B` is
/// `rows[p*m..(p+1)*m]`.
pub fn add_gram_lower(rows: &[f64], n: usize, m: usize, s: &mut Matrix) {
    add_cross_lower(rows, rows, n, m, s);
}

/// `S[p, q] += ⟨A_p, B_q⟩` for `p ≥ q`, rows laid out as in
/// [`add_gram_lower`].
pub fn add_cross_lower(a: &[f64], b: &[f64], n: usize, m: usize, s: &mut Matrix) {
    assert!(a.len() >= n * m && b.len() >= n * m && s.rows() >= n && s.cols() >= n);
    fn row(x: &[f64], p: usize, m: usize) -> &[f64] {
        &x[p * m..(p + 1) * m]
    }
    let mut q0 = 0;
    while q0 < n {
        let mut p0 = q0;
        while p0 < n {
            if q0 + 2 <= n && p0 + 4 <= n {
                let t = gram_tile(a, b, m, m, q0, p0);
                for (a, tq) in t.iter().enumerate() {
                    for (b, v) in tq.iter().enumerate() {
                        if p0 + b >= q0 + a {
                            s[(p0 + b, q0 + a)] += v;
                        }
                    }
                }
            } else {
                for q in q0..(q0 + 2).min(n) {
                    for p in p0.max(q)..(p0 + 4).min(n) {
                        s[(p, q)] += dot(row(a, p, m), row(b, q, m));
                    }
                }
            }
            p0 += 4;
        }
        q0 += 2;
    }
}

/// Dots over the first `len` entries of rows `q0, q0+1` of `b` against rows
/// `p0..p0+4` of `a`, rows being `stride` apart.
fn gram_tile(a: &[f64], b: &[f64], stride: usize, len: usize, q0: usize, p0: usize) -> [[f64; 4]; 2] {
    #[cfg(target_arch = "x86_64")]
    if std::is_x86_feature_detected!("avx2") && std::is_x86_feature_detected!("fma") {
        // SAFETY: the required CPU features were detected above
        return unsafe { gram_tile_fma(a, b, stride, len, q0, p0) };
    }
    let mut t = [[0.0; 4]; 2];
    for (i, ti) in t.iter_mut().enumerate() {
        for (j, v) in ti.iter_mut().enumerate() {
            let (p, q) = ((p0 + j) * stride, (q0 + i) * stride);
            *v = dot(&a[p..p + len], &b[q..q + len]);
        }
    }
    t
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn gram_tile_fma(a: &[f64], b: &[f64], stride: usize, len: usize, q0: usize, p0: usize) -> [[f64; 4]; 2] {
    use std::arch::x86_64::*;
    assert!(len <= stride && a.len() >= (p0 + 3) * stride + len && b.len() >= (q0 + 1) * stride + len);
    let m = len;
    let (pa, pb) = (a.as_ptr(), b.as_ptr());
    let q = [pb.add(q0 * stride), pb.add((q0 + 1) * stride)];
    let p = [pa.add(p0 * stride), pa.add((p0 + 1) * stride), pa.add((p0 + 2) * stride), pa.add((p0 + 3) * stride)];
    let mut acc = [[_mm256_setzero_pd(); 4]; 2];
    let mut k = 0;
    while k + 4 <= m {
        let xq = [_mm256_loadu_pd(q[0].add(k)), _mm256_loadu_pd(q[1].add(k))];
        for b in 0..4 {
            let xp = _mm256_loadu_pd(p[b].add(k));
            acc[0][b] = _mm256_fmadd_pd(xq[0], xp, acc[0][b]);
            acc[1][b] = _mm256_fmadd_pd(xq[1], xp, acc[1][b]);
        }
        k += 4;
    }
    let mut t = [[0.0; 4]; 2];
    let mut lanes = [0.0; 4];
    for a in 0..2 {
        for b in 0..4 {
            _mm256_storeu_pd(lanes.as_mut_ptr(), acc[a][b]);
            let mut v = (lanes[0] + lanes[2]) + (lanes[1] + lanes[3]);
            for kk in k..m {
                v += *q[a].add(kk) * *p[b].add(kk);
            }
            t[a][b] = v;
        }
    }
    t
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    #[cfg(target_arch = "x86_64")]
    if y.len() >= 32 && std::is_x86_feature_detected!("avx2") && std::is_x86_feature_detected!("fma") {
        // SAFETY: the required CPU features were detected above
        return unsafe { axpy_fma(alpha, x, y) };
    }
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn axpy_fma(alpha: f64, x: &[f64], y: &mut [f64]) {
    use std::arch::x86_64::*;
    let n = x.len().min(y.len());
    let (px, py) = (x.as_ptr(), y.as_mut_ptr());
    let a = _mm256_set1_pd(alpha);
    let mut i = 0;
    while i + 8 <= n {
        let y0 = _mm256_fmadd_pd(a, _mm256_loadu_pd(px.add(i)), _mm256_loadu_pd(py.add(i)));
        let y1 = _mm256_fmadd_pd(a, _mm256_loadu_pd(px.add(i + 4)), _mm256_loadu_pd(py.add(i + 4)));
        _mm256_storeu_pd(py.add(i), y0);
        _mm256_storeu_pd(py.add(i + 4), y1);
        i += 8;
    }
    for j in i..n {
        y[j] += alpha * x[j];
    }
}

#[inline]
pub fn norm2_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    norm2_sq(a).sqrt()
}

#[inline]
pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Dense column-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from its columns; all columns must have equal length.
    pub fn from_columns<C: AsRef<[f64]>>(rows: usize, columns: &[C]) -> Self {
        let mut data = Vec::with_capacity(rows * columns.len());
        for c in columns {
            let c = c.as_ref();
            assert_eq!(c.len(), rows, "column length mismatch");
            data.extend_from_slice(c);
        }
        Self { rows, cols: columns.len(), data }
    }

    /// Builds a matrix from row slices (convenient in tests).
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn push_column(&mut self, c: &[f64]) {
        assert_eq!(c.len(), self.rows);
        self.data.extend_from_slice(c);
        self.cols += 1;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `out = self * x`
    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(out.len(), self.rows);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (j, xj) in x.iter().enumerate() {
            if *xj != 0.0 {
                axpy(*xj, self.col(j), out);
            }
        }
    }

    /// `out = selfᵀ * x`
    pub fn mul_vec_t(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.rows);
        assert_eq!(out.len(), self.cols);
        for (j, o) in out.iter_mut().enumerate() {
            *o = dot(self.col(j), x);
        }
    }

    /// Product with a symmetric matrix, using column dot products.
    pub fn sym_mul_vec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(self.rows, self.cols);
        self.mul_vec_t(x, out);
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let (oc, src) = (j * self.rows, other.col(j));
            for (k, bkj) in src.iter().enumerate() {
                if *bkj != 0.0 {
                    let a = self.col(k);
                    let dst = &mut out.data[oc..oc + self.rows];
                    axpy(*bkj, a, dst);
                }
            }
        }
        out
    }

    /// Replaces the matrix by `(M + Mᵀ)/2`.
    pub fn symmetrize(&mut self) {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        for j in 0..n {
            for i in (j + 1)..n {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = avg;
                self[(j, i)] = avg;
            }
        }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        norm_inf(&self.data)
    }

    /// Induced infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i + j * self.rows]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i + j * self.rows]
    }
}

/// Dense Cholesky factor `A = L Lᵀ` of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    // column-major lower triangle
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors `A` reading its lower triangle only.
    pub fn factor(a: &Matrix) -> Result<Self> {
        assert_eq!(a.rows(), a.cols());
        let n = a.rows();
        // row-major lower triangle, filled two columns at a time
        let mut r = vec![0.0; n * n];
        let mut j0 = 0;
        while j0 < n {
            let jb = 2.min(n - j0);
            for j in j0..j0 + jb {
                for i in j..j0 + jb {
                    let s = a[(i, j)] - dot(&r[i * n..i * n + j], &r[j * n..j * n + j]);
                    if i == j {
                        if !(s > 0.0) || !s.is_finite() {
                            return Err(Error::Singular);
                        }
                        r[i * n + i] = s.sqrt();
                    } else {
                        r[i * n + j] = s / r[j * n + j];
                    }
                }
            }
            let mut i0 = j0 + jb;
            while i0 < n {
                let ib = 4.min(n - i0);
                if jb == 2 && ib == 4 {
                    let t = gram_tile(&r, &r, n, j0, j0, i0);
                    let (d0, d1, l10) = (r[j0 * n + j0], r[(j0 + 1) * n + j0 + 1], r[(j0 + 1) * n + j0]);
                    for b in 0..4 {
                        let i = i0 + b;
                        let x0 = (a[(i, j0)] - t[0][b]) / d0;
                        r[i * n + j0] = x0;
                        r[i * n + j0 + 1] = (a[(i, j0 + 1)] - t[1][b] - x0 * l10) / d1;
                    }
                } else {
                    for i in i0..i0 + ib {
                        for j in j0..j0 + jb {
                            let s = a[(i, j)] - dot(&r[i * n..i * n + j], &r[j * n..j * n + j]);
                            r[i * n + j] = s / r[j * n + j];
                        }
                    }
                }
                i0 += ib;
            }
            j0 += jb;
        }
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                l[i + j * n] = r[i * n + j];
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        for k in 0..n {
            b[k] /= self.l[k + k * n];
            let bk = b[k];
            let col = &self.l[k * n..(k + 1) * n];
            for i in (k + 1)..n {
                b[i] -= col[i] * bk;
            }
        }
        for k in (0..n).rev() {
            let col = &self.l[k * n..(k + 1) * n];
            let s: f64 = (k + 1..n).map(|i| col[i] * b[i]).sum();
            b[k] = (b[k] - s) / col[k];
        }
    }

    /// Entry `L[i, j]` (zero above the diagonal).
    pub fn l(&self, i: usize, j: usize) -> f64 {
        self.l[i + j * self.n]
    }

    pub fn min_diagonal(&self) -> f64 {
        (0..self.n).map(|k| self.l[k + k * self.n]).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pivot {
    /// 1×1 block at k after interchanging rows k and `perm`.
    One(usize),
    /// 2×2 block at (k, k+1) after interchanging rows k+1 and `perm`.
    Two(usize),
}

/// Bunch–Kaufman `A = P L D Lᵀ Pᵀ` factorization of a dense symmetric
/// (possibly indefinite) matrix, following the unblocked LAPACK `sytf2`
/// scheme on the lower triangle.
#[derive(Debug, Clone)]
pub struct SymmetricIndefinite {
    n: usize,
    a: Vec<f64>,
    pivots: Vec<Option<Pivot>>,
}

impl SymmetricIndefinite {
    /// Factors the lower triangle of `a` (the upper triangle is ignored).
    pub fn factor(a: Matrix) -> Result<Self> {
        assert_eq!(a.rows(), a.cols());
        let n = a.rows();
        let mut a = a.data;
        let alpha = (1.0 + 17f64.sqrt()) / 8.0;
        let mut pivots = vec![None; n];
        let idx = |i: usize, j: usize| i + j * n;
        let mut k = 0;
        while k < n {
            let mut kstep = 1;
            let absakk = a[idx(k, k)].abs();
            let (imax, colmax) = if k + 1 < n {
                let mut best = (k + 1, a[idx(k + 1, k)].abs());
                for i in (k + 2)..n {
                    let v = a[idx(i, k)].abs();
                    if v > best.1 {
                        best = (i, v);
                    }
                }
                best
            } else {
                (k, 0.0)
            };
            if absakk.max(colmax) == 0.0 || !absakk.is_finite() || !colmax.is_finite() {
                return Err(Error::Singular);
            }
            let kp = if absakk >= alpha * colmax {
                k
            } else {
                let mut rowmax = 0.0f64;
                for j in k..imax {
                    rowmax = rowmax.max(a[idx(imax, j)].abs());
                }
                for i in (imax + 1)..n {
                    rowmax = rowmax.max(a[idx(i, imax)].abs());
                }
                if absakk >= alpha * colmax * (colmax / rowmax) {
                    k
                } else if a[idx(imax, imax)].abs() >= alpha * rowmax {
                    imax
                } else {
                    kstep = 2;
                    imax
                }
            };
            let kk = k + kstep - 1;
            if kp != kk {
                for i in (kp + 1)..n {
                    a.swap(idx(i, kk), idx(i, kp));
                }
                for j in (kk + 1)..kp {
                    a.swap(idx(j, kk), idx(kp, j));
                }
                a.swap(idx(kk, kk), idx(kp, kp));
                if kstep == 2 {
                    a.swap(idx(k + 1, k), idx(kp, k));
                }
            }
            if kstep == 1 {
                let d = a[idx(k, k)];
                if d == 0.0 {
                    return Err(Error::Singular);
                }
                let dinv = 1.0 / d;
                for j in (k + 1)..n {
                    let ajk = a[idx(j, k)] * dinv;
                    if ajk != 0.0 {
                        let (head, tail) = a.split_at_mut(j * n);
                        let colk = &head[k * n..k * n + n];
                        let colj = &mut tail[..n];
                        for i in j..n {
                            colj[i] -= colk[i] * ajk;
                        }
                    }
                }
                for i in (k + 1)..n {
                    a[idx(i, k)] *= dinv;
                }
                pivots[k] = Some(Pivot::One(kp));
            } else {
                if k + 2 < n {
                    let d21 = a[idx(k + 1, k)];
                    if d21 == 0.0 {
                        return Err(Error::Singular);
                    }
                    let d11 = a[idx(k + 1, k + 1)] / d21;
                    let d22 = a[idx(k, k)] / d21;
                    let t = 1.0 / (d11 * d22 - 1.0);
                    let d21 = t / d21;
                    if !t.is_finite() {
                        return Err(Error::Singular);
                    }
                    for j in (k + 2)..n {
                        let wk = d21 * (d11 * a[idx(j, k)] - a[idx(j, k + 1)]);
                        let wkp1 = d21 * (d22 * a[idx(j, k + 1)] - a[idx(j, k)]);
                        let (head, tail) = a.split_at_mut(j * n);
                        let colk = &head[k * n..k * n + n];
                        let colk1 = &head[(k + 1) * n..(k + 1) * n + n];
                        let colj = &mut tail[..n];
                        for i in j..n {
                            colj[i] -= colk[i] * wk + colk1[i] * wkp1;
                        }
                        a[idx(j, k)] = wk;
                        a[idx(j, k + 1)] = wkp1;
                    }
                }
                pivots[k] = Some(Pivot::Two(kp));
            }
            k += kstep;
        }
        Ok(Self { n, a, pivots })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        let a = &self.a;
        let idx = |i: usize, j: usize| i + j * n;
        let mut k = 0;
        while k < n {
            match self.pivots[k] {
                Some(Pivot::One(kp)) => {
                    b.swap(k, kp);
                    let bk = b[k];
                    let col = &a[k * n..(k + 1) * n];
                    for i in (k + 1)..n {
                        b[i] -= col[i] * bk;
                    }
                    b[k] /= a[idx(k, k)];
                    k += 1;
                }
                Some(Pivot::Two(kp)) => {
                    b.swap(k + 1, kp);
                    let (bk, bk1) = (b[k], b[k + 1]);
                    let c0 = &a[k * n..(k + 1) * n];
                    let c1 = &a[(k + 1) * n..(k + 2) * n];
                    for i in (k + 2)..n {
                        b[i] -= c0[i] * bk + c1[i] * bk1;
                    }
                    let akm1k = a[idx(k + 1, k)];
                    let akm1 = a[idx(k, k)] / akm1k;
                    let ak = a[idx(k + 1, k + 1)] / akm1k;
                    let denom = akm1 * ak - 1.0;
                    let bkm1 = b[k] / akm1k;
                    let bkk = b[k + 1] / akm1k;
                    b[k] = (ak * bkm1 - bkk) / denom;
                    b[k + 1] = (akm1 * bkk - bkm1) / denom;
                    k += 2;
                }
                None => unreachable!("pivot table has a gap"),
            }
        }
        let mut k = n;
        while k > 0 {
            let kk = k - 1;
            match self.pivots[kk] {
                Some(Pivot::One(kp)) => {
                    let col = &a[kk * n..(kk + 1) * n];
                    let s: f64 = ((kk + 1)..n).map(|i| col[i] * b[i]).sum();
                    b[kk] -= s;
                    b.swap(kk, kp);
                    k -= 1;
                }
                None => {
                    // second row of a 2×2 block starting at kk-1
                    let k0 = kk - 1;
                    let kp = match self.pivots[k0] {
                        Some(Pivot::Two(kp)) => kp,
                        _ => unreachable!("orphan 2x2 block"),
                    };
                    let c0 = &a[k0 * n..(k0 + 1) * n];
                    let c1 = &a[kk * n..(kk + 1) * n];
                    let (mut s0, mut s1) = (0.0, 0.0);
                    for i in (kk + 1)..n {
                        s0 += c0[i] * b[i];
                        s1 += c1[i] * b[i];
                    }
                    b[k0] -= s0;
                    b[kk] -= s1;
                    b.swap(kk, kp);
                    k -= 2;
                }
                Some(Pivot::Two(_)) => unreachable!("2x2 block visited from its first row"),
            }
        }
    }

    /// Inertia `(positive, negative, zero)` of the block-diagonal factor.
    pub fn inertia(&self) -> (usize, usize, usize) {
        let n = self.n;
        let (mut pos, mut neg, mut zero) = (0, 0, 0);
        let mut k = 0;
        while k < n {
            match self.pivots[k] {
                Some(Pivot::One(_)) => {
                    let d = self.a[k + k * n];
                    if d > 0.0 {
                        pos += 1
                    } else if d < 0.0 {
                        neg += 1
                    } else {
                        zero += 1
                    }
                    k += 1;
                }
                Some(Pivot::Two(_)) => {
                    // a 2×2 Bunch–Kaufman block always has one eigenvalue of each sign
                    pos += 1;
                    neg += 1;
                    k += 2;
                }
                None => unreachable!(),
            }
        }
        (pos, neg, zero)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let v: f64 = rng.gen_range(-1.0..1.0);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let a = Matrix::from_rows(&[&[4.0, 2.0], &[2.0, 3.0]]);
        let c = Cholesky::factor(&a).unwrap();
        let mut b = vec![2.0, 1.0];
        c.solve_in_place(&mut b);
        assert_relative_eq!(b[0], 0.5, epsilon = 1e-14);
        assert_relative_eq!(b[1], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert!(Cholesky::factor(&a).is_err());
    }

    #[test]
    fn bunch_kaufman_random_indefinite() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1usize, 2, 3, 5, 17, 40] {
            let a = random_symmetric(n, &mut rng);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut b = vec![0.0; n];
            a.mul_vec(&x, &mut b);
            let f = SymmetricIndefinite::factor(a.clone()).unwrap();
            f.solve_in_place(&mut b);
            for i in 0..n {
                assert!((b[i] - x[i]).abs() < 1e-8, "n={n} i={i}: {} vs {}", b[i], x[i]);
            }
        }
    }

    #[test]
    fn bunch_kaufman_zero_diagonal_needs_two_by_two() {
        // [[0,1],[1,0]] has no acceptable 1×1 pivot
        let a = Matrix::from_rows(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 2.0], &[0.0, 2.0, 0.0]]);
        let f = SymmetricIndefinite::factor(a.clone());
        // this matrix is singular (rank 2)
        assert!(f.is_err() || {
            let mut b = vec![1.0, 0.0, 0.0];
            f.unwrap().solve_in_place(&mut b);
            b.iter().any(|v| !v.is_finite())
        });
        let a = Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let f = SymmetricIndefinite::factor(a).unwrap();
        assert_eq!(f.inertia(), (1, 1, 0));
        let mut b = vec![3.0, 5.0];
        f.solve_in_place(&mut b);
        assert_relative_eq!(b[0], 5.0);
        assert_relative_eq!(b[1], 3.0);
    }

    #[test]
    fn saddle_point_inertia() {
        // [-I  1; 1ᵀ 0] has n negative and one positive eigenvalue
        let n = 4;
        let mut k = Matrix::zeros(n + 1, n + 1);
        for i in 0..n {
            k[(i, i)] = -1.0;
            k[(n, i)] = 1.0;
            k[(i, n)] = 1.0;
        }
        let f = SymmetricIndefinite::factor(k).unwrap();
        assert_eq!(f.inertia(), (1, n, 0));
    }
}
