//! Damped BFGS/DFP approximations `H ≈ ∇²f` and `W = H⁻¹`.
//!
//! Both matrices are kept in step. In full storage they are dense `n×n`
//! matrices updated by rank-two corrections; in limited storage only the
//! most recent `(s, v)` pairs are kept and products are formed on demand
//! from an identity base.
//!
//! Each formula has two "shapes" of update that map onto one another under
//! the swap `s ↔ v`:
//!
//! * the *projected* shape `M' = (I - ρ a bᵀ) M (I - ρ b aᵀ) + ρ a aᵀ`,
//! * the *rank-two* shape `M' = M - (Mb)(Mb)ᵀ/(bᵀMb) + ρ a aᵀ`,
//!
//! with `ρ = 1/(aᵀb)`. BFGS applies the projected shape to `W` with
//! `(a, b) = (s, v)` and the rank-two shape to `H` with `(a, b) = (v, s)`;
//! DFP is the dual assignment.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm2_sq, Matrix};

/// Access to the inverse-Hessian approximation `W` and its inverse `H`.
pub trait Metric {
    fn dim(&self) -> usize;
    /// `out = W r`
    fn apply_w(&self, r: &[f64], out: &mut [f64]);
    /// `out = H r`
    fn apply_h(&self, r: &[f64], out: &mut [f64]);

    /// `out = W R` column by column unless overridden.
    fn apply_w_columns(&self, r: &Matrix, out: &mut Matrix) {
        for j in 0..r.cols() {
            self.apply_w(r.col(j), out.col_mut(j));
        }
    }

    /// Dense copy of `H`, built column by column unless overridden.
    fn dense_h(&self) -> Matrix {
        dense_from(self.dim(), |r, out| self.apply_h(r, out))
    }

    /// Dense copy of `W`, built column by column unless overridden.
    fn dense_w(&self) -> Matrix {
        dense_from(self.dim(), |r, out| self.apply_w(r, out))
    }

    fn is_identity(&self) -> bool {
        false
    }
}

fn dense_from(n: usize, apply: impl Fn(&[f64], &mut [f64])) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        apply(&e, m.col_mut(j));
        e[j] = 0.0;
    }
    m.symmetrize();
    m
}

/// `W = H = I`.
#[derive(Debug, Clone, Copy)]
pub struct IdentityMetric(pub usize);

impl Metric for IdentityMetric {
    fn dim(&self) -> usize {
        self.0
    }
    fn apply_w(&self, r: &[f64], out: &mut [f64]) {
        out.copy_from_slice(r);
    }
    fn apply_h(&self, r: &[f64], out: &mut [f64]) {
        out.copy_from_slice(r);
    }
    fn dense_h(&self) -> Matrix {
        Matrix::identity(self.0)
    }
    fn dense_w(&self) -> Matrix {
        Matrix::identity(self.0)
    }
    fn is_identity(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateFormula {
    #[default]
    Bfgs,
    Dfp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Storage {
    #[default]
    Full,
    Limited,
}

/// Result of damping a raw gradient difference.
#[derive(Debug, Clone, PartialEq)]
pub struct Damped {
    pub beta: f64,
    pub v: Vec<f64>,
}

/// Replaces `y` by `v = βs + (1-β)y` with the smallest `β ∈ [0, 1]` such
/// that `sᵀv/‖s‖² ≥ η` and `‖v‖²/(sᵀv) ≤ ψ`.
pub fn damp(s: &[f64], y: &[f64], eta: f64, psi: f64) -> Result<Damped> {
    assert_eq!(s.len(), y.len());
    let ss = norm2_sq(s);
    if ss == 0.0 || !ss.is_finite() {
        return Err(Error::ZeroStep);
    }
    let sy = dot(s, y);
    let yy = norm2_sq(y);
    let d: Vec<f64> = s.iter().zip(y).map(|(a, b)| a - b).collect();
    let dd = norm2_sq(&d);
    let yd = dot(y, &d);

    // s'v(β) = sy + β (ss - sy); condition 1 is linear in β
    let Some((lo1, hi1)) = linear_interval(ss - sy, sy - eta * ss) else {
        return Ok(Damped { beta: 1.0, v: s.to_vec() });
    };
    // ψ s'v - ‖v‖² = -dd β² + (ψ(ss-sy) - 2yd) β + (ψ sy - yy); concave
    let Some((lo2, hi2)) = concave_interval(dd, psi * (ss - sy) - 2.0 * yd, psi * sy - yy) else {
        return Ok(Damped { beta: 1.0, v: s.to_vec() });
    };
    let lo = lo1.max(lo2).max(0.0);
    let hi = hi1.min(hi2).min(1.0);
    if lo > hi {
        return Ok(Damped { beta: 1.0, v: s.to_vec() });
    }

    let combine = |beta: f64| -> Vec<f64> {
        s.iter().zip(y).map(|(si, yi)| beta * si + (1.0 - beta) * yi).collect()
    };
    let holds = |v: &[f64]| {
        let sv = dot(s, v);
        sv / ss >= eta && sv > 0.0 && norm2_sq(v) / sv <= psi
    };
    // the interval end is a root of a rounded polynomial; nudge inward until
    // both inequalities hold for the vector actually returned
    let mut beta = lo;
    for attempt in 0..64 {
        let v = combine(beta);
        if holds(&v) {
            return Ok(Damped { beta, v });
        }
        let step = (hi - lo).max(f64::EPSILON) * 2f64.powi(attempt - 52);
        beta = (beta + step).min(hi);
    }
    Ok(Damped { beta: 1.0, v: s.to_vec() })
}

/// `{β ∈ R : slope·β + offset ≥ 0}` as a closed interval (possibly unbounded).
fn linear_interval(slope: f64, offset: f64) -> Option<(f64, f64)> {
    if slope > 0.0 {
        Some((-offset / slope, f64::INFINITY))
    } else if slope < 0.0 {
        Some((f64::NEG_INFINITY, -offset / slope))
    } else if offset >= 0.0 {
        Some((f64::NEG_INFINITY, f64::INFINITY))
    } else {
        None
    }
}

/// `{β : -a β² + b β + c ≥ 0}` for `a ≥ 0`.
fn concave_interval(a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
    if a <= 0.0 {
        return linear_interval(b, c);
    }
    let disc = b * b + 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    // roots of a β² - b β - c = 0, computed without cancellation
    let sq = disc.sqrt();
    let q = 0.5 * (b + b.signum() * sq);
    let (r1, r2) = if q != 0.0 { (q / a, -c / q) } else { (0.0, 0.0) };
    Some((r1.min(r2), r1.max(r2)))
}

#[derive(Debug, Clone)]
struct Pair {
    s: Vec<f64>,
    v: Vec<f64>,
    rho: f64,
    // M_{j-1} b_j for the rank-two shape, and bᵀ of it
    u: Vec<f64>,
    bu: f64,
}

#[derive(Debug, Clone)]
enum Repr {
    Full { h: Matrix, w: Matrix },
    Limited { capacity: usize, pairs: VecDeque<Pair> },
}

/// Quasi-Newton approximation state.
#[derive(Debug, Clone)]
pub struct QuasiNewtonState {
    n: usize,
    formula: UpdateFormula,
    repr: Repr,
    updates: usize,
}

impl QuasiNewtonState {
    /// Starts from `H = W = I`.
    pub fn new(n: usize, formula: UpdateFormula, storage: Storage, history_limit: usize) -> Self {
        let repr = match storage {
            Storage::Full => Repr::Full { h: Matrix::identity(n), w: Matrix::identity(n) },
            Storage::Limited => {
                Repr::Limited { capacity: history_limit.max(1), pairs: VecDeque::new() }
            }
        };
        Self { n, formula, repr, updates: 0 }
    }

    pub fn formula(&self) -> UpdateFormula {
        self.formula
    }

    pub fn storage(&self) -> Storage {
        match self.repr {
            Repr::Full { .. } => Storage::Full,
            Repr::Limited { .. } => Storage::Limited,
        }
    }

    /// Number of accepted updates since construction.
    pub fn update_count(&self) -> usize {
        self.updates
    }

    /// Stored `(s, v)` pairs, oldest first (empty for full storage).
    pub fn history(&self) -> Vec<(&[f64], &[f64])> {
        match &self.repr {
            Repr::Full { .. } => Vec::new(),
            Repr::Limited { pairs, .. } => {
                pairs.iter().map(|p| (p.s.as_slice(), p.v.as_slice())).collect()
            }
        }
    }

    /// Pairs behind `W` when it is the limited-memory BFGS inverse with
    /// identity base, tagged by their update number; `None` for other
    /// nonidentity states.
    pub fn compact_history(&self) -> Option<(usize, Vec<(&[f64], &[f64])>)> {
        match &self.repr {
            Repr::Limited { pairs, .. } if self.formula == UpdateFormula::Bfgs => Some((
                self.updates - pairs.len(),
                pairs.iter().map(|p| (p.s.as_slice(), p.v.as_slice())).collect(),
            )),
            _ if self.updates == 0 => Some((0, Vec::new())),
            _ => None,
        }
    }

    /// Applies one update with a curvature pair satisfying `sᵀv > 0`.
    pub fn update(&mut self, s: &[f64], v: &[f64]) -> Result<()> {
        if s.len() != self.n || v.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: s.len().min(v.len()) });
        }
        let sv = dot(s, v);
        if !(sv > 0.0) || !sv.is_finite() {
            return Err(Error::NonPositiveCurvature(sv));
        }
        let formula = self.formula;
        match &mut self.repr {
            Repr::Full { h, w } => {
                let (wa, wb, ha, hb) = match formula {
                    UpdateFormula::Bfgs => (s, v, v, s),
                    UpdateFormula::Dfp => (v, s, s, v),
                };
                // BFGS: W projected in (s, v), H rank-two in (v, s); DFP swaps roles
                match formula {
                    UpdateFormula::Bfgs => {
                        projected_update(w, wa, wb);
                        rank_two_update(h, ha, hb);
                    }
                    UpdateFormula::Dfp => {
                        projected_update(h, wa, wb);
                        rank_two_update(w, ha, hb);
                    }
                }
                w.symmetrize();
                h.symmetrize();
            }
            Repr::Limited { capacity, pairs } => {
                pairs.push_back(Pair { s: s.to_vec(), v: v.to_vec(), rho: 1.0 / sv, u: Vec::new(), bu: 0.0 });
                if pairs.len() > *capacity {
                    pairs.pop_front();
                    refresh_rank_two(formula, pairs, 0);
                } else {
                    let last = pairs.len() - 1;
                    refresh_rank_two(formula, pairs, last);
                }
            }
        }
        self.updates += 1;
        Ok(())
    }

    /// Dense `H` and `W` for full storage.
    pub fn full_matrices(&self) -> Option<(&Matrix, &Matrix)> {
        match &self.repr {
            Repr::Full { h, w } => Some((h, w)),
            Repr::Limited { .. } => None,
        }
    }
}

/// `M ← (I - ρ a bᵀ) M (I - ρ b aᵀ) + ρ a aᵀ`
fn projected_update(m: &mut Matrix, a: &[f64], b: &[f64]) {
    let n = a.len();
    let rho = 1.0 / dot(a, b);
    let mut mb = vec![0.0; n];
    m.sym_mul_vec(b, &mut mb);
    let bmb = dot(b, &mb);
    let coef = rho * rho * bmb + rho;
    for j in 0..n {
        let (aj, mbj) = (a[j], mb[j]);
        let col = m.col_mut(j);
        for i in 0..n {
            col[i] += -rho * (a[i] * mbj + mb[i] * aj) + coef * a[i] * aj;
        }
    }
}

/// `M ← M - (Mb)(Mb)ᵀ/(bᵀMb) + ρ a aᵀ`
fn rank_two_update(m: &mut Matrix, a: &[f64], b: &[f64]) {
    let n = a.len();
    let rho = 1.0 / dot(a, b);
    let mut mb = vec![0.0; n];
    m.sym_mul_vec(b, &mut mb);
    let bmb = dot(b, &mb);
    for j in 0..n {
        let (aj, mbj) = (a[j], mb[j]);
        let col = m.col_mut(j);
        for i in 0..n {
            col[i] += -mb[i] * mbj / bmb + rho * a[i] * aj;
        }
    }
}

// Which vector of a pair plays `a` and which `b` in each product.
fn projected_roles(formula: UpdateFormula, p: &Pair) -> (&[f64], &[f64]) {
    match formula {
        UpdateFormula::Bfgs => (&p.s, &p.v),
        UpdateFormula::Dfp => (&p.v, &p.s),
    }
}

fn rank_two_roles(formula: UpdateFormula, p: &Pair) -> (&[f64], &[f64]) {
    match formula {
        UpdateFormula::Bfgs => (&p.v, &p.s),
        UpdateFormula::Dfp => (&p.s, &p.v),
    }
}

/// Two-loop recursion for the projected shape with identity base.
fn two_loop(formula: UpdateFormula, pairs: &VecDeque<Pair>, r: &[f64], out: &mut [f64]) {
    out.copy_from_slice(r);
    let mut alphas = vec![0.0; pairs.len()];
    for (k, p) in pairs.iter().enumerate().rev() {
        let (a, b) = projected_roles(formula, p);
        let alpha = p.rho * dot(a, out);
        alphas[k] = alpha;
        axpy(-alpha, b, out);
    }
    for (k, p) in pairs.iter().enumerate() {
        let (a, b) = projected_roles(formula, p);
        let beta = p.rho * dot(b, out);
        axpy(alphas[k] - beta, a, out);
    }
}

/// [`two_loop`] on the columns of the column-major `n×B` block `r`, sharing
/// each pass over a pair between columns.
fn two_loop_block(formula: UpdateFormula, pairs: &VecDeque<Pair>, n: usize, r: &[f64], out: &mut [f64]) {
    out.copy_from_slice(r);
    let cols = r.len() / n;
    let mut alphas = vec![0.0; pairs.len() * cols];
    for (k, p) in pairs.iter().enumerate().rev() {
        let (a, b) = projected_roles(formula, p);
        for (c, oc) in out.chunks_exact_mut(n).enumerate() {
            let alpha = p.rho * dot(a, oc);
            alphas[k * cols + c] = alpha;
            axpy(-alpha, b, oc);
        }
    }
    for (k, p) in pairs.iter().enumerate() {
        let (a, b) = projected_roles(formula, p);
        for (c, oc) in out.chunks_exact_mut(n).enumerate() {
            let beta = p.rho * dot(b, oc);
            axpy(alphas[k * cols + c] - beta, a, oc);
        }
    }
}

/// Sum form of the rank-two shape: `M r = r + Σ_j (ρ_j (a_jᵀr) a_j - (u_jᵀr)/(b_jᵀu_j) u_j)`.
fn rank_two_apply(formula: UpdateFormula, pairs: &VecDeque<Pair>, upto: usize, r: &[f64], out: &mut [f64]) {
    out.copy_from_slice(r);
    for p in pairs.iter().take(upto) {
        let (a, _) = rank_two_roles(formula, p);
        let ca = p.rho * dot(a, r);
        let cu = dot(&p.u, r) / p.bu;
        axpy(ca, a, out);
        axpy(-cu, &p.u, out);
    }
}

/// Recomputes the cached `u_j = M_{j-1} b_j` for `j ≥ from`.
fn refresh_rank_two(formula: UpdateFormula, pairs: &mut VecDeque<Pair>, from: usize) {
    for j in from..pairs.len() {
        let b = rank_two_roles(formula, &pairs[j]).1.to_vec();
        let mut u = vec![0.0; b.len()];
        rank_two_apply(formula, pairs, j, &b, &mut u);
        let bu = dot(&b, &u);
        pairs[j].u = u;
        pairs[j].bu = bu;
    }
}

/// `GᵀWG` for the limited-memory BFGS `W` of `pairs` from `GᵀG`,
/// `A = SᵀG` and `B = VᵀG` (one row per pair), using
/// `W = I + [S V] [[R⁻ᵀ(D + VᵀV)R⁻¹, -R⁻ᵀ], [-R⁻¹, 0]] [S V]ᵀ`
/// with `R` the upper triangle of `SᵀV` and `D` its diagonal.
pub fn compact_bfgs_gram(pairs: &[(&[f64], &[f64])], gg: &Matrix, a: &Matrix, b: &Matrix) -> Matrix {
    let h = pairs.len();
    let m = gg.rows();
    let mut out = gg.clone();
    if h == 0 {
        return out;
    }
    let mut r = Matrix::zeros(h, h);
    let mut c = Matrix::zeros(h, h);
    for i in 0..h {
        for j in 0..h {
            if i <= j {
                r[(i, j)] = dot(pairs[i].0, pairs[j].1);
            }
            if i >= j {
                let vv = dot(pairs[i].1, pairs[j].1);
                c[(i, j)] = vv;
                c[(j, i)] = vv;
            }
        }
        c[(i, i)] += r[(i, i)];
    }
    // P = R⁻¹A, T = (D + VᵀV)P
    let mut p = a.clone();
    for j in 0..m {
        let col = p.col_mut(j);
        for i in (0..h).rev() {
            let mut acc = col[i];
            for k in i + 1..h {
                acc -= r[(i, k)] * col[k];
            }
            col[i] = acc / r[(i, i)];
        }
    }
    let mut t = Matrix::zeros(h, m);
    for j in 0..m {
        c.mul_vec(p.col(j), t.col_mut(j));
    }
    for j in 0..m {
        for i in j..m {
            let e = dot(p.col(i), t.col(j)) - dot(p.col(i), b.col(j)) - dot(b.col(i), p.col(j));
            out[(i, j)] += e;
            if i != j {
                out[(j, i)] += e;
            }
        }
    }
    out
}

impl Metric for QuasiNewtonState {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply_w(&self, r: &[f64], out: &mut [f64]) {
        match &self.repr {
            Repr::Full { w, .. } => w.sym_mul_vec(r, out),
            Repr::Limited { pairs, .. } => match self.formula {
                UpdateFormula::Bfgs => two_loop(self.formula, pairs, r, out),
                UpdateFormula::Dfp => rank_two_apply(self.formula, pairs, pairs.len(), r, out),
            },
        }
    }

    fn apply_w_columns(&self, r: &Matrix, out: &mut Matrix) {
        const BLOCK: usize = 8;
        match (&self.repr, self.formula) {
            (Repr::Limited { pairs, .. }, UpdateFormula::Bfgs) if self.n > 0 => {
                let n = self.n;
                for (rb, ob) in r.as_slice().chunks(n * BLOCK).zip(out.as_mut_slice().chunks_mut(n * BLOCK)) {
                    two_loop_block(self.formula, pairs, n, rb, ob);
                }
            }
            _ => {
                for j in 0..r.cols() {
                    self.apply_w(r.col(j), out.col_mut(j));
                }
            }
        }
    }

    fn apply_h(&self, r: &[f64], out: &mut [f64]) {
        match &self.repr {
            Repr::Full { h, .. } => h.sym_mul_vec(r, out),
            Repr::Limited { pairs, .. } => match self.formula {
                UpdateFormula::Bfgs => rank_two_apply(self.formula, pairs, pairs.len(), r, out),
                UpdateFormula::Dfp => two_loop(self.formula, pairs, r, out),
            },
        }
    }

    fn dense_h(&self) -> Matrix {
        match &self.repr {
            Repr::Full { h, .. } => h.clone(),
            Repr::Limited { .. } => dense_from(self.n, |r, out| self.apply_h(r, out)),
        }
    }

    fn dense_w(&self) -> Matrix {
        match &self.repr {
            Repr::Full { w, .. } => w.clone(),
            Repr::Limited { .. } => dense_from(self.n, |r, out| self.apply_w(r, out)),
        }
    }

    fn is_identity(&self) -> bool {
        self.updates == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn damp_keeps_pair_when_bounds_hold() {
        let d = damp(&[1.0, 0.0], &[2.0, 0.0], 1e-8, 1e8).unwrap();
        assert_eq!(d.beta, 0.0);
        assert_eq!(d.v, vec![2.0, 0.0]);
        let d = damp(&[0.3, -1.0], &[0.3, -1.0], 1e-8, 1e8).unwrap();
        assert_eq!(d.beta, 0.0);
    }

    #[test]
    fn damp_negative_curvature_binds_first_bound() {
        let eta = 1e-8;
        let d = damp(&[1.0, 0.0], &[-1.0, 0.0], eta, 1e8).unwrap();
        assert_relative_eq!(d.beta, (1.0 + eta) / 2.0, epsilon = 1e-12);
        assert_relative_eq!(d.v[0], eta, max_relative = 1e-6);
        assert_eq!(d.v[1], 0.0);
        assert!(d.v[0] >= eta);
    }

    #[test]
    fn damp_second_bound() {
        // s'y > 0 but ‖y‖²/s'y enormous
        let s = [1.0, 0.0];
        let y = [1e-3, 10.0];
        let (eta, psi) = (1e-8, 10.0);
        let d = damp(&s, &y, eta, psi).unwrap();
        let sv = dot(&s, &d.v);
        assert!(d.beta > 0.0 && d.beta < 1.0);
        assert!(norm2_sq(&d.v) / sv <= psi);
        // smallest β: slightly smaller β violates the bound
        let b = d.beta * (1.0 - 1e-6);
        let v: Vec<f64> = s.iter().zip(&y).map(|(a, c)| b * a + (1.0 - b) * c).collect();
        assert!(norm2_sq(&v) / dot(&s, &v) > psi);
    }

    #[test]
    fn damp_rejects_zero_step() {
        assert!(matches!(damp(&[0.0, 0.0], &[1.0, 0.0], 1e-8, 1e8), Err(Error::ZeroStep)));
    }

    #[test]
    fn damp_infeasible_returns_s() {
        let d = damp(&[1.0, 0.0], &[-1.0, 0.0], 2.0, 3.0).unwrap();
        assert_eq!(d.beta, 1.0);
        assert_eq!(d.v, vec![1.0, 0.0]);
    }

    #[test]
    fn bfgs_full_identity_pair_keeps_identity() {
        let mut q = QuasiNewtonState::new(2, UpdateFormula::Bfgs, Storage::Full, 20);
        q.update(&[1.0, 0.0], &[1.0, 0.0]).unwrap();
        let (h, w) = q.full_matrices().unwrap();
        assert_eq!(*h, Matrix::identity(2));
        assert_eq!(*w, Matrix::identity(2));
    }

    #[test]
    fn bfgs_full_hand_example() {
        let mut q = QuasiNewtonState::new(2, UpdateFormula::Bfgs, Storage::Full, 20);
        q.update(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        let (h, w) = q.full_matrices().unwrap();
        let eh = Matrix::from_rows(&[&[1.0, 1.0], &[1.0, 2.0]]);
        let ew = Matrix::from_rows(&[&[2.0, -1.0], &[-1.0, 1.0]]);
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(h[(i, j)], eh[(i, j)], epsilon = 1e-15);
                assert_relative_eq!(w[(i, j)], ew[(i, j)], epsilon = 1e-15);
            }
        }
        let mut out = [0.0; 2];
        q.apply_w(&[1.0, 0.0], &mut out);
        assert_eq!(out, [2.0, -1.0]);
    }

    #[test]
    fn dfp_full_is_inverse_pair() {
        let mut q = QuasiNewtonState::new(2, UpdateFormula::Dfp, Storage::Full, 20);
        q.update(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        let (h, w) = q.full_matrices().unwrap();
        let p = h.matmul(w);
        let i2 = Matrix::identity(2);
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(p[(i, j)], i2[(i, j)], epsilon = 1e-14);
            }
        }
        // secant condition W v = s
        let mut out = [0.0; 2];
        q.apply_w(&[1.0, 1.0], &mut out);
        assert_relative_eq!(out[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(out[1], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn update_rejects_nonpositive_curvature() {
        let mut q = QuasiNewtonState::new(2, UpdateFormula::Bfgs, Storage::Limited, 2);
        assert!(matches!(
            q.update(&[1.0, 0.0], &[-1.0, 0.0]),
            Err(Error::NonPositiveCurvature(_))
        ));
        assert_eq!(q.update_count(), 0);
        assert!(q.history().is_empty());
    }

    #[test]
    fn limited_history_is_fifo() {
        let mut q = QuasiNewtonState::new(2, UpdateFormula::Bfgs, Storage::Limited, 2);
        let pairs = [([1.0, 0.0], [1.0, 0.5]), ([0.0, 1.0], [0.2, 1.0]), ([1.0, 1.0], [1.0, 2.0])];
        for (s, v) in &pairs {
            q.update(s, v).unwrap();
        }
        let h = q.history();
        assert_eq!(h.len(), 2);
        assert_eq!(h[0].0, &pairs[1].0);
        assert_eq!(h[1].0, &pairs[2].0);
    }

    #[test]
    fn empty_limited_history_is_identity() {
        let q = QuasiNewtonState::new(3, UpdateFormula::Bfgs, Storage::Limited, 5);
        let mut out = [0.0; 3];
        q.apply_w(&[1.0, -2.0, 3.0], &mut out);
        assert_eq!(out, [1.0, -2.0, 3.0]);
        q.apply_h(&[1.0, -2.0, 3.0], &mut out);
        assert_eq!(out, [1.0, -2.0, 3.0]);
    }

    #[test]
    fn concave_interval_roots() {
        // -(β-1)(β-3) = -β² + 4β - 3
        let (lo, hi) = concave_interval(1.0, 4.0, -3.0).unwrap();
        assert_relative_eq!(lo, 1.0, epsilon = 1e-14);
        assert_relative_eq!(hi, 3.0, epsilon = 1e-14);
        assert!(concave_interval(1.0, 0.0, -1.0).is_none());
    }
}
