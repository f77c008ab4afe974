//! Active-set solver for the direction subproblem.
//!
//! Works on the `θ`-form `min ½θᵀQθ + cᵀθ, aᵀθ = 1, θ ≥ 0` (see
//! [`crate::direction`]), which is the negated dual subproblem. A free set
//! `F` is kept together with a Cholesky factor of `R = Q_FF + a_F a_Fᵀ`;
//! `R` is positive definite exactly when the equality-constrained problem
//! on `F` has a unique solution. Each iteration either adds the index with
//! the most negative multiplier or, after a blocked step, drops one index,
//! so the dual objective never decreases.

use crate::direction::{kkt_residual, QpOperator};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, Cholesky, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    Omega(usize),
    Sigma(usize),
    Rho(usize),
}

#[derive(Debug, Clone, Copy)]
pub struct DasOptions {
    pub tol: f64,
    /// Defaults to `100·(m + 2n)`.
    pub max_iter: Option<usize>,
}

impl Default for DasOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: None }
    }
}

/// Lower-triangular factor with row append and Givens-based deletion.
#[derive(Debug, Clone, Default)]
struct UpdatableCholesky {
    rows: Vec<Vec<f64>>,
}

// relative pivot threshold below which an appended column counts as dependent
const SINGULAR_PIVOT: f64 = 1e-10;

impl UpdatableCholesky {
    fn forward(&self, b: &mut [f64]) {
        for i in 0..self.rows.len() {
            let row = &self.rows[i];
            let s = dot(&row[..i], &b[..i]);
            b[i] = (b[i] - s) / row[i];
        }
    }

    fn backward(&self, b: &mut [f64]) {
        for i in (0..self.rows.len()).rev() {
            let mut s = b[i];
            for k in i + 1..self.rows.len() {
                s -= self.rows[k][i] * b[k];
            }
            b[i] = s / self.rows[i][i];
        }
    }

    fn solve(&self, b: &mut [f64]) {
        self.forward(b);
        self.backward(b);
    }

    /// Appends a row/column `(r, r_ii)`; returns `false` if the enlarged
    /// matrix is numerically singular.
    fn append(&mut self, r: &[f64], r_ii: f64) -> bool {
        let mut l = r.to_vec();
        self.forward(&mut l);
        let d2 = r_ii - dot(&l, &l);
        if !(d2 > SINGULAR_PIVOT * r_ii.abs().max(f64::MIN_POSITIVE)) {
            return false;
        }
        l.push(d2.sqrt());
        self.rows.push(l);
        true
    }

    fn delete(&mut self, k: usize) {
        self.rows.remove(k);
        let p = self.rows.len();
        for j in k..p {
            let a = self.rows[j][j];
            let b = self.rows[j][j + 1];
            let r = a.hypot(b);
            let (c, s) = if r == 0.0 { (1.0, 0.0) } else { (a / r, b / r) };
            for i in j..p {
                let x = self.rows[i][j];
                let y = self.rows[i][j + 1];
                self.rows[i][j] = c * x + s * y;
                self.rows[i][j + 1] = -s * x + c * y;
            }
            self.rows[j].truncate(j + 1);
        }
    }

    fn from_matrix(r: &Matrix) -> Result<Self> {
        let ch = Cholesky::factor(r)?;
        let p = r.rows();
        let mut rows = Vec::with_capacity(p);
        for i in 0..p {
            rows.push((0..=i).map(|j| ch.l(i, j)).collect());
        }
        Ok(Self { rows })
    }
}

/// Free set, values and factor; reusable after appending columns.
#[derive(Debug, Clone)]
pub struct DasState {
    n: usize,
    m: usize,
    free: Vec<Var>,
    value: Vec<f64>,
    // W·M_k for each free variable
    wcols: Vec<Vec<f64>>,
    chol: UpdatableCholesky,
}

impl DasState {
    pub fn free_set(&self) -> &[Var] {
        &self.free
    }

    pub fn columns(&self) -> usize {
        self.m
    }

    /// Declares `extra` new trailing columns; they start inactive.
    pub fn augment(&mut self, extra: usize) {
        self.m += extra;
    }
}

#[derive(Debug, Clone)]
pub struct DasOutput {
    pub omega: Vec<f64>,
    pub sigma: Vec<f64>,
    pub rho: Vec<f64>,
    pub gamma: Vec<f64>,
    pub u: f64,
    /// `W(Gω + γ) = -d`
    pub w: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
    /// Dual objective after each free-set change.
    pub objective_trace: Vec<f64>,
    pub state: DasState,
}

struct Ctx<'o, 'd, 'a> {
    op: &'o QpOperator<'d, 'a>,
    n: usize,
    m: usize,
}

impl Ctx<'_, '_, '_> {
    fn a(&self, v: Var) -> f64 {
        matches!(v, Var::Omega(_)) as u8 as f64
    }

    fn c(&self, v: Var) -> f64 {
        match v {
            Var::Omega(j) => -self.op.b()[j],
            _ => self.op.delta(),
        }
    }

    /// `W M_v`
    fn wcol(&self, v: Var) -> Vec<f64> {
        match v {
            Var::Omega(j) => self.op.wg().col(j).to_vec(),
            Var::Sigma(i) | Var::Rho(i) => {
                let mut e = vec![0.0; self.n];
                e[i] = if matches!(v, Var::Sigma(_)) { 1.0 } else { -1.0 };
                self.op.apply_w(&e)
            }
        }
    }

    /// `M_vᵀ x`
    fn mt(&self, v: Var, x: &[f64]) -> f64 {
        match v {
            Var::Omega(j) => dot(self.op.g().col(j), x),
            Var::Sigma(i) => x[i],
            Var::Rho(i) => -x[i],
        }
    }

    /// `y += t M_v`
    fn add_m(&self, v: Var, t: f64, y: &mut [f64]) {
        match v {
            Var::Omega(j) => axpy(t, self.op.g().col(j), y),
            Var::Sigma(i) => y[i] += t,
            Var::Rho(i) => y[i] -= t,
        }
    }

    fn r_entry(&self, vi: Var, wcol_j: &[f64], vj: Var) -> f64 {
        self.mt(vi, wcol_j) + self.a(vi) * self.a(vj)
    }
}

/// `R x` over the free set.
fn r_times(ctx: &Ctx, st: &DasState, x: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; ctx.n];
    let mut ax = 0.0;
    for (k, &v) in st.free.iter().enumerate() {
        axpy(x[k], &st.wcols[k], &mut w);
        ax += ctx.a(v) * x[k];
    }
    st.free.iter().map(|&v| ctx.mt(v, &w) + ctx.a(v) * ax).collect()
}

/// Solves `R x = rhs` with one step of iterative refinement; returns the
/// final relative residual.
fn refined_solve(ctx: &Ctx, st: &DasState, rhs: &[f64]) -> (Vec<f64>, f64) {
    let mut x = rhs.to_vec();
    st.chol.solve(&mut x);
    let mut rel = f64::INFINITY;
    for _ in 0..2 {
        let rx = r_times(ctx, st, &x);
        let mut e: Vec<f64> = rhs.iter().zip(&rx).map(|(b, r)| b - r).collect();
        let scale = rhs.iter().chain(&rx).fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        rel = e.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale;
        if rel <= 1e-15 {
            break;
        }
        st.chol.solve(&mut e);
        axpy(1.0, &e, &mut x);
    }
    (x, rel)
}

fn refactor(ctx: &Ctx, st: &mut DasState) -> Result<()> {
    let p = st.free.len();
    let mut r = Matrix::zeros(p, p);
    for j in 0..p {
        for i in 0..p {
            r[(i, j)] = ctx.r_entry(st.free[i], &st.wcols[j], st.free[j]);
        }
    }
    r.symmetrize();
    st.chol = UpdatableCholesky::from_matrix(&r)?;
    Ok(())
}

/// Minimizer of the equality-constrained problem on the free set and the
/// multiplier `u` of `aᵀθ = 1`.
fn subspace_solution(ctx: &Ctx, st: &mut DasState) -> Result<(Vec<f64>, f64)> {
    let af: Vec<f64> = st.free.iter().map(|&v| ctx.a(v)).collect();
    let cf: Vec<f64> = st.free.iter().map(|&v| ctx.c(v)).collect();
    let mut attempt = 0;
    loop {
        let (x1, r1) = refined_solve(ctx, st, &af);
        let (x2, r2) = refined_solve(ctx, st, &cf);
        if r1.max(r2) > 1e-6 && attempt == 0 {
            refactor(ctx, st)?;
            attempt += 1;
            continue;
        }
        let denom = dot(&af, &x1);
        if !(denom > 0.0) {
            return Err(Error::Singular);
        }
        let lambda = (1.0 + dot(&af, &x2)) / denom;
        let theta: Vec<f64> = x1.iter().zip(&x2).map(|(a, c)| lambda * a - c).collect();
        return Ok((theta, lambda - 1.0));
    }
}

fn w_of(ctx: &Ctx, st: &DasState) -> Vec<f64> {
    let mut w = vec![0.0; ctx.n];
    for (k, wc) in st.wcols.iter().enumerate() {
        if st.value[k] != 0.0 {
            axpy(st.value[k], wc, &mut w);
        }
    }
    w
}

/// Dual objective `-½yᵀWy + bᵀω - δ(𝟙ᵀσ + 𝟙ᵀρ)`.
fn dual_value(ctx: &Ctx, st: &DasState, w: &[f64]) -> f64 {
    let mut y = vec![0.0; ctx.n];
    let mut lin = 0.0;
    for (k, &v) in st.free.iter().enumerate() {
        ctx.add_m(v, st.value[k], &mut y);
        lin += ctx.c(v) * st.value[k];
    }
    -(0.5 * dot(&y, w) + lin)
}

fn remove_free(st: &mut DasState, k: usize) {
    st.free.remove(k);
    st.value.remove(k);
    st.wcols.remove(k);
    st.chol.delete(k);
}

fn cold_state(ctx: &Ctx) -> Result<DasState> {
    let g = ctx.op.g();
    let wg = ctx.op.wg();
    let (mut best, mut jstar) = (f64::INFINITY, 0);
    for j in 0..ctx.m {
        let q = dot(g.col(j), wg.col(j));
        if q < best {
            best = q;
            jstar = j;
        }
    }
    let v = Var::Omega(jstar);
    let wc = ctx.wcol(v);
    let rjj = ctx.r_entry(v, &wc, v);
    let mut chol = UpdatableCholesky::default();
    if !chol.append(&[], rjj) {
        return Err(Error::Singular);
    }
    Ok(DasState { n: ctx.n, m: ctx.m, free: vec![v], value: vec![1.0], wcols: vec![wc], chol })
}

/// Most negative multiplier among variables at zero.
fn price(ctx: &Ctx, st: &DasState, w: &[f64], u: f64) -> Option<(Var, f64)> {
    let mut is_free = vec![false; ctx.m + 2 * ctx.n];
    for &v in &st.free {
        is_free[flat(ctx, v)] = true;
    }
    let mut gtw = vec![0.0; ctx.m];
    ctx.op.g().mul_vec_t(w, &mut gtw);
    let delta = ctx.op.delta();
    let mut best: Option<(Var, f64)> = None;
    let mut consider = |v: Var, val: f64| {
        if best.map_or(true, |(_, b)| val < b) {
            best = Some((v, val));
        }
    };
    for j in 0..ctx.m {
        if !is_free[j] {
            consider(Var::Omega(j), gtw[j] - ctx.op.b()[j] - u);
        }
    }
    if delta.is_finite() {
        for i in 0..ctx.n {
            if !is_free[ctx.m + i] {
                consider(Var::Sigma(i), w[i] + delta);
            }
            if !is_free[ctx.m + ctx.n + i] {
                consider(Var::Rho(i), delta - w[i]);
            }
        }
    }
    best
}

fn flat(ctx: &Ctx, v: Var) -> usize {
    match v {
        Var::Omega(j) => j,
        Var::Sigma(i) => ctx.m + i,
        Var::Rho(i) => ctx.m + ctx.n + i,
    }
}

/// Solves the subproblem to KKT residual `tol`, optionally starting from a
/// previous state whose columns form a prefix of the current ones.
pub fn solve_das(op: &QpOperator, opts: &DasOptions, warm: Option<DasState>) -> Result<DasOutput> {
    let (n, m) = (op.n(), op.m());
    let ctx = Ctx { op, n, m };
    let mut st = match warm {
        Some(s) => {
            if s.n != n || s.m > m {
                return Err(Error::DimensionMismatch { expected: m, got: s.m });
            }
            DasState { m, ..s }
        }
        None => cold_state(&ctx)?,
    };
    let max_iter = opts.max_iter.unwrap_or(100 * (m + 2 * n));
    let price_tol = 0.1 * opts.tol;
    let mut iterations = 0;
    let mut trace = Vec::new();
    let mut u;
    let mut w;

    loop {
        // move to the minimizer on the current free set, dropping blockers
        loop {
            let (target, uu) = subspace_solution(&ctx, &mut st)?;
            u = uu;
            let mut t = 1.0;
            let mut block = None;
            for k in 0..target.len() {
                if target[k] < 0.0 {
                    let tk = st.value[k] / (st.value[k] - target[k]);
                    if tk < t || (tk == t && block.map_or(false, |b: usize| st.free[k] < st.free[b])) {
                        t = tk;
                        block = Some(k);
                    }
                }
            }
            for k in 0..target.len() {
                st.value[k] += t * (target[k] - st.value[k]);
            }
            match block {
                None => break,
                Some(k) => {
                    iterations += 1;
                    remove_free(&mut st, k);
                    if !st.free.iter().any(|v| matches!(v, Var::Omega(_))) {
                        return Err(Error::Singular);
                    }
                    trace.push(dual_value(&ctx, &st, &w_of(&ctx, &st)));
                }
            }
            if iterations > max_iter {
                break;
            }
        }
        w = w_of(&ctx, &st);
        trace.push(dual_value(&ctx, &st, &w));
        if iterations > max_iter {
            let res = residual(&ctx, &st, u);
            return Err(Error::QpNotConverged { solver: "active-set", iterations, residual: res });
        }

        let Some((enter, vmin)) = price(&ctx, &st, &w, u) else { break };
        if vmin >= -price_tol {
            break;
        }

        // add `enter`, stepping along null directions while it is dependent
        let wc = ctx.wcol(enter);
        let r_ii = ctx.r_entry(enter, &wc, enter);
        let mut pending = 0.0;
        loop {
            let r: Vec<f64> = st.free.iter().map(|&v| ctx.r_entry(v, &wc, enter)).collect();
            if st.chol.append(&r, r_ii) {
                st.free.push(enter);
                st.value.push(pending);
                st.wcols.push(wc);
                break;
            }
            let (mut p, _) = refined_solve(&ctx, &st, &r);
            p.iter_mut().for_each(|x| *x = -*x);
            let mut t = f64::INFINITY;
            let mut block = None;
            for k in 0..p.len() {
                if p[k] < 0.0 {
                    let tk = st.value[k] / -p[k];
                    if tk < t {
                        t = tk;
                        block = Some(k);
                    }
                }
            }
            let Some(k) = block else {
                return Err(Error::Singular);
            };
            for j in 0..p.len() {
                st.value[j] += t * p[j];
            }
            pending += t;
            iterations += 1;
            remove_free(&mut st, k);
            if iterations > max_iter {
                let res = residual(&ctx, &st, u);
                return Err(Error::QpNotConverged { solver: "active-set", iterations, residual: res });
            }
        }
        iterations += 1;
    }

    let (omega, sigma, rho) = unpack(&ctx, &st);
    let gamma: Vec<f64> = sigma.iter().zip(&rho).map(|(s, r)| s - r).collect();
    let kkt = kkt_residual(op, &omega, &sigma, &rho, u, None);
    Ok(DasOutput { omega, sigma, rho, gamma, u, w, kkt_residual: kkt, iterations, objective_trace: trace, state: st })
}

fn unpack(ctx: &Ctx, st: &DasState) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut omega = vec![0.0; ctx.m];
    let mut sigma = vec![0.0; ctx.n];
    let mut rho = vec![0.0; ctx.n];
    for (k, &v) in st.free.iter().enumerate() {
        let x = st.value[k].max(0.0);
        match v {
            Var::Omega(j) => omega[j] = x,
            Var::Sigma(i) => sigma[i] = x,
            Var::Rho(i) => rho[i] = x,
        }
    }
    (omega, sigma, rho)
}

fn residual(ctx: &Ctx, st: &DasState, u: f64) -> f64 {
    let (omega, sigma, rho) = unpack(ctx, st);
    kkt_residual(ctx.op, &omega, &sigma, &rho, u, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::direction::{dual_objective, SubproblemData};
    use crate::quasi_newton::IdentityMetric;
    use crate::rng::Rng;
    use approx::assert_abs_diff_eq;

    fn random_data(n: usize, m: usize, delta: f64, seed: u64, id: &IdentityMetric) -> SubproblemData<'_> {
        let mut rng = Rng::new(seed);
        let cols: Vec<Vec<f64>> = (0..m).map(|_| rng.normal_vec(n)).collect();
        let b = rng.normal_vec(m);
        SubproblemData::new(Matrix::from_columns(n, &cols), b, delta, id).unwrap()
    }

    #[test]
    fn cholesky_append_delete_matches_refactor() {
        let mut rng = Rng::new(5);
        let p = 6;
        let b = Matrix::from_columns(p, &(0..p).map(|_| rng.normal_vec(p)).collect::<Vec<_>>());
        let mut a = b.transpose().matmul(&b);
        for i in 0..p {
            a[(i, i)] += 1.0;
        }
        let mut ch = UpdatableCholesky::default();
        for j in 0..p {
            let r: Vec<f64> = (0..j).map(|i| a[(i, j)]).collect();
            assert!(ch.append(&r, a[(j, j)]));
        }
        ch.delete(2);
        let keep: Vec<usize> = (0..p).filter(|&i| i != 2).collect();
        let x: Vec<f64> = (0..p - 1).map(|i| i as f64 + 1.0).collect();
        let mut y = x.clone();
        ch.solve(&mut y);
        for (ii, &i) in keep.iter().enumerate() {
            let s: f64 = keep.iter().enumerate().map(|(jj, &j)| a[(i, j)] * y[jj]).sum();
            assert_abs_diff_eq!(s, x[ii], epsilon = 1e-10);
        }
    }

    #[test]
    fn single_column_clips_gamma() {
        let id = IdentityMetric(2);
        let data = SubproblemData::new(Matrix::from_columns(2, &[[0.5, -3.0]]), vec![0.0], 1.0, &id).unwrap();
        let op = QpOperator::new(&data);
        let out = solve_das(&op, &DasOptions::default(), None).unwrap();
        assert_abs_diff_eq!(out.omega[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(out.gamma[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.gamma[1], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.w[1], -1.0, epsilon = 1e-12);
        assert!(out.kkt_residual <= 1e-8);

        let data = SubproblemData::new(Matrix::from_columns(2, &[[0.5, -0.3]]), vec![0.0], 1.0, &id).unwrap();
        let op = QpOperator::new(&data);
        let out = solve_das(&op, &DasOptions::default(), None).unwrap();
        assert_eq!(out.gamma, vec![0.0, 0.0]);
    }

    #[test]
    fn symmetric_pair() {
        let id = IdentityMetric(1);
        let data = SubproblemData::new(Matrix::from_columns(1, &[[1.0], [-1.0]]), vec![0.0, 0.0], 1.0, &id).unwrap();
        let op = QpOperator::new(&data);
        let out = solve_das(&op, &DasOptions::default(), None).unwrap();
        assert_abs_diff_eq!(out.omega[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(out.omega[1], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(out.gamma[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn random_instances_satisfy_kkt_and_monotone() {
        for seed in 0..30 {
            let n = 2 + (seed as usize % 7);
            let m = 1 + (seed as usize * 7 % 23);
            let id = IdentityMetric(n);
            let delta = if seed % 3 == 0 { 1e9 } else { 0.3 };
            let data = random_data(n, m, delta, seed, &id);
            let op = QpOperator::new(&data);
            let out = solve_das(&op, &DasOptions::default(), None).unwrap();
            assert!(out.kkt_residual <= 1e-8, "seed {seed}: {}", out.kkt_residual);
            assert_abs_diff_eq!(out.omega.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            assert!(out.omega.iter().all(|&w| w >= 0.0));
            for pair in out.objective_trace.windows(2) {
                assert!(pair[1] >= pair[0] - 1e-9 * (1.0 + pair[0].abs()), "seed {seed}");
            }
            let dual = dual_objective(&data, &out.omega, &out.gamma);
            assert_abs_diff_eq!(dual, *out.objective_trace.last().unwrap(), epsilon = 1e-8);
        }
    }

    #[test]
    fn warm_start_after_augmentation() {
        let (n, m) = (5, 12);
        let id = IdentityMetric(n);
        let full = random_data(n, m, 0.4, 77, &id);
        let prefix = SubproblemData::new(
            Matrix::from_columns(n, &(0..8).map(|j| full.g.col(j).to_vec()).collect::<Vec<_>>()),
            full.b[..8].to_vec(),
            0.4,
            &id,
        )
        .unwrap();
        let op_p = QpOperator::new(&prefix);
        let first = solve_das(&op_p, &DasOptions::default(), None).unwrap();
        let op = QpOperator::new(&full);
        let mut st = first.state.clone();
        st.augment(4);
        let warm = solve_das(&op, &DasOptions::default(), Some(st)).unwrap();
        let cold = solve_das(&op, &DasOptions::default(), None).unwrap();
        for i in 0..n {
            assert_abs_diff_eq!(warm.w[i], cold.w[i], epsilon = 1e-6);
        }
        // wider state than the data
        let op_small = QpOperator::new(&prefix);
        assert!(solve_das(&op_small, &DasOptions::default(), Some(cold.state)).is_err());
    }

    #[test]
    fn duplicate_column_keeps_direction() {
        let (n, m) = (4, 6);
        let id = IdentityMetric(n);
        let data = random_data(n, m, 1e9, 3, &id);
        let op = QpOperator::new(&data);
        let base = solve_das(&op, &DasOptions::default(), None).unwrap();
        let j = base.omega.iter().position(|&w| w > 0.0).unwrap();
        let mut cols: Vec<Vec<f64>> = (0..m).map(|k| data.g.col(k).to_vec()).collect();
        cols.push(cols[j].clone());
        let mut b = data.b.clone();
        b.push(b[j]);
        let aug = SubproblemData::new(Matrix::from_columns(n, &cols), b, 1e9, &id).unwrap();
        let op2 = QpOperator::new(&aug);
        let mut st = base.state.clone();
        st.augment(1);
        let out = solve_das(&op2, &DasOptions::default(), Some(st)).unwrap();
        for i in 0..n {
            assert_abs_diff_eq!(out.w[i], base.w[i], epsilon = 1e-8);
        }
        let mut st = base.state.clone();
        st.augment(0);
        let same = solve_das(&op, &DasOptions::default(), Some(st)).unwrap();
        assert_eq!(same.iterations, 0);
    }
}
