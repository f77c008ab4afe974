//! Predictor-corrector interior-point solver for
//! `min ½θᵀQθ + cᵀθ s.t. aᵀθ = 1, θ ≥ 0`.
//!
//! Newton systems are reduced to
//!
//! ```text
//! [-(Q + Θ⁻¹V)  a] [Δθ]   [r_d - Θ⁻¹r_c]
//! [    aᵀ       0] [Δu] = [    r_p     ]
//! ```
//!
//! with `Δv = Θ⁻¹(r_c - VΔθ)`. One factorization per iteration serves both
//! the predictor and the corrector. Step sizes minimize the merit function
//! `φ = ‖r_p‖² + ‖r_d‖² + θᵀv` along a two-segment path inside the
//! fraction-to-the-boundary box.
//!
//! For direction subproblems ([`solve_ipm`]) the problem is first solved in
//! `ω` alone; `(σ, ρ)` are introduced only if the resulting step violates
//! the trust region.

use std::cell::{Cell, RefCell};

use crate::direction::{kkt_residual, QpOperator};
use crate::error::{Error, Result};
use crate::linalg::{add_gram_lower, dot, norm_inf, Cholesky, Matrix, SymmetricIndefinite};
use crate::quasi_newton::Metric;

/// A convex QP whose equality constraint is `Σ_{i < k} θ_i = 1`.
pub trait ConvexQp {
    fn ell(&self) -> usize;
    /// Number `k` of leading variables carrying the simplex constraint.
    fn simplex_len(&self) -> usize;
    fn c(&self) -> &[f64];
    fn apply_q(&self, x: &[f64]) -> Vec<f64>;
    /// Factors the reduced matrix for the barrier diagonal `d = v/θ`.
    fn factor(&self, d: &[f64]) -> Result<Box<dyn ReducedSolver + '_>>;
    /// Switches to a more stable factorization for all later calls.
    /// Returns `false` if none is available.
    fn stabilize(&self) -> bool {
        false
    }
}

/// Solver for `[-(Q + diag d)  a; aᵀ  0] [x; y] = [r1; r2]`.
pub trait ReducedSolver {
    fn solve(&self, r1: &[f64], r2: f64) -> (Vec<f64>, f64);
}

/// QP with an explicit dense `Q`.
pub struct DenseQp {
    pub q: Matrix,
    pub c: Vec<f64>,
    pub simplex_len: usize,
    indefinite: Cell<bool>,
}

impl DenseQp {
    pub fn new(q: Matrix, c: Vec<f64>, simplex_len: usize) -> Self {
        Self { q, c, simplex_len, indefinite: Cell::new(false) }
    }
}

impl ConvexQp for DenseQp {
    fn ell(&self) -> usize {
        self.c.len()
    }
    fn simplex_len(&self) -> usize {
        self.simplex_len
    }
    fn c(&self) -> &[f64] {
        &self.c
    }
    fn apply_q(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.q.mul_vec(x, &mut out);
        out
    }
    fn factor(&self, d: &[f64]) -> Result<Box<dyn ReducedSolver + '_>> {
        bordered_dense(&self.q, d, self.simplex_len, self.indefinite.get())
    }
    fn stabilize(&self) -> bool {
        !self.indefinite.replace(true)
    }
}

struct DenseSolver(SymmetricIndefinite);

/// Bordered solve through a Cholesky factor of `K = Q + diag d`.
struct CholeskySolver {
    chol: Cholesky,
    k: usize,
    ya: Vec<f64>,
    aya: f64,
}

impl ReducedSolver for CholeskySolver {
    fn solve(&self, r1: &[f64], r2: f64) -> (Vec<f64>, f64) {
        let mut kr1 = r1.to_vec();
        self.chol.solve_in_place(&mut kr1);
        let y = (r2 + kr1[..self.k].iter().sum::<f64>()) / self.aya;
        let x = self.ya.iter().zip(&kr1).map(|(a, r)| y * a - r).collect();
        (x, y)
    }
}

impl ReducedSolver for DenseSolver {
    fn solve(&self, r1: &[f64], r2: f64) -> (Vec<f64>, f64) {
        let mut x = r1.to_vec();
        x.push(r2);
        self.0.solve_in_place(&mut x);
        let y = x.pop().unwrap();
        (x, y)
    }
}

/// Factors `[-(Q + diag d)  a; aᵀ  0]`, by Cholesky of `Q + diag d` unless
/// `indefinite` is set or that fails.
fn bordered_dense<'a>(q: &Matrix, d: &[f64], k: usize, indefinite: bool) -> Result<Box<dyn ReducedSolver + 'a>> {
    let l = d.len();
    if !indefinite {
        let mut kq = Matrix::zeros(l, l);
        for j in 0..l {
            kq.col_mut(j)[j..].copy_from_slice(&q.col(j)[j..]);
            kq[(j, j)] += d[j];
        }
        if let Ok(chol) = Cholesky::factor(&kq) {
            let mut ya = vec![0.0; l];
            ya[..k].iter_mut().for_each(|x| *x = 1.0);
            chol.solve_in_place(&mut ya);
            let aya: f64 = ya[..k].iter().sum();
            if aya > 0.0 && aya.is_finite() {
                return Ok(Box::new(CholeskySolver { chol, k, ya, aya }));
            }
        }
    }
    let mut k_mat = Matrix::zeros(l + 1, l + 1);
    for j in 0..l {
        for i in j..l {
            k_mat[(i, j)] = -q[(i, j)];
        }
        k_mat[(j, j)] -= d[j];
    }
    for j in 0..k {
        k_mat[(l, j)] = 1.0;
    }
    Ok(Box::new(DenseSolver(SymmetricIndefinite::factor(k_mat)?)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    /// Pick by estimated cost per iteration.
    Auto,
    /// Bordered dense factorization of the `(ℓ+1)` system.
    Dense,
    /// `n×n` Schur complement `H + M D⁻¹ Mᵀ` with the Woodbury identity.
    Schur,
}

/// The direction subproblem as a [`ConvexQp`], in `ω` alone or in
/// `(ω, σ, ρ)`.
pub struct BundleQp<'o, 'd, 'a> {
    op: &'o QpOperator<'d, 'a>,
    full: bool,
    c: Vec<f64>,
    backend: Cell<Backend>,
    indefinite: Cell<bool>,
    dense_q: RefCell<Option<Matrix>>,
    dense_h: Option<Matrix>,
}

impl<'o, 'd, 'a> BundleQp<'o, 'd, 'a> {
    pub fn new(op: &'o QpOperator<'d, 'a>, full: bool, backend: Backend) -> Self {
        let (n, m) = (op.n(), op.m());
        let ell = if full { m + 2 * n } else { m };
        let backend = match backend {
            Backend::Auto => {
                let (l, n, m) = (ell as f64, n as f64, m as f64);
                let h_extra = if op.metric().is_identity() { 0.0 } else { n * n };
                if l * l * l / 3.0 <= m * n * n / 2.0 + n * n * n / 3.0 + h_extra {
                    Backend::Dense
                } else {
                    Backend::Schur
                }
            }
            b => b,
        };
        let (dense_q, dense_h) = match backend {
            Backend::Dense => (Some(if full { full_q(op) } else { op.gram() }), None),
            _ => (None, Some(op.metric().dense_h())),
        };
        Self { op, full, c: op.c(full), backend: Cell::new(backend), indefinite: Cell::new(false), dense_q: RefCell::new(dense_q), dense_h }
    }

    pub fn backend(&self) -> Backend {
        self.backend.get()
    }

    pub fn is_full(&self) -> bool {
        self.full
    }
}

fn full_q(op: &QpOperator) -> Matrix {
    let (n, m) = (op.n(), op.m());
    let l = m + 2 * n;
    let w = op.metric().dense_w();
    let gram = op.gram();
    let wg = op.wg();
    let mut q = Matrix::zeros(l, l);
    for j in 0..m {
        for i in 0..m {
            q[(i, j)] = gram[(i, j)];
        }
        for i in 0..n {
            q[(m + i, j)] = wg[(i, j)];
            q[(m + n + i, j)] = -wg[(i, j)];
            q[(j, m + i)] = wg[(i, j)];
            q[(j, m + n + i)] = -wg[(i, j)];
        }
    }
    for j in 0..n {
        for i in 0..n {
            q[(m + i, m + j)] = w[(i, j)];
            q[(m + n + i, m + n + j)] = w[(i, j)];
            q[(m + i, m + n + j)] = -w[(i, j)];
            q[(m + n + i, m + j)] = -w[(i, j)];
        }
    }
    q
}

impl ConvexQp for BundleQp<'_, '_, '_> {
    fn ell(&self) -> usize {
        self.c.len()
    }
    fn simplex_len(&self) -> usize {
        self.op.m()
    }
    fn c(&self) -> &[f64] {
        &self.c
    }
    fn apply_q(&self, x: &[f64]) -> Vec<f64> {
        let (l, n, m) = (x.len(), self.op.n(), self.op.m());
        if let Some(q) = self.dense_q.borrow().as_ref() {
            if l * l <= 2 * n * m {
                let mut out = vec![0.0; l];
                q.sym_mul_vec(x, &mut out);
                return out;
            }
        }
        self.op.apply_q(x)
    }
    fn factor(&self, d: &[f64]) -> Result<Box<dyn ReducedSolver + '_>> {
        match self.backend.get() {
            Backend::Dense => bordered_dense(self.dense_q.borrow().as_ref().unwrap(), d, self.op.m(), self.indefinite.get()),
            _ => Ok(Box::new(SchurSolver::new(self, d)?)),
        }
    }
    fn stabilize(&self) -> bool {
        if self.backend.get() == Backend::Dense {
            return !self.indefinite.replace(true);
        }
        *self.dense_q.borrow_mut() = Some(if self.full { full_q(self.op) } else { self.op.gram() });
        self.backend.set(Backend::Dense);
        true
    }
}

struct SchurSolver<'q, 'o, 'd, 'a> {
    qp: &'q BundleQp<'o, 'd, 'a>,
    dinv: Vec<f64>,
    chol: Cholesky,
    ya: Vec<f64>,
    aya: f64,
}

impl<'q, 'o, 'd, 'a> SchurSolver<'q, 'o, 'd, 'a> {
    fn new(qp: &'q BundleQp<'o, 'd, 'a>, d: &[f64]) -> Result<Self> {
        let op = qp.op;
        let (n, m) = (op.n(), op.m());
        let dinv: Vec<f64> = d.iter().map(|x| 1.0 / x).collect();
        // lower triangle of H + G D⁻¹ Gᵀ + D_σ⁻¹ + D_ρ⁻¹, with rows of
        // G D^{-1/2} stored contiguously
        let mut s = qp.dense_h.clone().unwrap();
        let g = op.g();
        let mut b = vec![0.0; n * m];
        for j in 0..m {
            let sj = dinv[j].sqrt();
            for (p, gp) in g.col(j).iter().enumerate() {
                b[p * m + j] = sj * gp;
            }
        }
        add_gram_lower(&b, n, m, &mut s);
        if qp.full {
            for i in 0..n {
                s[(i, i)] += dinv[m + i] + dinv[m + n + i];
            }
        }
        let chol = Cholesky::factor(&s)?;
        let mut me = Self { qp, dinv, chol, ya: Vec::new(), aya: 0.0 };
        let mut a = vec![0.0; d.len()];
        a[..m].iter_mut().for_each(|x| *x = 1.0);
        me.ya = me.kinv(&a);
        me.aya = me.ya[..m].iter().sum();
        if !(me.aya > 0.0) || !me.aya.is_finite() {
            return Err(Error::Singular);
        }
        Ok(me)
    }

    /// `(Q + D)⁻¹ z = D⁻¹z - D⁻¹Mᵀ S⁻¹ M D⁻¹z`
    fn kinv(&self, z: &[f64]) -> Vec<f64> {
        let op = self.qp.op;
        let t: Vec<f64> = z.iter().zip(&self.dinv).map(|(a, b)| a * b).collect();
        let mut s = op.combine(&t);
        self.chol.solve_in_place(&mut s);
        let mts = op.m_transpose(&s, self.qp.full);
        t.iter().zip(&mts).zip(&self.dinv).map(|((t, q), di)| t - di * q).collect()
    }
}

impl ReducedSolver for SchurSolver<'_, '_, '_, '_> {
    fn solve(&self, r1: &[f64], r2: f64) -> (Vec<f64>, f64) {
        let m = self.qp.op.m();
        let kr1 = self.kinv(r1);
        let y = (r2 + kr1[..m].iter().sum::<f64>()) / self.aya;
        let x = self.ya.iter().zip(&kr1).map(|(a, k)| y * a - k).collect();
        (x, y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpmIterate {
    pub theta: Vec<f64>,
    pub u: f64,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpmResiduals {
    /// `b - aᵀθ`
    pub rp: f64,
    /// `Qθ + c - au - v`
    pub rd: Vec<f64>,
    /// `-Θv`
    pub rc: Vec<f64>,
}

impl IpmResiduals {
    pub fn max_norm(&self) -> f64 {
        self.rp.abs().max(norm_inf(&self.rd)).max(norm_inf(&self.rc))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IpmOptions {
    pub eps: f64,
    pub max_iter: usize,
    pub mu0: f64,
    pub beta: f64,
    pub backend: Backend,
}

impl Default for IpmOptions {
    fn default() -> Self {
        Self { eps: 1e-8, max_iter: 200, mu0: 0.5, beta: 0.995, backend: Backend::Auto }
    }
}

/// Initial point for a direction subproblem: `ω = 𝟙/m`, `v_ω = μ₀/ω`,
/// `u = 0`, and `(σ, ρ)` set from `w = WGω` against the box `[-δ, δ]`.
pub fn initialize(op: &QpOperator, full: bool, mu0: f64) -> IpmIterate {
    let (n, m) = (op.n(), op.m());
    let mut theta = vec![1.0 / m as f64; m];
    if full {
        let w = op.w_combine(&theta);
        let delta = op.delta();
        let mut sigma = vec![0.1; n];
        let mut rho = vec![0.1; n];
        for i in 0..n {
            if w[i] < -delta {
                sigma[i] = 0.1f64.max(delta - w[i]);
            } else if w[i] > delta {
                rho[i] = 0.1f64.max(-delta - w[i]);
            }
        }
        theta.extend(sigma);
        theta.extend(rho);
    }
    let v = theta.iter().map(|t| mu0 / t).collect();
    IpmIterate { theta, u: 0.0, v }
}

pub fn residuals(qp: &dyn ConvexQp, it: &IpmIterate) -> IpmResiduals {
    let k = qp.simplex_len();
    let q = qp.apply_q(&it.theta);
    let c = qp.c();
    let rd = (0..qp.ell()).map(|i| q[i] + c[i] - if i < k { it.u } else { 0.0 } - it.v[i]).collect();
    let rp = 1.0 - it.theta[..k].iter().sum::<f64>();
    let rc = it.theta.iter().zip(&it.v).map(|(t, v)| -t * v).collect();
    IpmResiduals { rp, rd, rc }
}

pub fn merit(qp: &dyn ConvexQp, it: &IpmIterate) -> f64 {
    let r = residuals(qp, it);
    r.rp * r.rp + dot(&r.rd, &r.rd) + dot(&it.theta, &it.v)
}

/// One factorization of the reduced matrix, tagged for reuse checks.
pub struct Factorization<'q> {
    pub id: usize,
    solver: Box<dyn ReducedSolver + 'q>,
    d: Vec<f64>,
    solves: Cell<usize>,
}

impl<'q> Factorization<'q> {
    pub fn new(qp: &'q dyn ConvexQp, it: &IpmIterate, id: usize) -> Result<Self> {
        let mut d: Vec<f64> = it.v.iter().zip(&it.theta).map(|(v, t)| v / t).collect();
        let solver = match qp.factor(&d) {
            Ok(s) => s,
            Err(Error::Singular) => {
                d.iter_mut().for_each(|x| *x += 1e-12);
                qp.factor(&d)?
            }
            Err(e) => return Err(e),
        };
        Ok(Self { id, solver, d, solves: Cell::new(0) })
    }

    /// Number of right-hand sides solved with this factor.
    pub fn solves(&self) -> usize {
        self.solves.get()
    }
}

#[derive(Debug, Clone)]
pub struct Step {
    pub dtheta: Vec<f64>,
    pub du: f64,
    pub dv: Vec<f64>,
    /// `QΔθ`
    pub q_dtheta: Vec<f64>,
    /// Relative residual of the unreduced Newton system at the step.
    pub plugback: f64,
    pub factor_id: usize,
}

/// Solves the Newton system for the right-hand side `(r_d, r_p, r_c)`.
pub fn compute_step(
    qp: &dyn ConvexQp,
    it: &IpmIterate,
    fac: &Factorization,
    rd: &[f64],
    rp: f64,
    rc: &[f64],
) -> Step {
    let l = qp.ell();
    let k = qp.simplex_len();
    let r1: Vec<f64> = (0..l).map(|i| rd[i] - rc[i] / it.theta[i]).collect();
    let (mut x, mut y) = fac.solver.solve(&r1, rp);
    fac.solves.set(fac.solves.get() + 1);
    // refinement against the exact reduced operator
    let mut qx = qp.apply_q(&x);
    for round in 0..=3 {
        let e1: Vec<f64> =
            (0..l).map(|i| r1[i] - (-(qx[i] + fac.d[i] * x[i]) + if i < k { y } else { 0.0 })).collect();
        let e2 = rp - x[..k].iter().sum::<f64>();
        let dx = x.iter().zip(&fac.d).map(|(a, b)| (a * b).abs()).fold(0.0, f64::max);
        let scale = norm_inf(&r1).max(rp.abs()).max(norm_inf(&qx)).max(dx).max(y.abs()).max(f64::MIN_POSITIVE);
        if round == 3 || norm_inf(&e1).max(e2.abs()) <= 1e-15 * scale {
            break;
        }
        let (dx, dy) = fac.solver.solve(&e1, e2);
        fac.solves.set(fac.solves.get() + 1);
        x.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
        y += dy;
        qx = qp.apply_q(&x);
    }
    let dv: Vec<f64> = (0..l).map(|i| (rc[i] - it.v[i] * x[i]) / it.theta[i]).collect();
    let plugback = plugback_residual(qp, it, &x, &qx, y, &dv, rd, rp, rc);
    Step { dtheta: x, du: y, dv, q_dtheta: qx, plugback, factor_id: fac.id }
}

/// `‖res‖∞ / scale`, given `QΔθ`, for the unreduced system
/// `[-Q a I; aᵀ 0 0; V 0 Θ] [Δθ; Δu; Δv] = [r_d; r_p; r_c]`, where `scale`
/// is the largest magnitude among the right-hand side, the individual
/// products forming the left-hand side and `Θ⁻¹VΔθ`.
#[allow(clippy::too_many_arguments)]
pub fn plugback_residual(
    qp: &dyn ConvexQp,
    it: &IpmIterate,
    dtheta: &[f64],
    qd: &[f64],
    du: f64,
    dv: &[f64],
    rd: &[f64],
    rp: f64,
    rc: &[f64],
) -> f64 {
    let l = qp.ell();
    let k = qp.simplex_len();
    let mut res = 0.0f64;
    let mut scale = norm_inf(rd).max(rp.abs()).max(norm_inf(rc));
    scale = scale.max(norm_inf(&qd)).max(du.abs()).max(norm_inf(dv));
    for i in 0..l {
        let a = if i < k { du } else { 0.0 };
        res = res.max((-qd[i] + a + dv[i] - rd[i]).abs());
        let vt = it.v[i] * dtheta[i];
        let tv = it.theta[i] * dv[i];
        // barrier term (Θ⁻¹V)Δθ of the reduced system
        scale = scale.max(vt.abs()).max(tv.abs()).max((vt / it.theta[i]).abs());
        res = res.max((vt + tv - rc[i]).abs());
    }
    res = res.max((dtheta[..k].iter().sum::<f64>() - rp).abs());
    res / scale.max(f64::MIN_POSITIVE)
}

/// Centering factor `ζ = ((θ + α_θΔθ)ᵀ(v + α_vΔv) / (ℓμ))³`, raised so that
/// `ζμ ≥ 1e-12`.
#[allow(clippy::too_many_arguments)]
pub fn mehrotra_sigma(
    mu: f64,
    theta: &[f64],
    dtheta: &[f64],
    alpha_theta: f64,
    v: &[f64],
    dv: &[f64],
    alpha_v: f64,
    ell: usize,
) -> f64 {
    let comp: f64 = (0..theta.len())
        .map(|i| (theta[i] + alpha_theta * dtheta[i]) * (v[i] + alpha_v * dv[i]))
        .sum();
    let zeta = (comp / (ell as f64 * mu)).powi(3);
    zeta.max(1e-12 / mu)
}

/// Largest `α ∈ (0, 1]` with `x + αΔx ≥ (1 - β)x`.
pub fn fraction_to_boundary(x: &[f64], dx: &[f64], beta: f64) -> f64 {
    let worst = x.iter().zip(dx).map(|(x, d)| -d / (beta * x)).fold(1.0f64, f64::max);
    1.0 / worst
}

/// `½φ(α)` along `α = (α_θ, α_u, α_v)` as `const + gᵀα + ½αᵀHα`.
struct MeritModel {
    h: [[f64; 3]; 3],
    g: [f64; 3],
    c: f64,
}

impl MeritModel {
    fn new(qp: &dyn ConvexQp, it: &IpmIterate, step: &Step, res: &IpmResiduals) -> Self {
        let l = qp.ell();
        let k = qp.simplex_len();
        let qd = &step.q_dtheta;
        let ad: f64 = step.dtheta[..k].iter().sum();
        // stacked (primal, dual) residual components
        let mut s = Vec::with_capacity(l + 1);
        let mut o = Vec::with_capacity(l + 1);
        let mut p = Vec::with_capacity(l + 1);
        let mut r = Vec::with_capacity(l + 1);
        s.push(-ad);
        o.push(0.0);
        p.push(0.0);
        r.push(res.rp);
        for i in 0..l {
            s.push(qd[i]);
            o.push(if i < k { -step.du } else { 0.0 });
            p.push(-step.dv[i]);
            r.push(res.rd[i]);
        }
        let dd = dot(&step.dtheta, &step.dv);
        let h = [
            [dot(&s, &s), dot(&s, &o), dot(&s, &p) + 0.5 * dd],
            [dot(&s, &o), dot(&o, &o), dot(&o, &p)],
            [dot(&s, &p) + 0.5 * dd, dot(&o, &p), dot(&p, &p)],
        ];
        let g = [
            dot(&r, &s) + 0.5 * dot(&step.dtheta, &it.v),
            dot(&r, &o),
            dot(&r, &p) + 0.5 * dot(&it.theta, &step.dv),
        ];
        let c = 0.5 * (dot(&r, &r) + dot(&it.theta, &it.v));
        Self { h, g, c }
    }

    fn eval(&self, a: [f64; 3]) -> f64 {
        let mut q = self.c;
        for i in 0..3 {
            q += self.g[i] * a[i];
            for j in 0..3 {
                q += 0.5 * a[i] * self.h[i][j] * a[j];
            }
        }
        2.0 * q
    }
}

/// `min ½zᵀHz + gᵀz` over `z = (a, b)`, `a ∈ [lo, hi]`, `b` free.
fn box_free_2d(h: [[f64; 2]; 2], g: [f64; 2], lo: f64, hi: f64) -> (f64, f64) {
    let tiny = 1e-300;
    let b_of = |a: f64| if h[1][1] > tiny { -(g[1] + h[0][1] * a) / h[1][1] } else { 0.0 };
    let q = |a: f64, b: f64| 0.5 * (h[0][0] * a * a + 2.0 * h[0][1] * a * b + h[1][1] * b * b) + g[0] * a + g[1] * b;
    let (cr, gr) = if h[1][1] > tiny {
        (h[0][0] - h[0][1] * h[0][1] / h[1][1], g[0] - h[0][1] * g[1] / h[1][1])
    } else {
        (h[0][0], g[0])
    };
    if cr > 0.0 {
        let a = (-gr / cr).clamp(lo, hi);
        (a, b_of(a))
    } else {
        // concave or flat in a: the minimum sits at an end
        let (bl, bh) = (b_of(lo), b_of(hi));
        if q(lo, bl) <= q(hi, bh) {
            (lo, bl)
        } else {
            (hi, bh)
        }
    }
}

/// Step sizes `(α_θ, α_u, α_v)` minimizing `φ` over the two-segment path.
pub fn step_sizes(qp: &dyn ConvexQp, it: &IpmIterate, step: &Step, res: &IpmResiduals, beta: f64) -> (f64, f64, f64) {
    let at_max = fraction_to_boundary(&it.theta, &step.dtheta, beta);
    let av_max = fraction_to_boundary(&it.v, &step.dv, beta);
    let a_max = at_max.min(av_max);
    let mm = MeritModel::new(qp, it, step, res);
    let h = mm.h;
    let g = mm.g;

    // segment 1: α_θ = α_v ∈ [0, ᾱ]
    let h1 = [[h[0][0] + 2.0 * h[0][2] + h[2][2], h[0][1] + h[1][2]], [h[0][1] + h[1][2], h[1][1]]];
    let (a1, u1) = box_free_2d(h1, [g[0] + g[2], g[1]], 0.0, a_max);
    let cand1 = [a1, u1, a1];

    // segment 2: the variable with slack moves on alone
    let cand2 = if at_max <= av_max {
        let h2 = [[h[2][2], h[1][2]], [h[1][2], h[1][1]]];
        let g2 = [g[2] + at_max * h[0][2], g[1] + at_max * h[0][1]];
        let (av, au) = box_free_2d(h2, g2, a_max, av_max);
        [at_max, au, av]
    } else {
        let h2 = [[h[0][0], h[0][1]], [h[0][1], h[1][1]]];
        let g2 = [g[0] + av_max * h[0][2], g[1] + av_max * h[1][2]];
        let (at, au) = box_free_2d(h2, g2, a_max, at_max);
        [at, au, av_max]
    };
    let best = if mm.eval(cand1) <= mm.eval(cand2) { cand1 } else { cand2 };
    (best[0], best[1], best[2])
}

/// Per-iteration record for checking solver invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct IpmTraceEntry {
    /// `true` while solving in `(ω, σ, ρ)`.
    pub full: bool,
    pub merit: f64,
    pub min_theta: f64,
    pub min_v: f64,
    pub predictor_plugback: f64,
    pub corrector_plugback: f64,
    pub predictor_factor: usize,
    pub corrector_factor: usize,
    pub factor_solves: usize,
}

#[derive(Debug, Clone)]
pub struct IpmCoreOutput {
    pub iterate: IpmIterate,
    pub iterations: usize,
    pub residual: f64,
    pub trace: Vec<IpmTraceEntry>,
    pub final_merit: f64,
}

/// Relative plug-back residual above which the factorization is replaced by
/// a more stable one.
pub const PLUGBACK_TOL: f64 = 1e-10;

/// Runs the predictor-corrector loop from `start`.
pub fn solve_core(qp: &dyn ConvexQp, start: IpmIterate, opts: &IpmOptions) -> Result<IpmCoreOutput> {
    let l = qp.ell();
    let mut it = start;
    let mut trace = Vec::new();
    for iter in 0..=opts.max_iter {
        let res = residuals(qp, &it);
        let rnorm = res.max_norm();
        if rnorm <= opts.eps {
            let final_merit = res.rp * res.rp + dot(&res.rd, &res.rd) + dot(&it.theta, &it.v);
            return Ok(IpmCoreOutput { iterate: it, iterations: iter, residual: rnorm, trace, final_merit });
        }
        if iter == opts.max_iter || !rnorm.is_finite() {
            return Err(Error::QpNotConverged { solver: "interior-point", iterations: iter, residual: rnorm });
        }
        let merit_now = res.rp * res.rp + dot(&res.rd, &res.rd) + dot(&it.theta, &it.v);

        let mu = dot(&it.theta, &it.v) / l as f64;
        let newton = |fac: &Factorization| {
            let pred = compute_step(qp, &it, fac, &res.rd, res.rp, &res.rc);
            let (apt, _, apv) = step_sizes(qp, &it, &pred, &res, opts.beta);
            let zeta = mehrotra_sigma(mu, &it.theta, &pred.dtheta, apt, &it.v, &pred.dv, apv, l);
            let rc_corr: Vec<f64> = res.rc.iter().map(|r| r + zeta * mu).collect();
            let corr = compute_step(qp, &it, fac, &res.rd, res.rp, &rc_corr);
            (pred, corr)
        };
        let mut fac = Factorization::new(qp, &it, iter)?;
        let (mut pred, mut corr) = newton(&fac);
        if pred.plugback.max(corr.plugback) > PLUGBACK_TOL && qp.stabilize() {
            fac = Factorization::new(qp, &it, iter)?;
            (pred, corr) = newton(&fac);
        }
        let (at, au, av) = step_sizes(qp, &it, &corr, &res, opts.beta);

        for i in 0..l {
            it.theta[i] += at * corr.dtheta[i];
            it.v[i] += av * corr.dv[i];
        }
        it.u += au * corr.du;
        trace.push(IpmTraceEntry {
            full: l > qp.simplex_len(),
            merit: merit_now,
            min_theta: it.theta.iter().cloned().fold(f64::INFINITY, f64::min),
            min_v: it.v.iter().cloned().fold(f64::INFINITY, f64::min),
            predictor_plugback: pred.plugback,
            corrector_plugback: corr.plugback,
            predictor_factor: pred.factor_id,
            corrector_factor: corr.factor_id,
            factor_solves: fac.solves(),
        });
    }
    unreachable!()
}

#[derive(Debug, Clone)]
pub struct IpmOutput {
    pub omega: Vec<f64>,
    pub sigma: Vec<f64>,
    pub rho: Vec<f64>,
    pub u: f64,
    /// Multipliers for the full `(ω, σ, ρ)` problem.
    pub v: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
    /// `true` if the `ω`-only solve was accepted.
    pub shortcut: bool,
    pub trace: Vec<IpmTraceEntry>,
    /// Merit value at the end of each inner solve.
    pub final_merits: Vec<f64>,
}

impl IpmOutput {
    pub fn gamma(&self) -> Vec<f64> {
        self.sigma.iter().zip(&self.rho).map(|(s, r)| s - r).collect()
    }

    pub fn theta_full(&self) -> Vec<f64> {
        let mut t = self.omega.clone();
        t.extend_from_slice(&self.sigma);
        t.extend_from_slice(&self.rho);
        t
    }
}

/// Solves a direction subproblem, first without `(σ, ρ)`.
pub fn solve_ipm(op: &QpOperator, opts: &IpmOptions) -> Result<IpmOutput> {
    let (n, m) = (op.n(), op.m());
    let delta = op.delta();
    let reduced = BundleQp::new(op, false, opts.backend);
    let out = solve_core(&reduced, initialize(op, false, opts.mu0), opts)?;
    let omega = out.iterate.theta.clone();
    let w = op.w_combine(&omega);
    if norm_inf(&w) <= delta {
        let mut v = out.iterate.v.clone();
        v.extend(w.iter().map(|wi| wi + delta));
        v.extend(w.iter().map(|wi| delta - wi));
        let zeros = vec![0.0; n];
        let kkt = kkt_residual(op, &omega, &zeros, &zeros, out.iterate.u, Some(&v));
        return Ok(IpmOutput {
            omega,
            sigma: zeros.clone(),
            rho: zeros,
            u: out.iterate.u,
            v,
            kkt_residual: kkt,
            iterations: out.iterations,
            shortcut: true,
            trace: out.trace,
            final_merits: vec![out.final_merit],
        });
    }
    let full = BundleQp::new(op, true, opts.backend);
    let out2 = solve_core(&full, initialize(op, true, opts.mu0), opts)?;
    let th = &out2.iterate.theta;
    let (omega, sigma, rho) = (th[..m].to_vec(), th[m..m + n].to_vec(), th[m + n..].to_vec());
    let kkt = kkt_residual(op, &omega, &sigma, &rho, out2.iterate.u, Some(&out2.iterate.v));
    let mut trace = out.trace;
    trace.extend(out2.trace);
    Ok(IpmOutput {
        omega,
        sigma,
        rho,
        u: out2.iterate.u,
        v: out2.iterate.v,
        kkt_residual: kkt,
        iterations: out.iterations + out2.iterations,
        shortcut: false,
        trace,
        final_merits: vec![out.final_merit, out2.final_merit],
    })
}

/// `W`-metric accessor used by callers that only hold the operator.
pub fn metric_of<'a>(op: &'a QpOperator) -> &'a dyn Metric {
    op.metric()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::direction::SubproblemData;
    use crate::quasi_newton::IdentityMetric;
    use crate::rng::Rng;
    use approx::assert_abs_diff_eq;

    fn toy() -> DenseQp {
        DenseQp::new(Matrix::zeros(1, 1), vec![0.0], 1)
    }

    #[test]
    fn toy_residuals() {
        let it = IpmIterate { theta: vec![1.0], u: 0.0, v: vec![1.0] };
        let r = residuals(&toy(), &it);
        assert_eq!(r.rp, 0.0);
        assert_eq!(r.rd, vec![-1.0]);
        assert_eq!(r.rc, vec![-1.0]);
    }

    #[test]
    fn toy_step_is_finite_and_exact() {
        let qp = toy();
        let it = IpmIterate { theta: vec![1.0], u: 0.0, v: vec![1.0] };
        let fac = Factorization::new(&qp, &it, 0).unwrap();
        let s = compute_step(&qp, &it, &fac, &[-1.0], 0.0, &[-1.0]);
        // aᵀΔθ = 0 pins Δθ = 0; then Δu = -1 + 1 = 0... solve by hand:
        // -(0 + 1)Δθ + Δu = -1 - (-1) = 0, Δθ = 0  =>  Δu = 0, Δv = -1
        assert_abs_diff_eq!(s.dtheta[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.du, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.dv[0], -1.0, epsilon = 1e-15);
        assert!(s.plugback <= 1e-14);
    }

    #[test]
    fn kkt_point_gives_zero_step() {
        let qp = DenseQp::new(Matrix::identity(2), vec![0.0, 0.0], 2);
        // θ = (½, ½), u = ½, v = 0 is optimal but not interior; use the
        // homogeneous right-hand side at an interior point instead
        let it = IpmIterate { theta: vec![0.5, 0.5], u: 0.5, v: vec![1e-3, 1e-3] };
        let fac = Factorization::new(&qp, &it, 0).unwrap();
        let s = compute_step(&qp, &it, &fac, &[0.0, 0.0], 0.0, &[0.0, 0.0]);
        assert!(s.dtheta.iter().chain(&s.dv).all(|x| x.abs() < 1e-15) && s.du.abs() < 1e-15);
    }

    #[test]
    fn ftb_examples() {
        assert_abs_diff_eq!(fraction_to_boundary(&[1.0, 1.0], &[-2.0, 1.0], 0.995), 0.4975, epsilon = 1e-15);
        assert_eq!(fraction_to_boundary(&[1.0, 2.0], &[0.0, 3.0], 0.995), 1.0);
    }

    #[test]
    fn mehrotra_examples() {
        let z = mehrotra_sigma(1.0, &[1.0], &[0.0], 1.0, &[1.0], &[0.0], 1.0, 1);
        assert_eq!(z, 1.0);
        // average complementarity 0.05 with μ = 0.5
        let z = mehrotra_sigma(0.5, &[0.05], &[0.0], 1.0, &[1.0], &[0.0], 1.0, 1);
        assert_abs_diff_eq!(z, 1e-3, epsilon = 1e-15);
        let z = mehrotra_sigma(0.5, &[1.0], &[-1.0], 1.0, &[1.0], &[0.0], 1.0, 1);
        assert_eq!(z, 1e-12 / 0.5);
    }

    #[test]
    fn initialization_rules() {
        let id = IdentityMetric(3);
        let g = Matrix::from_columns(3, &[[0.0, 4.0, -4.0]; 4]);
        let data = SubproblemData::new(g, vec![0.0; 4], 1.0, &id).unwrap();
        let op = QpOperator::new(&data);
        let it = initialize(&op, true, 0.5);
        assert_eq!(&it.theta[..4], &[0.25; 4]);
        assert_eq!(&it.v[..4], &[2.0; 4]);
        // w = (0, 4, -4): middle, above and below the box
        assert_eq!(&it.theta[4..7], &[0.1, 0.1, 5.0]);
        assert_eq!(&it.theta[7..10], &[0.1, 0.1f64.max(-1.0 - 4.0), 0.1]);
        assert_eq!(it.v[4], 5.0);
        assert_eq!(it.v[7], 5.0);
        assert!(it.theta.iter().chain(&it.v).all(|&x| x > 0.0));
        assert_eq!(it.u, 0.0);
    }

    #[test]
    fn symmetric_pair_takes_shortcut() {
        let id = IdentityMetric(1);
        let data = SubproblemData::new(Matrix::from_columns(1, &[[1.0], [-1.0]]), vec![0.0, 0.0], 1.0, &id).unwrap();
        let op = QpOperator::new(&data);
        let out = solve_ipm(&op, &IpmOptions::default()).unwrap();
        assert!(out.shortcut);
        assert_abs_diff_eq!(out.omega[0], 0.5, epsilon = 1e-8);
        assert_eq!(out.sigma, vec![0.0]);
        assert!(out.kkt_residual <= 1e-8);
    }

    #[test]
    fn single_column_pins_omega() {
        let id = IdentityMetric(2);
        let data = SubproblemData::new(Matrix::from_columns(2, &[[0.3, -0.2]]), vec![1.0], 5.0, &id).unwrap();
        let op = QpOperator::new(&data);
        let out = solve_ipm(&op, &IpmOptions::default()).unwrap();
        assert_abs_diff_eq!(out.omega[0], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn backends_agree_and_invariants_hold() {
        for seed in 0..12u64 {
            let mut rng = Rng::new(seed);
            let (n, m) = (3 + seed as usize % 5, 4 + seed as usize % 9);
            let id = IdentityMetric(n);
            let cols: Vec<Vec<f64>> = (0..m).map(|_| rng.normal_vec(n)).collect();
            let data = SubproblemData::new(Matrix::from_columns(n, &cols), rng.normal_vec(m), 0.2, &id).unwrap();
            let op = QpOperator::new(&data);
            let mut ds = Vec::new();
            for backend in [Backend::Dense, Backend::Schur] {
                let out = solve_ipm(&op, &IpmOptions { backend, ..Default::default() }).unwrap();
                assert!(out.kkt_residual <= 1e-8, "seed {seed} {backend:?}: {}", out.kkt_residual);
                for e in &out.trace {
                    assert!(e.min_theta > 0.0 && e.min_v > 0.0);
                    assert_eq!(e.predictor_factor, e.corrector_factor);
                    assert!(e.predictor_plugback <= 1e-10 && e.corrector_plugback <= 1e-10);
                }
                ds.push(op.w_combine(&out.theta_full()));
            }
            for i in 0..n {
                assert_abs_diff_eq!(ds[0][i], ds[1][i], epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn box_free_concave_picks_endpoint() {
        let (a, _) = box_free_2d([[-1.0, 0.0], [0.0, 1.0]], [0.1, 0.0], 0.0, 1.0);
        assert_eq!(a, 1.0);
        let (a, b) = box_free_2d([[2.0, 0.0], [0.0, 1.0]], [-1.0, 3.0], 0.0, 1.0);
        assert_abs_diff_eq!(a, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(b, -3.0, epsilon = 1e-15);
    }
}
