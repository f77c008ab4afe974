//! Search-direction computation.
//!
//! The direction subproblem is the dual QP
//!
//! ```text
//! max  -½ (Gω + γ)ᵀ W (Gω + γ) + bᵀω - δ‖γ‖₁   s.t. 𝟙ᵀω = 1, ω ≥ 0
//! ```
//!
//! whose solution gives `d = -W(Gω + γ)`. Both QP solvers work on the
//! equivalent problem in `θ = (ω, σ, ρ)` with `γ = σ - ρ`:
//!
//! ```text
//! min ½ θᵀQθ + cᵀθ   s.t. aᵀθ = 1, θ ≥ 0,
//! Q = MᵀWM, M = [G  I  -I], c = (-b, δ𝟙, δ𝟙), a = (𝟙, 0, 0).
//! ```

use crate::error::{Error, Result};
use crate::linalg::{add_cross_lower, axpy, dot, norm_inf, Matrix};
use crate::options::{QpSolverKind, SolverOptions, Strategy};
use crate::point_set::PointSet;
use crate::qp_das::{solve_das, DasOptions};
use crate::qp_ipm::{solve_ipm, IpmOptions};
use crate::quasi_newton::{compact_bfgs_gram, Metric, QuasiNewtonState};
use std::cell::OnceCell;

/// Data `(G, b, δ, W)` of one direction subproblem.
pub struct SubproblemData<'a> {
    /// `n×m`, one column per bundle element.
    pub g: Matrix,
    pub b: Vec<f64>,
    pub delta: f64,
    pub metric: &'a dyn Metric,
    /// Precomputed `GᵀWG`, if available.
    pub gram: Option<Matrix>,
}

impl<'a> SubproblemData<'a> {
    pub fn new(g: Matrix, b: Vec<f64>, delta: f64, metric: &'a dyn Metric) -> Result<Self> {
        if g.cols() == 0 {
            return Err(Error::EmptyPointSet);
        }
        if b.len() != g.cols() {
            return Err(Error::DimensionMismatch { expected: g.cols(), got: b.len() });
        }
        if metric.dim() != g.rows() {
            return Err(Error::DimensionMismatch { expected: g.rows(), got: metric.dim() });
        }
        Ok(Self { g, b, delta, metric, gram: None })
    }

    pub fn with_gram(mut self, gram: Matrix) -> Self {
        debug_assert_eq!((gram.rows(), gram.cols()), (self.m(), self.m()));
        self.gram = Some(gram);
        self
    }

    pub fn n(&self) -> usize {
        self.g.rows()
    }

    pub fn m(&self) -> usize {
        self.g.cols()
    }
}

/// `GᵀWG` over successive subproblems for an identity or limited-memory
/// BFGS metric, reusing inner products of surviving elements and pairs.
pub struct GramCache {
    elems: Vec<u64>,
    gg: Matrix,
    pairs: Vec<usize>,
    sg: Matrix,
    vg: Matrix,
}

impl Default for GramCache {
    fn default() -> Self {
        Self { elems: Vec::new(), gg: Matrix::zeros(0, 0), pairs: Vec::new(), sg: Matrix::zeros(0, 0), vg: Matrix::zeros(0, 0) }
    }
}

impl GramCache {
    /// `GᵀWG` with one column of `G` per element of `set`, or `None` if `qn`
    /// has no compact form.
    pub fn gram(&mut self, set: &PointSet, qn: &QuasiNewtonState) -> Option<Matrix> {
        let (first, hist) = qn.compact_history()?;
        let ids = set.ids();
        let els = set.elements();
        let m = ids.len();
        let h = hist.len();
        let pair_ids: Vec<usize> = (first..first + h).collect();
        let old_e: Vec<Option<usize>> = ids.iter().map(|id| self.elems.binary_search(id).ok()).collect();
        let old_p: Vec<Option<usize>> = pair_ids.iter().map(|id| self.pairs.binary_search(id).ok()).collect();

        let mut gg = Matrix::zeros(m, m);
        for j in 0..m {
            for i in j..m {
                let v = match (old_e[i], old_e[j]) {
                    (Some(a), Some(b)) => self.gg[(a, b)],
                    _ => dot(&els[i].g, &els[j].g),
                };
                gg[(i, j)] = v;
                gg[(j, i)] = v;
            }
        }
        let mut sg = Matrix::zeros(h, m);
        let mut vg = Matrix::zeros(h, m);
        for j in 0..m {
            for k in 0..h {
                let (s, v) = match (old_p[k], old_e[j]) {
                    (Some(a), Some(b)) => (self.sg[(a, b)], self.vg[(a, b)]),
                    _ => (dot(hist[k].0, &els[j].g), dot(hist[k].1, &els[j].g)),
                };
                sg[(k, j)] = s;
                vg[(k, j)] = v;
            }
        }
        let q = compact_bfgs_gram(&hist, &gg, &sg, &vg);
        *self = Self { elems: ids.to_vec(), gg, pairs: pair_ids, sg, vg };
        Some(q)
    }
}

/// Shared products for the QP solvers; caches `WG` once needed.
pub struct QpOperator<'d, 'a> {
    pub data: &'d SubproblemData<'a>,
    wg: OnceCell<Matrix>,
}

impl<'d, 'a> QpOperator<'d, 'a> {
    pub fn new(data: &'d SubproblemData<'a>) -> Self {
        Self { data, wg: OnceCell::new() }
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn m(&self) -> usize {
        self.data.m()
    }

    pub fn g(&self) -> &Matrix {
        &self.data.g
    }

    pub fn b(&self) -> &[f64] {
        &self.data.b
    }

    pub fn delta(&self) -> f64 {
        self.data.delta
    }

    pub fn metric(&self) -> &dyn Metric {
        self.data.metric
    }

    /// `W G`
    pub fn wg(&self) -> &Matrix {
        self.wg.get_or_init(|| {
            let mut wg = Matrix::zeros(self.n(), self.m());
            self.data.metric.apply_w_columns(&self.data.g, &mut wg);
            wg
        })
    }

    pub fn apply_w(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; y.len()];
        self.data.metric.apply_w(y, &mut out);
        out
    }

    /// `Gω + σ - ρ` for `θ = (ω[, σ, ρ])`.
    pub fn combine(&self, theta: &[f64]) -> Vec<f64> {
        let (n, m) = (self.n(), self.m());
        let mut y = vec![0.0; n];
        self.data.g.mul_vec(&theta[..m], &mut y);
        if theta.len() == m + 2 * n {
            for i in 0..n {
                y[i] += theta[m + i] - theta[m + n + i];
            }
        }
        y
    }

    /// `W(Gω + σ - ρ)`, using `WG` for the `ω` part if it is cached.
    pub fn w_combine(&self, theta: &[f64]) -> Vec<f64> {
        let (n, m) = (self.n(), self.m());
        let Some(wg) = self.wg.get() else {
            return self.apply_w(&self.combine(theta));
        };
        let mut w = vec![0.0; n];
        wg.mul_vec(&theta[..m], &mut w);
        if theta.len() == m + 2 * n {
            let gamma: Vec<f64> = (0..n).map(|i| theta[m + i] - theta[m + n + i]).collect();
            if gamma.iter().any(|&x| x != 0.0) {
                let wgam = self.apply_w(&gamma);
                axpy(1.0, &wgam, &mut w);
            }
        }
        w
    }

    /// `Mᵀ w` laid out like `θ` (length `m` or `m + 2n`).
    pub fn m_transpose(&self, w: &[f64], full: bool) -> Vec<f64> {
        let (n, m) = (self.n(), self.m());
        let mut out = vec![0.0; if full { m + 2 * n } else { m }];
        self.data.g.mul_vec_t(w, &mut out[..m]);
        if full {
            out[m..m + n].copy_from_slice(w);
            for i in 0..n {
                out[m + n + i] = -w[i];
            }
        }
        out
    }

    /// `Qθ`
    pub fn apply_q(&self, theta: &[f64]) -> Vec<f64> {
        let full = theta.len() != self.m();
        let w = self.w_combine(theta);
        self.m_transpose(&w, full)
    }

    /// `c = (-b, δ𝟙, δ𝟙)` (or `-b` alone).
    pub fn c(&self, full: bool) -> Vec<f64> {
        let n = self.n();
        let mut c: Vec<f64> = self.data.b.iter().map(|b| -b).collect();
        if full {
            c.extend(std::iter::repeat(self.data.delta).take(2 * n));
        }
        c
    }

    /// `GᵀWG`
    pub fn gram(&self) -> Matrix {
        if let Some(q) = &self.data.gram {
            return q.clone();
        }
        let (n, m) = (self.n(), self.m());
        let mut q = Matrix::zeros(m, m);
        add_cross_lower(self.data.g.as_slice(), self.wg().as_slice(), m, n, &mut q);
        for j in 0..m {
            for i in j + 1..m {
                q[(j, i)] = q[(i, j)];
            }
        }
        q
    }
}

/// KKT residual of `θ = (ω, σ, ρ)` with multipliers `(u, v)` for the full
/// `θ`-problem: the largest of `|1 - aᵀθ|`, `‖Qθ + c - au - v‖∞`,
/// `‖θ∘v‖∞` and the negative parts of `θ` and `v`.
///
/// `v = None` uses `v = Qθ + c - au`.
pub fn kkt_residual(op: &QpOperator, omega: &[f64], sigma: &[f64], rho: &[f64], u: f64, v: Option<&[f64]>) -> f64 {
    let (n, m) = (op.n(), op.m());
    let mut theta = Vec::with_capacity(m + 2 * n);
    theta.extend_from_slice(omega);
    theta.extend_from_slice(sigma);
    theta.extend_from_slice(rho);
    let q = op.apply_q(&theta);
    let c = op.c(true);
    let mut dual: Vec<f64> = (0..m + 2 * n).map(|i| q[i] + c[i] - if i < m { u } else { 0.0 }).collect();
    let mut rd = 0.0f64;
    if let Some(v) = v {
        for i in 0..dual.len() {
            dual[i] -= v[i];
        }
        rd = norm_inf(&dual);
        dual.copy_from_slice(v);
    }
    let rp = (1.0 - omega.iter().sum::<f64>()).abs();
    let mut res = rp.max(rd);
    for i in 0..theta.len() {
        res = res.max((-theta[i]).max(0.0)).max((-dual[i]).max(0.0)).max((theta[i] * dual[i]).abs());
    }
    res
}

/// Value of the dual objective `-½ yᵀWy + bᵀω - δ‖γ‖₁`, `y = Gω + γ`.
pub fn dual_objective(data: &SubproblemData, omega: &[f64], gamma: &[f64]) -> f64 {
    let mut y = vec![0.0; data.n()];
    data.g.mul_vec(omega, &mut y);
    axpy(1.0, gamma, &mut y);
    let mut wy = vec![0.0; y.len()];
    data.metric.apply_w(&y, &mut wy);
    -0.5 * dot(&y, &wy) + dot(&data.b, omega) - data.delta * gamma.iter().map(|g| g.abs()).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionSolver {
    GradientStep,
    ActiveSet,
    InteriorPoint,
}

#[derive(Debug, Clone)]
pub struct DirectionResult {
    pub d: Vec<f64>,
    pub omega: Vec<f64>,
    pub gamma: Vec<f64>,
    /// `(Gω + γ)ᵀW(Gω + γ) = ‖d‖²_H`
    pub model_norm_sq: f64,
    /// `(‖d‖∞, ‖Gω‖∞, ‖Gω + γ‖∞)`
    pub inf_norms: (f64, f64, f64),
    pub kkt_residual: f64,
    pub solver: DirectionSolver,
    pub qp_iterations: usize,
}

impl DirectionResult {
    pub fn max_inf_norm(&self) -> f64 {
        self.inf_norms.0.max(self.inf_norms.1).max(self.inf_norms.2)
    }
}

/// Builds `(G, b)` from the point set around its current element.
pub fn build_subproblem<'a>(
    set: &PointSet,
    strategy: Strategy,
    delta: f64,
    downshift: f64,
    metric: &'a dyn Metric,
) -> Result<SubproblemData<'a>> {
    if set.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let cur = set.current();
    let (xk, fk) = (&cur.x, cur.f);
    let n = xk.len();
    let elems: Vec<_> = match strategy {
        Strategy::Gradient => vec![cur],
        _ => set.elements().iter().collect(),
    };
    let mut g = Matrix::zeros(n, elems.len());
    let mut b = Vec::with_capacity(elems.len());
    for (j, e) in elems.iter().enumerate() {
        g.col_mut(j).copy_from_slice(&e.g);
        let mut lin = 0.0;
        let mut dist_sq = 0.0;
        for i in 0..n {
            let s = xk[i] - e.x[i];
            lin += e.g[i] * s;
            dist_sq += s * s;
        }
        let bj = match strategy {
            Strategy::Gradient => fk,
            Strategy::GradientCombination => fk + lin,
            Strategy::CuttingPlane => (e.f + lin).min(fk - downshift * dist_sq),
        };
        b.push(bj);
    }
    SubproblemData::new(g, b, delta, metric)
}

/// `d = -W(Gω + γ)`
pub fn recover_primal(omega: &[f64], gamma: &[f64], data: &SubproblemData) -> Vec<f64> {
    let mut y = vec![0.0; data.n()];
    data.g.mul_vec(omega, &mut y);
    axpy(1.0, gamma, &mut y);
    let mut d = vec![0.0; y.len()];
    data.metric.apply_w(&y, &mut d);
    d.iter_mut().for_each(|x| *x = -*x);
    d
}

fn finish(
    data: &SubproblemData,
    omega: Vec<f64>,
    gamma: Vec<f64>,
    w: Vec<f64>,
    kkt_residual: f64,
    solver: DirectionSolver,
    qp_iterations: usize,
) -> DirectionResult {
    let mut gw = vec![0.0; data.n()];
    data.g.mul_vec(&omega, &mut gw);
    let y: Vec<f64> = gw.iter().zip(&gamma).map(|(a, b)| a + b).collect();
    let d: Vec<f64> = w.iter().map(|x| -x).collect();
    let model_norm_sq = dot(&y, &w).max(0.0);
    DirectionResult {
        inf_norms: (norm_inf(&d), norm_inf(&gw), norm_inf(&y)),
        d,
        omega,
        gamma,
        model_norm_sq,
        kkt_residual,
        solver,
        qp_iterations,
    }
}

/// Which QP solver handles a subproblem with `m` columns.
pub fn select_solver(m: usize, options: &SolverOptions) -> QpSolverKind {
    if m <= options.qp_size_threshold {
        options.qp_small
    } else {
        options.qp_large
    }
}

/// Solves the subproblem, trying the plain gradient step first when `m = 1`.
pub fn compute_direction(data: &SubproblemData, options: &SolverOptions) -> Result<DirectionResult> {
    let m = data.m();
    if options.try_gradient_step && m == 1 {
        let w = recover_primal(&[1.0], &vec![0.0; data.n()], data);
        if norm_inf(&w) <= data.delta {
            let w: Vec<f64> = w.iter().map(|x| -x).collect();
            return Ok(finish(data, vec![1.0], vec![0.0; data.n()], w, 0.0, DirectionSolver::GradientStep, 0));
        }
    }
    let op = QpOperator::new(data);
    match select_solver(m, options) {
        QpSolverKind::ActiveSet => {
            let out = solve_das(&op, &DasOptions { tol: options.qp_tolerance, ..Default::default() }, None)?;
            Ok(finish(data, out.omega, out.gamma, out.w, out.kkt_residual, DirectionSolver::ActiveSet, out.iterations))
        }
        QpSolverKind::InteriorPoint => {
            let out = solve_ipm(&op, &IpmOptions { eps: options.qp_tolerance, ..Default::default() })?;
            let w = op.w_combine(&out.theta_full());
            let gamma = out.gamma();
            Ok(finish(data, out.omega, gamma, w, out.kkt_residual, DirectionSolver::InteriorPoint, out.iterations))
        }
    }
}
