//! The outer minimization loop.

use serde::Serialize;

use crate::control::{check_termination, init_radii, min_norm_element, Decision, StallCounter};
use crate::direction::{build_subproblem, compute_direction, DirectionResult, GramCache, QpOperator, SubproblemData};
use crate::error::{Error, Result};
use crate::line_search::{backtracking, weak_wolfe, LineSearchParams};
use crate::linalg::{norm_inf, sub};
use crate::options::{LineSearchKind, QpSolverKind, SolverOptions, Strategy, TerminationKind};
use crate::oracle::{Counted, Objective};
use crate::point_set::{sample_ball, BundleElement, PointSet};
use crate::quasi_newton::{damp, QuasiNewtonState};
use crate::rng::Rng;

/// Scaled objective values below this are reported as unbounded.
pub const UNBOUNDED_THRESHOLD: f64 = -1e20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Stationary,
    IterationLimit,
    ObjectiveUnbounded,
    LineSearchFailure,
}

impl TerminationReason {
    pub fn label(self) -> &'static str {
        match self {
            Self::Stationary => "stationary",
            Self::IterationLimit => "iteration_limit",
            Self::ObjectiveUnbounded => "objective_unbounded",
            Self::LineSearchFailure => "line_search_failure",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub iterations: usize,
    pub function_evaluations: usize,
    pub gradient_evaluations: usize,
    /// Unscaled objective at `final_x`.
    pub final_f: f64,
    pub final_x: Vec<f64>,
    pub termination_reason: TerminationReason,
    pub cpu_seconds: f64,
    pub scale: f64,
    /// Final stationarity radius.
    pub final_eps: f64,
    /// Unscaled objective at every iterate, starting with `x₁`.
    pub f_history: Vec<f64>,
}

/// `min{1, 100/‖g̃₁‖∞}`, or 1 for a zero gradient.
pub fn scale_objective(g1: &[f64]) -> f64 {
    let g = norm_inf(g1);
    if g > 0.0 {
        1f64.min(100.0 / g)
    } else {
        1.0
    }
}

/// CPU time consumed by the calling thread.
pub fn thread_cpu_seconds() -> f64 {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: valid pointer to a timespec owned by this frame
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    if rc == 0 {
        ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
    } else {
        0.0
    }
}

fn solve_direction(data: &SubproblemData, opts: &SolverOptions) -> Result<DirectionResult> {
    let swap = |k| match k {
        QpSolverKind::ActiveSet => QpSolverKind::InteriorPoint,
        QpSolverKind::InteriorPoint => QpSolverKind::ActiveSet,
    };
    let retryable = |e: &Error| matches!(e, Error::QpNotConverged { .. } | Error::Singular);
    let e = match compute_direction(data, opts) {
        Err(e) if retryable(&e) => e,
        r => return r,
    };
    // the other QP method, then the same one at a tolerance Q's rounding can reach
    let alt = SolverOptions { qp_small: swap(opts.qp_small), qp_large: swap(opts.qp_large), ..opts.clone() };
    match compute_direction(data, &alt) {
        Err(e2) if retryable(&e2) => {}
        r => return r,
    }
    let q_scale = QpOperator::new(data).gram().max_abs().max(1.0);
    let tol = opts.qp_tolerance.max(100.0 * f64::EPSILON * q_scale);
    if tol == opts.qp_tolerance {
        return Err(e);
    }
    compute_direction(data, &SolverOptions { qp_tolerance: tol, ..opts.clone() }).map_err(|_| e)
}

/// Minimizes `objective` from `x0`.
pub fn minimize(objective: &dyn Objective, x0: &[f64], options: &SolverOptions) -> Result<SolverReport> {
    options.validate()?;
    let n = objective.dimension();
    if x0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x0.len() });
    }
    let t0 = thread_cpu_seconds();
    let mut oracle = Counted::new(objective);
    let f_raw = oracle.value(x0);
    if !f_raw.is_finite() {
        return Err(Error::InfiniteInitialValue);
    }
    let mut g = vec![0.0; n];
    oracle.gradient(x0, &mut g);
    let scale = scale_objective(&g);
    oracle.set_scale(scale);
    let mut f = scale * f_raw;
    g.iter_mut().for_each(|gi| *gi *= scale);
    let mut x = x0.to_vec();

    let mut radii = init_radii(&g);
    let mut qn = QuasiNewtonState::new(n, options.qn_formula, options.qn_storage, options.history_limit);
    let mut set = PointSet::new(BundleElement { x: x.clone(), f, g: g.clone(), birth: 0 });
    let mut rng = Rng::new(options.seed);
    let mut stall = StallCounter::new(options.delta_f, options.n_f);
    let ls = LineSearchParams {
        initial: options.ls_initial,
        decrease: options.ls_decrease,
        curvature: options.ls_curvature,
        max_iter: options.ls_max_iter,
    };
    let p = options.sample_count(n);
    let limit = options.point_set_limit(n);
    let mut f_history = vec![f_raw];
    let mut grams = GramCache::default();
    let mut iterations = 0;

    let reason = loop {
        if iterations >= options.iteration_limit {
            break TerminationReason::IterationLimit;
        }
        let k = iterations + 1;

        for xs in sample_ball(&x, radii.eps, p, &mut rng) {
            let mut gs = vec![0.0; n];
            let fs = match options.strategy {
                Strategy::GradientCombination => f,
                _ => oracle.value(&xs),
            };
            if !fs.is_finite() {
                continue;
            }
            oracle.gradient(&xs, &mut gs);
            if gs.iter().all(|v| v.is_finite()) {
                set.push(BundleElement { x: xs, f: fs, g: gs, birth: k });
            }
        }

        let mut data = build_subproblem(&set, options.strategy, radii.delta, options.downshift, &qn)?;
        if options.strategy != Strategy::Gradient && set.len() > 1 {
            if let Some(q) = grams.gram(&set, &qn) {
                data = data.with_gram(q);
            }
        }
        let dir = solve_direction(&data, options)?;
        let mut stationary_measure = dir.max_inf_norm();
        if options.termination == TerminationKind::MinNorm && stationary_measure <= radii.eps {
            stationary_measure = stationary_measure.max(min_norm_element(&set, options)?);
        }

        if !(dir.model_norm_sq > 0.0) {
            // no model decrease available at this radius
            if radii.eps <= options.eps_min {
                break TerminationReason::Stationary;
            }
            radii.eps /= 10.0;
            radii.delta /= 10.0;
            stall.reset();
            set.prune_by_distance(&x, radii.eps, options.envelope_factor);
            set.prune_by_age(limit);
            continue;
        }

        iterations += 1;
        let res = match options.line_search {
            LineSearchKind::WeakWolfe => weak_wolfe(&oracle, &x, f, &g, &dir.d, dir.model_norm_sq, &ls)?,
            LineSearchKind::Backtracking => backtracking(&oracle, &x, f, &g, &dir.d, dir.model_norm_sq, &ls)?,
        };
        if !res.success || !(res.f_next < f) {
            // null step: keep x, learn from the rejected trial point
            let Some((xt, ft)) = res.trial.filter(|_| options.strategy != Strategy::Gradient) else {
                break TerminationReason::LineSearchFailure;
            };
            let mut gt = vec![0.0; n];
            oracle.gradient(&xt, &mut gt);
            stall.observe(f, f);
            match check_termination(&radii, stationary_measure, &stall, options.eps_min) {
                Decision::Terminate => break TerminationReason::LineSearchFailure,
                Decision::Reduce => {
                    radii.eps /= 10.0;
                    radii.delta /= 10.0;
                    stall.reset();
                }
                Decision::Continue => {}
            }
            if gt.iter().all(|v| v.is_finite()) {
                let ft = match options.strategy {
                    Strategy::GradientCombination => f,
                    _ => ft,
                };
                set.push(BundleElement { x: xt, f: ft, g: gt, birth: k });
            }
            set.prune_by_distance(&x, radii.eps, options.envelope_factor);
            set.prune_by_age(limit);
            continue;
        }
        let s = sub(&res.x_next, &x);
        let y = sub(&res.g_next, &g);
        stall.observe(f, res.f_next);
        let decision = check_termination(&radii, stationary_measure, &stall, options.eps_min);

        x = res.x_next;
        let f_prev = f;
        f = res.f_next;
        g = res.g_next;
        f_history.push(f / scale);
        if f < UNBOUNDED_THRESHOLD {
            break TerminationReason::ObjectiveUnbounded;
        }
        debug_assert!(f < f_prev);

        match decision {
            Decision::Terminate => break TerminationReason::Stationary,
            Decision::Reduce => {
                radii.eps /= 10.0;
                radii.delta /= 10.0;
                stall.reset();
            }
            Decision::Continue => {}
        }

        set.push_current(BundleElement { x: x.clone(), f, g: g.clone(), birth: k });
        set.prune_by_distance(&x, radii.eps, options.envelope_factor);
        set.prune_by_age(limit);

        if let Ok(dm) = damp(&s, &y, options.eta, options.psi) {
            // a rejected pair leaves the matrices unchanged
            let _ = qn.update(&s, &dm.v);
        }
    };

    Ok(SolverReport {
        iterations,
        function_evaluations: oracle.function_evaluations(),
        gradient_evaluations: oracle.gradient_evaluations(),
        final_f: objective.value(&x),
        final_x: x,
        termination_reason: reason,
        cpu_seconds: thread_cpu_seconds() - t0,
        scale,
        final_eps: radii.eps,
        f_history,
    })
}
