//! Step-size selection along a search direction.
//!
//! Sufficient decrease: `f(x + αd) - f(x) ≤ -½ c α ‖d‖²_H`.
//! Curvature (weak Wolfe only): `g(x + αd)ᵀd ≥ -c₂ ‖d‖²_H`.

use crate::error::{Error, Result};
use crate::oracle::Counted;

#[derive(Debug, Clone, Copy)]
pub struct LineSearchParams {
    pub initial: f64,
    pub decrease: f64,
    pub curvature: f64,
    pub max_iter: usize,
}

impl Default for LineSearchParams {
    fn default() -> Self {
        Self { initial: 1.0, decrease: 1e-10, curvature: 0.9, max_iter: 60 }
    }
}

#[derive(Debug, Clone)]
pub struct LineSearchResult {
    /// `false` if no step satisfying sufficient decrease was found; the
    /// remaining fields then describe the starting point.
    pub success: bool,
    pub alpha: f64,
    pub x_next: Vec<f64>,
    pub f_next: f64,
    pub g_next: Vec<f64>,
    pub function_evaluations: usize,
    pub gradient_evaluations: usize,
    /// On failure, the last rejected trial point distinct from `x` with a
    /// finite value.
    pub trial: Option<(Vec<f64>, f64)>,
}

fn step(x: &[f64], alpha: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect()
}

fn armijo(f: f64, f_trial: f64, alpha: f64, c: f64, model_norm_sq: f64) -> bool {
    f_trial.is_finite() && f_trial - f <= -0.5 * c * alpha * model_norm_sq
}

fn check_model(model_norm_sq: f64) -> Result<()> {
    if model_norm_sq > 0.0 && model_norm_sq.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveModelDecrease(model_norm_sq))
    }
}

/// Halves the step until sufficient decrease holds.
pub fn backtracking(
    oracle: &Counted,
    x: &[f64],
    f: f64,
    g: &[f64],
    d: &[f64],
    model_norm_sq: f64,
    params: &LineSearchParams,
) -> Result<LineSearchResult> {
    check_model(model_norm_sq)?;
    let (f0, g0) = (oracle.function_evaluations(), oracle.gradient_evaluations());
    let mut alpha = params.initial;
    let mut trial = None;
    for _ in 0..=params.max_iter {
        let xt = step(x, alpha, d);
        let ft = oracle.value(&xt);
        if armijo(f, ft, alpha, params.decrease, model_norm_sq) {
            let mut gt = vec![0.0; x.len()];
            oracle.gradient(&xt, &mut gt);
            return Ok(LineSearchResult {
                success: true,
                alpha,
                x_next: xt,
                f_next: ft,
                g_next: gt,
                function_evaluations: oracle.function_evaluations() - f0,
                gradient_evaluations: oracle.gradient_evaluations() - g0,
                trial: None,
            });
        }
        if ft.is_finite() && xt != x {
            trial = Some((xt, ft));
        }
        alpha *= 0.5;
    }
    Ok(failure(oracle, x, f, g, f0, g0, trial))
}

fn failure(
    oracle: &Counted,
    x: &[f64],
    f: f64,
    g: &[f64],
    f0: usize,
    g0: usize,
    trial: Option<(Vec<f64>, f64)>,
) -> LineSearchResult {
    LineSearchResult {
        success: false,
        alpha: 0.0,
        x_next: x.to_vec(),
        f_next: f,
        g_next: g.to_vec(),
        function_evaluations: oracle.function_evaluations() - f0,
        gradient_evaluations: oracle.gradient_evaluations() - g0,
        trial,
    }
}

/// Bracketing search for a step satisfying sufficient decrease and the weak
/// curvature condition. If the curvature condition is never met within the
/// iteration cap, the lowest sufficient-decrease point seen is returned.
pub fn weak_wolfe(
    oracle: &Counted,
    x: &[f64],
    f: f64,
    g: &[f64],
    d: &[f64],
    model_norm_sq: f64,
    params: &LineSearchParams,
) -> Result<LineSearchResult> {
    check_model(model_norm_sq)?;
    let (f0, g0) = (oracle.function_evaluations(), oracle.gradient_evaluations());
    let n = x.len();
    let mut lo = 0.0;
    let mut hi = f64::INFINITY;
    let mut alpha = params.initial;
    let mut best: Option<(f64, Vec<f64>, f64, Vec<f64>)> = None;
    let mut trial = None;
    let done = |alpha: f64, xt: Vec<f64>, ft: f64, gt: Vec<f64>| LineSearchResult {
        success: true,
        alpha,
        x_next: xt,
        f_next: ft,
        g_next: gt,
        function_evaluations: oracle.function_evaluations() - f0,
        gradient_evaluations: oracle.gradient_evaluations() - g0,
        trial: None,
    };
    for _ in 0..params.max_iter {
        let xt = step(x, alpha, d);
        let ft = oracle.value(&xt);
        if !armijo(f, ft, alpha, params.decrease, model_norm_sq) {
            if ft.is_finite() && xt != x {
                trial = Some((xt, ft));
            }
            hi = alpha;
            alpha = 0.5 * (lo + hi);
            continue;
        }
        let mut gt = vec![0.0; n];
        oracle.gradient(&xt, &mut gt);
        let slope: f64 = gt.iter().zip(d).map(|(a, b)| a * b).sum();
        if slope >= -params.curvature * model_norm_sq {
            return Ok(done(alpha, xt, ft, gt));
        }
        if best.as_ref().map_or(true, |b| ft < b.2) {
            best = Some((alpha, xt, ft, gt));
        }
        lo = alpha;
        alpha = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * alpha };
    }
    Ok(match best {
        Some((a, xt, ft, gt)) => done(a, xt, ft, gt),
        None => failure(oracle, x, f, g, f0, g0, trial),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{FnObjective, Objective};

    fn half_square() -> FnObjective<impl Fn(&[f64]) -> f64 + Sync, impl Fn(&[f64], &mut [f64]) + Sync> {
        FnObjective::new(1, |x| 0.5 * x[0] * x[0], |x, g| g[0] = x[0])
    }

    fn abs_right() -> FnObjective<impl Fn(&[f64]) -> f64 + Sync, impl Fn(&[f64], &mut [f64]) + Sync> {
        // subgradient +1 at the kink
        FnObjective::new(1, |x| x[0].abs(), |x, g| g[0] = if x[0] >= 0.0 { 1.0 } else { -1.0 })
    }

    #[test]
    fn backtracking_unit_step_on_quadratic() {
        let f = half_square();
        let c = Counted::new(&f);
        let r = backtracking(&c, &[1.0], 0.5, &[1.0], &[-1.0], 1.0, &LineSearchParams::default()).unwrap();
        assert!(r.success);
        assert_eq!(r.alpha, 1.0);
        assert_eq!(r.f_next, 0.0);
    }

    #[test]
    fn backtracking_halves_once_on_abs() {
        let f = abs_right();
        let c = Counted::new(&f);
        let r = backtracking(&c, &[1.0], 1.0, &[1.0], &[-3.0], 1.0, &LineSearchParams::default()).unwrap();
        assert!(r.success);
        assert_eq!(r.alpha, 0.5);
        assert_eq!(r.f_next, 0.5);
        assert_eq!(r.function_evaluations, 2);
        assert_eq!(r.gradient_evaluations, 1);
        assert_eq!(c.function_evaluations(), 2);
    }

    #[test]
    fn zero_model_rejected() {
        let f = half_square();
        let c = Counted::new(&f);
        let p = LineSearchParams::default();
        assert!(backtracking(&c, &[1.0], 0.5, &[1.0], &[0.0], 0.0, &p).is_err());
        assert!(weak_wolfe(&c, &[1.0], 0.5, &[1.0], &[0.0], 0.0, &p).is_err());
    }

    #[test]
    fn wolfe_unit_step_on_quadratic() {
        let f = half_square();
        let c = Counted::new(&f);
        let r = weak_wolfe(&c, &[1.0], 0.5, &[1.0], &[-1.0], 1.0, &LineSearchParams::default()).unwrap();
        assert!(r.success);
        assert_eq!(r.alpha, 1.0);
    }

    #[test]
    fn wolfe_brackets_on_abs() {
        let f = abs_right();
        let c = Counted::new(&f);
        let r = weak_wolfe(&c, &[1.0], 1.0, &[1.0], &[-2.0], 1.0, &LineSearchParams::default()).unwrap();
        assert!(r.success);
        assert!(r.alpha > 0.5 && r.alpha < 1.0, "alpha = {}", r.alpha);
        assert_eq!(r.function_evaluations, c.function_evaluations());
        assert_eq!(r.gradient_evaluations, c.gradient_evaluations());
    }

    #[test]
    fn wolfe_expands_on_linear() {
        let f = FnObjective::new(1, |x| -x[0], |_, g| g[0] = -1.0);
        let c = Counted::new(&f);
        let p = LineSearchParams::default();
        let r = weak_wolfe(&c, &[0.0], 0.0, &[-1.0], &[1.0], 1.0, &p).unwrap();
        assert!(r.success);
        assert_eq!(r.alpha, 2f64.powi(p.max_iter as i32 - 1));
    }

    #[test]
    fn infinite_trial_is_rejected() {
        let f = FnObjective::new(1, |x| if x[0] < 0.0 { f64::INFINITY } else { x[0] }, |_, g| g[0] = 1.0);
        let c = Counted::new(&f);
        let r = backtracking(&c, &[1.0], 1.0, &[1.0], &[-4.0], 1.0, &LineSearchParams::default()).unwrap();
        assert!(r.success);
        assert!(r.f_next.is_finite());
        assert!(r.x_next[0] >= 0.0);
    }

    #[test]
    fn failure_reported() {
        // ascent direction
        let f = half_square();
        let c = Counted::new(&f);
        let p = LineSearchParams { max_iter: 5, ..Default::default() };
        let r = backtracking(&c, &[1.0], 0.5, &[1.0], &[1.0], 1.0, &p).unwrap();
        assert!(!r.success);
        assert_eq!(r.x_next, vec![1.0]);
        let (xt, ft) = r.trial.unwrap();
        assert_eq!(ft, f.value(&xt));
    }
}
