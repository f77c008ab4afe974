//! Stationarity and trust-region radii, stall counting and termination.

use crate::direction::{compute_direction, SubproblemData};
use crate::error::Result;
use crate::linalg::{norm_inf, Matrix};
use crate::options::{QpSolverKind, SolverOptions};
use crate::point_set::PointSet;
use crate::quasi_newton::IdentityMetric;

/// Stationarity radius `ε` and trust-region radius `δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiiState {
    pub eps: f64,
    pub delta: f64,
}

/// `ε₁ = max{1e-2, 0.1‖g₁‖∞}`, `δ₁ = max{0.1, 1e10‖g₁‖∞}`.
pub fn init_radii(g1: &[f64]) -> RadiiState {
    let g = norm_inf(g1);
    RadiiState { eps: 1e-2f64.max(0.1 * g), delta: 0.1f64.max(1e10 * g) }
}

/// Both radii shrink by a factor of ten when the direction's norms are
/// within `ε` or the stall counter fired.
pub fn update_radii(state: RadiiState, max_inf_norm: f64, stall_triggered: bool) -> RadiiState {
    if stall_triggered || max_inf_norm <= state.eps {
        RadiiState { eps: state.eps / 10.0, delta: state.delta / 10.0 }
    } else {
        state
    }
}

/// Counts consecutive iterations with `|f_k - f_{k+1}| ≤ Δf·max{1, |f_k|}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StallCounter {
    pub count: usize,
    pub threshold: usize,
    pub tolerance: f64,
}

impl StallCounter {
    pub fn new(tolerance: f64, threshold: usize) -> Self {
        Self { count: 0, threshold, tolerance }
    }

    pub fn observe(&mut self, f_k: f64, f_next: f64) {
        if (f_k - f_next).abs() <= self.tolerance * f_k.abs().max(1.0) {
            self.count += 1;
        } else {
            self.count = 0;
        }
    }

    pub fn triggered(&self) -> bool {
        self.count >= self.threshold
    }

    pub fn reset(&mut self) {
        self.count = 0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Continue,
    Reduce,
    Terminate,
}

pub fn check_termination(state: &RadiiState, max_inf_norm: f64, stall: &StallCounter, eps_min: f64) -> Decision {
    if !(stall.triggered() || max_inf_norm <= state.eps) {
        Decision::Continue
    } else if state.eps <= eps_min {
        Decision::Terminate
    } else {
        Decision::Reduce
    }
}

/// `‖·‖∞` of the minimum-norm element of the convex hull of the stored
/// gradients.
pub fn min_norm_element(set: &PointSet, options: &SolverOptions) -> Result<f64> {
    let n = set.current().g.len();
    let cols: Vec<&[f64]> = set.elements().iter().map(|e| e.g.as_slice()).collect();
    let g = Matrix::from_columns(n, &cols);
    let id = IdentityMetric(n);
    let data = SubproblemData::new(g, vec![0.0; cols.len()], 1e300, &id)?;
    let opts = SolverOptions {
        try_gradient_step: false,
        qp_small: QpSolverKind::ActiveSet,
        qp_large: QpSolverKind::InteriorPoint,
        ..options.clone()
    };
    let dir = compute_direction(&data, &opts)?;
    Ok(dir.inf_norms.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point_set::BundleElement;

    #[test]
    fn radii_initialization() {
        let r = init_radii(&[100.0, -3.0]);
        assert_eq!(r.eps, 10.0);
        assert_eq!(r.delta, 1e12);
        let r = init_radii(&[0.05]);
        assert_eq!(r.eps, 0.01);
        assert_eq!(r.delta, 5e8);
        let r = init_radii(&[0.0, 0.0]);
        assert_eq!(r, RadiiState { eps: 1e-2, delta: 0.1 });
    }

    #[test]
    fn radii_update_rules() {
        let s = RadiiState { eps: 0.01, delta: 3.0 };
        let r = update_radii(s, 0.005, false);
        assert!((r.eps - 0.001).abs() < 1e-18 && (r.delta - 0.3).abs() < 1e-15);
        assert_eq!(update_radii(s, 0.02, false), s);
        assert_eq!(update_radii(s, 1e3, true).eps, 0.001);
    }

    #[test]
    fn relative_stall_rule() {
        let mut c = StallCounter::new(1e-5, 10);
        c.observe(1000.0, 999.999);
        assert_eq!(c.count, 1);
        c.observe(1000.0, 990.0);
        assert_eq!(c.count, 0);
        // absolute floor below |f| = 1
        c.observe(0.1, 0.1 - 5e-6);
        assert_eq!(c.count, 1);
    }

    #[test]
    fn termination_decisions() {
        let mut stall = StallCounter::new(1e-5, 10);
        stall.count = 10;
        let big = 1e9;
        assert_eq!(check_termination(&RadiiState { eps: 1e-3, delta: 1.0 }, big, &stall, 1e-5), Decision::Reduce);
        assert_eq!(check_termination(&RadiiState { eps: 1e-5, delta: 1.0 }, big, &stall, 1e-5), Decision::Terminate);
        stall.reset();
        assert_eq!(check_termination(&RadiiState { eps: 1e-5, delta: 1.0 }, big, &stall, 1e-5), Decision::Continue);
    }

    #[test]
    fn min_norm_of_opposed_pair() {
        let mut set = PointSet::new(BundleElement { x: vec![0.0, 0.0], f: 0.0, g: vec![1.0, 2.0], birth: 0 });
        set.push(BundleElement { x: vec![0.0, 0.0], f: 0.0, g: vec![-1.0, 2.0], birth: 0 });
        let v = min_norm_element(&set, &SolverOptions::default()).unwrap();
        assert!((v - 2.0).abs() < 1e-6, "{v}");
    }
}
