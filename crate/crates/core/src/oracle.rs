//! Objective contract and finite-difference derivative checking.

use std::cell::Cell;

/// A locally Lipschitz objective `f: Rⁿ → R ∪ {+∞}`.
///
/// `value` returns `f64::INFINITY` outside the domain; `gradient` returns
/// one element of the Clarke generalized gradient (the gradient wherever
/// `f` is differentiable). Both must be pure.
pub trait Objective: Sync {
    fn dimension(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], g: &mut [f64]);

    fn name(&self) -> &str {
        "objective"
    }
}

impl<T: Objective + ?Sized> Objective for &T {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64], g: &mut [f64]) {
        (**self).gradient(x, g)
    }
    fn name(&self) -> &str {
        (**self).name()
    }
}

impl<T: Objective + ?Sized> Objective for Box<T> {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64], g: &mut [f64]) {
        (**self).gradient(x, g)
    }
    fn name(&self) -> &str {
        (**self).name()
    }
}

/// Builds an [`Objective`] from two closures.
pub struct FnObjective<F, G> {
    n: usize,
    f: F,
    g: G,
}

impl<F, G> FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64], &mut [f64]) + Sync,
{
    pub fn new(n: usize, f: F, g: G) -> Self {
        Self { n, f, g }
    }
}

impl<F, G> Objective for FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64], &mut [f64]) + Sync,
{
    fn dimension(&self) -> usize {
        self.n
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
    fn gradient(&self, x: &[f64], g: &mut [f64]) {
        (self.g)(x, g)
    }
}

/// Wraps an objective, applies a constant scale and counts calls.
///
/// NaN values are reported as `+∞`.
pub struct Counted<'a> {
    inner: &'a dyn Objective,
    scale: f64,
    f_calls: Cell<usize>,
    g_calls: Cell<usize>,
}

impl<'a> Counted<'a> {
    pub fn new(inner: &'a dyn Objective) -> Self {
        Self { inner, scale: 1.0, f_calls: Cell::new(0), g_calls: Cell::new(0) }
    }

    pub fn set_scale(&mut self, scale: f64) {
        self.scale = scale;
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.f_calls.set(self.f_calls.get() + 1);
        let f = self.inner.value(x);
        if f.is_nan() {
            f64::INFINITY
        } else {
            self.scale * f
        }
    }

    pub fn gradient(&self, x: &[f64], g: &mut [f64]) {
        self.g_calls.set(self.g_calls.get() + 1);
        self.inner.gradient(x, g);
        if self.scale != 1.0 {
            g.iter_mut().for_each(|gi| *gi *= self.scale);
        }
    }

    pub fn function_evaluations(&self) -> usize {
        self.f_calls.get()
    }

    pub fn gradient_evaluations(&self) -> usize {
        self.g_calls.get()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CheckStatus {
    Pass,
    /// Forward difference disagrees with the analytic derivative.
    /// `suspected_kink` is set when forward and backward differences
    /// disagree with each other, which points at a nondifferentiable point.
    Mismatch { suspected_kink: bool },
    /// `f` is infinite at a probe point.
    Untestable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeCheck {
    pub coordinate: usize,
    pub analytic: f64,
    pub finite_difference: f64,
    pub status: CheckStatus,
}

/// Relative tolerance used by [`check_derivatives`].
pub const DERIVATIVE_CHECK_TOLERANCE: f64 = 1e-4;

fn agrees(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

/// Compares each partial derivative with a forward difference of step `h`.
pub fn check_derivatives(oracle: &dyn Objective, x: &[f64], h: f64) -> Vec<DerivativeCheck> {
    let n = oracle.dimension();
    let fx = oracle.value(x);
    let mut g = vec![0.0; n];
    oracle.gradient(x, &mut g);
    let mut probe = x.to_vec();
    (0..n)
        .map(|i| {
            probe[i] = x[i] + h;
            let fp = oracle.value(&probe);
            probe[i] = x[i] - h;
            let fm = oracle.value(&probe);
            probe[i] = x[i];
            if !fx.is_finite() || !fp.is_finite() {
                return DerivativeCheck {
                    coordinate: i,
                    analytic: g[i],
                    finite_difference: f64::NAN,
                    status: CheckStatus::Untestable,
                };
            }
            let fwd = (fp - fx) / h;
            let status = if agrees(fwd, g[i], DERIVATIVE_CHECK_TOLERANCE) {
                CheckStatus::Pass
            } else {
                let bwd = (fx - fm) / h;
                let suspected_kink = fm.is_finite() && !agrees(fwd, bwd, DERIVATIVE_CHECK_TOLERANCE);
                CheckStatus::Mismatch { suspected_kink }
            };
            DerivativeCheck { coordinate: i, analytic: g[i], finite_difference: fwd, status }
        })
        .collect()
}
