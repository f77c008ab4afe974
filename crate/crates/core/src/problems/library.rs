//! Scalable nonsmooth test problems.
//!
//! Subgradients at kinks break ties in max-type terms toward the lowest
//! index and use `sign(0) = 0`.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::oracle::Objective;

use super::ProblemInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestProblem {
    ActiveFaces,
    BrownFunction2,
    ChainedCb3I,
    ChainedCb3II,
    ChainedCrescentI,
    ChainedCrescentII,
    ChainedLq,
    ChainedMifflin2,
    MaxQ,
    MxHilb,
}

impl TestProblem {
    pub const ALL: [TestProblem; 10] = [
        Self::ActiveFaces,
        Self::BrownFunction2,
        Self::ChainedCb3I,
        Self::ChainedCb3II,
        Self::ChainedCrescentI,
        Self::ChainedCrescentII,
        Self::ChainedLq,
        Self::ChainedMifflin2,
        Self::MaxQ,
        Self::MxHilb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::ActiveFaces => "ActiveFaces",
            Self::BrownFunction2 => "BrownFunction_2",
            Self::ChainedCb3I => "ChainedCB3_1",
            Self::ChainedCb3II => "ChainedCB3_2",
            Self::ChainedCrescentI => "ChainedCrescent_1",
            Self::ChainedCrescentII => "ChainedCrescent_2",
            Self::ChainedLq => "ChainedLQ",
            Self::ChainedMifflin2 => "ChainedMifflin_2",
            Self::MaxQ => "MaxQ",
            Self::MxHilb => "MxHilb",
        }
    }

    /// Standard starting point.
    pub fn x0(self, n: usize) -> Vec<f64> {
        (1..=n)
            .map(|i| match self {
                Self::ActiveFaces | Self::MxHilb => 1.0,
                Self::BrownFunction2 => {
                    if i % 2 == 1 {
                        -1.0
                    } else {
                        1.0
                    }
                }
                Self::ChainedCb3I | Self::ChainedCb3II => 2.0,
                Self::ChainedCrescentI | Self::ChainedCrescentII => {
                    if i % 2 == 1 {
                        -1.5
                    } else {
                        2.0
                    }
                }
                Self::ChainedLq => -0.5,
                Self::ChainedMifflin2 => -1.0,
                Self::MaxQ => {
                    if i <= n / 2 {
                        i as f64
                    } else {
                        -(i as f64)
                    }
                }
            })
            .collect()
    }

    /// Optimal value, where known.
    pub fn f_star(self, n: usize) -> Option<f64> {
        let k = (n - 1) as f64;
        match self {
            Self::ChainedCb3I | Self::ChainedCb3II => Some(2.0 * k),
            Self::ChainedLq => Some(-(2f64.sqrt()) * k),
            Self::ChainedMifflin2 => (n == 1000).then_some(-706.55),
            _ => Some(0.0),
        }
    }
}

impl FromStr for TestProblem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownProblem(s.to_string()))
    }
}

/// A [`TestProblem`] at a fixed dimension.
#[derive(Debug, Clone, Copy)]
pub struct LibraryObjective {
    pub problem: TestProblem,
    pub n: usize,
}

fn sign(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// First index of the maximum.
fn argmax(v: &[f64]) -> usize {
    let mut k = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[k] {
            k = i;
        }
    }
    k
}

fn lq_terms(a: f64, b: f64) -> [f64; 2] {
    [-a - b, -a - b + (a * a + b * b - 1.0)]
}

fn cb3_terms(a: f64, b: f64) -> [f64; 3] {
    [a.powi(4) + b * b, (2.0 - a).powi(2) + (2.0 - b).powi(2), 2.0 * (b - a).exp()]
}

fn cb3_grads(a: f64, b: f64) -> [[f64; 2]; 3] {
    let e = 2.0 * (b - a).exp();
    [[4.0 * a.powi(3), 2.0 * b], [-2.0 * (2.0 - a), -2.0 * (2.0 - b)], [-e, e]]
}

fn crescent_terms(a: f64, b: f64) -> [f64; 2] {
    let q = a * a + (b - 1.0).powi(2);
    [q + b - 1.0, -q + b + 1.0]
}

fn crescent_grads(a: f64, b: f64) -> [[f64; 2]; 2] {
    [[2.0 * a, 2.0 * (b - 1.0) + 1.0], [-2.0 * a, -2.0 * (b - 1.0) + 1.0]]
}

fn hilbert_sums(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n).map(|i| (0..n).map(|j| x[j] / (i + j + 1) as f64).sum()).collect()
}

fn brown_pair(a: f64, b: f64) -> f64 {
    a.abs().powf(b * b + 1.0) + b.abs().powf(a * a + 1.0)
}

/// `∂/∂a |a|^{b²+1}` and `∂/∂b |a|^{b²+1}`.
fn brown_power_grad(a: f64, b: f64) -> (f64, f64) {
    let p = b * b + 1.0;
    let aa = a.abs();
    if aa == 0.0 {
        return (0.0, 0.0);
    }
    (p * aa.powf(b * b) * sign(a), aa.powf(p) * aa.ln() * 2.0 * b)
}

impl Objective for LibraryObjective {
    fn dimension(&self) -> usize {
        self.n
    }

    fn name(&self) -> &str {
        self.problem.name()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let n = self.n;
        let pairs = || (0..n - 1).map(|i| (x[i], x[i + 1]));
        match self.problem {
            TestProblem::ActiveFaces => {
                let s: f64 = x.iter().sum();
                x.iter().fold((s.abs() + 1.0).ln(), |m, xi| m.max((xi.abs() + 1.0).ln()))
            }
            TestProblem::BrownFunction2 => pairs().map(|(a, b)| brown_pair(a, b)).sum(),
            TestProblem::ChainedCb3I => {
                pairs().map(|(a, b)| cb3_terms(a, b).into_iter().fold(f64::NEG_INFINITY, f64::max)).sum()
            }
            TestProblem::ChainedCb3II => {
                let mut s = [0.0; 3];
                for (a, b) in pairs() {
                    let t = cb3_terms(a, b);
                    (0..3).for_each(|k| s[k] += t[k]);
                }
                s[0].max(s[1]).max(s[2])
            }
            TestProblem::ChainedCrescentI => {
                let mut s = [0.0; 2];
                for (a, b) in pairs() {
                    let t = crescent_terms(a, b);
                    s[0] += t[0];
                    s[1] += t[1];
                }
                s[0].max(s[1])
            }
            TestProblem::ChainedCrescentII => pairs()
                .map(|(a, b)| {
                    let t = crescent_terms(a, b);
                    t[0].max(t[1])
                })
                .sum(),
            TestProblem::ChainedLq => pairs()
                .map(|(a, b)| {
                    let t = lq_terms(a, b);
                    t[0].max(t[1])
                })
                .sum(),
            TestProblem::ChainedMifflin2 => pairs()
                .map(|(a, b)| {
                    let r = a * a + b * b - 1.0;
                    -a + 2.0 * r + 1.75 * r.abs()
                })
                .sum(),
            TestProblem::MaxQ => x.iter().map(|v| v * v).fold(f64::NEG_INFINITY, f64::max),
            TestProblem::MxHilb => hilbert_sums(x).into_iter().map(f64::abs).fold(f64::NEG_INFINITY, f64::max),
        }
    }

    fn gradient(&self, x: &[f64], g: &mut [f64]) {
        let n = self.n;
        g.iter_mut().for_each(|v| *v = 0.0);
        match self.problem {
            TestProblem::ActiveFaces => {
                let s: f64 = x.iter().sum();
                let mut vals = vec![(s.abs() + 1.0).ln()];
                vals.extend(x.iter().map(|xi| (xi.abs() + 1.0).ln()));
                let k = argmax(&vals);
                if k == 0 {
                    let c = sign(s) / (s.abs() + 1.0);
                    g.iter_mut().for_each(|v| *v = c);
                } else {
                    let xi = x[k - 1];
                    g[k - 1] = sign(xi) / (xi.abs() + 1.0);
                }
            }
            TestProblem::BrownFunction2 => {
                for i in 0..n - 1 {
                    let (a, b) = (x[i], x[i + 1]);
                    let (da1, db1) = brown_power_grad(a, b);
                    let (db2, da2) = brown_power_grad(b, a);
                    g[i] += da1 + da2;
                    g[i + 1] += db1 + db2;
                }
            }
            TestProblem::ChainedCb3I => {
                for i in 0..n - 1 {
                    let (a, b) = (x[i], x[i + 1]);
                    let k = argmax(&cb3_terms(a, b));
                    let gr = cb3_grads(a, b)[k];
                    g[i] += gr[0];
                    g[i + 1] += gr[1];
                }
            }
            TestProblem::ChainedCb3II => {
                let s: Vec<f64> = {
                    let mut s = vec![0.0; 3];
                    for i in 0..n - 1 {
                        let t = cb3_terms(x[i], x[i + 1]);
                        (0..3).for_each(|k| s[k] += t[k]);
                    }
                    s
                };
                let k = argmax(&s);
                for i in 0..n - 1 {
                    let gr = cb3_grads(x[i], x[i + 1])[k];
                    g[i] += gr[0];
                    g[i + 1] += gr[1];
                }
            }
            TestProblem::ChainedCrescentI => {
                let mut s = [0.0; 2];
                for i in 0..n - 1 {
                    let t = crescent_terms(x[i], x[i + 1]);
                    s[0] += t[0];
                    s[1] += t[1];
                }
                let k = argmax(&s);
                for i in 0..n - 1 {
                    let gr = crescent_grads(x[i], x[i + 1])[k];
                    g[i] += gr[0];
                    g[i + 1] += gr[1];
                }
            }
            TestProblem::ChainedCrescentII => {
                for i in 0..n - 1 {
                    let (a, b) = (x[i], x[i + 1]);
                    let k = argmax(&crescent_terms(a, b));
                    let gr = crescent_grads(a, b)[k];
                    g[i] += gr[0];
                    g[i + 1] += gr[1];
                }
            }
            TestProblem::ChainedLq => {
                for i in 0..n - 1 {
                    let (a, b) = (x[i], x[i + 1]);
                    let k = argmax(&lq_terms(a, b));
                    let (ga, gb) = if k == 0 { (-1.0, -1.0) } else { (-1.0 + 2.0 * a, -1.0 + 2.0 * b) };
                    g[i] += ga;
                    g[i + 1] += gb;
                }
            }
            TestProblem::ChainedMifflin2 => {
                for i in 0..n - 1 {
                    let (a, b) = (x[i], x[i + 1]);
                    let r = a * a + b * b - 1.0;
                    let c = 2.0 + 1.75 * sign(r);
                    g[i] += -1.0 + 2.0 * a * c;
                    g[i + 1] += 2.0 * b * c;
                }
            }
            TestProblem::MaxQ => {
                let sq: Vec<f64> = x.iter().map(|v| v * v).collect();
                let k = argmax(&sq);
                g[k] = 2.0 * x[k];
            }
            TestProblem::MxHilb => {
                let s = hilbert_sums(x);
                let abs: Vec<f64> = s.iter().map(|v| v.abs()).collect();
                let k = argmax(&abs);
                let sg = sign(s[k]);
                for (j, gj) in g.iter_mut().enumerate() {
                    *gj = sg / (k + j + 1) as f64;
                }
            }
        }
    }
}

/// Instance of a named library problem at dimension `n ≥ 2`.
pub fn make_problem(name: &str, n: usize) -> Result<ProblemInstance> {
    let problem: TestProblem = name.parse()?;
    if n < 2 {
        return Err(Error::InvalidArgument(format!("dimension {n} is below 2")));
    }
    Ok(ProblemInstance {
        name: problem.name().to_string(),
        n,
        x0: problem.x0(n),
        f_star: problem.f_star(n),
        oracle: Box::new(LibraryObjective { problem, n }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{check_derivatives, CheckStatus};
    use crate::rng::Rng;

    #[test]
    fn max_q_example() {
        let p = make_problem("MaxQ", 4).unwrap();
        let x = [1.0, 2.0, -3.0, -4.0];
        assert_eq!(p.oracle.value(&x), 16.0);
        let mut g = [0.0; 4];
        p.oracle.gradient(&x, &mut g);
        assert_eq!(g, [0.0, 0.0, 0.0, -8.0]);
        assert_eq!(p.x0, vec![1.0, 2.0, -3.0, -4.0]);
    }

    #[test]
    fn optimal_values() {
        let lq = make_problem("ChainedLQ", 1000).unwrap();
        assert!((lq.f_star.unwrap() + 1412.799).abs() < 1e-3);
        assert_eq!(make_problem("ChainedCB3_2", 1000).unwrap().f_star, Some(1998.0));
        assert_eq!(make_problem("ChainedMifflin_2", 1000).unwrap().f_star, Some(-706.55));
        assert_eq!(make_problem("ChainedMifflin_2", 100).unwrap().f_star, None);
    }

    #[test]
    fn unknown_name_rejected() {
        assert!(matches!(make_problem("Rosenbrock", 10), Err(Error::UnknownProblem(_))));
    }

    #[test]
    fn known_minimizers_attain_f_star() {
        let n = 6;
        let at = |name: &str, x: Vec<f64>| make_problem(name, n).unwrap().oracle.value(&x);
        assert!((at("ChainedLQ", vec![1.0 / 2f64.sqrt(); n]) + 2f64.sqrt() * 5.0).abs() < 1e-12);
        assert_eq!(at("ChainedCB3_1", vec![1.0; n]), 10.0);
        assert_eq!(at("ChainedCB3_2", vec![1.0; n]), 10.0);
        assert_eq!(at("MaxQ", vec![0.0; n]), 0.0);
        assert_eq!(at("MxHilb", vec![0.0; n]), 0.0);
        assert_eq!(at("ActiveFaces", vec![0.0; n]), 0.0);
        assert_eq!(at("BrownFunction_2", vec![0.0; n]), 0.0);
        assert_eq!(at("ChainedCrescent_1", vec![0.0; n]), 0.0);
        assert_eq!(at("ChainedCrescent_2", vec![0.0; n]), 0.0);
    }

    #[test]
    fn lower_bounds_at_random_points() {
        let mut rng = Rng::new(3);
        for p in TestProblem::ALL {
            let inst = make_problem(p.name(), 8).unwrap();
            let Some(fs) = inst.f_star else { continue };
            for _ in 0..100 {
                let x: Vec<f64> = rng.normal_vec(8).iter().map(|v| 2.0 * v).collect();
                assert!(inst.oracle.value(&x) >= fs - 1e-9, "{}", p.name());
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = Rng::new(11);
        for p in TestProblem::ALL {
            let inst = make_problem(p.name(), 7).unwrap();
            for _ in 0..5 {
                let x: Vec<f64> = inst.x0.iter().map(|v| v + 0.3 * rng.normal()).collect();
                for c in check_derivatives(inst.oracle.as_ref(), &x, 1e-8) {
                    assert!(
                        !matches!(c.status, CheckStatus::Mismatch { suspected_kink: false }),
                        "{} coordinate {}: {} vs {}",
                        p.name(),
                        c.coordinate,
                        c.analytic,
                        c.finite_difference
                    );
                }
            }
        }
    }
}
