//! Random direction subproblems with a known solution.
//!
//! Instances use `W = I` and `δ = 1`. The generator builds `(G, b)` around
//! a chosen primal step `d*` together with a complete optimality
//! certificate `(ω*, σ*, ρ*, u, v_ω)`.

use std::str::FromStr;

use crate::direction::SubproblemData;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::quasi_newton::IdentityMetric;
use crate::rng::Rng;

/// Shape of the prescribed solution `d*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DCase {
    /// `d* = 0`
    Zero,
    /// `d* = δ` on the first `⌊n/2⌋` coordinates, `0` after.
    Half,
    /// `d* = δ𝟙`
    Full,
}

impl DCase {
    pub const ALL: [DCase; 3] = [Self::Zero, Self::Half, Self::Full];

    pub fn label(self) -> &'static str {
        match self {
            Self::Zero => "zero",
            Self::Half => "half",
            Self::Full => "full",
        }
    }
}

impl FromStr for DCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zero" | "a" => Ok(Self::Zero),
            "half" | "b" => Ok(Self::Half),
            "full" | "c" => Ok(Self::Full),
            _ => Err(Error::InvalidArgument(format!("unknown d* case `{s}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedQp {
    pub g: Matrix,
    pub b: Vec<f64>,
    pub delta: f64,
    pub d_star: Vec<f64>,
    pub d_unc: Vec<f64>,
    pub omega: Vec<f64>,
    pub sigma: Vec<f64>,
    pub rho: Vec<f64>,
    /// Constraint multiplier as generated; with the residual convention
    /// `Qθ + c - 𝟙u - v` the matching multiplier is `-u`.
    pub u: f64,
    pub v_omega: Vec<f64>,
}

impl GeneratedQp {
    pub fn n(&self) -> usize {
        self.g.rows()
    }

    pub fn m(&self) -> usize {
        self.g.cols()
    }

    /// Subproblem data for the instance; `metric` must have dimension `n`.
    pub fn subproblem<'a>(&self, metric: &'a IdentityMetric) -> Result<SubproblemData<'a>> {
        SubproblemData::new(self.g.clone(), self.b.clone(), self.delta, metric)
    }

    /// Full multiplier vector `(v_ω, v_σ, v_ρ)` of the certificate.
    pub fn v_full(&self) -> Vec<f64> {
        let mut v = self.v_omega.clone();
        v.extend(self.d_star.iter().map(|d| self.delta - d));
        v.extend(self.d_star.iter().map(|d| self.delta + d));
        v
    }
}

/// Generates an instance with `m ≥ n + 1` columns.
pub fn generate_qp(n: usize, m: usize, case: DCase, seed: u64) -> Result<GeneratedQp> {
    if n < 1 || m <= n {
        return Err(Error::InvalidArgument(format!("need m > n ≥ 1, got n = {n}, m = {m}")));
    }
    let delta = 1.0;
    let half = n / 2;
    let (d_star, d_unc): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|i| match case {
            DCase::Zero => (0.0, 0.0),
            DCase::Half if i < half => (delta, 2.0 * delta),
            DCase::Half => (0.0, 0.0),
            DCase::Full => (delta, 2.0 * delta),
        })
        .unzip();

    let mut rng = Rng::new(seed);
    let mut g = Matrix::zeros(n, m);
    for j in 0..n - 1 {
        for i in 0..n {
            g[(i, j)] = rng.normal();
        }
    }
    let mut omega: Vec<f64> = (0..n - 1).map(|_| rng.uniform()).collect();
    // pad so that Ĝω̂ = -d_unc
    let mut gw = vec![0.0; n];
    for j in 0..n - 1 {
        for i in 0..n {
            gw[i] += g[(i, j)] * omega[j];
        }
    }
    for i in 0..n {
        g[(i, n - 1)] = -d_unc[i] - gw[i];
    }
    omega.push(1.0);
    let zeta: f64 = omega.iter().sum();
    omega.iter_mut().for_each(|w| *w /= zeta);
    for j in 0..n {
        g.col_mut(j).iter_mut().for_each(|x| *x *= zeta);
    }
    for j in n..m {
        for i in 0..n {
            g[(i, j)] = rng.normal();
        }
    }
    omega.resize(m, 0.0);

    let mut gw = vec![0.0; n];
    g.mul_vec(&omega, &mut gw);
    let q: Vec<f64> = (0..n).map(|i| -(d_star[i] + gw[i])).collect();
    let rho: Vec<f64> = q.iter().map(|x| (-x).max(0.0)).collect();
    let sigma: Vec<f64> = q.iter().map(|x| x.max(0.0)).collect();
    let u = 5.0;
    let v_omega: Vec<f64> = omega.iter().map(|&w| if w > 0.0 { 0.0 } else { rng.uniform() }).collect();
    let y: Vec<f64> = (0..n).map(|i| gw[i] + sigma[i] - rho[i]).collect();
    let mut b = vec![0.0; m];
    g.mul_vec_t(&y, &mut b);
    for j in 0..m {
        b[j] += u - v_omega[j];
    }
    Ok(GeneratedQp { g, b, delta, d_star, d_unc, omega, sigma, rho, u, v_omega })
}
