//! Image denoising with a nonsmooth, possibly nonconvex, anisotropic
//! regularizer.
//!
//! ```text
//! f(X) = Σ (X_ij - X̄_ij)² + λ Σ_{i<n_r, j<n_c} φ_β(X_{i+1,j} - X_ij) + φ_β(X_{i,j+1} - X_ij)
//! ```
//!
//! Pixels are integers in `[1, 256]`; variables are the pixels flattened
//! row-major.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::oracle::Objective;
use crate::rng::Rng;

use super::ProblemInstance;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub rows: usize,
    pub cols: usize,
    /// Row-major pixels in `[1, 256]`.
    pub pixels: Vec<u16>,
}

impl GrayImage {
    pub fn new(rows: usize, cols: usize, pixels: Vec<u16>) -> Result<Self> {
        if pixels.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: pixels.len() });
        }
        if let Some(p) = pixels.iter().find(|p| !(1..=256).contains(*p)) {
            return Err(Error::InvalidArgument(format!("pixel value {p} outside [1, 256]")));
        }
        Ok(Self { rows, cols, pixels })
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| p as f64).collect()
    }

    /// Rounds each value to the nearest integer in `[1, 256]`.
    pub fn from_values(rows: usize, cols: usize, x: &[f64]) -> Self {
        let pixels = x.iter().map(|v| v.round().clamp(1.0, 256.0) as u16).collect();
        Self { rows, cols, pixels }
    }
}

/// Piecewise-constant test image: background, a bright rectangle, a dark
/// disc and a mid-gray stripe.
pub fn synthetic_image(rows: usize, cols: usize) -> GrayImage {
    let mut pixels = Vec::with_capacity(rows * cols);
    let (r, c) = (rows as f64, cols as f64);
    for i in 0..rows {
        for j in 0..cols {
            let (y, x) = (i as f64 / r, j as f64 / c);
            let p = if (x - 0.68).powi(2) + (y - 0.66).powi(2) < 0.04 {
                40
            } else if (0.12..0.48).contains(&x) && (0.15..0.55).contains(&y) {
                210
            } else if (0.8..0.9).contains(&y) {
                130
            } else {
                90
            };
            pixels.push(p);
        }
    }
    GrayImage { rows, cols, pixels }
}

/// Replaces each pixel, with probability `density`, by 1 or 256.
pub fn add_salt_pepper(image: &GrayImage, density: f64, seed: u64) -> Result<GrayImage> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidArgument(format!("noise density {density} outside [0, 1]")));
    }
    let mut rng = Rng::new(seed);
    let pixels = image
        .pixels
        .iter()
        .map(|&p| {
            if rng.bernoulli(density) {
                if rng.bernoulli(0.5) {
                    256
                } else {
                    1
                }
            } else {
                p
            }
        })
        .collect();
    Ok(GrayImage { rows: image.rows, cols: image.cols, pixels })
}

/// `Σ (X_ij - Y_ij)²`
pub fn mse(x: &GrayImage, y: &GrayImage) -> f64 {
    x.pixels.iter().zip(&y.pixels).map(|(&a, &b)| (a as f64 - b as f64).powi(2)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regularizer {
    /// `β|t|`
    Abs,
    /// `β log(1 + β|t|)`
    Log,
    /// `β|t| / (1 + β|t|)`
    Fraction,
    /// `β/2 - max{0, β - |t|}² / (2β)`
    Hard,
}

impl Regularizer {
    pub const ALL: [Regularizer; 4] = [Self::Abs, Self::Log, Self::Fraction, Self::Hard];

    pub fn label(self) -> &'static str {
        match self {
            Self::Abs => "abs",
            Self::Log => "log",
            Self::Fraction => "frac",
            Self::Hard => "hard",
        }
    }

    /// Weights `(λ, β)` tuned on the synthetic test image.
    pub fn tuned(self) -> (f64, f64) {
        match self {
            Self::Abs => (2f64.powi(6), 1.0),
            Self::Log => (2f64.powi(21), 2f64.powi(-7)),
            Self::Fraction => (2f64.powi(25), 2f64.powi(-19)),
            Self::Hard => (2f64.powi(6), 2f64.powi(18)),
        }
    }

    pub fn value(self, t: f64, beta: f64) -> f64 {
        let a = t.abs();
        match self {
            Self::Abs => beta * a,
            Self::Log => beta * (beta * a).ln_1p(),
            Self::Fraction => beta * a / (1.0 + beta * a),
            Self::Hard => beta / 2.0 - (beta - a).max(0.0).powi(2) / (2.0 * beta),
        }
    }

    /// A generalized derivative, with `sign(0) = 0`.
    pub fn derivative(self, t: f64, beta: f64) -> f64 {
        let a = t.abs();
        let s = if t > 0.0 {
            1.0
        } else if t < 0.0 {
            -1.0
        } else {
            0.0
        };
        s * match self {
            Self::Abs => beta,
            Self::Log => beta * beta / (1.0 + beta * a),
            Self::Fraction => beta / (1.0 + beta * a).powi(2),
            Self::Hard => (beta - a).max(0.0) / beta,
        }
    }
}

impl FromStr for Regularizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "abs" | "absolute" => Ok(Self::Abs),
            "log" | "logarithmic" => Ok(Self::Log),
            "frac" | "fraction" | "fractional" => Ok(Self::Fraction),
            "hard" | "hard_thresholding" => Ok(Self::Hard),
            _ => Err(Error::InvalidArgument(format!("unknown regularizer `{s}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DenoisingObjective {
    pub rows: usize,
    pub cols: usize,
    pub noisy: Vec<f64>,
    pub regularizer: Regularizer,
    pub lambda: f64,
    pub beta: f64,
}

impl Objective for DenoisingObjective {
    fn dimension(&self) -> usize {
        self.rows * self.cols
    }

    fn name(&self) -> &str {
        "denoising"
    }

    fn value(&self, x: &[f64]) -> f64 {
        let (nr, nc) = (self.rows, self.cols);
        let data: f64 = x.iter().zip(&self.noisy).map(|(a, b)| (a - b).powi(2)).sum();
        let mut reg = 0.0;
        for i in 0..nr.saturating_sub(1) {
            for j in 0..nc.saturating_sub(1) {
                let k = i * nc + j;
                reg += self.regularizer.value(x[k + nc] - x[k], self.beta);
                reg += self.regularizer.value(x[k + 1] - x[k], self.beta);
            }
        }
        data + self.lambda * reg
    }

    fn gradient(&self, x: &[f64], g: &mut [f64]) {
        let (nr, nc) = (self.rows, self.cols);
        for k in 0..x.len() {
            g[k] = 2.0 * (x[k] - self.noisy[k]);
        }
        for i in 0..nr.saturating_sub(1) {
            for j in 0..nc.saturating_sub(1) {
                let k = i * nc + j;
                let dv = self.lambda * self.regularizer.derivative(x[k + nc] - x[k], self.beta);
                let dh = self.lambda * self.regularizer.derivative(x[k + 1] - x[k], self.beta);
                g[k + nc] += dv;
                g[k] -= dv + dh;
                g[k + 1] += dh;
            }
        }
    }
}

/// Denoising instance started at the noisy image.
pub fn make_denoising(noisy: &GrayImage, regularizer: Regularizer, lambda: f64, beta: f64) -> Result<ProblemInstance> {
    if !(lambda > 0.0 && beta > 0.0) {
        return Err(Error::InvalidArgument(format!("need λ > 0 and β > 0, got λ = {lambda}, β = {beta}")));
    }
    let x0 = noisy.to_f64();
    Ok(ProblemInstance {
        name: format!("denoise_{}", regularizer.label()),
        n: x0.len(),
        x0: x0.clone(),
        f_star: None,
        oracle: Box::new(DenoisingObjective {
            rows: noisy.rows,
            cols: noisy.cols,
            noisy: x0,
            regularizer,
            lambda,
            beta,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{check_derivatives, CheckStatus};

    #[test]
    fn regularizers_vanish_at_zero() {
        for r in Regularizer::ALL {
            assert_eq!(r.value(0.0, 3.0), 0.0);
            assert_eq!(r.derivative(0.0, 3.0), 0.0);
        }
        assert_eq!(Regularizer::Hard.value(5.0, 2.0), 1.0);
        assert_eq!(Regularizer::Hard.value(-2.0, 2.0), 1.0);
    }

    #[test]
    fn constant_image_is_optimal() {
        let img = GrayImage::new(3, 4, vec![7; 12]).unwrap();
        for r in Regularizer::ALL {
            let p = make_denoising(&img, r, 2.0, 0.5).unwrap();
            assert_eq!(p.oracle.value(&p.x0), 0.0);
        }
    }

    #[test]
    fn mse_examples() {
        let a = GrayImage::new(1, 2, vec![1, 2]).unwrap();
        let b = GrayImage::new(1, 2, vec![2, 4]).unwrap();
        assert_eq!(mse(&a, &b), 5.0);
        assert_eq!(mse(&b, &a), 5.0);
        assert_eq!(mse(&a, &a), 0.0);
    }

    #[test]
    fn salt_pepper_densities() {
        let img = synthetic_image(20, 30);
        assert_eq!(add_salt_pepper(&img, 0.0, 1).unwrap(), img);
        assert!(add_salt_pepper(&img, 1.0, 1).unwrap().pixels.iter().all(|&p| p == 1 || p == 256));
        let big = GrayImage { rows: 1, cols: 100_000, pixels: vec![100; 100_000] };
        let noisy = add_salt_pepper(&big, 0.05, 7).unwrap();
        let frac = noisy.pixels.iter().filter(|&&p| p != 100).count() as f64 / 1e5;
        assert!((frac - 0.05).abs() <= 0.005, "{frac}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let img = add_salt_pepper(&synthetic_image(6, 7), 0.3, 2).unwrap();
        let mut rng = Rng::new(5);
        for r in Regularizer::ALL {
            let p = make_denoising(&img, r, 1.5, 0.7).unwrap();
            let x: Vec<f64> = p.x0.iter().map(|v| v + rng.normal()).collect();
            for c in check_derivatives(p.oracle.as_ref(), &x, 1e-6) {
                assert!(!matches!(c.status, CheckStatus::Mismatch { suspected_kink: false }), "{r:?} {c:?}");
            }
        }
    }

    #[test]
    fn rounding_clamps() {
        let im = GrayImage::from_values(1, 3, &[0.2, 300.0, 17.5]);
        assert_eq!(im.pixels, vec![1, 256, 18]);
    }
}
