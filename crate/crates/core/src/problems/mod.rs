//! Test problems: the scalable library, generated QPs and image denoising.

pub mod denoise;
pub mod library;
pub mod pgm;
pub mod qp_gen;

use crate::oracle::Objective;

pub struct ProblemInstance {
    pub name: String,
    pub n: usize,
    pub x0: Vec<f64>,
    pub oracle: Box<dyn Objective>,
    /// Optimal value, where known.
    pub f_star: Option<f64>,
}

impl std::fmt::Debug for ProblemInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemInstance").field("name", &self.name).field("n", &self.n).field("f_star", &self.f_star).finish()
    }
}
