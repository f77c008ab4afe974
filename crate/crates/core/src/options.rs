//! Solver options and the `key = value` options-file format.
//!
//! Keys follow the option catalog of the reference software where one
//! exists (`BFGS_correction_threshold_1`, `PSP_envelope_factor`, ...).
//! Lines starting with `#` and blank lines are ignored.

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::quasi_newton::{Storage, UpdateFormula};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub enum Strategy {
    Gradient,
    GradientCombination,
    #[default]
    CuttingPlane,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Gradient, Strategy::GradientCombination, Strategy::CuttingPlane];

    /// Short label used in tables and CSV output.
    pub fn label(self) -> &'static str {
        match self {
            Strategy::Gradient => "G",
            Strategy::GradientCombination => "GC",
            Strategy::CuttingPlane => "CP",
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "g" | "gradient" => Ok(Strategy::Gradient),
            "gc" | "gradient_combination" | "gradient-combination" => Ok(Strategy::GradientCombination),
            "cp" | "cutting_plane" | "cutting-plane" => Ok(Strategy::CuttingPlane),
            _ => Err(Error::InvalidArgument(format!("unknown strategy `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LineSearchKind {
    #[default]
    WeakWolfe,
    Backtracking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpSolverKind {
    ActiveSet,
    InteriorPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TerminationKind {
    #[default]
    Basic,
    /// Additionally require a small minimum-norm element of the convex hull
    /// of nearby stored gradients.
    MinNorm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Sufficient decrease constant `c`.
    pub ls_decrease: f64,
    pub ls_curvature: f64,
    pub ls_initial: f64,
    pub ls_max_iter: usize,
    pub line_search: LineSearchKind,
    /// Damping bounds `η ≤ sᵀv/‖s‖²` and `‖v‖²/sᵀv ≤ ψ`.
    pub eta: f64,
    pub psi: f64,
    /// Samples per iteration; `None` picks `⌈n/10⌉` for gradient combination
    /// and 0 otherwise.
    pub samples: Option<usize>,
    pub delta_f: f64,
    pub n_f: usize,
    pub strategy: Strategy,
    pub qn_formula: UpdateFormula,
    pub qn_storage: Storage,
    pub history_limit: usize,
    pub envelope_factor: f64,
    pub size_factor: f64,
    pub qp_size_threshold: usize,
    pub qp_small: QpSolverKind,
    pub qp_large: QpSolverKind,
    pub qp_tolerance: f64,
    pub try_gradient_step: bool,
    pub downshift: f64,
    pub eps_min: f64,
    pub iteration_limit: usize,
    pub fd_increment: f64,
    pub termination: TerminationKind,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            ls_decrease: 1e-10,
            ls_curvature: 0.9,
            ls_initial: 1.0,
            ls_max_iter: 60,
            line_search: LineSearchKind::WeakWolfe,
            eta: 1e-8,
            psi: 1e8,
            samples: None,
            delta_f: 1e-5,
            n_f: 10,
            strategy: Strategy::CuttingPlane,
            qn_formula: UpdateFormula::Bfgs,
            qn_storage: Storage::Full,
            history_limit: 20,
            envelope_factor: 1e2,
            size_factor: 5e-2,
            qp_size_threshold: 25,
            qp_small: QpSolverKind::ActiveSet,
            qp_large: QpSolverKind::InteriorPoint,
            qp_tolerance: 1e-8,
            try_gradient_step: true,
            downshift: 1e-8,
            eps_min: 1e-5,
            iteration_limit: 100_000,
            fd_increment: 1e-8,
            termination: TerminationKind::Basic,
            seed: 0,
        }
    }
}

impl SolverOptions {
    /// Speed-mode stall settings `(Δf, n_f) = (1e-5, 10)`.
    pub fn speed() -> Self {
        Self::default()
    }

    /// Accuracy-mode stall settings `(Δf, n_f) = (1e-8, 20)`.
    pub fn accuracy() -> Self {
        Self { delta_f: 1e-8, n_f: 20, ..Self::default() }
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    /// Samples drawn per iteration for dimension `n`.
    pub fn sample_count(&self, n: usize) -> usize {
        match (self.samples, self.strategy) {
            (Some(p), _) => p,
            (None, Strategy::GradientCombination) => n.div_ceil(10),
            (None, _) => 0,
        }
    }

    /// Point-set cardinality limit `max{10, ⌈size_factor·n⌉}`.
    pub fn point_set_limit(&self, n: usize) -> usize {
        10usize.max((self.size_factor * n as f64).ceil() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: &str| {
            Err(Error::InvalidOption { key: key.to_string(), reason: reason.to_string() })
        };
        if !(self.ls_decrease > 0.0 && self.ls_decrease < 1.0) {
            return bad("LSWW_stepsize_sufficient_decrease_threshold", "must lie in (0, 1)");
        }
        if !(self.ls_curvature > self.ls_decrease && self.ls_curvature < 1.0) {
            return bad("LSWW_stepsize_curvature_threshold", "must lie in (c, 1)");
        }
        if !(self.ls_initial > 0.0) {
            return bad("LSWW_stepsize_initial", "must be positive");
        }
        if !(self.eta > 0.0) {
            return bad("BFGS_correction_threshold_1", "must be positive");
        }
        if !(self.psi >= self.eta) {
            return bad("BFGS_correction_threshold_2", "must be at least threshold_1");
        }
        if self.history_limit == 0 {
            return bad("SMLM_history", "must be positive");
        }
        if !(self.envelope_factor > 0.0) {
            return bad("PSP_envelope_factor", "must be positive");
        }
        if !(self.size_factor > 0.0) {
            return bad("PSP_size_factor", "must be positive");
        }
        if !(self.delta_f >= 0.0) {
            return bad("TB_objective_similarity_tolerance", "must be nonnegative");
        }
        if self.n_f == 0 {
            return bad("TB_objective_similarity_limit", "must be positive");
        }
        if !(self.eps_min > 0.0) {
            return bad("stationarity_radius_min", "must be positive");
        }
        if !(self.fd_increment > 0.0) {
            return bad("DEFD_increment", "must be positive");
        }
        if !(self.qp_tolerance > 0.0) {
            return bad("qp_tolerance", "must be positive");
        }
        Ok(())
    }

    /// Sets one option by name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let invalid = |reason: String| Error::InvalidOption { key: key.to_string(), reason };
        let real = || value.parse::<f64>().map_err(|e| invalid(e.to_string()));
        let int = || value.parse::<usize>().map_err(|e| invalid(e.to_string()));
        let flag = || match value.to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => Err(invalid(format!("expected a boolean, got `{value}`"))),
        };
        let qp = || match value.to_ascii_lowercase().as_str() {
            "active_set" | "das" | "dual_active_set" => Ok(QpSolverKind::ActiveSet),
            "interior_point" | "ipm" => Ok(QpSolverKind::InteriorPoint),
            _ => Err(invalid(format!("unknown QP solver `{value}`"))),
        };
        match key {
            "BFGS_correction_threshold_1" | "DFP_correction_threshold_1" => self.eta = real()?,
            "BFGS_correction_threshold_2" | "DFP_correction_threshold_2" => self.psi = real()?,
            "DEFD_increment" => self.fd_increment = real()?,
            "DCGC_try_gradient_step" | "DCCP_try_gradient_step" => self.try_gradient_step = flag()?,
            "LSWW_stepsize_initial" | "LSB_stepsize_initial" => self.ls_initial = real()?,
            "LSWW_stepsize_sufficient_decrease_threshold" | "LSB_stepsize_sufficient_decrease_threshold" => {
                self.ls_decrease = real()?
            }
            "LSWW_stepsize_curvature_threshold" => self.ls_curvature = real()?,
            "line_search_iteration_limit" => self.ls_max_iter = int()?,
            "PSP_envelope_factor" => self.envelope_factor = real()?,
            "PSP_size_factor" => self.size_factor = real()?,
            "SMLM_history" => self.history_limit = int()?,
            "TB_objective_similarity_tolerance" | "TS_objective_similarity_tolerance" => {
                self.delta_f = real()?
            }
            "TB_objective_similarity_limit" => self.n_f = int()?,
            "qp_size_threshold" => self.qp_size_threshold = int()?,
            "qp_solver_small_scale" => self.qp_small = qp()?,
            "qp_solver_large_scale" => self.qp_large = qp()?,
            "qp_tolerance" => self.qp_tolerance = real()?,
            "downshift_constant" => self.downshift = real()?,
            "stationarity_radius_min" => self.eps_min = real()?,
            "iteration_limit" => self.iteration_limit = int()?,
            "sample_count" => self.samples = Some(int()?),
            "seed" => self.seed = value.parse::<u64>().map_err(|e| invalid(e.to_string()))?,
            "direction_computation" => self.strategy = value.parse().map_err(|_| invalid(format!("unknown strategy `{value}`")))?,
            "approximate_hessian_update" => {
                self.qn_formula = match value.to_ascii_uppercase().as_str() {
                    "BFGS" => UpdateFormula::Bfgs,
                    "DFP" => UpdateFormula::Dfp,
                    _ => return Err(invalid(format!("expected BFGS or DFP, got `{value}`"))),
                }
            }
            "symmetric_matrix" => {
                self.qn_storage = match value.to_ascii_lowercase().as_str() {
                    "dense" | "full" => Storage::Full,
                    "limited_memory" | "limited" => Storage::Limited,
                    _ => return Err(invalid(format!("expected dense or limited_memory, got `{value}`"))),
                }
            }
            "line_search" => {
                self.line_search = match value.to_ascii_lowercase().as_str() {
                    "weak_wolfe" => LineSearchKind::WeakWolfe,
                    "backtracking" => LineSearchKind::Backtracking,
                    _ => return Err(invalid(format!("expected weak_wolfe or backtracking, got `{value}`"))),
                }
            }
            "termination" => {
                self.termination = match value.to_ascii_lowercase().as_str() {
                    "basic" => TerminationKind::Basic,
                    "min_norm" => TerminationKind::MinNorm,
                    _ => return Err(invalid(format!("expected basic or min_norm, got `{value}`"))),
                }
            }
            _ => return Err(invalid("unknown option".to_string())),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::InvalidOption {
                    key: line.to_string(),
                    reason: format!("line {} is not of the form `key = value`", lineno + 1),
                });
            };
            self.set(key.trim(), value.trim())?;
        }
        self.validate()
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.apply_str(&text)
    }
}
