//! Minimization of locally Lipschitz objectives that may be nonconvex and
//! nonsmooth.
//!
//! The driver ([`solver::minimize`]) builds a piecewise-quadratic model from
//! a set of stored points, solves a small dual QP for the search direction,
//! runs a line search and updates a damped quasi-Newton matrix. Three
//! direction strategies are available: plain gradient, gradient combination
//! (gradient sampling) and cutting planes (proximal bundle). The QP is
//! solved either by a dual active-set method or by a predictor-corrector
//! interior-point method.
//!
//! ```
//! use lipmin::{minimize, problems::library::make_problem, SolverOptions};
//!
//! let p = make_problem("MaxQ", 10).unwrap();
//! let report = minimize(p.oracle.as_ref(), &p.x0, &SolverOptions::default()).unwrap();
//! assert!(report.final_f < 1e-3);
//! ```

pub mod cli;
pub mod control;
pub mod direction;
pub mod error;
pub mod line_search;
pub mod linalg;
pub mod options;
pub mod oracle;
pub mod point_set;
pub mod problems;
pub mod qp_das;
pub mod qp_ipm;
pub mod quasi_newton;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
pub use options::{SolverOptions, Strategy};
pub use oracle::Objective;
pub use solver::{minimize, SolverReport, TerminationReason};
