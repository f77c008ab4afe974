//! Solves one generated direction subproblem with both QP solvers and
//! compares the recovered direction with the known solution.

use lipmin::linalg::norm_inf;
use lipmin::problems::qp_gen::{generate_qp, DCase};
use lipmin::qp_das::{solve_das, DasOptions};
use lipmin::qp_ipm::{solve_ipm, IpmOptions};
use lipmin::{direction::QpOperator, quasi_newton::IdentityMetric};

fn main() -> lipmin::Result<()> {
    let (n, m) = (50, 100);
    for case in DCase::ALL {
        let qp = generate_qp(n, m, case, 7)?;
        let metric = IdentityMetric(n);
        let data = qp.subproblem(&metric)?;
        let op = QpOperator::new(&data);

        let das = solve_das(&op, &DasOptions::default(), None)?;
        let ipm = solve_ipm(&op, &IpmOptions::default())?;
        let err = |w: &[f64]| norm_inf(&w.iter().zip(&qp.d_star).map(|(w, d)| -w - d).collect::<Vec<_>>());
        let w_ipm = op.w_combine(&ipm.theta_full());
        println!(
            "d*={:<4}  DAS: {:>3} iters, kkt {:.1e}, |d-d*| {:.1e}   IPM: {:>3} iters{}, kkt {:.1e}, |d-d*| {:.1e}",
            case.label(),
            das.iterations,
            das.kkt_residual,
            err(&das.w),
            ipm.iterations,
            if ipm.shortcut { " (ω only)" } else { "" },
            ipm.kkt_residual,
            err(&w_ipm)
        );
    }
    Ok(())
}
