//! Compares analytic partial derivatives with finite differences, flagging
//! coordinates that sit on a kink.

use lipmin::oracle::{check_derivatives, CheckStatus};
use lipmin::problems::library::make_problem;

fn main() -> lipmin::Result<()> {
    let p = make_problem("ChainedMifflin_2", 6)?;
    let x: Vec<f64> = p.x0.iter().enumerate().map(|(i, v)| v + 0.1 * i as f64).collect();
    for c in check_derivatives(p.oracle.as_ref(), &x, 1e-7) {
        let status = match c.status {
            CheckStatus::Pass => "ok",
            CheckStatus::Mismatch { suspected_kink: true } => "kink",
            CheckStatus::Mismatch { suspected_kink: false } => "MISMATCH",
            CheckStatus::Untestable => "untestable",
        };
        println!("x[{}]  analytic {:+.8e}  fd {:+.8e}  {status}", c.coordinate, c.analytic, c.finite_difference);
    }

    // on the unit circle the two pieces of the max meet
    let lq = make_problem("ChainedLQ", 2)?;
    for c in check_derivatives(lq.oracle.as_ref(), &[1.0, 0.0], 1e-7) {
        println!("ChainedLQ x[{}] at (1, 0): {:?}", c.coordinate, c.status);
    }
    Ok(())
}
