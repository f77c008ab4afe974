//! Compares dense and limited-memory quasi-Newton storage on a large
//! problem.

use lipmin::problems::library::make_problem;
use lipmin::quasi_newton::{Storage, UpdateFormula};
use lipmin::{minimize, SolverOptions};

fn main() -> lipmin::Result<()> {
    let p = make_problem("ChainedCrescent_1", 1000)?;
    for formula in [UpdateFormula::Bfgs, UpdateFormula::Dfp] {
        for (storage, history_limit) in [(Storage::Full, 20), (Storage::Limited, 5), (Storage::Limited, 20)] {
            let opts = SolverOptions { qn_formula: formula, qn_storage: storage, history_limit, ..SolverOptions::speed() };
            let r = minimize(p.oracle.as_ref(), &p.x0, &opts)?;
            println!(
                "{formula:?} {storage:?}({history_limit:>2})  f={:+.6e}  iters={:<4} evals={:<5} {:.2}s",
                r.final_f, r.iterations, r.function_evaluations, r.cpu_seconds
            );
        }
    }
    Ok(())
}
