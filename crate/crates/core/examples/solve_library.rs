//! Runs all three direction strategies on a library problem.
//!
//! ```bash
//! cargo run --release --example solve_library -- ChainedCB3_2 200
//! ```

use lipmin::problems::library::make_problem;
use lipmin::{minimize, SolverOptions, Strategy};

fn main() -> lipmin::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "ChainedLQ".to_string());
    let n: usize = args.next().map(|s| s.parse().expect("n must be an integer")).unwrap_or(100);

    let p = make_problem(&name, n)?;
    println!("{} n={} f*={:?}", p.name, p.n, p.f_star);
    for s in Strategy::ALL {
        let r = minimize(p.oracle.as_ref(), &p.x0, &SolverOptions::accuracy().with_strategy(s))?;
        println!(
            "{:>3}  f={:+.8e}  iters={:<5} evals={:<6} {:.3}s  {}",
            s.label(),
            r.final_f,
            r.iterations,
            r.function_evaluations,
            r.cpu_seconds,
            r.termination_reason.label()
        );
    }
    Ok(())
}
