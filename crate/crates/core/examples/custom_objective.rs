//! Minimizes a user-supplied nonconvex, nonsmooth function.
//!
//! f(x) = Σ |x_i² - 1| + 0.1 Σ |x_i - x_{i+1}|, minimized at any x with
//! x_i = ±1 of equal sign.

use lipmin::oracle::FnObjective;
use lipmin::{minimize, SolverOptions};

fn main() -> lipmin::Result<()> {
    let n = 8;
    let f = |x: &[f64]| {
        let a: f64 = x.iter().map(|v| (v * v - 1.0).abs()).sum();
        let b: f64 = x.windows(2).map(|w| (w[0] - w[1]).abs()).sum();
        a + 0.1 * b
    };
    let g = |x: &[f64], g: &mut [f64]| {
        for (gi, v) in g.iter_mut().zip(x) {
            *gi = 2.0 * v * (v * v - 1.0).signum();
        }
        for i in 0..x.len() - 1 {
            let s = 0.1 * (x[i] - x[i + 1]).signum();
            g[i] += s;
            g[i + 1] -= s;
        }
    };
    let objective = FnObjective::new(n, f, g);
    let x0: Vec<f64> = (0..n).map(|i| 0.3 + 0.2 * i as f64).collect();

    let r = minimize(&objective, &x0, &SolverOptions::accuracy())?;
    println!("f = {:.3e} after {} iterations ({})", r.final_f, r.iterations, r.termination_reason.label());
    println!("x = {:?}", r.final_x.iter().map(|v| (v * 1e6).round() / 1e6).collect::<Vec<_>>());
    Ok(())
}
