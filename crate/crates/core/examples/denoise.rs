//! Removes salt-and-pepper noise from a synthetic image with the four
//! regularizers and writes the results as PGM files.
//!
//! ```bash
//! cargo run --release --example denoise -- /tmp/denoised
//! ```

use std::path::PathBuf;

use lipmin::cli::denoise_options;
use lipmin::problems::denoise::{add_salt_pepper, make_denoising, mse, synthetic_image, GrayImage, Regularizer};
use lipmin::minimize;
use lipmin::problems::pgm::write_pgm;

fn main() -> lipmin::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "denoised".to_string()));
    std::fs::create_dir_all(&dir)?;

    let clean = synthetic_image(32, 32);
    let noisy = add_salt_pepper(&clean, 0.05, 1)?;
    write_pgm(&dir.join("noisy.pgm"), &noisy, true)?;
    println!("noisy   mse {:.0}", mse(&noisy, &clean));

    for reg in Regularizer::ALL {
        let (lambda, beta) = reg.tuned();
        let p = make_denoising(&noisy, reg, lambda, beta)?;
        let r = minimize(p.oracle.as_ref(), &p.x0, &denoise_options())?;
        let out = GrayImage::from_values(noisy.rows, noisy.cols, &r.final_x);
        write_pgm(&dir.join(format!("{}.pgm", reg.label())), &out, true)?;
        println!("{:<7} mse {:.0}  ({} iterations, {:.2}s)", reg.label(), mse(&out, &clean), r.iterations, r.cpu_seconds);
    }
    Ok(())
}
