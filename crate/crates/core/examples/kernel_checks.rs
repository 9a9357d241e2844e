//! Gaussian transition kernel: density values, Chapman-Kolmogorov and the
//! two-sided bounds, for a time-dependent diffusion in 2-d.

use mfk::kernel::{KernelModel, TimeMatrix, TimeVector};
use nalgebra::{DMatrix, DVector};

fn main() -> mfk::Result<()> {
    let diffusion =
        TimeMatrix::varying(|t| DMatrix::from_row_slice(2, 2, &[1.0 + 0.5 * t, 0.2, 0.2, 0.8]));
    let drift = TimeVector::varying(|t| DVector::from_vec(vec![0.3 * t, -0.1]));
    let kernel = KernelModel::new(2, 1.0, diffusion, drift)?;
    let bounds = kernel.derive_bound_constants(0.25)?;
    let kernel = kernel.with_bound_constants(bounds);

    println!(
        "ellipticity {:.4}, C = {:.4}, c_u = {:.4}",
        kernel.ellipticity(),
        bounds.big_c,
        bounds.c_u
    );
    println!(
        "p(0.1, 0; 0.6, (0.3,0.1)) = {:.6}",
        kernel.eval_p(0.1, &[0.0, 0.0], 0.6, &[0.3, 0.1])?
    );

    let mut worst_ck: f64 = 0.0;
    for (s, t, r) in [(0.0, 0.3, 0.9), (0.1, 0.5, 1.0), (0.2, 0.25, 0.3)] {
        worst_ck = worst_ck.max(kernel.chapman_kolmogorov_residual(
            s,
            t,
            r,
            &[0.1, -0.2],
            &[0.4, 0.3],
            161,
        )?);
    }
    println!("worst Chapman-Kolmogorov residual {worst_ck:.2e}");

    let check = kernel.verify_bounds(10_000, 1);
    println!(
        "bound ratios over 1e4 samples: density {:.3}, gradient {:.3} (hold: {})",
        check.worst_ratio_p,
        check.worst_ratio_grad,
        check.holds()
    );
    Ok(())
}
