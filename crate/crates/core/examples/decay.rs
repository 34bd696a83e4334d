//! `|μ̂(λ e_n)|` for the moment curve in R^4 and the fitted decay slope,
//! next to the model integral and its stationary-phase leading term.

use curvelab::curve::moment_curve;
use curvelab::cutoff::SmoothCutoff;
use curvelab::oscillatory::{decay_exponent_fit, geometric_grid, model_integral, QuadOptions};

fn main() -> curvelab::error::Result<()> {
    let n = 4;
    let gamma = moment_curve(n)?;
    let fit = decay_exponent_fit(&gamma, &SmoothCutoff::bump(0.5), &[0.0, 0.0, 0.0, 1.0], &geometric_grid(8.0, 16.0, 1.0), 1e-10)?;
    for (l, v) in &fit.samples {
        println!("λ = {l:<8} |μ̂| = {v:.6e}");
    }
    println!("slope {:.4} ± {:.4} (expect {:.4})", fit.slope, fit.stderr, -1.0 / n as f64);
    let m = model_integral(n, 2f64.powi(16), &SmoothCutoff::eta(), &[], &[], &QuadOptions::default())?;
    println!("model integral {:.6e}, leading term {:.6e}, relative gap {:.3e}", m.value, m.leading, (m.value - m.leading).norm() / m.leading.norm());
    Ok(())
}
