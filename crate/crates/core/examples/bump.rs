//! Norm scaling of a single-frequency bump and the decay of `‖Af‖_p/‖f‖_p`.
//! Pass the grid size as the first argument (default 512).

use curvelab::curve::moment_curve;
use curvelab::cutoff::SmoothCutoff;
use curvelab::grid::{budget_from_env, GridSpec};
use curvelab::sharpness::{bump_sweep, BumpOptions};

fn main() -> curvelab::error::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(512);
    let grid = GridSpec::torus(2, n)?;
    let top = (grid.nyquist() / 4.0).log2().floor() as i32;
    let lambdas: Vec<f64> = (4..=top).map(|k| 2f64.powi(k)).collect();
    let gamma = moment_curve(2)?;
    let sweep = bump_sweep(&gamma, &SmoothCutoff::bump(0.25), grid, &lambdas, &[1.5], &BumpOptions::default(), budget_from_env()?)?;
    for r in &sweep.reports {
        let b = &r.norms[0];
        println!("λ = {:<6} ‖f‖ = {:.4e}  ‖Af‖ = {:.4e}  ratio = {:.4e}  min λ|Af| near curve = {:.3}", r.lambda, b.f_norm, b.af_norm, b.ratio, r.nbhd_min);
    }
    for f in &sweep.fits {
        println!("p = {}: norm slope {:.4} (expect {:.4}), ratio slope {:.4} (expect {:.4})", f.p, f.norm_slope.slope, -2.0 / f.p, f.ratio_slope.slope, -(1.0 - 1.0 / f.p));
    }
    Ok(())
}
