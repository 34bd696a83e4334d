//! Randomised sums of frequency balls on the worst decay cone of the parabola.
//! Pass the grid size as the first argument (default 1024).

use curvelab::curve::moment_curve;
use curvelab::grid::{budget_from_env, GridSpec};
use curvelab::sharpness::{wolff_example, WolffOptions};

fn main() -> curvelab::error::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1024);
    let rho: f64 = std::env::args().nth(2).and_then(|a| a.parse().ok()).unwrap_or(0.4);
    let grid = GridSpec::torus(2, n)?;
    let top = (grid.nyquist() / 2.0).log2().floor() as i32;
    let lambdas: Vec<f64> = (6..=top).map(|k| 2f64.powi(k)).collect();
    let opts = WolffOptions { eps: 1.0, rho, ..Default::default() };
    let sweep = wolff_example(&moment_curve(2)?, &lambdas, 6.0, &opts, grid, budget_from_env()?)?;
    for s in &sweep.stats {
        println!("λ = {:<6} balls = {:>3}  (E‖g‖^6)^(1/6) = {:.4e} ± {:.1e}", s.lambda, s.balls, s.moment, s.moment_stderr);
    }
    println!("exponent {:.4} ± {:.4} (target {:.4})", sweep.fit.slope, sweep.fit.slope_stderr, sweep.target);
    Ok(())
}
