//! Largest observed `‖A_k f‖_4 / ‖f‖_4` per dyadic band for the parabola on
//! a periodic grid, and the fitted decay in `k`. First argument: grid size
//! (default 512).

use curvelab::curve::moment_curve;
use curvelab::cutoff::SmoothCutoff;
use curvelab::grid::{budget_from_env, probe_sweep, GridSpec, ProbeSpec};

fn main() -> curvelab::error::Result<()> {
    let side: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(512);
    let grid = GridSpec::torus(2, side)?;
    let top = (grid.nyquist() / 4.0).log2().floor() as u32;
    let ks: Vec<u32> = (3..=top).collect();
    let g = moment_curve(2)?;
    let sweep = probe_sweep(&g, &SmoothCutoff::bump(0.25), grid, &ks, 4.0, &ProbeSpec::default(), budget_from_env()?)?;
    for r in &sweep.reports {
        println!("k = {:<2} max ratio {:.4}  by family {:?}", r.k, r.max_ratio, r.family_max);
    }
    if let Some(f) = &sweep.fit {
        println!("log2 slope {:.3} ± {:.3}", f.slope, f.slope_stderr);
    }
    Ok(())
}
