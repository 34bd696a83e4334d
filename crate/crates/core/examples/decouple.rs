//! Empirical decoupling ratios for Frenet boxes around the moment curve in R^3.

use curvelab::curve::moment_curve;
use curvelab::grid::{GridSpec, DEFAULT_BUDGET};
use curvelab::plates::{decoupling_sweep, frenet_box_family, TrialSpec};

fn main() -> curvelab::error::Result<()> {
    let gamma = moment_curve(3)?;
    let grid = GridSpec::torus(3, 64)?;
    let scales: Vec<f64> = (1..=4).map(|l| 0.5f64.powi(l)).collect();
    let trials = TrialSpec { gaussian: 8, ..Default::default() };
    let sweep = decoupling_sweep(&scales, |r| frenet_box_family(&gamma, 2, r, (-0.5, 0.5)), &[2.0, 6.0], grid, &trials, DEFAULT_BUDGET)?;
    for (r, est) in sweep.scales.iter().zip(&sweep.estimates) {
        for s in &est.summary {
            println!(
                "r = {r:<7} p = {} boxes = {:>2}  max l2 ratio {:.3}  max lp ratio {:.3}  trivial {:.3}",
                s.p, est.regions, s.max_l2, s.max_lp, s.trivial_bound
            );
        }
    }
    for f in &sweep.fits {
        println!("p = {}: growth exponent {:.3} (median {:.3})", f.p, f.max_l2.slope, f.median_l2.slope);
    }
    Ok(())
}
