//! Checks the rescaling identity for the cone tuple of the moment curve in
//! R^3 at a handful of parameters.

use curvelab::curve::moment_curve;
use curvelab::plates::{cone_tuple_from_curve, lorentz_identity_check, TupleOptions};

fn main() -> curvelab::error::Result<()> {
    let g = moment_curve(3)?;
    let tuple = cone_tuple_from_curve(&g, 2, &TupleOptions::default())?;
    for (b, rho, s, r) in [(0.0, 1.0, 0.2, 0.5), (0.3, 0.25, -0.1, 0.1), (-0.4, 0.05, 0.45, 0.01)] {
        let res = lorentz_identity_check(&tuple, &[1.0], b, rho, s, r)?;
        println!("b = {b:>5} ρ = {rho:<5} s = {s:>5} r = {r:<5} matrix residual {:.2e}, offset residual {:.2e}", res.matrix, res.offset);
    }
    Ok(())
}
