//! Spacing of the Wolff-type centres on the cone for n = 2, 3.

use curvelab::curve::moment_curve;
use curvelab::sharpness::separation_audit;

fn main() -> curvelab::error::Result<()> {
    for n in [2, 3] {
        let g = moment_curve(n)?;
        for k in [8, 12] {
            let lambda = 2f64.powi(k);
            match separation_audit(&g, lambda, 0.5) {
                Ok(r) => println!("n = {n} λ = 2^{k}: {} centres, {} pairs, min scaled gap {:.3}", r.indices, r.pairs, r.min_gap),
                Err(e) => println!("n = {n} λ = 2^{k}: {e}"),
            }
        }
    }
    Ok(())
}
