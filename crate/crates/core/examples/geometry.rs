//! Sizes of the cone roots and the quantities `u_1`, `u_2` near the cone for
//! a few curves in R^4.

use curvelab::cone::size_relation_audit;
use curvelab::curve::{moment_curve, Curve, Perturbation, Shape};

fn main() -> curvelab::error::Result<()> {
    let curves = [
        ("moment", moment_curve(4)?),
        ("perturbed", Curve::perturbed_moment(4, vec![Perturbation::new(3, 0.1, Shape::Sine { omega: 1.0, phase: 0.3 })])?),
    ];
    for (name, g) in &curves {
        let a = size_relation_audit(g, 0.05, 2000, 7, false)?;
        println!(
            "{name:<10} accepted {:>5}/{:<5} root gap ratio [{:.3}, {:.3}]  u1 gap ratio [{:.3}, {:.3}]  u12 ratio max {:.3}  residual {:.1e}",
            a.accepted, a.attempts, a.root_gap.0, a.root_gap.1, a.u1_gap.0, a.u1_gap.1, a.u12_gap.1, a.max_residual
        );
    }
    Ok(())
}
