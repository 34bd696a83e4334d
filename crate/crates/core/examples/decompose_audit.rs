//! Builds the symbol trees near the cone in R^4 and audits reconstruction
//! and the support constants of every family.

use curvelab::curve::moment_curve;
use curvelab::symbols::{base_symbol_j3, base_symbol_j4, decompose_j3, decompose_j4, reconstruction_audit, support_audit, J3Config, J4Config};

fn main() -> curvelab::error::Result<()> {
    let g = moment_curve(4)?;
    let k = 9;
    let c3 = J3Config::default();
    let c4 = J4Config::default();
    let trees = [("J = 3", decompose_j3(&g, &base_symbol_j3(&c3), k, &c3)?), ("J = 4", decompose_j4(&g, &base_symbol_j4(&c4), k, &c4)?)];
    for (name, tree) in &trees {
        let rec = reconstruction_audit(&g, tree, 200, 1)?;
        println!("{name}, k = {k}: {} points, reconstruction defect {:.2e}, leaf defect {:.2e}", rec.points, rec.max_defect, rec.max_leaf_defect);
        let sup = support_audit(&g, &tree.audit_targets(), 20, 2)?;
        for (fam, c) in &sup.by_family {
            println!("    {fam:?}: constant {c:.3}");
        }
    }
    Ok(())
}
