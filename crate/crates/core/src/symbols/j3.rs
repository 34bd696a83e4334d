//! Decomposition near the cone where `<γ', ξ>` and `<γ'', ξ>` vanish
//! together while `<γ''', ξ>` stays away from zero.

use super::audit::{AuditTarget, BoxCheck, ChartSampler, Family, SRange};
use super::{pow2, require_dim4, Factor, FrenetBox, PieceIndex, Quantity, Shape, Symbol, SymbolTree};
use crate::curve::Curve;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct J3Config {
    /// `θ` is localised by `η(θ / theta_window)`.
    pub theta_window: f64,
    /// `<γ'''(0), ξ>/|ξ|` ramps from 0 at `third_floor` to 1 at `third_full`.
    pub third_floor: f64,
    pub third_full: f64,
    /// `|u| <= 2 u_cap |ξ|` on the base symbol.
    pub u_cap: f64,
    /// `χ(s) = η(s / chi_width)`.
    pub chi_width: f64,
    pub rho: f64,
    pub eps: f64,
}

impl Default for J3Config {
    fn default() -> Self {
        Self { theta_window: 0.1, third_floor: 0.75, third_full: 0.9, u_cap: 0.05, chi_width: 0.1, rho: 0.05, eps: 0.1 }
    }
}

pub fn base_symbol_j3(cfg: &J3Config) -> Symbol {
    Symbol::new(
        "a",
        PieceIndex { j: 3, ..Default::default() },
        vec![
            Factor::new(Quantity::S, 1.0 / cfg.chi_width, Shape::Eta),
            Factor::new(Quantity::ThirdAtZero, 1.0, Shape::Step { from: cfg.third_floor, to: cfg.third_full }),
            Factor::new(Quantity::J3Theta, 1.0 / cfg.theta_window, Shape::Eta),
            Factor::new(Quantity::J3URel, 1.0 / cfg.u_cap, Shape::Eta),
        ],
    )
}

/// Integers `μ` with `(μ - 1, μ + 1)` meeting `(scale lo, scale hi)`.
pub(crate) fn angular_range(scale: f64, lo: f64, hi: f64) -> std::ops::RangeInclusive<i64> {
    let a = (scale * lo - 1.0).floor() as i64 + 1;
    let b = (scale * hi + 1.0).ceil() as i64 - 1;
    a..=b
}

/// `a_k = a β^k(|ξ|)`, split into `a_{k,ℓ}` by the size of `u` and then into
/// `a^μ_{k,ℓ}` by `θ` at scale `2^{-ℓ}`; each angular piece carries its
/// `(ε)`-variant localised in `s` near `s_μ = 2^{-ℓ} μ`.
pub fn decompose_j3(curve: &Curve, base: &Symbol, k: u32, cfg: &J3Config) -> Result<SymbolTree> {
    require_dim4(curve)?;
    if base.index.j != 3 {
        return Err(Error::InvalidParameter(format!("base symbol is tagged J = {}", base.index.j)));
    }
    let idx = |ell: Option<u32>, mu: Option<i64>, eps: bool| PieceIndex { j: 3, k, ell, mu, eps, ..Default::default() };
    let mut ak_factors = vec![Factor::new(Quantity::Norm, 1.0, Shape::LittlewoodPaley { k })];
    ak_factors.extend_from_slice(&base.factors);
    let ak = Symbol::new(format!("a(k={k})"), idx(None, None, false), ak_factors);
    if k == 0 {
        return Ok(SymbolTree::leaf(ak));
    }
    let big_l = k / 3;
    let kf = k as f64;
    let norm_max = pow2(kf + 1.0);
    let theta_max = 2.0 * cfg.theta_window;
    let chi = 2.0 * cfg.chi_width;
    let mut level = Vec::new();
    for ell in 0..=big_l {
        let lf = ell as f64;
        let shape = if ell < big_l { Shape::EtaDiff { ratio: 4.0 } } else { Shape::Eta };
        let akl = ak.refine(
            format!("a(k={k},l={ell})"),
            idx(Some(ell), None, false),
            &[Factor::new(Quantity::J3U, pow2(-kf + 2.0 * lf), shape)],
        );
        let scale = pow2(lf);
        let r = pow2(-lf);
        let u_max = (2.0 * pow2(kf - 2.0 * lf)).min(2.0 * cfg.u_cap * norm_max);
        let mut kids = Vec::new();
        for mu in angular_range(scale, -theta_max, theta_max) {
            let s_mu = mu as f64 * r;
            let piece = akl.refine(
                format!("a(k={k},l={ell},mu={mu})"),
                idx(Some(ell), Some(mu), false),
                &[Factor::new(Quantity::J3Theta, scale, Shape::Zeta).shifted(mu as f64)],
            );
            let sc = cfg.rho * pow2(lf * (1.0 - cfg.eps));
            let variant = piece.refine(
                format!("a(k={k},l={ell},mu={mu},eps)"),
                idx(Some(ell), Some(mu), true),
                &[Factor::new(Quantity::S, sc, Shape::Eta).shifted(sc * s_mu)],
            );
            let sampler = ChartSampler {
                root_order: 2,
                t: ((s_mu - r).max(-theta_max), (s_mu + r).min(theta_max)),
                v: [Some((-u_max, u_max)), None, None, None],
                norm_max,
                s: SRange::Fixed(-chi, chi),
            };
            let fbox = FrenetBox::new(curve, 2, s_mu, r)?.dilated(pow2(kf));
            let mut node = SymbolTree::leaf(piece.clone());
            node.variants.push(variant);
            node.audit = Some(AuditTarget {
                symbol: piece,
                sampler,
                checks: vec![BoxCheck { family: Family::J3Angular, fbox, transform: None }],
            });
            kids.push(node);
        }
        level.push(SymbolTree::with_children(akl, kids));
    }
    Ok(SymbolTree::with_children(ak, level))
}

#[cfg(test)]
mod tests {
    use super::super::{reconstruction_audit, support_audit, Point};
    use super::*;
    use crate::curve::moment_curve;

    #[test]
    fn reconstruction_and_support() {
        let g = moment_curve(4).unwrap();
        let cfg = J3Config::default();
        let base = base_symbol_j3(&cfg);
        let tree = decompose_j3(&g, &base, 12, &cfg).unwrap();
        let rep = reconstruction_audit(&g, &tree, 300, 1).unwrap();
        assert!(rep.points > 250, "{rep:?}");
        assert!(rep.max_defect <= 1e-12 && rep.max_leaf_defect <= 1e-12, "{rep:?}");
        assert!(rep.max_root_value > 0.5, "{rep:?}");
        let sup = support_audit(&g, &tree.audit_targets(), 60, 2).unwrap();
        let c = sup.by_family[&Family::J3Angular];
        assert!(c <= 8.0, "{c}");
    }

    #[test]
    fn last_level_uses_a_bump() {
        let g = moment_curve(4).unwrap();
        let cfg = J3Config::default();
        let k = 9;
        let tree = decompose_j3(&g, &base_symbol_j3(&cfg), k, &cfg).unwrap();
        let last = tree.find(&format!("a(k={k},l={})", k / 3)).unwrap();
        let bound = 2.0 * 2f64.powi(k as i32 - 2 * (k as i32 / 3));
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(4);
        let mut seen = 0;
        for leaf in &last.children {
            let t = leaf.audit.as_ref().unwrap();
            let (pts, _) = super::super::sample_piece(&g, &t.symbol, &t.sampler, 20, 20000, &mut rng).unwrap();
            for (xi, s) in pts {
                let p = Point::new(&g, &xi, s);
                assert!(p.get(Quantity::J3U).unwrap().abs() <= bound);
                seen += 1;
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn k_zero_is_passthrough() {
        let g = moment_curve(4).unwrap();
        let cfg = J3Config::default();
        let tree = decompose_j3(&g, &base_symbol_j3(&cfg), 0, &cfg).unwrap();
        assert!(tree.children.is_empty());
    }
}
