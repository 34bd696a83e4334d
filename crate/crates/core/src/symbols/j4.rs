//! Decomposition near the codimension-two cone where `<γ^(j), ξ>`,
//! `j = 1, 2, 3`, vanish together: a two-parameter split in
//! `(2^{-k} u_{1,2}, ρ^{-1} 2^{-k} u_2)`, a split in `u_1` and in
//! `s - θ_1`, then angular splits in `θ_2` and `θ_1`.

use super::audit::{sample_piece, AuditTarget, BoxCheck, ChartSampler, Family, SRange};
use super::j3::angular_range;
use super::{pow2, require_dim4, Factor, FrenetBox, PieceIndex, Point, Quantity, Shape, Symbol, SymbolTree};
use crate::curve::Curve;
use crate::cutoff::eta;
use crate::error::{Error, Result};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct J4Config {
    /// `θ_2` is localised by `η(θ_2 / theta_window)`.
    pub theta_window: f64,
    /// `χ(s) = η(s / chi_width)`.
    pub chi_width: f64,
    /// `|u_{1,2}| <= 2 u12_cap |ξ|` on the base symbol.
    pub u12_cap: f64,
    /// `|u_2| <= 2 u2_cap ρ |ξ|` on the base symbol.
    pub u2_cap: f64,
    /// `ξ_4/|ξ|` ramps from 0 at `last_from` to 1 at `last_to`.
    pub last_from: f64,
    pub last_to: f64,
    /// Restrict the base symbol to `ξ_4 > 0`. With `false` the base symbol
    /// is even in `ξ_4` and evaluation on `ξ_4 <= 0` is refused.
    pub half_space: bool,
    pub rho: f64,
    pub eps: f64,
}

impl Default for J4Config {
    fn default() -> Self {
        Self {
            theta_window: 0.1,
            chi_width: 0.1,
            u12_cap: 0.25,
            u2_cap: 0.25,
            last_from: 0.5,
            last_to: 0.75,
            half_space: true,
            rho: 0.05,
            eps: 0.1,
        }
    }
}

impl J4Config {
    /// Bound on `|θ_1^± - θ_2|` on the base support: `sqrt(2|u_2| / <γ'''', ξ>)`
    /// with the base caps, widened by 20% for perturbed curves.
    fn root_spread(&self) -> f64 {
        1.2 * (4.0 * self.u2_cap * self.rho / self.last_from).sqrt()
    }
}

pub fn base_symbol_j4(cfg: &J4Config) -> Symbol {
    let last = if cfg.half_space {
        Factor::new(Quantity::LastRatio, 1.0, Shape::Step { from: cfg.last_from, to: cfg.last_to })
    } else {
        Factor::new(Quantity::LastRatio, 2.0 / cfg.last_to, Shape::OneMinusEta)
    };
    Symbol::new(
        "a",
        PieceIndex { j: 4, ..Default::default() },
        vec![
            Factor::new(Quantity::S, 1.0 / cfg.chi_width, Shape::Eta),
            last,
            Factor::new(Quantity::Theta2, 1.0 / cfg.theta_window, Shape::Eta),
            Factor::new(Quantity::U2Rel, 1.0 / (cfg.u2_cap * cfg.rho), Shape::Eta),
            Factor::new(Quantity::U12Rel, 1.0 / cfg.u12_cap, Shape::Eta),
        ],
    )
}

/// `Λ(k) = {(ℓ_1, ℓ_2) : 0 <= ℓ_2 < ⌊k/4⌋, ℓ_2 <= ℓ_1 <= ⌊(2k + ℓ_2)/9⌋}`.
pub fn lambda_set(k: u32) -> Vec<(u32, u32)> {
    let mut v = Vec::new();
    for l2 in 0..k / 4 {
        for l1 in l2..=(2 * k + l2) / 9 {
            v.push((l1, l2));
        }
    }
    v
}

struct Builder<'a> {
    curve: &'a Curve,
    cfg: &'a J4Config,
    k: u32,
    kf: f64,
    norm_max: f64,
}

impl Builder<'_> {
    fn idx(&self, ell: Option<u32>, iota: Option<u8>) -> PieceIndex {
        PieceIndex { j: 4, k: self.k, ell, iota, ..Default::default() }
    }

    fn x(&self, ell: f64, shape: Shape) -> Factor {
        Factor::new(Quantity::U12, pow2(-self.kf + 3.0 * ell), shape)
    }

    fn y(&self, ell: f64, shape: Shape) -> Factor {
        Factor::new(Quantity::U2, pow2(-self.kf + 2.0 * ell) / self.cfg.rho, shape)
    }

    fn x1(&self, ell: f64, shape: Shape) -> Factor {
        Factor::new(Quantity::U1, pow2(-self.kf + 3.0 * ell) / self.cfg.rho.powi(4), shape)
    }

    fn s_theta1(&self, l2: f64, shape: Shape) -> Factor {
        Factor::new(Quantity::STheta1, pow2(l2) / self.cfg.rho, shape)
    }

    fn u12_max(&self, ell: f64) -> f64 {
        (2.0 * pow2(self.kf - 3.0 * ell)).min(2.0 * self.cfg.u12_cap * self.norm_max)
    }

    fn u2_max(&self, ell: f64) -> f64 {
        (2.0 * self.cfg.rho * pow2(self.kf - 2.0 * ell)).min(2.0 * self.cfg.u2_cap * self.cfg.rho * self.norm_max)
    }

    fn u31_max(&self, ell: f64) -> f64 {
        1.5 * (2.0 * self.u2_max(ell) * self.norm_max).sqrt()
    }

    fn chi(&self) -> SRange {
        let c = 2.0 * self.cfg.chi_width;
        SRange::Fixed(-c, c)
    }

    /// Angular split of `a_{k,ℓ,ι}` in `θ_2`.
    fn angular_a(&self, parent: &Symbol, ell: u32, iota: u8) -> Result<Vec<SymbolTree>> {
        let lf = ell as f64;
        let scale = pow2(lf);
        let r = pow2(-lf);
        let th = 2.0 * self.cfg.theta_window;
        let mut out = Vec::new();
        for mu in angular_range(scale, -th, th) {
            let s_mu = mu as f64 * r;
            let mut ix = self.idx(Some(ell), Some(iota));
            ix.mu = Some(mu);
            let piece = parent.refine(
                format!("a(k={},l={ell},i={iota},mu={mu})", self.k),
                ix.clone(),
                &[Factor::new(Quantity::Theta2, scale, Shape::Zeta).shifted(mu as f64)],
            );
            let sc = self.cfg.rho * pow2(lf * (1.0 - self.cfg.eps));
            ix.eps = true;
            let variant = piece.refine(
                format!("a(k={},l={ell},i={iota},mu={mu},eps)", self.k),
                ix,
                &[Factor::new(Quantity::S, sc, Shape::Eta).shifted(sc * s_mu)],
            );
            let sampler = if iota == 4 {
                let spread = (4.8 * self.cfg.rho.sqrt() * r).min(self.cfg.root_spread());
                let u1 = 2.0 * self.cfg.rho.powi(4) * pow2(self.kf - 3.0 * lf);
                let u31 = self.u31_max(lf);
                ChartSampler {
                    root_order: 2,
                    t: ((s_mu - r - spread).max(-1.0), (s_mu + r + spread).min(1.0)),
                    v: [Some((-u1, u1)), None, Some((-u31, u31)), None],
                    norm_max: self.norm_max,
                    s: self.chi(),
                }
            } else {
                let u2 = self.u2_max(lf);
                let v2 = match iota {
                    2 if ell < self.k / 4 => (0.0, u2),
                    3 => (-u2, 0.0),
                    _ => (-u2, u2),
                };
                let u12 = self.u12_max(lf);
                ChartSampler {
                    root_order: 3,
                    t: ((s_mu - r).max(-th), (s_mu + r).min(th)),
                    v: [Some((-u12, u12)), Some(v2), None, None],
                    norm_max: self.norm_max,
                    s: self.chi(),
                }
            };
            let fbox = FrenetBox::new(self.curve, 3, s_mu, r)?.dilated(pow2(self.kf));
            let mut node = SymbolTree::leaf(piece.clone());
            node.variants.push(variant);
            node.audit = Some(AuditTarget {
                symbol: piece,
                sampler,
                checks: vec![BoxCheck { family: Family::J4Angular, fbox, transform: None }],
            });
            out.push(node);
        }
        Ok(out)
    }

    /// `b_{k,𝓵}` split into groups `b^{*,μ}` of pieces `b^ν`.
    fn angular_b(&self, parent: &Symbol, l1: u32, l2: u32) -> Result<Vec<SymbolTree>> {
        let (f1, f2) = (l1 as f64, l2 as f64);
        let q = (3.0 * f1 - f2) / 2.0;
        let scale = pow2(q);
        let ratio = pow2(1.5 * (f1 - f2));
        let th = (2.0 * self.cfg.theta_window + self.cfg.root_spread()).min(1.0);
        let nus: Vec<i64> = angular_range(scale, -th, th).collect();
        let group_of = |nu: i64| (nu as f64 / ratio + 0.5).floor() as i64;
        let u1 = 2.0 * self.cfg.rho.powi(4) * pow2(self.kf - 3.0 * f1);
        let u31 = self.u31_max(f2);
        let s_w = 2.0 * self.cfg.rho * pow2(-f2);
        let sampler = |lo: f64, hi: f64| ChartSampler {
            root_order: 2,
            t: (lo.max(-1.0), hi.min(1.0)),
            v: [Some((-u1, u1)), None, Some((-u31, u31)), None],
            norm_max: self.norm_max,
            s: SRange::AroundT(s_w),
        };
        let lam = pow2(-f2);
        let mut out = Vec::new();
        let mut i = 0;
        while i < nus.len() {
            let mu = group_of(nus[i]);
            let mut j = i;
            while j < nus.len() && group_of(nus[j]) == mu {
                j += 1;
            }
            let (lo, hi) = (nus[i], nus[j - 1]);
            let s_mu = mu as f64 * lam;
            let mut gix = self.idx(None, None);
            gix.ell_pair = Some((l1, l2));
            gix.mu = Some(mu);
            let group = parent.refine(
                format!("b*(k={},l1={l1},l2={l2},mu={mu})", self.k),
                gix,
                &[Factor::new(Quantity::Theta1, scale, Shape::ZetaRange { lo, hi })],
            );
            let resc = self.curve.rescale(s_mu, lam)?;
            let transform = self.curve.rescaling_matrices(s_mu, lam).gamma_sigma_lambda.transpose();
            let mut kids = Vec::new();
            for &nu in &nus[i..j] {
                let s_nu = nu as f64 / scale;
                let mut ix = self.idx(None, None);
                ix.ell_pair = Some((l1, l2));
                ix.mu = Some(mu);
                ix.nu = Some(nu);
                let piece = parent.refine(
                    format!("b(k={},l1={l1},l2={l2},nu={nu})", self.k),
                    ix.clone(),
                    &[Factor::new(Quantity::Theta1, scale, Shape::Zeta).shifted(nu as f64)],
                );
                let sc = self.cfg.rho * pow2(q * (1.0 - self.cfg.eps));
                ix.eps = true;
                let variant = piece.refine(
                    format!("b(k={},l1={l1},l2={l2},nu={nu},eps)", self.k),
                    ix,
                    &[Factor::new(Quantity::S, sc, Shape::Eta).shifted(sc * s_nu)],
                );
                let fine = FrenetBox::new(self.curve, 2, s_nu, 1.0 / scale)?
                    .dilated(pow2(self.kf - f2))
                    .with_top(pow2(f2));
                let rbox = FrenetBox::new(&resc, 2, (s_nu - s_mu) / lam, 1.0 / ratio)?.dilated(pow2(self.kf - 4.0 * f2));
                let mut node = SymbolTree::leaf(piece.clone());
                node.variants.push(variant);
                node.audit = Some(AuditTarget {
                    symbol: piece,
                    sampler: sampler((nu as f64 - 1.0) / scale, (nu as f64 + 1.0) / scale),
                    checks: vec![
                        BoxCheck { family: Family::J4Fine, fbox: fine, transform: None },
                        BoxCheck { family: Family::J4Rescaled, fbox: rbox, transform: Some(transform.clone()) },
                    ],
                });
                kids.push(node);
            }
            let gbox = FrenetBox::new(self.curve, 3, s_mu, lam)?.dilated(pow2(self.kf));
            let mut gnode = SymbolTree::with_children(group.clone(), kids);
            gnode.audit = Some(AuditTarget {
                symbol: group,
                sampler: sampler((lo as f64 - 1.0) / scale, (hi as f64 + 1.0) / scale),
                checks: vec![BoxCheck { family: Family::J4Grouped, fbox: gbox, transform: None }],
            });
            out.push(gnode);
            i = j;
        }
        Ok(out)
    }
}

/// Full decomposition of `a_k = a β^k(|ξ|)`:
///
/// * `a_{k,ℓ,1}`, `a_{k,ℓ,2}` for `0 <= ℓ <= ⌊k/4⌋` and `b_{k,ℓ_2}` for
///   `ℓ_2 < ⌊k/4⌋` from the two-parameter split;
/// * `b_{k,ℓ_2} = a_{k,ℓ_2,3} + a_{k,ℓ_2,4} + Σ_{𝓵 ∈ Λ(k, ℓ_2)} b_{k,𝓵}`;
/// * angular pieces `a^μ_{k,ℓ,ι}` and groups `b^{*,μ}_{k,𝓵}` of `b^ν_{k,𝓵}`.
///
/// `a_{k,⌊k/4⌋,3}` and `a_{k,⌊k/4⌋,4}` are emitted as zero symbols.
pub fn decompose_j4(curve: &Curve, base: &Symbol, k: u32, cfg: &J4Config) -> Result<SymbolTree> {
    require_dim4(curve)?;
    if base.index.j != 4 {
        return Err(Error::InvalidParameter(format!("base symbol is tagged J = {}", base.index.j)));
    }
    if !(cfg.rho > 0.0 && cfg.rho < 1.0) {
        return Err(Error::InvalidParameter(format!("ρ = {} must lie in (0, 1)", cfg.rho)));
    }
    let mut ak_factors = vec![Factor::new(Quantity::Norm, 1.0, Shape::LittlewoodPaley { k })];
    ak_factors.extend_from_slice(&base.factors);
    let ak = Symbol::new(format!("a(k={k})"), PieceIndex { j: 4, k, ..Default::default() }, ak_factors);
    if k == 0 {
        return Ok(SymbolTree::leaf(ak));
    }
    let b = Builder { curve, cfg, k, kf: k as f64, norm_max: pow2(k as f64 + 1.0) };
    let m = k / 4;
    let mut level = Vec::new();
    let node = |sym: Symbol, ell: u32, iota: u8| -> Result<SymbolTree> {
        let kids = b.angular_a(&sym, ell, iota)?;
        Ok(SymbolTree::with_children(sym, kids))
    };
    for ell in 0..=m {
        let lf = ell as f64;
        let a1 = ak.refine(
            format!("a(k={k},l={ell},i=1)"),
            b.idx(Some(ell), Some(1)),
            &[b.x(lf, Shape::EtaDiff { ratio: 8.0 }), b.y(lf, Shape::Eta)],
        );
        level.push(node(a1, ell, 1)?);
        let y2 = if ell < m { Shape::EtaDiffSigned { ratio: 4.0, positive: true } } else { Shape::Eta };
        let a2 = ak.refine(
            format!("a(k={k},l={ell},i=2)"),
            b.idx(Some(ell), Some(2)),
            &[b.x(lf + 1.0, Shape::Eta), b.y(lf, y2)],
        );
        level.push(node(a2, ell, 2)?);
        if ell == m {
            for iota in [3u8, 4] {
                level.push(SymbolTree::leaf(Symbol::new(
                    format!("a(k={k},l={ell},i={iota})"),
                    b.idx(Some(ell), Some(iota)),
                    vec![Factor::new(Quantity::Norm, 1.0, Shape::Zero)],
                )));
            }
            continue;
        }
        let mut bix = b.idx(Some(ell), None);
        bix.ell_pair = None;
        let bl = ak.refine(
            format!("b(k={k},l2={ell})"),
            bix,
            &[b.x(lf + 1.0, Shape::Eta), b.y(lf, Shape::EtaDiffSigned { ratio: 4.0, positive: false })],
        );
        let mut kids = Vec::new();
        let a3 = bl.refine(
            format!("a(k={k},l={ell},i=3)"),
            b.idx(Some(ell), Some(3)),
            &[b.x1(lf, Shape::OneMinusEta)],
        );
        kids.push(node(a3, ell, 3)?);
        let a4 = bl.refine(
            format!("a(k={k},l={ell},i=4)"),
            b.idx(Some(ell), Some(4)),
            &[b.x1(lf, Shape::Eta), b.s_theta1(lf, Shape::OneMinusEta)],
        );
        kids.push(node(a4, ell, 4)?);
        let top = (2 * k + ell) / 9;
        for l1 in ell..=top {
            let shape = if l1 < top { Shape::EtaDiff { ratio: 8.0 } } else { Shape::Eta };
            let mut ix = b.idx(None, None);
            ix.ell_pair = Some((l1, ell));
            let bll = bl.refine(
                format!("b(k={k},l1={l1},l2={ell})"),
                ix,
                &[b.x1(l1 as f64, shape), b.s_theta1(lf, Shape::Eta)],
            );
            let groups = b.angular_b(&bll, l1, ell)?;
            kids.push(SymbolTree::with_children(bll, groups));
        }
        level.push(SymbolTree::with_children(bl, kids));
    }
    Ok(SymbolTree::with_children(ak, level))
}

/// Evaluate the root of a J = 4 tree, refusing frequencies in the lower
/// half-space where the base symbol is nonzero.
pub fn eval_j4_root(tree: &SymbolTree, p: &Point) -> Result<f64> {
    let v = tree.symbol.eval(p)?;
    if v != 0.0 && p.xi[3] <= 0.0 {
        return Err(Error::Symmetry(format!(
            "ξ_4 = {} <= 0 on the support; reflect ξ -> -ξ and use the conjugate symbol",
            p.xi[3]
        )));
    }
    Ok(v)
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct J4Diagnostics {
    pub samples: usize,
    /// Range of `|<γ'''(s), ξ>| / (ρ^{1/2} 2^{k-ℓ_2})` over samples of `b^ν`.
    pub third_ratio: (f64, f64),
    /// Smallest `min(|u_1^- - u_1^+|, |u_1^- + u_1^+|) / (ρ^{3/2} 2^{k-3ℓ_2})`
    /// over samples of `a_{k,ℓ_2,4}` and `b_{k,𝓵}`.
    pub smoothness_c: f64,
    /// Largest `1 - η(ρ 2^{-k+3ℓ_2} u_1)` over samples of `b_{k,ℓ_2}`.
    pub gamma1_cap_defect: f64,
}

/// Sampled checks of the size relations on the `b` pieces.
pub fn j4_diagnostics(curve: &Curve, tree: &SymbolTree, cfg: &J4Config, per_piece: usize, seed: u64) -> Result<J4Diagnostics> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut d = J4Diagnostics { third_ratio: (f64::INFINITY, 0.0), smoothness_c: f64::INFINITY, ..Default::default() };
    let k = tree.symbol.index.k as f64;
    for t in tree.audit_targets() {
        let ix = &t.symbol.index;
        let (is_fine, l2) = match (ix.ell_pair, ix.nu, ix.iota, ix.ell) {
            (Some((_, l2)), Some(_), _, _) => (true, l2),
            (None, None, Some(4), Some(l)) if l < tree.symbol.index.k / 4 => (false, l),
            _ => continue,
        };
        let l2f = l2 as f64;
        let (pts, _) = sample_piece(curve, &t.symbol, &t.sampler, per_piece, per_piece * 400, &mut rng)?;
        for (xi, s) in pts {
            let p = Point::new(curve, &xi, s);
            let roots = p.cone_roots()?;
            d.samples += 1;
            if let Some((um, up)) = roots.u1_pm {
                let c = (um - up).abs().min((um + up).abs()) / (cfg.rho.powf(1.5) * pow2(k - 3.0 * l2f));
                d.smoothness_c = d.smoothness_c.min(c);
            }
            let u1 = p.get(Quantity::U1)?;
            d.gamma1_cap_defect = d.gamma1_cap_defect.max(1.0 - eta(cfg.rho * pow2(-k + 3.0 * l2f) * u1, 0));
            if is_fine {
                let v = curve.pairing(s, 3, &xi).abs() / (cfg.rho.sqrt() * pow2(k - l2f));
                d.third_ratio.0 = d.third_ratio.0.min(v);
                d.third_ratio.1 = d.third_ratio.1.max(v);
            }
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::super::{reconstruction_audit, support_audit};
    use super::super::audit::Family;
    use super::*;
    use crate::curve::moment_curve;

    #[test]
    fn lambda_enumeration() {
        assert_eq!(lambda_set(12), vec![(0, 0), (1, 0), (2, 0), (1, 1), (2, 1), (2, 2)]);
        assert_eq!(lambda_set(8), vec![(0, 0), (1, 0), (1, 1)]);
        assert!(lambda_set(3).is_empty());
        for k in 1..40 {
            for (l1, l2) in lambda_set(k) {
                assert!(l2 < k / 4 && l2 <= l1 && l1 <= (2 * k + l2) / 9);
            }
        }
    }

    #[test]
    fn tree_indices_match_lambda() {
        let g = moment_curve(4).unwrap();
        let cfg = J4Config::default();
        let tree = decompose_j4(&g, &base_symbol_j4(&cfg), 12, &cfg).unwrap();
        let mut pairs: Vec<(u32, u32)> = tree
            .nodes()
            .iter()
            .filter(|n| n.symbol.label.starts_with("b(") && n.symbol.label.contains("l1=") && !n.symbol.label.contains("nu="))
            .map(|n| n.symbol.index.ell_pair.unwrap())
            .collect();
        pairs.sort_by_key(|p| (p.1, p.0));
        assert_eq!(pairs, lambda_set(12));
        for iota in [3, 4] {
            let z = tree.find(&format!("a(k=12,l=3,i={iota})")).unwrap();
            assert!(z.symbol.is_zero());
        }
    }

    #[test]
    fn reconstruction_k8() {
        let g = moment_curve(4).unwrap();
        let cfg = J4Config::default();
        let tree = decompose_j4(&g, &base_symbol_j4(&cfg), 8, &cfg).unwrap();
        let rep = reconstruction_audit(&g, &tree, 300, 9).unwrap();
        assert!(rep.points > 250, "{rep:?}");
        assert!(rep.max_defect <= 1e-12 && rep.max_leaf_defect <= 1e-12, "{rep:?}");
        let sup = support_audit(&g, &tree.audit_targets(), 30, 3).unwrap();
        for fam in [Family::J4Angular, Family::J4Grouped] {
            assert!(sup.by_family[&fam] <= 16.0, "{fam:?} {}", sup.by_family[&fam]);
        }
    }

    #[test]
    fn fine_pieces_respect_upper_bounds() {
        // The lower bound on the third coordinate can fail: when ℓ_1 - ℓ_2 is
        // small, 2^{-q} exceeds |θ_1 - θ_2| and s_ν may sit on θ_2.
        let g = moment_curve(4).unwrap();
        let cfg = J4Config::default();
        let tree = decompose_j4(&g, &base_symbol_j4(&cfg), 8, &cfg).unwrap();
        let sup = support_audit(&g, &tree.audit_targets(), 30, 3).unwrap();
        for p in sup.pieces.iter().filter(|p| matches!(p.family, Family::J4Fine | Family::J4Rescaled)) {
            for (j, r) in p.max_ratios.iter().enumerate() {
                if j != 2 {
                    assert!(*r <= 16.0, "{} coordinate {} ratio {r}", p.label, j + 1);
                }
            }
        }
    }

    #[test]
    fn reconstruction_k12() {
        let g = moment_curve(4).unwrap();
        let cfg = J4Config::default();
        let tree = decompose_j4(&g, &base_symbol_j4(&cfg), 12, &cfg).unwrap();
        let rep = reconstruction_audit(&g, &tree, 300, 11).unwrap();
        assert!(rep.max_defect <= 1e-12 && rep.max_leaf_defect <= 1e-12, "{rep:?}");
        let d = j4_diagnostics(&g, &tree, &cfg, 10, 5).unwrap();
        assert!(d.samples > 0);
        assert!(d.gamma1_cap_defect <= 1e-12, "{d:?}");
    }

    #[test]
    fn lower_half_space_is_refused() {
        let g = moment_curve(4).unwrap();
        let cfg = J4Config { half_space: false, ..Default::default() };
        let tree = decompose_j4(&g, &base_symbol_j4(&cfg), 4, &cfg).unwrap();
        let xi = [0.0, 0.0, 0.0, -12.0];
        let p = Point::new(&g, &xi, 0.0);
        assert!(matches!(eval_j4_root(&tree, &p), Err(Error::Symmetry(_))));
        let xi = [0.0, 0.0, 0.0, 12.0];
        let p = Point::new(&g, &xi, 0.0);
        assert!(eval_j4_root(&tree, &p).unwrap() > 0.0);
    }
}
