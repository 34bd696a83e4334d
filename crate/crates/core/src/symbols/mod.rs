//! Frequency decompositions of symbols `a(ξ; s)` into pieces adapted to the
//! cones where `<γ^(j), ξ>` vanish, together with Frenet boxes and support
//! audits.
//!
//! A [`Symbol`] is a product of scalar cutoffs, each applied to an affine
//! function of one derived quantity (a root, a pairing, `|ξ|`, `s`). Symbols
//! are cheap to clone and evaluate lazily; all quantities for a given
//! `(ξ, s)` are cached in a [`Point`] so that a whole tree can be evaluated
//! at one point for the cost of a few root finds.

mod audit;
mod classify;
mod frenet_box;
mod j3;
mod j4;

pub use audit::{
    reconstruction_audit, sample_piece, support_audit, AuditTarget, ChartSampler, Family, PieceAudit,
    ReconstructionReport, SRange, SupportAuditReport,
};
pub use classify::{classify_j, DeltaProfile, JWeights};
pub use frenet_box::{frenet_box_contains, FrenetBox};
pub use j3::{base_symbol_j3, decompose_j3, J3Config};
pub use j4::{base_symbol_j4, decompose_j4, eval_j4_root, j4_diagnostics, lambda_set, J4Config, J4Diagnostics};

use crate::cone::{cone_roots_unchecked, derivative_root, norm, ConeRoots, Theta1};
use crate::curve::Curve;
use crate::cutoff::{eta, littlewood_paley, step, zeta};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::cell::OnceCell;

/// Scalar quantities a cutoff can be applied to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// `|ξ|`
    Norm,
    /// The curve parameter `s`.
    S,
    /// `ξ_n / |ξ|`
    LastRatio,
    /// `<γ'''(0), ξ> / |ξ|`
    ThirdAtZero,
    /// Root of `<γ'', ξ>` near the origin.
    J3Theta,
    /// `<γ' ∘ θ, ξ>` for the root above.
    J3U,
    /// `J3U / |ξ|`
    J3URel,
    /// Root of `<γ''', ξ>`.
    Theta2,
    U12,
    U2,
    U12Rel,
    U2Rel,
    /// Selected root of `<γ'', ξ>` (smaller `|u_1^±|`).
    Theta1,
    U1,
    /// `s - θ_1(ξ)`
    STheta1,
}

/// Shapes of scalar cutoff.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    /// `η(x)`
    Eta,
    /// `η(x) - η(ratio x)`
    EtaDiff { ratio: f64 },
    /// `η(x) - η(ratio x)` kept only on one side of zero.
    EtaDiffSigned { ratio: f64, positive: bool },
    /// `1 - η(x)`
    OneMinusEta,
    /// `1 - η(x)` for `x > 0`, zero otherwise.
    OneMinusEtaPositive,
    /// `ζ(x)`
    Zeta,
    /// `Σ_{lo <= ν <= hi} ζ(x - ν)`
    ZetaRange { lo: i64, hi: i64 },
    /// Smooth step from 0 at `from` to 1 at `to`.
    Step { from: f64, to: f64 },
    /// `β^k(x)`
    LittlewoodPaley { k: u32 },
    Zero,
}

impl Shape {
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            Shape::Eta => eta(x, 0),
            Shape::EtaDiff { ratio } => eta(x, 0) - eta(ratio * x, 0),
            Shape::EtaDiffSigned { ratio, positive } => {
                if (x > 0.0) == positive && x != 0.0 {
                    eta(x, 0) - eta(ratio * x, 0)
                } else {
                    0.0
                }
            }
            Shape::OneMinusEta => 1.0 - eta(x, 0),
            Shape::OneMinusEtaPositive => {
                if x > 0.0 {
                    1.0 - eta(x, 0)
                } else {
                    0.0
                }
            }
            Shape::Zeta => zeta(x, 0),
            Shape::ZetaRange { lo, hi } => step(x - lo as f64 + 1.0, 0) - step(x - hi as f64, 0),
            Shape::Step { from, to } => step((x - from) / (to - from), 0),
            Shape::LittlewoodPaley { k } => littlewood_paley(k).value(x),
            Shape::Zero => 0.0,
        }
    }

    /// Closed superset of `{x : apply(x) != 0}`.
    pub fn in_support(&self, x: f64) -> bool {
        let a = x.abs();
        match *self {
            Shape::Eta => a <= 2.0,
            Shape::EtaDiff { ratio } => a <= 2.0 && a * ratio >= 1.0,
            Shape::EtaDiffSigned { ratio, positive } => {
                a <= 2.0 && a * ratio >= 1.0 && (x > 0.0) == positive
            }
            Shape::OneMinusEta => a >= 1.0,
            Shape::OneMinusEtaPositive => x >= 1.0,
            Shape::Zeta => a <= 1.0,
            Shape::ZetaRange { lo, hi } => x >= lo as f64 - 1.0 && x <= hi as f64 + 1.0,
            Shape::Step { from, .. } => x >= from,
            Shape::LittlewoodPaley { k } => {
                if k == 0 {
                    a <= 2.0
                } else {
                    let c = 2f64.powi(k as i32);
                    a >= 0.5 * c && a <= 2.0 * c
                }
            }
            Shape::Zero => false,
        }
    }

    /// Largest value; the pure cutoffs here are all bounded by 1.
    pub fn sup(&self) -> f64 {
        match self {
            Shape::Zero => 0.0,
            _ => 1.0,
        }
    }
}

/// `shape(scale * q - shift)`
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub quantity: Quantity,
    pub scale: f64,
    pub shift: f64,
    pub shape: Shape,
}

impl Factor {
    pub fn new(quantity: Quantity, scale: f64, shape: Shape) -> Self {
        Self { quantity, scale, shift: 0.0, shape }
    }

    pub fn shifted(mut self, shift: f64) -> Self {
        self.shift = shift;
        self
    }

    pub fn argument(&self, q: f64) -> f64 {
        self.scale * q - self.shift
    }

    pub fn describe(&self) -> String {
        let sh = match self.shape {
            Shape::Eta => "eta".to_string(),
            Shape::EtaDiff { ratio } => format!("eta-eta({ratio}.)"),
            Shape::EtaDiffSigned { ratio, positive } => {
                format!("eta-eta({ratio}.)[{}]", if positive { "+" } else { "-" })
            }
            Shape::OneMinusEta => "1-eta".into(),
            Shape::OneMinusEtaPositive => "(1-eta)[+]".into(),
            Shape::Zeta => "zeta".into(),
            Shape::ZetaRange { lo, hi } => format!("zeta[{lo}..={hi}]"),
            Shape::Step { from, to } => format!("step[{from},{to}]"),
            Shape::LittlewoodPaley { k } => format!("beta^{k}"),
            Shape::Zero => "0".into(),
        };
        if self.shift == 0.0 {
            format!("{sh}({:.6e} {:?})", self.scale, self.quantity)
        } else {
            format!("{sh}({:.6e} {:?} - {})", self.scale, self.quantity, self.shift)
        }
    }
}

/// Which member of a decomposition a symbol is.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PieceIndex {
    pub j: u8,
    pub k: u32,
    pub ell: Option<u32>,
    pub ell_pair: Option<(u32, u32)>,
    pub iota: Option<u8>,
    pub mu: Option<i64>,
    pub nu: Option<i64>,
    pub eps: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Symbol {
    pub label: String,
    pub index: PieceIndex,
    pub factors: Vec<Factor>,
}

impl Symbol {
    pub fn new(label: impl Into<String>, index: PieceIndex, factors: Vec<Factor>) -> Self {
        Self { label: label.into(), index, factors }
    }

    /// Copy with extra factors appended.
    pub fn refine(&self, label: impl Into<String>, index: PieceIndex, extra: &[Factor]) -> Self {
        let mut factors = self.factors.clone();
        factors.extend_from_slice(extra);
        Self { label: label.into(), index, factors }
    }

    pub fn is_zero(&self) -> bool {
        self.factors.iter().any(|f| f.shape == Shape::Zero)
    }

    /// Product of the factors; stops at the first zero so that quantities
    /// only defined on the support are never requested off it.
    pub fn eval(&self, p: &Point) -> Result<f64> {
        let mut v = 1.0;
        for f in &self.factors {
            if f.shape == Shape::Zero {
                return Ok(0.0);
            }
            let q = p.get(f.quantity)?;
            let x = f.argument(q);
            if !x.is_finite() {
                return Ok(0.0);
            }
            v *= f.shape.apply(x);
            if v == 0.0 {
                return Ok(0.0);
            }
        }
        Ok(v)
    }

    /// Conservative support test: every factor argument lies in the closed
    /// support of its shape.
    pub fn support_contains(&self, p: &Point) -> Result<bool> {
        for f in &self.factors {
            if f.shape == Shape::Zero {
                return Ok(false);
            }
            let x = f.argument(p.get(f.quantity)?);
            if !x.is_finite() || !f.shape.in_support(x) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn provenance(&self) -> Vec<String> {
        self.factors.iter().map(Factor::describe).collect()
    }
}

/// `(ξ, s)` with lazily computed derived quantities.
pub struct Point<'a> {
    pub curve: &'a Curve,
    pub xi: &'a [f64],
    pub s: f64,
    norm: f64,
    j3: OnceCell<Option<(f64, f64)>>,
    j4: OnceCell<Option<(f64, f64, f64)>>,
    roots: OnceCell<std::result::Result<ConeRoots, Error>>,
}

/// Search window for the root of `<γ'', ξ>` in the three-derivative regime.
pub const J3_ROOT_WINDOW: f64 = 0.25;
/// Search window for the root of `<γ''', ξ>`.
pub const THETA2_WINDOW: f64 = 0.5;

impl<'a> Point<'a> {
    pub fn new(curve: &'a Curve, xi: &'a [f64], s: f64) -> Self {
        Self {
            curve,
            xi,
            s,
            norm: norm(xi),
            j3: OnceCell::new(),
            j4: OnceCell::new(),
            roots: OnceCell::new(),
        }
    }

    fn j3(&self) -> Option<(f64, f64)> {
        *self.j3.get_or_init(|| {
            let t = derivative_root(self.curve, self.xi, 2, -J3_ROOT_WINDOW, J3_ROOT_WINDOW).ok()?;
            Some((t, self.curve.pairing(t, 1, self.xi)))
        })
    }

    fn j4(&self) -> Option<(f64, f64, f64)> {
        *self.j4.get_or_init(|| {
            let t = derivative_root(self.curve, self.xi, 3, -THETA2_WINDOW, THETA2_WINDOW).ok()?;
            Some((t, self.curve.pairing(t, 1, self.xi), self.curve.pairing(t, 2, self.xi)))
        })
    }

    pub fn cone_roots(&self) -> Result<&ConeRoots> {
        self.roots
            .get_or_init(|| cone_roots_unchecked(self.curve, self.xi))
            .as_ref()
            .map_err(|e| e.clone())
    }

    fn theta1(&self) -> Result<(f64, f64)> {
        let r = self.cone_roots()?;
        match (r.theta1, r.theta1_sel, r.u1) {
            (Theta1::None, _, _) => Err(Error::Localisation("θ_1 requested where <γ'', ξ> has no root".into())),
            (_, Some(t), Some(u)) => Ok((t, u)),
            _ => Err(Error::Localisation("θ_1 unavailable".into())),
        }
    }

    /// Missing roots map to `+∞`, which every window cutoff sends to zero.
    pub fn get(&self, q: Quantity) -> Result<f64> {
        let inf = f64::INFINITY;
        Ok(match q {
            Quantity::Norm => self.norm,
            Quantity::S => self.s,
            Quantity::LastRatio => self.xi[self.xi.len() - 1] / self.norm,
            Quantity::ThirdAtZero => self.curve.pairing(0.0, 3, self.xi) / self.norm,
            Quantity::J3Theta => self.j3().map_or(inf, |v| v.0),
            Quantity::J3U => self.j3().map_or(inf, |v| v.1),
            Quantity::J3URel => self.j3().map_or(inf, |v| v.1 / self.norm),
            Quantity::Theta2 => self.j4().map_or(inf, |v| v.0),
            Quantity::U12 => self.j4().map_or(inf, |v| v.1),
            Quantity::U2 => self.j4().map_or(inf, |v| v.2),
            Quantity::U12Rel => self.j4().map_or(inf, |v| v.1 / self.norm),
            Quantity::U2Rel => self.j4().map_or(inf, |v| v.2 / self.norm),
            Quantity::Theta1 => self.theta1()?.0,
            Quantity::U1 => self.theta1()?.1,
            Quantity::STheta1 => self.s - self.theta1()?.0,
        })
    }
}

/// A node of a decomposition: the children sum to the node exactly;
/// `variants` are approximations of the node kept alongside.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SymbolTree {
    pub symbol: Symbol,
    pub children: Vec<SymbolTree>,
    pub variants: Vec<Symbol>,
    #[serde(skip)]
    pub audit: Option<AuditTarget>,
}

impl SymbolTree {
    pub fn leaf(symbol: Symbol) -> Self {
        Self { symbol, children: Vec::new(), variants: Vec::new(), audit: None }
    }

    pub fn with_children(symbol: Symbol, children: Vec<SymbolTree>) -> Self {
        Self { symbol, children, variants: Vec::new(), audit: None }
    }

    pub fn walk<'s>(&'s self, out: &mut Vec<&'s SymbolTree>) {
        out.push(self);
        for c in &self.children {
            c.walk(out);
        }
    }

    pub fn nodes(&self) -> Vec<&SymbolTree> {
        let mut v = Vec::new();
        self.walk(&mut v);
        v
    }

    pub fn leaves(&self) -> Vec<&SymbolTree> {
        self.nodes().into_iter().filter(|n| n.children.is_empty()).collect()
    }

    pub fn find(&self, label: &str) -> Option<&SymbolTree> {
        self.nodes().into_iter().find(|n| n.symbol.label == label)
    }

    pub fn audit_targets(&self) -> Vec<AuditTarget> {
        self.nodes().into_iter().filter_map(|n| n.audit.clone()).collect()
    }

    /// Largest `|node - Σ children|` over all internal nodes at one point.
    pub fn partition_defect(&self, p: &Point) -> Result<f64> {
        if self.children.is_empty() {
            return Ok(0.0);
        }
        let v = self.symbol.eval(p)?;
        let mut sum = 0.0;
        let mut worst = 0.0f64;
        for c in &self.children {
            sum += c.symbol.eval(p)?;
            worst = worst.max(c.partition_defect(p)?);
        }
        Ok(worst.max((v - sum).abs()))
    }
}

pub(crate) fn pow2(e: f64) -> f64 {
    2f64.powf(e)
}

pub(crate) fn require_dim4(curve: &Curve) -> Result<()> {
    if curve.dim() != 4 {
        return Err(Error::InvalidParameter(format!("decompositions need n = 4, got {}", curve.dim())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_vanish_off_support() {
        let shapes = [
            Shape::Eta,
            Shape::EtaDiff { ratio: 4.0 },
            Shape::EtaDiffSigned { ratio: 8.0, positive: false },
            Shape::OneMinusEta,
            Shape::OneMinusEtaPositive,
            Shape::Zeta,
            Shape::ZetaRange { lo: -2, hi: 3 },
            Shape::Step { from: 0.5, to: 0.75 },
            Shape::LittlewoodPaley { k: 3 },
        ];
        for sh in shapes {
            for i in -4000..=4000 {
                let x = i as f64 * 0.005;
                let v = sh.apply(x);
                assert!((0.0..=1.0 + 1e-15).contains(&v), "{sh:?} {x} {v}");
                if !sh.in_support(x) {
                    assert_eq!(v, 0.0, "{sh:?} at {x}");
                }
            }
        }
    }

    #[test]
    fn zeta_range_is_a_sum_of_translates() {
        for i in -300..300 {
            let x = i as f64 * 0.0173;
            let direct: f64 = (-2..=3).map(|nu| zeta(x - nu as f64, 0)).sum();
            let v = Shape::ZetaRange { lo: -2, hi: 3 }.apply(x);
            assert!((v - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn littlewood_paley_telescopes() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let big_k = 9;
        for _ in 0..1000 {
            let r: f64 = rng.gen_range(-2000.0..2000.0);
            let sum: f64 = (0..=big_k).map(|k| littlewood_paley(k).value(r)).sum();
            let target = eta(r / 2f64.powi(big_k as i32), 0);
            assert!((sum - target).abs() < 1e-14);
        }
        for k in 1..8u32 {
            let c = 2f64.powi(k as i32);
            assert!(littlewood_paley(k).value(0.75 * c) > 0.0);
            assert_eq!(littlewood_paley(k).value(4.0 * c), 0.0);
            for i in 0..50 {
                let r = 0.37 * i as f64;
                assert_eq!(littlewood_paley(k).value(c * r), littlewood_paley(1).value(2.0 * r));
            }
        }
    }
}
