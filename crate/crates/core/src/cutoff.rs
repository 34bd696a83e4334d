//! Smooth compactly supported cutoffs.
//!
//! Everything here is built from one profile, `exp(-1/(1-t^2))` on `(-1,1)`.
//! Its normalised primitive gives a smooth step, the step gives the standard
//! bump `eta` (equal to 1 on `[-1,1]`, vanishing outside `[-2,2]`), and
//! differences of dilated bumps give the dyadic annular cutoffs.

use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

const PANELS: usize = 512;
const MAX_ORDER: usize = 8;

/// 16-point Gauss-Legendre rule on [-1,1].
const GL16_X: [f64; 8] = [
    0.0950125098376374,
    0.2816035507792589,
    0.4580167776572274,
    0.6178762444026438,
    0.7554044083550030,
    0.8656312023878318,
    0.9445750230732326,
    0.9894009349916499,
];
const GL16_W: [f64; 8] = [
    0.1894506104550685,
    0.1826034150449236,
    0.1691565193950025,
    0.1495959888165767,
    0.1246289712555339,
    0.0951585116824928,
    0.0622535239386479,
    0.0271524594117541,
];

struct ProfileTables {
    /// Cumulative integral of the raw profile at panel left edges.
    cumulative: Vec<f64>,
    /// Total mass of the raw profile.
    mass: f64,
    /// `poly[m]` holds P_m with phi^(m) = phi * P_m / (1-t^2)^(2m).
    poly: Vec<Vec<f64>>,
}

fn raw_profile(t: f64) -> f64 {
    if t <= -1.0 || t >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

fn gl16(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut acc = 0.0;
    for i in 0..8 {
        acc += GL16_W[i] * (f(c - h * GL16_X[i]) + f(c + h * GL16_X[i]));
    }
    acc * h
}

fn poly_eval(p: &[f64], t: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

fn tables() -> &'static ProfileTables {
    static TABLES: OnceLock<ProfileTables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let h = 2.0 / PANELS as f64;
        let mut cumulative = Vec::with_capacity(PANELS + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for i in 0..PANELS {
            let a = -1.0 + i as f64 * h;
            acc += gl16(a, a + h, raw_profile);
            cumulative.push(acc);
        }
        // P_{m+1} = -2t P_m + q^2 P_m' + 4 m t q P_m, q = 1 - t^2.
        let mut poly = vec![vec![1.0]];
        for m in 0..MAX_ORDER {
            let p = &poly[m];
            let mut next = vec![0.0; p.len() + 4];
            for (i, &c) in p.iter().enumerate() {
                next[i + 1] += -2.0 * c;
                // 4 m t (1 - t^2) c t^i
                next[i + 1] += 4.0 * m as f64 * c;
                next[i + 3] -= 4.0 * m as f64 * c;
                if i > 0 {
                    // (1 - 2t^2 + t^4) * i c t^(i-1)
                    let d = i as f64 * c;
                    next[i - 1] += d;
                    next[i + 1] -= 2.0 * d;
                    next[i + 3] += d;
                }
            }
            while next.len() > 1 && *next.last().unwrap() == 0.0 {
                next.pop();
            }
            poly.push(next);
        }
        ProfileTables { cumulative, mass: acc, poly }
    })
}

/// Normalised profile `phi(t) / ∫phi` and its derivatives.
pub fn profile(t: f64, order: usize) -> f64 {
    if t <= -1.0 || t >= 1.0 {
        return 0.0;
    }
    let tb = tables();
    let q = 1.0 - t * t;
    let base = raw_profile(t) / tb.mass;
    if order == 0 {
        return base;
    }
    assert!(order <= MAX_ORDER, "profile derivative order {order} exceeds {MAX_ORDER}");
    base * poly_eval(&tb.poly[order], t) / q.powi(2 * order as i32)
}

/// Normalised primitive of the profile: 0 for t <= -1, 1 for t >= 1.
pub fn profile_cdf(t: f64, order: usize) -> f64 {
    if order > 0 {
        return profile(t, order - 1);
    }
    if t <= -1.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let tb = tables();
    let h = 2.0 / PANELS as f64;
    let idx = (((t + 1.0) / h) as usize).min(PANELS - 1);
    let a = -1.0 + idx as f64 * h;
    let partial = if t > a { gl16(a, t, raw_profile) } else { 0.0 };
    ((tb.cumulative[idx] + partial) / tb.mass).clamp(0.0, 1.0)
}

/// Smooth step: 0 for x <= 0, 1 for x >= 1, and `step(1-x) = 1 - step(x)`.
pub fn step(x: f64, order: usize) -> f64 {
    2f64.powi(order as i32) * profile_cdf(2.0 * x - 1.0, order)
}

/// Standard bump: 1 on [-1,1], 0 outside [-2,2], even, non-increasing in |x|.
///
/// Equal to the indicator of [-3/2,3/2] mollified by the profile at width 1/2.
pub fn eta(x: f64, order: usize) -> f64 {
    if order == 0 {
        let ax = x.abs();
        if ax <= 1.0 {
            return 1.0;
        }
        if ax >= 2.0 {
            return 0.0;
        }
    }
    let s = 2f64.powi(order as i32);
    s * (profile_cdf(2.0 * x + 3.0, order) - profile_cdf(2.0 * x - 3.0, order))
}

/// Angular partition function: supported in [-1,1], integer translates sum to 1.
pub fn zeta(x: f64, order: usize) -> f64 {
    step(x + 1.0, order) - step(x, order)
}

/// Sign restriction applied to an annular cutoff.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Both,
    Positive,
    Negative,
}

/// Kinds of cutoff used throughout the crate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum CutoffKind {
    /// `eta(x / scale)`.
    Bump { scale: f64 },
    /// `eta(x / outer) - eta(x / inner)` restricted to a sign; needs `inner < outer`.
    Annulus { inner: f64, outer: f64, sign: Sign },
    /// `zeta(x)`.
    Angular,
    /// Smooth step `step((x - from) / (to - from))`.
    Ramp { from: f64, to: f64 },
}

/// A compactly supported (or eventually constant) smooth scalar function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothCutoff {
    pub kind: CutoffKind,
}

impl SmoothCutoff {
    pub fn bump(scale: f64) -> Self {
        SmoothCutoff { kind: CutoffKind::Bump { scale } }
    }

    /// The standard bump `eta`.
    pub fn eta() -> Self {
        Self::bump(1.0)
    }

    /// `eta(x / outer) - eta(x / inner)`, which is 1 on `2 inner <= |x| <= outer`
    /// and supported in `inner <= |x| <= 2 outer`.
    pub fn annulus(inner: f64, outer: f64) -> Self {
        assert!(inner > 0.0 && inner < outer, "annulus needs 0 < inner < outer");
        SmoothCutoff { kind: CutoffKind::Annulus { inner, outer, sign: Sign::Both } }
    }

    pub fn with_sign(self, sign: Sign) -> Self {
        match self.kind {
            CutoffKind::Annulus { inner, outer, .. } => {
                SmoothCutoff { kind: CutoffKind::Annulus { inner, outer, sign } }
            }
            _ => self,
        }
    }

    pub fn angular() -> Self {
        SmoothCutoff { kind: CutoffKind::Angular }
    }

    pub fn ramp(from: f64, to: f64) -> Self {
        SmoothCutoff { kind: CutoffKind::Ramp { from, to } }
    }

    /// Value (order 0) or derivative of the given order at `x`.
    pub fn eval(&self, x: f64, order: usize) -> f64 {
        match self.kind {
            CutoffKind::Bump { scale } => eta(x / scale, order) / scale.powi(order as i32),
            CutoffKind::Annulus { inner, outer, sign } => {
                let keep = match sign {
                    Sign::Both => true,
                    Sign::Positive => x > 0.0,
                    Sign::Negative => x < 0.0,
                };
                if !keep {
                    return 0.0;
                }
                eta(x / outer, order) / outer.powi(order as i32)
                    - eta(x / inner, order) / inner.powi(order as i32)
            }
            CutoffKind::Angular => zeta(x, order),
            CutoffKind::Ramp { from, to } => {
                let w = to - from;
                step((x - from) / w, order) / w.powi(order as i32)
            }
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x, 0)
    }

    /// Closed interval outside of which the cutoff vanishes identically.
    /// Ramps are eventually 1, so they report an unbounded right end.
    pub fn support(&self) -> (f64, f64) {
        match self.kind {
            CutoffKind::Bump { scale } => (-2.0 * scale, 2.0 * scale),
            CutoffKind::Annulus { outer, sign, .. } => match sign {
                Sign::Positive => (0.0, 2.0 * outer),
                Sign::Negative => (-2.0 * outer, 0.0),
                Sign::Both => (-2.0 * outer, 2.0 * outer),
            },
            CutoffKind::Angular => (-1.0, 1.0),
            CutoffKind::Ramp { from, .. } => (from, f64::INFINITY),
        }
    }

    pub fn value_at_zero(&self) -> f64 {
        self.value(0.0)
    }
}

/// Littlewood-Paley piece `beta^k(r) = eta(2^-k r) - eta(2^{-k+1} r)`; `k = 0` gives `eta`.
pub fn littlewood_paley(k: u32) -> SmoothCutoff {
    if k == 0 {
        SmoothCutoff::eta()
    } else {
        let outer = 2f64.powi(k as i32);
        SmoothCutoff::annulus(outer / 2.0, outer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_is_normalised() {
        let n = 20_000;
        let h = 2.0 / n as f64;
        let total: f64 = (0..n).map(|i| profile(-1.0 + (i as f64 + 0.5) * h, 0)).sum::<f64>() * h;
        assert!((total - 1.0).abs() < 1e-9, "{total}");
        assert_eq!(profile_cdf(1.0, 0), 1.0);
        assert!((profile_cdf(0.0, 0) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn eta_plateau_and_support() {
        for &x in &[-1.0, -0.3, 0.0, 0.99, 1.0] {
            assert_eq!(eta(x, 0), 1.0);
        }
        for &x in &[-2.0, 2.0, 2.5, -7.0] {
            assert_eq!(eta(x, 0), 0.0);
        }
        let mid = eta(1.5, 0);
        assert!((mid - 0.5).abs() < 1e-14, "{mid}");
        assert!((eta(1.3, 0) - eta(-1.3, 0)).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-5;
        for &x in &[-1.7, -1.2, 1.1, 1.45, 1.8] {
            for order in 0..3 {
                let fd = (eta(x + h, order) - eta(x - h, order)) / (2.0 * h);
                let exact = eta(x, order + 1);
                assert!((fd - exact).abs() < 1e-5 * (1.0 + exact.abs()), "x={x} order={order}");
            }
        }
        for &x in &[0.2, 0.5, 0.77] {
            let fd = (step(x + h, 0) - step(x - h, 0)) / (2.0 * h);
            assert!((fd - step(x, 1)).abs() < 1e-7);
        }
    }

    #[test]
    fn zeta_translates_sum_to_one() {
        for i in 0..200 {
            let x = -3.0 + 0.0371 * i as f64;
            let s: f64 = (-6..=6).map(|k| zeta(x - k as f64, 0)).sum();
            assert!((s - 1.0).abs() < 1e-14, "x={x} sum={s}");
        }
        assert_eq!(zeta(1.0, 0), 0.0);
        assert_eq!(zeta(-1.0, 0), 0.0);
        assert!((zeta(0.3, 0) - zeta(-0.3, 0)).abs() < 1e-15);
    }

    #[test]
    fn littlewood_paley_telescopes() {
        for i in 0..1000 {
            let r = 0.013 * i as f64 * (1.0 + i as f64 / 37.0);
            let kmax = 9;
            let s: f64 = (0..=kmax).map(|k| littlewood_paley(k).value(r)).sum();
            let target = eta(r / 2f64.powi(kmax as i32), 0);
            assert!((s - target).abs() < 1e-14, "r={r}");
        }
        let b = littlewood_paley(5);
        assert!(b.value(3.0 * 2f64.powi(3)) > 0.0);
        assert_eq!(b.value(2f64.powi(7)), 0.0);
        for &r in &[3.0, 17.0, 40.0, 63.0] {
            assert_eq!(b.value(r), littlewood_paley(1).value(r / 16.0));
        }
    }

    #[test]
    fn signed_annulus_splits() {
        let b = SmoothCutoff::annulus(0.25, 1.0);
        let p = b.with_sign(Sign::Positive);
        let n = b.with_sign(Sign::Negative);
        for &x in &[-1.9, -0.3, 0.0, 0.26, 1.7] {
            assert!((p.value(x) + n.value(x) - b.value(x)).abs() < 1e-15);
        }
    }
}
