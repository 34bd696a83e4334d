//! Implicitly defined roots of `s ↦ <γ^(j)(s), ξ>`, the quantities built
//! from them, and the cone of frequencies with the slowest decay.

use crate::curve::{Curve, MAX_DIM};
use crate::error::{Error, Result};
use crate::frenet::frenet_frame;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Frequencies with `ξ_n > 0` and `|ξ_j| <= ratio * ξ_n` for `j < n`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Admissible {
    pub ratio: f64,
}

impl Default for Admissible {
    fn default() -> Self {
        Self { ratio: 0.3 }
    }
}

impl Admissible {
    pub fn check(&self, xi: &[f64]) -> Result<()> {
        let n = xi.len();
        let last = xi[n - 1];
        if !(last > 0.0) {
            return Err(Error::Localisation(format!("last coordinate {last} is not positive")));
        }
        for (j, v) in xi[..n - 1].iter().enumerate() {
            if v.abs() > self.ratio * last {
                return Err(Error::Localisation(format!(
                    "|ξ_{}| = {:.3e} exceeds {} ξ_n = {:.3e}",
                    j + 1,
                    v.abs(),
                    self.ratio,
                    self.ratio * last
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn norm(xi: &[f64]) -> f64 {
    xi.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Root of an increasing function on `[a, b]`: bisection to a small bracket,
/// then Newton steps kept inside the bracket. `f` returns `(value, slope)`.
pub(crate) fn monotone_root<F>(f: F, a: f64, b: f64, tol: f64, what: &str) -> Result<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    let (fa, _) = f(a);
    let (fb, _) = f(b);
    if fa > 0.0 || fb < 0.0 {
        return Err(Error::RootMissing(format!("{what}: no sign change on [{a}, {b}] ({fa:.3e}, {fb:.3e})")));
    }
    let (mut lo, mut hi) = (a, b);
    let mut x = 0.5 * (a + b);
    for _ in 0..60 {
        let (v, d) = f(x);
        if v.abs() <= tol {
            return Ok(x);
        }
        if v < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = if d > 0.0 { x - v / d } else { f64::NAN };
        x = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * (1.0 + x.abs()) {
            break;
        }
    }
    let (v, _) = f(x);
    if v.abs() <= tol * 16.0 {
        Ok(x)
    } else {
        Err(Error::Convergence(format!("{what}: residual {v:.3e} after 60 iterations")))
    }
}

/// Root of `s ↦ <γ^(order)(s), ξ>` on `[a, b]`, assuming `<γ^(order+1), ξ>`
/// keeps one sign there.
pub fn derivative_root(curve: &Curve, xi: &[f64], order: usize, a: f64, b: f64) -> Result<f64> {
    let tol = 1e-13 * norm(xi);
    let sign = if curve.pairing(0.5 * (a + b), order + 1, xi) >= 0.0 { 1.0 } else { -1.0 };
    monotone_root(
        |s| (sign * curve.pairing(s, order, xi), sign * curve.pairing(s, order + 1, xi)),
        a,
        b,
        tol,
        &format!("<γ^({order}), ξ>"),
    )
}

/// Root of `<γ^(3), ξ>` on `[-1, 1]` (needs `n >= 4`).
pub fn theta2(curve: &Curve, xi: &[f64], region: &Admissible) -> Result<f64> {
    region.check(xi)?;
    derivative_root(curve, xi, 3, -1.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Theta1 {
    /// `u_2 > 0`: `<γ'', ξ>` has no root.
    None,
    /// `|u_2|` within the degenerate band: double root at `θ_2`.
    Double(f64),
    /// Ordered pair `θ_1^- < θ_1^+`.
    Pair(f64, f64),
}

/// Roots of the convex function `<γ'', ξ>` on `[-1, 1]`.
pub fn theta1_pm(curve: &Curve, xi: &[f64], region: &Admissible) -> Result<Theta1> {
    let t2 = theta2(curve, xi, region)?;
    theta1_from(curve, xi, t2)
}

fn theta1_from(curve: &Curve, xi: &[f64], t2: f64) -> Result<Theta1> {
    let nrm = norm(xi);
    let u2 = curve.pairing(t2, 2, xi);
    if u2.abs() <= 1e-12 * nrm {
        return Ok(Theta1::Double(t2));
    }
    if u2 > 0.0 {
        return Ok(Theta1::None);
    }
    if curve.pairing(-1.0, 2, xi) <= 0.0 || curve.pairing(1.0, 2, xi) <= 0.0 {
        return Err(Error::OutOfWindow(format!("roots of <γ'', ξ> leave [-1, 1] (u_2 = {u2:.3e})")));
    }
    let tol = 1e-13 * nrm;
    let minus = monotone_root(|s| (-curve.pairing(s, 2, xi), -curve.pairing(s, 3, xi)), -1.0, t2, tol, "θ_1^-")?;
    let plus = monotone_root(|s| (curve.pairing(s, 2, xi), curve.pairing(s, 3, xi)), t2, 1.0, tol, "θ_1^+")?;
    Ok(Theta1::Pair(minus, plus))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Minus,
    Plus,
}

/// Everything derived from the roots of `<γ''', ξ>` and `<γ'', ξ>`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConeRoots {
    pub theta2: f64,
    /// `<γ' ∘ θ_2, ξ>`
    pub u12: f64,
    /// `<γ'' ∘ θ_2, ξ>`
    pub u2: f64,
    pub theta1: Theta1,
    /// `<γ' ∘ θ_1^±, ξ>` as `(minus, plus)`.
    pub u1_pm: Option<(f64, f64)>,
    /// `<γ''' ∘ θ_1^±, ξ>` as `(minus, plus)`.
    pub u31_pm: Option<(f64, f64)>,
    /// Branch with the smaller `|u_1^±|`; ties go to `Plus`.
    pub branch: Option<Branch>,
    pub tie: bool,
    pub u1: Option<f64>,
    pub theta1_sel: Option<f64>,
    pub u31: Option<f64>,
}

impl ConeRoots {
    pub fn degenerate(&self) -> bool {
        matches!(self.theta1, Theta1::Double(_))
    }
}

pub fn u_report(curve: &Curve, xi: &[f64], region: &Admissible) -> Result<ConeRoots> {
    let t2 = theta2(curve, xi, region)?;
    cone_roots_at(curve, xi, t2)
}

/// Same as [`u_report`] without the admissibility check; used on rescaled
/// curves and frequencies where the caller has localised already.
pub fn cone_roots_unchecked(curve: &Curve, xi: &[f64]) -> Result<ConeRoots> {
    let t2 = derivative_root(curve, xi, 3, -1.0, 1.0)?;
    cone_roots_at(curve, xi, t2)
}

fn cone_roots_at(curve: &Curve, xi: &[f64], t2: f64) -> Result<ConeRoots> {
    let u12 = curve.pairing(t2, 1, xi);
    let u2 = curve.pairing(t2, 2, xi);
    let theta1 = theta1_from(curve, xi, t2)?;
    let (mut u1_pm, mut u31_pm, mut branch, mut tie, mut u1, mut sel, mut u31) = (None, None, None, false, None, None, None);
    match theta1 {
        Theta1::Pair(m, p) => {
            let um = curve.pairing(m, 1, xi);
            let up = curve.pairing(p, 1, xi);
            let vm = curve.pairing(m, 3, xi);
            let vp = curve.pairing(p, 3, xi);
            u1_pm = Some((um, up));
            u31_pm = Some((vm, vp));
            tie = um.abs() == up.abs();
            let b = if um.abs() < up.abs() { Branch::Minus } else { Branch::Plus };
            branch = Some(b);
            let (uu, tt, vv) = match b {
                Branch::Minus => (um, m, vm),
                Branch::Plus => (up, p, vp),
            };
            u1 = Some(uu);
            sel = Some(tt);
            u31 = Some(vv);
        }
        Theta1::Double(t) => {
            let u = curve.pairing(t, 1, xi);
            let v = curve.pairing(t, 3, xi);
            u1_pm = Some((u, u));
            u31_pm = Some((v, v));
            branch = Some(Branch::Plus);
            tie = true;
            u1 = Some(u);
            sel = Some(t);
            u31 = Some(v);
        }
        Theta1::None => {}
    }
    Ok(ConeRoots { theta2: t2, u12, u2, theta1, u1_pm, u31_pm, branch, tie, u1, theta1_sel: sel, u31 })
}

/// The three ratios of the size relations between root quantities, each
/// evaluated at `ξ/|ξ|`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SizeRatios {
    /// `|θ_1^+ - θ_1^-| / |u_2|^{1/2}`
    pub root_gap: f64,
    /// `max_± |θ_1^± - θ_2| / |u_2|^{1/2}`
    pub root_offset: f64,
    /// `max_± |u_{3,1}^±| / |u_2|^{1/2}`
    pub third_order: f64,
    /// `max_± |u_{1,2} - u_1^±| / |u_2|^{3/2}`
    pub u12_gap: f64,
    /// `|u_1^+ - u_1^-| / |u_2|^{3/2}`
    pub u1_gap: f64,
}

pub fn size_ratios(roots: &ConeRoots, xi_norm: f64) -> Option<SizeRatios> {
    let Theta1::Pair(m, p) = roots.theta1 else { return None };
    let (um, up) = roots.u1_pm?;
    let (vm, vp) = roots.u31_pm?;
    let u2 = (roots.u2 / xi_norm).abs();
    let h = u2.sqrt();
    let h3 = u2 * h;
    Some(SizeRatios {
        root_gap: (p - m).abs() / h,
        root_offset: (m - roots.theta2).abs().max((p - roots.theta2).abs()) / h,
        third_order: (vm.abs().max(vp.abs()) / xi_norm) / h,
        u12_gap: ((roots.u12 - um).abs().max((roots.u12 - up).abs()) / xi_norm) / h3,
        u1_gap: ((up - um).abs() / xi_norm) / h3,
    })
}

/// One sampled frequency of a size-relation audit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SizeRecord {
    pub xi: Vec<f64>,
    pub theta2: f64,
    pub theta1_pm: (f64, f64),
    pub u2: f64,
    pub u12: f64,
    pub u1_pm: (f64, f64),
    pub ratios: SizeRatios,
    /// Largest root residual divided by `|ξ|`.
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SizeRelationAudit {
    pub accepted: usize,
    pub attempts: usize,
    /// Draws where a root finder failed.
    pub errors: usize,
    /// Accepted draws with a root residual above `1e-12 |ξ|`.
    pub residual_failures: usize,
    pub max_residual: f64,
    pub root_gap: (f64, f64),
    pub root_offset: (f64, f64),
    pub third_order: (f64, f64),
    pub u12_gap: (f64, f64),
    pub u1_gap: (f64, f64),
    pub records: Vec<SizeRecord>,
}

fn widen(r: &mut (f64, f64), v: f64) {
    r.0 = r.0.min(v);
    r.1 = r.1.max(v);
}

/// Draws `ξ = (ξ', 1)` with `ξ'` uniform in `[-spread, spread]^{n-1}`, keeps
/// those with `u_2 < 0` outside the degenerate band, and collects the size
/// ratios until `samples` are accepted.
pub fn size_relation_audit(curve: &Curve, spread: f64, samples: usize, seed: u64, keep: bool) -> Result<SizeRelationAudit> {
    use rand::{Rng, SeedableRng};
    let n = curve.dim();
    if n != 4 {
        return Err(Error::InvalidParameter(format!("size relations are stated for n = 4, got n = {n}")));
    }
    if !(spread > 0.0 && spread < 1.0) {
        return Err(Error::InvalidParameter(format!("spread {spread} must lie in (0, 1)")));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let empty = (f64::INFINITY, 0.0);
    let mut out = SizeRelationAudit {
        accepted: 0,
        attempts: 0,
        errors: 0,
        residual_failures: 0,
        max_residual: 0.0,
        root_gap: empty,
        root_offset: empty,
        third_order: empty,
        u12_gap: empty,
        u1_gap: empty,
        records: Vec::new(),
    };
    let cap = samples.saturating_mul(50).max(1000);
    while out.accepted < samples && out.attempts < cap {
        out.attempts += 1;
        let mut xi: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-spread..spread)).collect();
        xi.push(1.0);
        let nrm = norm(&xi);
        let roots = match cone_roots_unchecked(curve, &xi) {
            Ok(r) => r,
            Err(_) => {
                out.errors += 1;
                continue;
            }
        };
        let Theta1::Pair(m, p) = roots.theta1 else { continue };
        let Some(ratios) = size_ratios(&roots, nrm) else { continue };
        let residual = [curve.pairing(roots.theta2, 3, &xi), curve.pairing(m, 2, &xi), curve.pairing(p, 2, &xi)]
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()))
            / nrm;
        out.accepted += 1;
        out.max_residual = out.max_residual.max(residual);
        if residual > 1e-12 {
            out.residual_failures += 1;
        }
        widen(&mut out.root_gap, ratios.root_gap);
        widen(&mut out.root_offset, ratios.root_offset);
        widen(&mut out.third_order, ratios.third_order);
        widen(&mut out.u12_gap, ratios.u12_gap);
        widen(&mut out.u1_gap, ratios.u1_gap);
        if keep {
            out.records.push(SizeRecord {
                xi,
                theta2: roots.theta2,
                theta1_pm: (m, p),
                u2: roots.u2,
                u12: roots.u12,
                u1_pm: roots.u1_pm.unwrap_or((f64::NAN, f64::NAN)),
                ratios,
                residual,
            });
        }
    }
    if out.accepted < samples {
        return Err(Error::InsufficientData(format!("{} of {samples} samples accepted after {} draws", out.accepted, out.attempts)));
    }
    Ok(out)
}

/// Point `Γ(τ)` on the worst-decay cone: `Γ_n = 1`, `Γ_{n-1} = -τ`, and
/// `<γ^(j)(s), Γ> = 0` for `1 <= j <= n-1` at `s = θ(Γ(τ))`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WorstConePoint {
    pub tau: f64,
    pub gamma: Vec<f64>,
    pub s: f64,
    pub residual: f64,
}

pub const DEFAULT_TAU_MAX: f64 = 0.3;

pub fn worst_cone(curve: &Curve, tau: f64, tau_max: f64) -> Result<WorstConePoint> {
    if tau.abs() > tau_max {
        return Err(Error::InvalidParameter(format!("|τ| = {} exceeds τ_max = {tau_max}", tau.abs())));
    }
    let n = curve.dim();
    // moment-curve closed form as the starting point
    let mut guess = vec![0.0; n - 1];
    guess[0] = tau;
    for i in 1..=n - 2 {
        guess[i] = (-tau).powi((n - i) as i32) / factorial(n - i);
    }
    match cone_newton(curve, tau, &guess) {
        Ok(p) => Ok(p),
        Err(_) => {
            let steps = 32;
            let mut x = vec![0.0; n - 1];
            let mut last = None;
            for k in 1..=steps {
                let t = tau * k as f64 / steps as f64;
                let p = cone_newton(curve, t, &x)
                    .map_err(|e| Error::Convergence(format!("continuation failed at τ = {t}: {e}")))?;
                x[0] = p.s;
                x[1..].copy_from_slice(&p.gamma[..n - 2]);
                last = Some(p);
            }
            last.ok_or_else(|| Error::Convergence("no continuation steps".into()))
        }
    }
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|k| k as f64).product()
}

/// Newton on `(s, ξ_1, ..., ξ_{n-2})`.
fn cone_newton(curve: &Curve, tau: f64, start: &[f64]) -> Result<WorstConePoint> {
    let n = curve.dim();
    let m = n - 1;
    let mut x = DVector::from_column_slice(start);
    let build = |x: &DVector<f64>| -> Vec<f64> {
        let mut xi = vec![0.0; n];
        xi[..n - 2].copy_from_slice(&x.as_slice()[1..]);
        xi[n - 2] = -tau;
        xi[n - 1] = 1.0;
        xi
    };
    let resid = |x: &DVector<f64>| -> DVector<f64> {
        let xi = build(x);
        DVector::from_fn(m, |j, _| curve.pairing(x[0], j + 1, &xi))
    };
    let mut r = resid(&x);
    for _ in 0..50 {
        if r.amax() <= 1e-14 {
            break;
        }
        let xi = build(&x);
        let mut jac = DMatrix::zeros(m, m);
        let mut g = [0.0; MAX_DIM];
        for j in 0..m {
            jac[(j, 0)] = curve.pairing(x[0], j + 2, &xi);
            curve.eval_into(x[0], j + 1, &mut g);
            for i in 0..n - 2 {
                jac[(j, i + 1)] = g[i];
            }
        }
        let step = jac.lu().solve(&r).ok_or_else(|| Error::Convergence("singular Jacobian".into()))?;
        let mut t = 1.0;
        loop {
            let trial = &x - &step * t;
            if !curve.contains(trial[0]) {
                t *= 0.5;
            } else {
                let rt = resid(&trial);
                if rt.amax() < r.amax() || t < 1e-4 {
                    x = trial;
                    r = rt;
                    break;
                }
                t *= 0.5;
            }
            if t < 1e-6 {
                return Err(Error::Convergence("line search stalled".into()));
            }
        }
    }
    let res = r.amax();
    if !(res <= 1e-12) {
        return Err(Error::Convergence(format!("worst-cone residual {res:.3e}")));
    }
    Ok(WorstConePoint { tau, gamma: build(&x), s: x[0], residual: res })
}

/// Root `θ(ξ)` of `<γ^(n-1), ξ>` on `[-1, 1]`.
pub fn theta_top(curve: &Curve, xi: &[f64]) -> Result<f64> {
    derivative_root(curve, xi, curve.dim() - 1, -1.0, 1.0)
}

/// `φ(ξ) = <γ ∘ θ(ξ), ξ>` and its gradient
/// `γ∘θ + <γ'∘θ, ξ> ∂θ`, with `∂θ = -γ^(n-1)∘θ / <γ^(n)∘θ, ξ>`.
pub fn phi_and_gradient(curve: &Curve, xi: &[f64]) -> Result<(f64, f64, Vec<f64>)> {
    let n = curve.dim();
    let th = theta_top(curve, xi)?;
    let g0 = curve.derivative(th, 0);
    let phi: f64 = g0.iter().zip(xi).map(|(a, b)| a * b).sum();
    let u1 = curve.pairing(th, 1, xi);
    let denom = curve.pairing(th, n, xi);
    let gm = curve.derivative(th, n - 1);
    let grad = (0..n).map(|i| g0[i] - u1 * gm[i] / denom).collect();
    Ok((th, phi, grad))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WolffCentre {
    pub nu: i64,
    pub tau: f64,
    /// `λ Γ(ν λ^{-1/n})`
    pub xi: Vec<f64>,
    pub theta: f64,
    pub phi: f64,
    /// `-∇φ(ξ^ν)`
    pub x: Vec<f64>,
}

pub fn phi_and_xnu(curve: &Curve, lambda: f64, nu: i64, eps: f64) -> Result<WolffCentre> {
    let nf = curve.dim() as f64;
    let limit = eps * lambda.powf(1.0 / nf);
    if (nu as f64).abs() > limit + 1e-9 {
        return Err(Error::InvalidParameter(format!("|ν| = {} exceeds ε λ^(1/n) = {limit:.3}", nu.abs())));
    }
    let tau = nu as f64 * lambda.powf(-1.0 / nf);
    let cone = worst_cone(curve, tau, f64::INFINITY)?;
    let xi: Vec<f64> = cone.gamma.iter().map(|v| v * lambda).collect();
    let (theta, phi, grad) = phi_and_gradient(curve, &xi)?;
    Ok(WolffCentre { nu, tau, xi, theta, phi, x: grad.iter().map(|v| -v).collect() })
}

/// One frequency from a decomposition piece with its scale data.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScaledSample {
    pub xi: Vec<f64>,
    pub k: u32,
    pub ell: u32,
    pub s_mu: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct DerivativeBoundReport {
    /// `[quantity][j-1][N-1]` maximum normalised ratio; quantities are
    /// `θ_2`, `u_2`, `u_{1,2}`.
    pub max_ratio: [[[f64; 2]; 4]; 3],
    pub samples: usize,
    pub skipped: usize,
    pub notes: Vec<String>,
}

impl DerivativeBoundReport {
    pub fn overall(&self) -> f64 {
        self.max_ratio.iter().flatten().flatten().cloned().fold(0.0, f64::max)
    }
}

/// Finite-difference derivatives of `θ_2`, `u_2`, `u_{1,2}` along the
/// frame directions `e_j(s_μ)`, normalised by the predicted scaling
/// `2^{-(k-(4-j)ℓ)N}` and the quantity weights `2^ℓ`, `2^{-k+2ℓ}`,
/// `2^{-k+3ℓ}`.
pub fn derivative_bound_audit(curve: &Curve, samples: &[ScaledSample]) -> Result<DerivativeBoundReport> {
    if curve.dim() != 4 {
        return Err(Error::InvalidDimension(curve.dim()));
    }
    let mut rep = DerivativeBoundReport::default();
    let quantities = |xi: &[f64]| -> Result<[f64; 3]> {
        let t2 = derivative_root(curve, xi, 3, -1.0, 1.0)?;
        Ok([t2, curve.pairing(t2, 2, xi), curve.pairing(t2, 1, xi)])
    };
    for smp in samples {
        let frame = frenet_frame(curve, smp.s_mu)?;
        let k = smp.k as i32;
        let l = smp.ell as i32;
        let weights = [2f64.powi(l), 2f64.powi(-k + 2 * l), 2f64.powi(-k + 3 * l)];
        let base = quantities(&smp.xi)?;
        let mut ok = true;
        for j in 1..=4usize {
            let scale = 2f64.powi(k - (4 - j as i32) * l);
            let e = frame.column(j - 1);
            for nd in 1..=2usize {
                let h = scale * if nd == 1 { 1e-4 } else { 1e-3 };
                if h < 1e-9 * norm(&smp.xi) {
                    rep.notes.push(format!("step underflow at k={k}, ℓ={l}, j={j}"));
                    ok = false;
                    continue;
                }
                let shift = |t: f64| -> Vec<f64> { smp.xi.iter().zip(e.iter()).map(|(a, b)| a + t * b).collect() };
                let (p, m) = match (quantities(&shift(h)), quantities(&shift(-h))) {
                    (Ok(p), Ok(m)) => (p, m),
                    _ => {
                        ok = false;
                        continue;
                    }
                };
                for q in 0..3 {
                    let d = if nd == 1 { (p[q] - m[q]) / (2.0 * h) } else { (p[q] - 2.0 * base[q] + m[q]) / (h * h) };
                    let ratio = weights[q] * d.abs() * scale.powi(nd as i32);
                    let slot = &mut rep.max_ratio[q][j - 1][nd - 1];
                    *slot = slot.max(ratio);
                }
            }
        }
        if ok {
            rep.samples += 1;
        } else {
            rep.skipped += 1;
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{moment_curve, Perturbation, Shape};

    fn sin_curve() -> Curve {
        Curve::perturbed_moment(4, vec![Perturbation::new(3, 0.005, Shape::Sine { omega: 1.0, phase: 0.0 })]).unwrap()
    }

    #[test]
    fn theta2_closed_form() {
        let g = moment_curve(4).unwrap();
        let r = Admissible::default();
        assert!(theta2(&g, &[0.0, -0.02, 0.0, 1.0], &r).unwrap().abs() < 1e-15);
        assert!((theta2(&g, &[0.1, 0.1, 0.3, 1.0], &r).unwrap() + 0.3).abs() < 1e-14);
        let xi = [0.0, 0.0, 0.2, 1.0];
        let t = theta2(&sin_curve(), &xi, &r).unwrap();
        assert!(sin_curve().pairing(t, 3, &xi).abs() <= 1e-12 * norm(&xi));
    }

    #[test]
    fn theta2_errors() {
        let g = moment_curve(4).unwrap();
        let r = Admissible::default();
        assert!(matches!(theta2(&g, &[0.0, 0.0, 0.5, 1.0], &r), Err(Error::Localisation(_))));
        assert!(matches!(theta2(&g, &[0.0, 0.0, 0.0, -1.0], &r), Err(Error::Localisation(_))));
        let wide = Admissible { ratio: 10.0 };
        assert!(matches!(theta2(&g, &[0.0, 0.0, 2.0, 1.0], &wide), Err(Error::RootMissing(_))));
    }

    #[test]
    fn theta1_examples() {
        let g = moment_curve(4).unwrap();
        let r = Admissible::default();
        match theta1_pm(&g, &[0.0, -0.02, 0.0, 1.0], &r).unwrap() {
            Theta1::Pair(m, p) => {
                assert!((m + 0.2).abs() < 1e-12 && (p - 0.2).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(theta1_pm(&g, &[0.0, 0.02, 0.0, 1.0], &r).unwrap(), Theta1::None);
        // roots of -0.02 + 0.1 s + s^2/2
        let d = (0.01f64 + 0.04).sqrt();
        let (want_m, want_p) = (-0.1 - d, -0.1 + d);
        match theta1_pm(&g, &[0.0, -0.02, 0.1, 1.0], &r).unwrap() {
            Theta1::Pair(m, p) => {
                assert!((m - want_m).abs() < 1e-12 && (p - want_p).abs() < 1e-12);
                assert!((m + 0.323607).abs() < 1e-6 && (p - 0.123607).abs() < 1e-6);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(theta1_pm(&g, &[0.0, 0.0, 0.0, 1.0], &r).unwrap(), Theta1::Double(_)));
    }

    #[test]
    fn u_report_example() {
        let g = moment_curve(4).unwrap();
        let xi = [0.0, -0.02, 0.0, 1.0];
        let rep = u_report(&g, &xi, &Admissible::default()).unwrap();
        assert!((rep.u2 + 0.02).abs() < 1e-15);
        assert!(rep.u12.abs() < 1e-15);
        let (um, up) = rep.u1_pm.unwrap();
        // θ ξ_2 + θ^3/6 at θ = ±0.2
        assert!((up + 0.0026666666666667).abs() < 1e-12);
        assert!((um - 0.0026666666666667).abs() < 1e-12);
        assert!(rep.tie);
        assert_eq!(rep.branch, Some(Branch::Plus));
        let ratios = size_ratios(&rep, norm(&xi)).unwrap();
        let xn = norm(&xi);
        let u2n = 0.02 / xn;
        let want_u1 = 0.0053333333333333 / xn / u2n.powf(1.5);
        assert!((ratios.u1_gap - want_u1).abs() < 1e-9);
        assert!((ratios.u1_gap - 1.886).abs() < 5e-3);
        assert!((ratios.root_gap - 0.4 / u2n.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn size_relations_hold_on_samples() {
        let curves = [
            moment_curve(4).unwrap(),
            sin_curve(),
            Curve::perturbed_moment(4, vec![Perturbation::new(2, 0.003, Shape::Sine { omega: 2.0, phase: 0.4 }).flattened()]).unwrap(),
        ];
        for c in &curves {
            let a = size_relation_audit(c, 0.05, 500, 3, false).unwrap();
            assert_eq!(a.errors + a.residual_failures, 0, "{a:?}");
            for (lo, hi) in [a.root_gap, a.u1_gap] {
                assert!(lo >= 0.1 && hi <= 10.0, "{a:?}");
            }
            assert!(a.u12_gap.1 <= 10.0);
        }
    }

    #[test]
    fn worst_cone_moment() {
        let g = moment_curve(4).unwrap();
        let p = worst_cone(&g, 0.2, DEFAULT_TAU_MAX).unwrap();
        let want = [-0.008 / 6.0, 0.02, -0.2, 1.0];
        for i in 0..4 {
            assert!((p.gamma[i] - want[i]).abs() < 1e-12);
        }
        assert!((p.s - 0.2).abs() < 1e-12);
        let g3 = moment_curve(3).unwrap();
        let p = worst_cone(&g3, 0.1, DEFAULT_TAU_MAX).unwrap();
        for (a, b) in p.gamma.iter().zip([0.005, -0.1, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let flat = Perturbation::new(3, 0.005, Shape::Sine { omega: 1.0, phase: 0.0 }).flattened();
        let p = worst_cone(&Curve::perturbed_moment(4, vec![flat]).unwrap(), 0.0, DEFAULT_TAU_MAX).unwrap();
        assert!(p.s.abs() < 1e-12);
        assert!((p.gamma[0]).abs() < 1e-12 && (p.gamma[1]).abs() < 1e-12);
        assert!(worst_cone(&g, 0.5, DEFAULT_TAU_MAX).is_err());
    }

    #[test]
    fn worst_cone_residuals_on_perturbed_curve() {
        let c = sin_curve();
        for tau in [-0.3, -0.1, 0.15, 0.3] {
            let p = worst_cone(&c, tau, DEFAULT_TAU_MAX).unwrap();
            for j in 1..4 {
                assert!(c.pairing(p.s, j, &p.gamma).abs() <= 1e-12);
            }
            assert_eq!(p.gamma[2], -tau);
        }
    }

    #[test]
    fn xnu_moment_curve() {
        let g = moment_curve(4).unwrap();
        let lam = 4096.0;
        for nu in [-3i64, 0, 2, 5] {
            let c = phi_and_xnu(&g, lam, nu, 1.0).unwrap();
            let want = g.point(nu as f64 * lam.powf(-0.25));
            for i in 0..4 {
                assert!((c.x[i] + want[i]).abs() < 1e-12);
            }
        }
        assert!(phi_and_xnu(&g, lam, 9, 1.0).is_err());
    }

    #[test]
    fn phi_gradient_matches_differences() {
        let c = sin_curve();
        let xi = [0.01, -0.03, 0.12, 1.0];
        let (_, _, grad) = phi_and_gradient(&c, &xi).unwrap();
        let h = 1e-5;
        for i in 0..4 {
            let mut p = xi;
            let mut m = xi;
            p[i] += h;
            m[i] -= h;
            let fd = (phi_and_gradient(&c, &p).unwrap().1 - phi_and_gradient(&c, &m).unwrap().1) / (2.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-6 * grad[i].abs().max(1e-3), "{i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn homogeneity() {
        let c = sin_curve();
        let xi = [0.02, -0.05, 0.1, 1.0];
        let r = Admissible::default();
        let a = u_report(&c, &xi, &r).unwrap();
        for t in [2.0, 10.0] {
            let s: Vec<f64> = xi.iter().map(|v| v * t).collect();
            let b = u_report(&c, &s, &r).unwrap();
            assert!((a.theta2 - b.theta2).abs() <= 1e-10 * a.theta2.abs().max(1e-3));
            assert!((b.u2 - t * a.u2).abs() <= 1e-10 * (t * a.u2).abs());
        }
    }
}
