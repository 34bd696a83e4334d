//! Oscillatory integrals along curves: Fourier transform of the arc
//! measure, multipliers of symbols, and the model integrals whose leading
//! term is `α_n λ^{-1/n}`.

use crate::curve::{Curve, MAX_DIM};
use crate::cutoff::SmoothCutoff;
use crate::error::{Error, Result};
use crate::quad::gauss;
use crate::stats::LinearFit;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// `∫_R exp(i s^n) ds`.
pub fn alpha_n(n: usize) -> Result<Complex64> {
    if n < 2 {
        return Err(Error::InvalidDimension(n));
    }
    let nf = n as f64;
    let g = statrs::function::gamma::gamma(1.0 / nf);
    let m = 2.0 / nf * g;
    Ok(if n % 2 == 1 {
        Complex64::new(m * ((nf - 1.0) * PI / (2.0 * nf)).sin(), 0.0)
    } else {
        Complex64::from_polar(m, PI / (2.0 * nf))
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuadOptions {
    /// Absolute target for adaptive rules.
    pub tol: f64,
    /// Node density of the reference rule at the highest local frequency.
    pub nodes_per_oscillation: f64,
    /// Richardson safety factor applied to reference error estimates.
    pub safety: f64,
    pub max_evals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { tol: 1e-10, nodes_per_oscillation: 20.0, safety: 2.0, max_evals: 50_000_000 }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: Complex64,
    pub error: f64,
    pub evals: usize,
}

const PANEL_NODES: usize = 20;

/// `∫_a^b amp(s) exp(i phase(s)) ds` on uniform panels of 20 Gauss nodes,
/// sized so the fastest oscillation `max_freq` gets `nodes_per_oscillation`
/// nodes. Repeated with twice the panels; the difference times `safety` is
/// the error estimate.
pub fn reference_rule<F>(a: f64, b: f64, max_freq: f64, opts: &QuadOptions, f: F) -> Result<QuadResult>
where
    F: Fn(f64) -> Complex64,
{
    let osc = (b - a) * max_freq / (2.0 * PI);
    let panels = ((osc * opts.nodes_per_oscillation / PANEL_NODES as f64).ceil() as usize).max(64);
    if 3 * panels * PANEL_NODES > opts.max_evals {
        return Err(Error::Accuracy { target: opts.tol, achieved: f64::INFINITY });
    }
    let i1 = uniform(a, b, panels, &f);
    let i2 = uniform(a, b, 2 * panels, &f);
    Ok(QuadResult { value: i2, error: opts.safety * (i2 - i1).norm(), evals: 3 * panels * PANEL_NODES })
}

fn uniform<F: Fn(f64) -> Complex64>(a: f64, b: f64, panels: usize, f: &F) -> Complex64 {
    let rule = gauss(PANEL_NODES);
    let h = (b - a) / panels as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        acc += rule.integrate(lo, lo + h, f);
    }
    acc
}

/// Adaptive rule for `∫_a^b f(s) ds` with `f = amp * exp(i phase)`.
///
/// `local_freq(s)` bounds `|phase'(s)|` and `phase_scale` bounds `|phase|`
/// on the interval. Panels start at about two local oscillations wide (a
/// quarter of the interval where the phase is slow), then each panel
/// compares 16 and 24 point Gauss rules and bisects until the difference is
/// below its share of `tol` or below the rounding floor set by
/// `phase_scale`. The returned error includes that floor, so it can exceed
/// `tol` when the phase is large.
pub fn adaptive_rule<F, W>(
    a: f64,
    b: f64,
    local_freq: W,
    phase_scale: f64,
    opts: &QuadOptions,
    f: F,
) -> Result<QuadResult>
where
    F: Fn(f64) -> Complex64,
    W: Fn(f64) -> f64,
{
    let len = b - a;
    if len <= 0.0 {
        return Ok(QuadResult { value: Complex64::new(0.0, 0.0), error: 0.0, evals: 0 });
    }
    let h_max = len / 4.0;
    let width = |s: f64, h: f64| -> f64 {
        let w = local_freq(s).max(local_freq((s + h).min(b))).max(local_freq((s + 0.5 * h).min(b)));
        if w * h < 1.0 {
            h
        } else {
            h.min(4.0 * PI / w)
        }
    };
    let mut edges = vec![a];
    let mut s = a;
    while s < b {
        let mut h = width(s, h_max);
        h = width(s, h);
        let next = if s + h >= b - 1e-12 * len { b } else { s + h };
        edges.push(next);
        s = next;
    }

    let g16 = gauss(16);
    let g24 = gauss(24);
    let noise = 32.0 * f64::EPSILON * (1.0 + phase_scale.abs());
    let mut total = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    let mut evals = 0usize;
    let mut stack: Vec<(f64, f64, u32)> = edges.windows(2).rev().map(|w| (w[0], w[1], 0)).collect();
    while let Some((lo, hi, depth)) = stack.pop() {
        let c = 0.5 * (lo + hi);
        let h = 0.5 * (hi - lo);
        let mut coarse = Complex64::new(0.0, 0.0);
        for (x, w) in g16.nodes.iter().zip(&g16.weights) {
            coarse += f(c + h * x) * (w * h);
        }
        let mut fine = Complex64::new(0.0, 0.0);
        let mut mass = 0.0;
        for (x, w) in g24.nodes.iter().zip(&g24.weights) {
            let v = f(c + h * x);
            fine += v * (w * h);
            mass += v.norm() * w * h;
        }
        evals += 40;
        let d = (fine - coarse).norm();
        let floor = noise * mass;
        let share = opts.tol * (hi - lo) / len;
        if d <= share.max(floor) || depth >= 40 {
            total += fine;
            err += d.max(floor);
        } else {
            stack.push((c, hi, depth + 1));
            stack.push((lo, c, depth + 1));
        }
        if evals > opts.max_evals {
            return Err(Error::Accuracy { target: opts.tol, achieved: err });
        }
    }
    Ok(QuadResult { value: total, error: err, evals })
}

fn check_support(curve: &Curve, support: (f64, f64)) -> Result<()> {
    let (a, b) = curve.domain();
    if support.0 < a - 1e-12 || support.1 > b + 1e-12 {
        return Err(Error::Domain { s: if support.0 < a { support.0 } else { support.1 }, a, b });
    }
    Ok(())
}

fn sup_speed(curve: &Curve, xi: &[f64], support: (f64, f64)) -> f64 {
    let m = 4096;
    let mut best = 0.0f64;
    for i in 0..=m {
        let s = support.0 + (support.1 - support.0) * i as f64 / m as f64;
        best = best.max(curve.pairing(s, 1, xi).abs());
    }
    1.1 * best + 1.0
}

fn phase_bound(curve: &Curve, xi: &[f64], support: (f64, f64)) -> f64 {
    let a = curve.pairing(support.0, 0, xi).abs();
    let b = curve.pairing(support.1, 0, xi).abs();
    let m = curve.pairing(0.5 * (support.0 + support.1), 0, xi).abs();
    a.max(b).max(m)
}

/// `∫ exp(-i <γ(s), ξ>) amp(s) ds` over `support`, adaptive.
pub fn curve_integral<A>(curve: &Curve, support: (f64, f64), xi: &[f64], opts: &QuadOptions, amp: A) -> Result<QuadResult>
where
    A: Fn(f64) -> f64,
{
    check_support(curve, support)?;
    let n = curve.dim();
    let f = |s: f64| {
        let mut g = [0.0; MAX_DIM];
        curve.eval_into(s, 0, &mut g);
        let ph: f64 = g[..n].iter().zip(xi).map(|(a, b)| a * b).sum();
        Complex64::from_polar(amp(s), -ph)
    };
    let scale = phase_bound(curve, xi, support);
    adaptive_rule(support.0, support.1, |s| curve.pairing(s, 1, xi).abs(), scale, opts, f)
}

/// Same integral by the dense uniform reference rule.
pub fn curve_integral_reference<A>(
    curve: &Curve,
    support: (f64, f64),
    xi: &[f64],
    opts: &QuadOptions,
    amp: A,
) -> Result<QuadResult>
where
    A: Fn(f64) -> f64,
{
    check_support(curve, support)?;
    let n = curve.dim();
    let f = |s: f64| {
        let mut g = [0.0; MAX_DIM];
        curve.eval_into(s, 0, &mut g);
        let ph: f64 = g[..n].iter().zip(xi).map(|(a, b)| a * b).sum();
        Complex64::from_polar(amp(s), -ph)
    };
    reference_rule(support.0, support.1, sup_speed(curve, xi, support), opts, f)
}

/// Fourier transform of `χ ds` on the curve at `ξ`.
pub fn eval_mu_hat(curve: &Curve, chi: &SmoothCutoff, xi: &[f64], tol: f64) -> Result<QuadResult> {
    let opts = QuadOptions { tol, ..Default::default() };
    curve_integral(curve, chi.support(), xi, &opts, |s| chi.value(s))
}

pub fn eval_mu_hat_reference(curve: &Curve, chi: &SmoothCutoff, xi: &[f64]) -> Result<QuadResult> {
    curve_integral_reference(curve, chi.support(), xi, &QuadOptions::default(), |s| chi.value(s))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelIntegral {
    pub n: usize,
    pub lambda: f64,
    pub value: Complex64,
    /// `η(0) α_n λ^{-1/n}`.
    pub leading: Complex64,
    pub residual: f64,
    /// `A0 δ λ^{-1/n} + A1 λ^{-2/n} (1 + β_n log λ)` with the constants of
    /// the cutoff; the residual divided by this is the empirical constant.
    pub bound_shape: f64,
    pub quad_error: f64,
}

impl ModelIntegral {
    pub fn constant(&self) -> f64 {
        self.residual / self.bound_shape
    }
}

fn poly_at(c: &[f64], s: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * s + v)
}

fn poly_d(c: &[f64], s: f64) -> f64 {
    let mut acc = 0.0;
    for k in (1..c.len()).rev() {
        acc = acc * s + k as f64 * c[k];
    }
    acc
}

/// `∫ η(s) exp(iλ(Σ_{j<=n-2} w_j s^j + s^n + g(s) s^{n+1})) ds`, where
/// `w[j-1] = w_j` and `g` is the polynomial with coefficients `g`.
pub fn model_integral(
    n: usize,
    lambda: f64,
    eta: &SmoothCutoff,
    w: &[f64],
    g: &[f64],
    opts: &QuadOptions,
) -> Result<ModelIntegral> {
    if n < 2 {
        return Err(Error::InvalidDimension(n));
    }
    if !(lambda > 2.0) {
        return Err(Error::InvalidParameter(format!("λ = {lambda} must exceed 2")));
    }
    if w.len() > n.saturating_sub(2) {
        return Err(Error::InvalidParameter(format!("{} coefficients, at most n - 2 allowed", w.len())));
    }
    let nf = n as f64;
    let phase = |s: f64| {
        let mut p = s.powi(n as i32) + poly_at(g, s) * s.powi(n as i32 + 1);
        for (j, wj) in w.iter().enumerate() {
            p += wj * s.powi(j as i32 + 1);
        }
        lambda * p
    };
    let dphase = |s: f64| {
        let mut p = nf * s.powi(n as i32 - 1)
            + poly_d(g, s) * s.powi(n as i32 + 1)
            + (nf + 1.0) * poly_at(g, s) * s.powi(n as i32);
        for (j, wj) in w.iter().enumerate() {
            p += (j as f64 + 1.0) * wj * s.powi(j as i32);
        }
        lambda * p
    };
    let (a, b) = eta.support();
    let scale = phase(a).abs().max(phase(b).abs());
    let res = adaptive_rule(a, b, |s| dphase(s).abs(), scale, opts, |s| Complex64::from_polar(eta.value(s), phase(s)))?;
    let alpha = alpha_n(n)?;
    let leading = alpha * (eta.value(0.0) * lambda.powf(-1.0 / nf));
    let (a0, a1) = cutoff_constants(eta);
    let delta = w
        .iter()
        .enumerate()
        .map(|(j, wj)| wj.abs() * lambda.powf((nf - (j as f64 + 1.0)) / nf))
        .fold(0.0, f64::max);
    let beta = if n == 2 { 1.0 } else { 0.0 };
    let bound_shape = a0 * delta * lambda.powf(-1.0 / nf) + a1 * lambda.powf(-2.0 / nf) * (1.0 + beta * lambda.ln());
    Ok(ModelIntegral {
        n,
        lambda,
        value: res.value,
        leading,
        residual: (res.value - leading).norm(),
        bound_shape,
        quad_error: res.error,
    })
}

/// `(‖η‖_∞ + ‖η'‖_1, ‖η'‖_∞)` on a fine grid.
pub fn cutoff_constants(eta: &SmoothCutoff) -> (f64, f64) {
    let (a, b) = eta.support();
    let m = 8192;
    let h = (b - a) / m as f64;
    let (mut sup, mut l1, mut dsup) = (0.0f64, 0.0, 0.0f64);
    for i in 0..=m {
        let s = a + i as f64 * h;
        sup = sup.max(eta.value(s).abs());
        let d = eta.eval(s, 1);
        dsup = dsup.max(d.abs());
        l1 += d.abs() * h;
    }
    (sup + l1, dsup)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    /// `(λ, |μ̂(λ ray)|)` for the points used in the fit.
    pub samples: Vec<(f64, f64)>,
    pub excluded: usize,
}

/// Log-log slope of `|μ̂(λ ray)|` against `λ`.
pub fn decay_exponent_fit(
    curve: &Curve,
    chi: &SmoothCutoff,
    ray: &[f64],
    lambdas: &[f64],
    tol: f64,
) -> Result<DecayFit> {
    let lo = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = lambdas.iter().cloned().fold(0.0, f64::max);
    if !(hi / lo >= 2f64.powi(6) * (1.0 - 1e-12)) {
        return Err(Error::InsufficientData(format!("λ grid spans {:.2} octaves, need 6", (hi / lo).log2())));
    }
    let nrm = ray.iter().map(|v| v * v).sum::<f64>().sqrt();
    let floor = (100.0 * tol).max(1e-14);
    let mut samples = Vec::new();
    let mut excluded = 0;
    for &l in lambdas {
        let xi: Vec<f64> = ray.iter().map(|v| v / nrm * l).collect();
        let v = eval_mu_hat(curve, chi, &xi, tol)?.value.norm();
        if v > floor {
            samples.push((l, v));
        } else {
            excluded += 1;
        }
    }
    if samples.len() < 4 {
        return Err(Error::InsufficientData(format!("{} usable points", samples.len())));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = samples.iter().cloned().unzip();
    let fit = LinearFit::loglog(&x, &y)?;
    Ok(DecayFit { slope: fit.slope, stderr: fit.slope_stderr, intercept: fit.intercept, samples, excluded })
}

/// `2^{a}, 2^{a+step}, ..., 2^{b}`.
pub fn geometric_grid(lo_exp: f64, hi_exp: f64, step: f64) -> Vec<f64> {
    let m = ((hi_exp - lo_exp) / step).round() as usize;
    (0..=m).map(|i| 2f64.powf(lo_exp + step * i as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::moment_curve;

    #[test]
    fn alpha_values() {
        let a = alpha_n(2).unwrap();
        assert!((a.re - 1.253314).abs() < 1e-6 && (a.im - 1.253314).abs() < 1e-6);
        // (2/3) Γ(1/3) sin(π/3) and (1/2) Γ(1/4) e^{iπ/8}, evaluated offline.
        let a = alpha_n(3).unwrap();
        assert!((a.re - 1.5466858842).abs() < 1e-9 && a.im == 0.0);
        let a = alpha_n(4).unwrap();
        assert!((a.re - 1.6748133935).abs() < 1e-9 && (a.im - 0.6937304220).abs() < 1e-9);
        assert!(alpha_n(1).is_err());
    }

    #[test]
    fn alpha_modulus_identity() {
        for n in 2..10 {
            let nf = n as f64;
            let base = 2.0 / nf * statrs::function::gamma::gamma(1.0 / nf);
            let want = if n % 2 == 1 { base * ((nf - 1.0) * PI / (2.0 * nf)).sin().abs() } else { base };
            assert!((alpha_n(n).unwrap().norm() - want).abs() < 1e-14);
        }
    }

    #[test]
    fn fresnel_limit() {
        // A wide plateau cutoff approximates the whole line; the tails
        // contribute O(R^{-N}) by repeated integration by parts.
        let eta = SmoothCutoff::bump(20.0);
        let opts = QuadOptions { tol: 1e-11, ..Default::default() };
        let (a, b) = eta.support();
        let r = adaptive_rule(a, b, |s| 2.0 * s.abs(), b * b, &opts, |s| Complex64::from_polar(eta.value(s), s * s)).unwrap();
        let alpha = alpha_n(2).unwrap();
        assert!((r.value - alpha).norm() < 1e-6, "{}", (r.value - alpha).norm());
    }

    #[test]
    fn whole_line_integrals_match_alpha() {
        for n in [3usize, 4] {
            let eta = SmoothCutoff::bump(6.0);
            let opts = QuadOptions { tol: 1e-12, ..Default::default() };
            let (a, b) = eta.support();
            let nf = n as f64;
            let r = adaptive_rule(a, b, |s| nf * s.abs().powi(n as i32 - 1), b.powi(n as i32), &opts, |s| {
                Complex64::from_polar(eta.value(s), s.powi(n as i32))
            })
            .unwrap();
            assert!((r.value - alpha_n(n).unwrap()).norm() < 1e-6, "n={n} {}", r.value);
        }
    }

    #[test]
    fn zero_frequency_is_mass() {
        let g = moment_curve(3).unwrap();
        let chi = SmoothCutoff::bump(0.5);
        let v = eval_mu_hat(&g, &chi, &[0.0; 3], 1e-12).unwrap().value;
        let mass: f64 = gauss(40).integrate(-1.0, 1.0, |s| chi.value(s));
        let mass_fine: f64 = (0..200).map(|p| {
            let lo = -1.0 + p as f64 * 0.01;
            gauss(20).integrate(lo, lo + 0.01, |s| chi.value(s))
        }).sum();
        assert!((v.re - mass_fine).abs() < 1e-11 && v.im.abs() < 1e-14);
        assert!((mass - mass_fine).abs() < 1e-3);
    }

    #[test]
    fn adaptive_matches_reference() {
        let g = moment_curve(4).unwrap();
        let chi = SmoothCutoff::bump(0.5);
        for xi in [[3.0, -20.0, 400.0, 1000.0], [0.0, 0.0, 0.0, 16384.0], [-50.0, 7.0, 11.0, 3.0]] {
            let a = eval_mu_hat(&g, &chi, &xi, 1e-10).unwrap();
            let b = eval_mu_hat_reference(&g, &chi, &xi).unwrap();
            assert!((a.value - b.value).norm() < 1e-10, "{xi:?}: {}", (a.value - b.value).norm());
            assert!(b.error < 1e-11, "{xi:?}: {}", b.error);
        }
    }

    #[test]
    fn hermitian_symmetry() {
        let g = moment_curve(3).unwrap();
        let chi = SmoothCutoff::bump(0.5);
        let xi = [12.0, -40.0, 300.0];
        let neg = [-12.0, 40.0, -300.0];
        let a = eval_mu_hat(&g, &chi, &xi, 1e-13).unwrap().value;
        let b = eval_mu_hat(&g, &chi, &neg, 1e-13).unwrap().value;
        assert!((a - b.conj()).norm() < 1e-12);
    }

    #[test]
    fn stationary_point_asymptotics() {
        let g = moment_curve(4).unwrap();
        let chi = SmoothCutoff::bump(0.5);
        let lam = 2f64.powi(14);
        let v = eval_mu_hat(&g, &chi, &[0.0, 0.0, 0.0, lam], 1e-10).unwrap().value.norm();
        let pred = chi.value(0.0) * alpha_n(4).unwrap().norm() * (24.0 / lam).powf(0.25);
        assert!((v / pred - 1.0).abs() < 0.05, "{v} vs {pred}");
    }

    #[test]
    fn non_stationary_decay() {
        let g = moment_curve(4).unwrap();
        let chi = SmoothCutoff::bump(0.5);
        let v = eval_mu_hat(&g, &chi, &[1024.0, 0.0, 0.0, 0.0], 1e-12).unwrap().value.norm();
        assert!(v <= 1e-8, "{v}");
    }

    #[test]
    fn model_integral_quadratic() {
        let eta = SmoothCutoff::bump(0.5);
        let r = model_integral(2, 1e4, &eta, &[], &[], &QuadOptions::default()).unwrap();
        let bound = 1e-4 * (1.0 + 1e4f64.ln());
        assert!(r.residual <= 50.0 * bound, "{}", r.residual);
    }
}
