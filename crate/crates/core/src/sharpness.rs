//! Grid realisations of the examples showing the smoothing order and the
//! exponent range are sharp: a single frequency bump, randomised sums of
//! balls centred on the worst decay cone, and the separation of their
//! physical-space centres.

use crate::cone::{phi_and_xnu, WolffCentre};
use crate::curve::Curve;
use crate::cutoff::{eta, littlewood_paley, SmoothCutoff};
use crate::error::{Error, Result};
use crate::grid::{averaging_operator, relative_l2, Backend, GridSpec, PeriodicField, ProbeContext, Side};
use crate::oscillatory::eval_mu_hat;
use crate::stats::LinearFit;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Ordinary least squares on `(log λ, log value)` pairs.
pub fn exponent_fit(pairs: &[(f64, f64)]) -> Result<LinearFit> {
    if pairs.len() < 4 {
        return Err(Error::InsufficientData(format!("exponent fit needs at least 4 points, got {}", pairs.len())));
    }
    let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    LinearFit::ols(&x, &y)
}

fn loglog_pairs(x: &[f64], y: &[f64]) -> Vec<(f64, f64)> {
    x.iter().zip(y).map(|(a, b)| (a.ln(), b.ln())).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BumpOptions {
    /// `ψ̂(ζ) = exp(-(c|ζ|)^2 / 2)`.
    pub psi_width: f64,
    /// Neighbourhood radius is `nbhd / λ`.
    pub nbhd: f64,
    /// Points sampled on the neighbourhood.
    pub nbhd_samples: usize,
    pub seed: u64,
}

impl Default for BumpOptions {
    fn default() -> Self {
        Self { psi_width: 0.1, nbhd: 0.1, nbhd_samples: 12, seed: 11 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BumpNorms {
    pub p: f64,
    pub f_norm: f64,
    pub af_norm: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BumpReport {
    pub lambda: f64,
    pub norms: Vec<BumpNorms>,
    /// `min λ |A f(x)|` over sampled `x` within `nbhd/λ` of `γ({χ = 1})`.
    pub nbhd_min: f64,
    pub nbhd_points: usize,
}

/// `f̂(ξ) = λ^{-n} β(ξ/λ) ψ̂(ξ/λ)` with `β` the unit Littlewood–Paley annulus,
/// and the ratios `‖A f‖_p / ‖f‖_p`. The multiplier of `A` comes from `ctx`.
pub fn bump_example(ctx: &ProbeContext, curve: &Curve, chi: &SmoothCutoff, lambda: f64, ps: &[f64], opts: &BumpOptions) -> Result<BumpReport> {
    let grid = ctx.grid;
    if lambda > grid.nyquist() / 4.0 {
        return Err(Error::Nyquist { freq: 4.0 * lambda, nyquist: grid.nyquist() });
    }
    if curve.dim() != grid.d {
        return Err(Error::InvalidParameter(format!("curve in R^{} on a {}-dimensional grid", curve.dim(), grid.d)));
    }
    let beta = littlewood_paley(0);
    let n = grid.d as i32;
    let c = opts.psi_width;
    let fhat = PeriodicField::from_spectrum(grid, |xi| {
        let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt() / lambda;
        let b = beta.value(r);
        if b == 0.0 {
            return Complex64::default();
        }
        Complex64::new(lambda.powi(-n) * b * (-0.5 * (c * r).powi(2)).exp(), 0.0)
    });
    let mut afhat = fhat.clone();
    for (v, m) in afhat.data.iter_mut().zip(&ctx.mu) {
        *v *= m;
    }
    let mut f = fhat;
    f.inverse()?;
    let mut af = afhat.clone();
    af.inverse()?;
    let mut norms = Vec::new();
    for &p in ps {
        let f_norm = f.lp_norm(p)?;
        let af_norm = af.lp_norm(p)?;
        norms.push(BumpNorms { p, f_norm, af_norm, ratio: af_norm / f_norm });
    }
    drop(f);
    drop(af);
    // Points x = γ(s) + y with χ(s) = 1 and |y| <= nbhd/λ.
    let (lo, hi) = chi.support();
    let flat: Vec<f64> = (0..=400).map(|i| lo + (hi - lo) * i as f64 / 400.0).filter(|s| chi.value(*s) >= 1.0 - 1e-12).collect();
    let (slo, shi) = match (flat.first(), flat.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => return Err(Error::InvalidParameter("cutoff never reaches 1".into())),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(lambda.to_bits());
    let mut nbhd_min = f64::INFINITY;
    for _ in 0..opts.nbhd_samples {
        let s = if shi > slo { rng.gen_range(slo..=shi) } else { slo };
        let mut x: Vec<f64> = curve.point(s).iter().copied().collect();
        let mut dir: Vec<f64> = (0..grid.d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        let len = rng.gen_range(0.0..=1.0) * opts.nbhd / lambda;
        for (xi, di) in x.iter_mut().zip(dir.iter_mut()) {
            *xi += *di / norm * len;
        }
        let v = afhat.eval_at(&x)?;
        nbhd_min = nbhd_min.min(lambda * v.norm());
    }
    Ok(BumpReport { lambda, norms, nbhd_min, nbhd_points: opts.nbhd_samples })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BumpFit {
    pub p: f64,
    pub norm_slope: LinearFit,
    pub ratio_slope: LinearFit,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BumpSweep {
    pub reports: Vec<BumpReport>,
    pub fits: Vec<BumpFit>,
}

pub fn bump_sweep(
    curve: &Curve,
    chi: &SmoothCutoff,
    grid: GridSpec,
    lambdas: &[f64],
    ps: &[f64],
    opts: &BumpOptions,
    budget: u64,
) -> Result<BumpSweep> {
    if let Some(l) = lambdas.iter().find(|l| **l > grid.nyquist() / 4.0) {
        return Err(Error::Nyquist { freq: 4.0 * l, nyquist: grid.nyquist() });
    }
    let ctx = ProbeContext::new(curve, chi, grid, budget)?;
    let reports: Vec<BumpReport> = lambdas.iter().map(|&l| bump_example(&ctx, curve, chi, l, ps, opts)).collect::<Result<_>>()?;
    let mut fits = Vec::new();
    for (i, &p) in ps.iter().enumerate() {
        let fy: Vec<f64> = reports.iter().map(|r| r.norms[i].f_norm).collect();
        let ry: Vec<f64> = reports.iter().map(|r| r.norms[i].ratio).collect();
        fits.push(BumpFit {
            p,
            norm_slope: exponent_fit(&loglog_pairs(lambdas, &fy))?,
            ratio_slope: exponent_fit(&loglog_pairs(lambdas, &ry))?,
        });
    }
    Ok(BumpSweep { reports, fits })
}

/// Balls of radius `ρ λ^{1/n}` around `ξ^ν = λ Γ(ν λ^{-1/n})`, `|ν| <= ε λ^{1/n}`.
#[derive(Clone, Debug)]
pub struct WolffEnsemble {
    pub grid: GridSpec,
    pub lambda: f64,
    pub eps: f64,
    pub rho: f64,
    pub centres: Vec<WolffCentre>,
    /// Lattice indices and spectral values `h^{-n} ĝ_ν` per ball.
    pub members: Vec<Vec<(usize, f64)>>,
}

/// Integers `ν` with `|ν| <= ε λ^{1/n}`.
pub fn wolff_indices(n: usize, lambda: f64, eps: f64) -> Vec<i64> {
    let m = (eps * lambda.powf(1.0 / n as f64) + 1e-9).floor() as i64;
    (-m..=m).collect()
}

pub fn wolff_ensemble(curve: &Curve, lambda: f64, eps: f64, rho: f64, grid: GridSpec) -> Result<WolffEnsemble> {
    let n = curve.dim();
    if n != grid.d {
        return Err(Error::InvalidParameter(format!("curve in R^{n} on a {}-dimensional grid", grid.d)));
    }
    if !(rho > 0.0 && rho < 1.0) || !(eps > 0.0) || !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("need λ > 0, ε > 0, 0 < ρ < 1; got λ = {lambda}, ε = {eps}, ρ = {rho}")));
    }
    let radius = rho * lambda.powf(1.0 / n as f64);
    let centres: Vec<WolffCentre> = wolff_indices(n, lambda, eps).into_iter().map(|nu| phi_and_xnu(curve, lambda, nu, eps)).collect::<Result<_>>()?;
    let lim = (grid.n / 2 - 1) as f64 * grid.freq_step();
    for c in &centres {
        if let Some(v) = c.xi.iter().find(|v| v.abs() + radius > lim) {
            return Err(Error::Nyquist { freq: v.abs() + radius, nyquist: grid.nyquist() });
        }
    }
    let st = grid.freq_step();
    let scale = 1.0 / grid.cell_volume();
    let mut owner = std::collections::HashMap::new();
    let mut members = Vec::with_capacity(centres.len());
    for (ci, c) in centres.iter().enumerate() {
        let lo: Vec<i64> = c.xi.iter().map(|v| ((v - radius) / st).floor() as i64).collect();
        let hi: Vec<i64> = c.xi.iter().map(|v| ((v + radius) / st).ceil() as i64).collect();
        let mut k = lo.clone();
        let mut mine = Vec::new();
        'walk: loop {
            let r = k.iter().zip(&c.xi).map(|(ki, x)| (*ki as f64 * st - x).powi(2)).sum::<f64>().sqrt();
            let v = eta(2.0 * r / radius, 0);
            if v > 0.0 {
                let idx = grid.index_of(&k).ok_or_else(|| Error::Nyquist { freq: r, nyquist: grid.nyquist() })?;
                if let Some(prev) = owner.insert(idx, ci) {
                    return Err(Error::Overlap(format!(
                        "balls for ν = {} and ν = {} share a lattice point; use a smaller ρ than {rho}",
                        centres[prev].nu, c.nu
                    )));
                }
                mine.push((idx, v * scale));
            }
            for a in (0..n).rev() {
                if k[a] < hi[a] {
                    k[a] += 1;
                    continue 'walk;
                }
                k[a] = lo[a];
            }
            break;
        }
        members.push(mine);
    }
    Ok(WolffEnsemble { grid, lambda, eps, rho, centres, members })
}

impl WolffEnsemble {
    /// `ĝ^ω` on the lattice for signs `r_ν`.
    pub fn spectrum(&self, signs: &[f64]) -> PeriodicField {
        let mut f = PeriodicField::zeros(self.grid, Side::Frequency);
        for (m, s) in self.members.iter().zip(signs) {
            for &(idx, v) in m {
                f.data[idx] = Complex64::new(s * v, 0.0);
            }
        }
        f
    }

    pub fn signs(&self, seed: u64, trial: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial as u64 + 1);
        (0..self.centres.len()).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect()
    }

    /// `‖(Σ |g_ν|^2)^{1/2}‖_p`.
    pub fn square_function(&self, p: f64) -> Result<f64> {
        let mut acc = vec![0.0f64; self.grid.len()];
        for m in &self.members {
            let mut f = PeriodicField::zeros(self.grid, Side::Frequency);
            for &(idx, v) in m {
                f.data[idx] = Complex64::new(v, 0.0);
            }
            f.inverse()?;
            for (a, z) in acc.iter_mut().zip(&f.data) {
                *a += z.norm_sqr();
            }
        }
        let sq = PeriodicField {
            grid: self.grid,
            side: Side::Physical,
            data: acc.into_iter().map(|v| Complex64::new(v.sqrt(), 0.0)).collect(),
        };
        sq.lp_norm(p)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WolffOptions {
    pub eps: f64,
    pub rho: f64,
    pub trials: usize,
    pub seed: u64,
    pub square_function: bool,
}

impl Default for WolffOptions {
    fn default() -> Self {
        Self { eps: 0.1, rho: 0.05, trials: 32, seed: 17, square_function: false }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WolffStats {
    pub lambda: f64,
    pub p: f64,
    pub balls: usize,
    pub trial_norms: Vec<f64>,
    /// `(E ‖g^ω‖_p^p)^{1/p}` over the trials.
    pub moment: f64,
    /// Standard error of the mean of `‖g^ω‖_p^p`, carried to the moment.
    pub moment_stderr: f64,
    pub median: f64,
    pub square_function: Option<f64>,
}

pub fn wolff_stats(ens: &WolffEnsemble, p: f64, trials: usize, seed: u64, square: bool) -> Result<WolffStats> {
    if trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    let mut trial_norms = Vec::with_capacity(trials);
    for t in 0..trials {
        let mut g = ens.spectrum(&ens.signs(seed, t));
        g.inverse()?;
        trial_norms.push(g.lp_norm(p)?);
    }
    let pw: Vec<f64> = trial_norms.iter().map(|v| v.powf(p)).collect();
    let mean = pw.iter().sum::<f64>() / pw.len() as f64;
    let var = if pw.len() > 1 { pw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (pw.len() - 1) as f64 } else { 0.0 };
    let moment = mean.powf(1.0 / p);
    // d(m^{1/p}) = m^{1/p - 1} dm / p
    let moment_stderr = moment / (p * mean) * (var / pw.len() as f64).sqrt();
    let mut sorted = trial_norms.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = sorted.len();
    let median = if m % 2 == 1 { sorted[m / 2] } else { 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]) };
    let square_function = if square { Some(ens.square_function(p)?) } else { None };
    Ok(WolffStats { lambda: ens.lambda, p, balls: ens.centres.len(), trial_norms, moment, moment_stderr, median, square_function })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WolffSweep {
    pub stats: Vec<WolffStats>,
    pub fit: LinearFit,
    /// `1 - 1/p + 1/(2n)`.
    pub target: f64,
}

pub fn wolff_example(curve: &Curve, lambdas: &[f64], p: f64, opts: &WolffOptions, grid: GridSpec, budget: u64) -> Result<WolffSweep> {
    grid.check_budget(2, budget)?;
    let mut stats = Vec::new();
    for &l in lambdas {
        let ens = wolff_ensemble(curve, l, opts.eps, opts.rho, grid)?;
        stats.push(wolff_stats(&ens, p, opts.trials, opts.seed, opts.square_function)?);
    }
    let y: Vec<f64> = stats.iter().map(|s| s.moment).collect();
    let fit = exponent_fit(&loglog_pairs(lambdas, &y))?;
    let n = curve.dim() as f64;
    Ok(WolffSweep { stats, fit, target: 1.0 - 1.0 / p + 1.0 / (2.0 * n) })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InversionReport {
    /// Support points where `|μ̂| >= floor` and `f̂ = ĝ / μ̂` was formed.
    pub inverted: usize,
    /// Support points left out because `|μ̂| < floor`.
    pub skipped: usize,
    /// Relative `ℓ²` distance between `A f` and `g` restricted to the inverted points.
    pub residual: f64,
}

/// Forms `f^ω` by dividing `ĝ^ω` by quadrature values of `μ̂` where
/// `|μ̂| >= floor`, applies the averaging operator through `backend`, and
/// compares with `g^ω` on the same frequencies.
pub fn wolff_inversion(ens: &WolffEnsemble, curve: &Curve, chi: &SmoothCutoff, signs: &[f64], floor: f64, backend: Backend) -> Result<InversionReport> {
    let grid = ens.grid;
    let mut f = PeriodicField::zeros(grid, Side::Frequency);
    let mut g = PeriodicField::zeros(grid, Side::Frequency);
    let (mut inverted, mut skipped) = (0, 0);
    let mut xi = [0.0; 4];
    for (m, s) in ens.members.iter().zip(signs) {
        for &(idx, v) in m {
            grid.frequency(idx, &mut xi);
            let mu = eval_mu_hat(curve, chi, &xi[..grid.d], 1e-12)?.value;
            if mu.norm() >= floor {
                f.data[idx] = Complex64::new(s * v, 0.0) / mu;
                g.data[idx] = Complex64::new(s * v, 0.0);
                inverted += 1;
            } else {
                skipped += 1;
            }
        }
    }
    f.inverse()?;
    let af = averaging_operator(curve, chi, &f, backend)?;
    g.inverse()?;
    Ok(InversionReport { inverted, skipped, residual: relative_l2(&af, &g) })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeparationReport {
    pub lambda: f64,
    pub eps: f64,
    pub indices: usize,
    pub pairs: usize,
    /// `min |x^ν - x^ν'| λ^{1/n} / |ν - ν'|` over distinct pairs.
    pub min_gap: f64,
}

pub fn separation_audit(curve: &Curve, lambda: f64, eps: f64) -> Result<SeparationReport> {
    let n = curve.dim();
    let idx = wolff_indices(n, lambda, eps);
    let cs: Vec<WolffCentre> = idx.iter().map(|&nu| phi_and_xnu(curve, lambda, nu, eps)).collect::<Result<_>>()?;
    if cs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "only {} index with |ν| <= ε λ^(1/n) = {:.3}; no pairs to compare",
            cs.len(),
            eps * lambda.powf(1.0 / n as f64)
        )));
    }
    let scale = lambda.powf(1.0 / n as f64);
    let mut min_gap = f64::INFINITY;
    let mut pairs = 0;
    for i in 0..cs.len() {
        for j in i + 1..cs.len() {
            if cs[i].nu == cs[j].nu {
                continue;
            }
            let d = cs[i].x.iter().zip(&cs[j].x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            min_gap = min_gap.min(d * scale / (cs[i].nu - cs[j].nu).abs() as f64);
            pairs += 1;
        }
    }
    Ok(SeparationReport { lambda, eps, indices: cs.len(), pairs, min_gap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::moment_curve;
    use crate::grid::DEFAULT_BUDGET;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn fit_requires_four_points() {
        assert!(exponent_fit(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]).is_err());
        let exact: Vec<(f64, f64)> = (4..10).map(|k| (k as f64, -0.75 * k as f64 + 0.3)).collect();
        let f = exponent_fit(&exact).unwrap();
        assert!((f.slope + 0.75).abs() < 1e-13 && f.slope_stderr < 1e-12);
        assert!(exponent_fit(&[(1.0, 0.0), (1.0, 1.0), (1.0, 2.0), (1.0, 3.0)]).is_err());
    }

    #[test]
    fn fit_tolerates_small_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let pts: Vec<(f64, f64)> = (0..8)
            .map(|k| {
                let l = 2f64.powi(4 + k);
                (l.ln(), (3.0 * l.powf(13.0 / 12.0) * (1.0 + noise.sample(&mut rng))).ln())
            })
            .collect();
        assert!((exponent_fit(&pts).unwrap().slope - 13.0 / 12.0).abs() < 0.02);
    }

    #[test]
    fn separation_on_moment_curves() {
        for (n, l) in [(3, 2f64.powi(9)), (4, 2f64.powi(12))] {
            let g = moment_curve(n).unwrap();
            let rep = separation_audit(&g, l, 0.5).unwrap();
            assert!(rep.pairs > 0 && rep.min_gap >= 0.5, "{rep:?}");
            // Closed form x^ν = -γ(ν λ^{-1/n}).
            let c = phi_and_xnu(&g, l, 2, 0.5).unwrap();
            let want = g.point(2.0 * l.powf(-1.0 / n as f64));
            for i in 0..n {
                assert!((c.x[i] + want[i]).abs() < 1e-9);
            }
        }
        assert!(separation_audit(&moment_curve(4).unwrap(), 2f64.powi(12), 0.1).is_err());
    }

    #[test]
    fn ensemble_balls_are_disjoint_and_sized() {
        let g = moment_curve(2).unwrap();
        let grid = GridSpec::torus(2, 256).unwrap();
        let ens = wolff_ensemble(&g, 64.0, 1.0, 0.4, grid).unwrap();
        assert_eq!(ens.centres.len(), 17);
        let radius = 0.4 * 8.0;
        let mut xi = [0.0; 2];
        for (m, c) in ens.members.iter().zip(&ens.centres) {
            assert!(!m.is_empty());
            for &(idx, _) in m {
                grid.frequency(idx, &mut xi);
                assert!(((xi[0] - c.xi[0]).powi(2) + (xi[1] - c.xi[1]).powi(2)).sqrt() <= radius);
            }
        }
        assert!(matches!(wolff_ensemble(&g, 64.0, 1.0, 0.7, grid), Err(Error::Overlap(_))));
    }

    #[test]
    fn single_ball_norm_ignores_signs() {
        let g = moment_curve(2).unwrap();
        let grid = GridSpec::torus(2, 128).unwrap();
        let ens = wolff_ensemble(&g, 16.0, 0.2, 0.3, grid).unwrap();
        assert_eq!(ens.centres.len(), 1);
        let st = wolff_stats(&ens, 6.0, 5, 3, false).unwrap();
        for v in &st.trial_norms {
            assert!((v - st.trial_norms[0]).abs() <= 1e-12 * v);
        }
    }

    #[test]
    fn khinchine_sandwich() {
        let g = moment_curve(2).unwrap();
        let grid = GridSpec::torus(2, 256).unwrap();
        let ens = wolff_ensemble(&g, 64.0, 1.0, 0.4, grid).unwrap();
        let st = wolff_stats(&ens, 6.0, 16, 5, true).unwrap();
        let sq = st.square_function.unwrap();
        let r = st.median / sq;
        assert!((1.0 / 3.0..=3.0).contains(&r), "{r}");
    }

    #[test]
    fn batches_agree() {
        let g = moment_curve(2).unwrap();
        let grid = GridSpec::torus(2, 512).unwrap();
        let ens = wolff_ensemble(&g, 128.0, 1.0, 0.4, grid).unwrap();
        let a = wolff_stats(&ens, 6.0, 32, 100, false).unwrap();
        let b = wolff_stats(&ens, 6.0, 32, 200, false).unwrap();
        assert!((a.moment / b.moment - 1.0).abs() < 0.1, "{} {}", a.moment, b.moment);
    }

    #[test]
    fn inversion_reproduces_ensemble() {
        let g = moment_curve(2).unwrap();
        let chi = SmoothCutoff::bump(0.5);
        let grid = GridSpec::torus(2, 64).unwrap();
        let ens = wolff_ensemble(&g, 16.0, 1.0, 0.4, grid).unwrap();
        let signs = ens.signs(9, 0);
        let rep = wolff_inversion(&ens, &g, &chi, &signs, 1e-6, Backend::default()).unwrap();
        assert!(rep.inverted > 0);
        assert!(rep.residual <= 1e-6, "{rep:?}");
    }

    #[test]
    fn bump_norm_scaling() {
        let g = moment_curve(2).unwrap();
        let chi = SmoothCutoff::bump(0.25);
        let grid = GridSpec::torus(2, 512).unwrap();
        let lambdas = [8.0, 16.0, 32.0, 64.0];
        let sw = bump_sweep(&g, &chi, grid, &lambdas, &[1.5, 4.0], &BumpOptions::default(), DEFAULT_BUDGET).unwrap();
        for f in &sw.fits {
            assert!((f.norm_slope.slope + 2.0 / f.p).abs() < 0.05, "{f:?}");
        }
        for r in &sw.reports {
            assert!(r.nbhd_min > 0.0);
        }
        assert!(bump_sweep(&g, &chi, grid, &[128.0], &[2.0], &BumpOptions::default(), DEFAULT_BUDGET).is_err());
    }
}
