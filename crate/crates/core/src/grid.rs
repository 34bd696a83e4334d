//! Periodic grids on the torus `[0, L)^d`: transforms, multipliers, norms,
//! the averaging operator and dyadic operator probes.
//!
//! Samples sit at `x = h i` with `h = L/N`, and the frequency of index `i` is
//! `ξ = 2π k / L` with `k = i` for `i < N/2` and `k = i - N` otherwise.
//! The forward transform is unnormalised and the inverse divides by `N^d`.

use crate::curve::Curve;
use crate::cutoff::{littlewood_paley, SmoothCutoff};
use crate::error::{Error, Result};
use crate::oscillatory::eval_mu_hat;
use crate::quad::gauss;
use crate::stats::LinearFit;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

pub const BUDGET_ENV: &str = "CURVELAB_BUDGET_BYTES";
pub const DEFAULT_BUDGET: u64 = 2 << 30;
const BYTES_PER_SAMPLE: u64 = 16;
const CHUNK: usize = 1 << 14;

/// Byte budget from `CURVELAB_BUDGET_BYTES`, or 2 GiB when unset.
pub fn budget_from_env() -> Result<u64> {
    match std::env::var(BUDGET_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Error::Config {
            field: BUDGET_ENV.into(),
            detail: format!("expected a byte count, got {v:?}"),
        }),
        Err(_) => Ok(DEFAULT_BUDGET),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub d: usize,
    pub n: usize,
    pub period: f64,
}

impl GridSpec {
    pub fn new(d: usize, n: usize, period: f64) -> Result<Self> {
        if !(2..=4).contains(&d) {
            return Err(Error::InvalidParameter(format!("grid dimension {d} not in 2..=4")));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("grid size {n} must be a power of two >= 4")));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidParameter(format!("period {period} must be positive")));
        }
        Ok(Self { d, n, period })
    }

    /// `[0, 2π)^d`.
    pub fn torus(d: usize, n: usize) -> Result<Self> {
        Self::new(d, n, 2.0 * PI)
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.d as i32)
    }

    /// Lattice frequency spacing `2π/L`.
    pub fn freq_step(&self) -> f64 {
        2.0 * PI / self.period
    }

    /// `π N / L`, the largest lattice frequency per axis.
    pub fn nyquist(&self) -> f64 {
        PI * self.n as f64 / self.period
    }

    /// Bytes needed for `fields` complex arrays on this grid.
    pub fn bytes_for(&self, fields: usize) -> u64 {
        (self.n as u64).pow(self.d as u32) * BYTES_PER_SAMPLE * fields as u64
    }

    /// Refuses when `fields` arrays exceed `budget`; returns the estimate.
    pub fn check_budget(&self, fields: usize, budget: u64) -> Result<u64> {
        let required = self.bytes_for(fields);
        if required > budget {
            return Err(Error::Budget { required, budget });
        }
        Ok(required)
    }

    pub fn wavenumber(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Flat index of a wavenumber tuple, or `None` outside `[-N/2, N/2)^d`.
    pub fn index_of(&self, k: &[i64]) -> Option<usize> {
        let h = (self.n / 2) as i64;
        let mut idx = 0;
        for &v in &k[..self.d] {
            if v < -h || v >= h {
                return None;
            }
            let i = if v < 0 { v + self.n as i64 } else { v } as usize;
            idx = idx * self.n + i;
        }
        Some(idx)
    }

    pub fn split(&self, mut idx: usize, out: &mut [usize]) {
        for a in (0..self.d).rev() {
            out[a] = idx % self.n;
            idx /= self.n;
        }
    }

    pub fn frequency(&self, idx: usize, out: &mut [f64]) {
        let mut m = [0usize; 4];
        self.split(idx, &mut m);
        let st = self.freq_step();
        for a in 0..self.d {
            out[a] = self.wavenumber(m[a]) as f64 * st;
        }
    }

    pub fn position(&self, idx: usize, out: &mut [f64]) {
        let mut m = [0usize; 4];
        self.split(idx, &mut m);
        let h = self.spacing();
        for a in 0..self.d {
            out[a] = m[a] as f64 * h;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Physical,
    Frequency,
}

#[derive(Clone, Debug)]
pub struct PeriodicField {
    pub grid: GridSpec,
    pub side: Side,
    pub data: Vec<Complex64>,
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut p = FftPlanner::new();
    if inverse {
        p.plan_fft_inverse(n)
    } else {
        p.plan_fft_forward(n)
    }
}

fn fft_lines(data: &mut [Complex64], n: usize, fft: &Arc<dyn Fft<f64>>) {
    let lines = (CHUNK / n).max(1);
    data.par_chunks_mut(n * lines).for_each(|c| {
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(c, &mut scratch);
    });
}

/// Transform along one non-final axis: gather its lines into a contiguous
/// buffer, transform, scatter back.
fn fft_strided(data: &mut [Complex64], tmp: &mut [Complex64], n: usize, inner: usize, fft: &Arc<dyn Fft<f64>>) {
    let block = n * inner;
    {
        let src = &*data;
        tmp.par_chunks_mut(n).enumerate().for_each(|(line, out)| {
            let o = line / inner;
            let j = line % inner;
            let base = o * block + j;
            for (i, v) in out.iter_mut().enumerate() {
                *v = src[base + i * inner];
            }
        });
    }
    fft_lines(tmp, n, fft);
    let src = &*tmp;
    data.par_chunks_mut(inner).enumerate().for_each(|(row, out)| {
        let o = row / n;
        let i = row % n;
        let base = o * block;
        for (j, v) in out.iter_mut().enumerate() {
            *v = src[(base + j * n) + i];
        }
    });
}

fn fft_nd(grid: &GridSpec, data: &mut [Complex64], inverse: bool) {
    let n = grid.n;
    let fft = plan(n, inverse);
    fft_lines(data, n, &fft);
    if grid.d > 1 {
        let mut tmp = vec![Complex64::default(); data.len()];
        for axis in 0..grid.d - 1 {
            let inner = n.pow((grid.d - 1 - axis) as u32);
            fft_strided(data, &mut tmp, n, inner, &fft);
        }
    }
    if inverse {
        let s = 1.0 / grid.len() as f64;
        data.par_chunks_mut(CHUNK).for_each(|c| c.iter_mut().for_each(|v| *v *= s));
    }
}

fn fill<F>(grid: &GridSpec, data: &mut [Complex64], freq: bool, f: F)
where
    F: Fn(usize, &[f64]) -> Complex64 + Sync,
{
    data.par_chunks_mut(grid.n).enumerate().for_each(|(row, out)| {
        let mut x = [0.0; 4];
        for (j, v) in out.iter_mut().enumerate() {
            let idx = row * grid.n + j;
            if freq {
                grid.frequency(idx, &mut x);
            } else {
                grid.position(idx, &mut x);
            }
            *v = f(idx, &x[..grid.d]);
        }
    });
}

/// `Σ |z|^p` over a slice; chunked so the summation order does not depend
/// on the thread count.
fn power_sum(data: &[Complex64], p: f64) -> f64 {
    let half = p / 2.0;
    let int_half = half.fract() == 0.0 && half <= 16.0;
    let parts: Vec<f64> = data
        .par_chunks(CHUNK)
        .map(|c| {
            c.iter()
                .map(|z| {
                    let q = z.norm_sqr();
                    if int_half {
                        q.powi(half as i32)
                    } else {
                        q.powf(half)
                    }
                })
                .sum::<f64>()
        })
        .collect();
    parts.iter().sum()
}

fn max_abs(data: &[Complex64]) -> f64 {
    let parts: Vec<f64> = data.par_chunks(CHUNK).map(|c| c.iter().fold(0.0, |m: f64, z| m.max(z.norm()))).collect();
    parts.into_iter().fold(0.0, f64::max)
}

impl PeriodicField {
    pub fn zeros(grid: GridSpec, side: Side) -> Self {
        Self { grid, side, data: vec![Complex64::default(); grid.len()] }
    }

    /// Samples `f(x)` at the grid points.
    pub fn from_fn<F>(grid: GridSpec, f: F) -> Self
    where
        F: Fn(&[f64]) -> Complex64 + Sync,
    {
        let mut out = Self::zeros(grid, Side::Physical);
        fill(&grid, &mut out.data, false, |_, x| f(x));
        out
    }

    /// Frequency-side field with lattice values `F_k = h^{-d} f̂(ξ_k)`, so
    /// that the physical side samples the periodisation of the function
    /// whose Fourier transform is `f̂`.
    pub fn from_spectrum<F>(grid: GridSpec, fhat: F) -> Self
    where
        F: Fn(&[f64]) -> Complex64 + Sync,
    {
        let scale = 1.0 / grid.cell_volume();
        let mut out = Self::zeros(grid, Side::Frequency);
        fill(&grid, &mut out.data, true, |_, xi| fhat(xi) * scale);
        out
    }

    pub fn forward(&mut self) -> Result<()> {
        if self.side != Side::Physical {
            return Err(Error::InvalidParameter("forward transform of a frequency-side field".into()));
        }
        fft_nd(&self.grid, &mut self.data, false);
        self.side = Side::Frequency;
        Ok(())
    }

    pub fn inverse(&mut self) -> Result<()> {
        if self.side != Side::Frequency {
            return Err(Error::InvalidParameter("inverse transform of a physical-side field".into()));
        }
        fft_nd(&self.grid, &mut self.data, true);
        self.side = Side::Physical;
        Ok(())
    }

    pub fn into_physical(mut self) -> Result<Self> {
        if self.side == Side::Frequency {
            self.inverse()?;
        }
        Ok(self)
    }

    pub fn into_frequency(mut self) -> Result<Self> {
        if self.side == Side::Physical {
            self.forward()?;
        }
        Ok(self)
    }

    /// Riemann-sum `L^p` norm with cell volume `h^d`; `p = ∞` gives the max.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if self.side != Side::Physical {
            return Err(Error::InvalidParameter("lp_norm needs a physical-side field".into()));
        }
        if !(p >= 1.0) {
            return Err(Error::InvalidParameter(format!("p = {p} must be >= 1")));
        }
        if p.is_infinite() {
            return Ok(max_abs(&self.data));
        }
        Ok((power_sum(&self.data, p) * self.grid.cell_volume()).powf(1.0 / p))
    }

    /// `L^2` norm from the frequency side by Parseval.
    pub fn l2_norm_spectral(&self) -> Result<f64> {
        if self.side != Side::Frequency {
            return Err(Error::InvalidParameter("spectral norm needs a frequency-side field".into()));
        }
        Ok((power_sum(&self.data, 2.0) * self.grid.cell_volume() / self.grid.len() as f64).sqrt())
    }

    /// `(1 - Δ)^{α/2}` followed by `lp_norm`.
    pub fn sobolev_norm(&self, p: f64, alpha: f64) -> Result<f64> {
        if !(alpha >= 0.0) {
            return Err(Error::InvalidParameter(format!("α = {alpha} must be >= 0")));
        }
        let g = apply_multiplier(self, |xi| {
            let r2: f64 = xi.iter().map(|v| v * v).sum();
            Complex64::new((1.0 + r2).powf(alpha / 2.0), 0.0)
        })?;
        g.lp_norm(p)
    }

    /// Trigonometric interpolant at an arbitrary point, from a
    /// frequency-side field. Zero coefficients are skipped.
    pub fn eval_at(&self, x: &[f64]) -> Result<Complex64> {
        if self.side != Side::Frequency {
            return Err(Error::InvalidParameter("eval_at needs a frequency-side field".into()));
        }
        let g = self.grid;
        let parts: Vec<Complex64> = self
            .data
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(c, vals)| {
                let mut xi = [0.0; 4];
                let mut acc = Complex64::default();
                for (j, v) in vals.iter().enumerate() {
                    if *v == Complex64::default() {
                        continue;
                    }
                    g.frequency(c * CHUNK + j, &mut xi);
                    let ph: f64 = (0..g.d).map(|a| xi[a] * x[a]).sum();
                    acc += v * Complex64::from_polar(1.0, ph);
                }
                acc
            })
            .collect();
        Ok(parts.into_iter().sum::<Complex64>() / g.len() as f64)
    }
}

/// `m(D) f` on the lattice.
pub fn apply_multiplier<M>(field: &PeriodicField, m: M) -> Result<PeriodicField>
where
    M: Fn(&[f64]) -> Complex64 + Sync,
{
    if field.side != Side::Physical {
        return Err(Error::InvalidParameter("apply_multiplier needs a physical-side field".into()));
    }
    let mut out = field.clone();
    out.forward()?;
    let g = out.grid;
    out.data.par_chunks_mut(g.n).enumerate().for_each(|(row, vals)| {
        let mut xi = [0.0; 4];
        for (j, v) in vals.iter_mut().enumerate() {
            g.frequency(row * g.n + j, &mut xi);
            *v *= m(&xi[..g.d]);
        }
    });
    out.inverse()?;
    Ok(out)
}

/// Multiplies by tabulated lattice values (same layout as the field).
pub fn apply_multiplier_values(field: &PeriodicField, m: &[Complex64]) -> Result<PeriodicField> {
    if field.side != Side::Physical {
        return Err(Error::InvalidParameter("apply_multiplier needs a physical-side field".into()));
    }
    if m.len() != field.data.len() {
        return Err(Error::InvalidParameter("multiplier table does not match the grid".into()));
    }
    let mut out = field.clone();
    out.forward()?;
    out.data.par_chunks_mut(CHUNK).zip(m.par_chunks(CHUNK)).for_each(|(a, b)| {
        for (v, w) in a.iter_mut().zip(b) {
            *v *= w;
        }
    });
    out.inverse()?;
    Ok(out)
}

fn chi_support(curve: &Curve, chi: &SmoothCutoff) -> Result<(f64, f64)> {
    let (a, b) = chi.support();
    let (lo, hi) = curve.domain();
    let (a, b) = (a.max(lo), b.min(hi));
    if !(b > a) {
        return Err(Error::InvalidParameter("cutoff support misses the curve domain".into()));
    }
    Ok((a, b))
}

/// Errors unless `|γ_i(s)| <= L/4` on the cutoff support.
pub fn check_cell(curve: &Curve, chi: &SmoothCutoff, grid: &GridSpec) -> Result<()> {
    if curve.dim() != grid.d {
        return Err(Error::InvalidParameter(format!("curve in R^{} on a {}-dimensional grid", curve.dim(), grid.d)));
    }
    let (a, b) = chi_support(curve, chi)?;
    let lim = grid.period / 4.0;
    for i in 0..=256 {
        let s = a + (b - a) * i as f64 / 256.0;
        let p = curve.point(s);
        if let Some(v) = p.iter().find(|v| v.abs() > lim) {
            return Err(Error::Wrap(format!("|γ(s)| component {v:.4} at s = {s:.4} exceeds L/4 = {lim:.4}")));
        }
    }
    Ok(())
}

fn is_graph(curve: &Curve, a: f64, b: f64) -> bool {
    let mut out = [0.0; crate::curve::MAX_DIM];
    (0..=16).all(|i| {
        let s = a + (b - a) * i as f64 / 16.0;
        curve.eval_into(s, 0, &mut out);
        (out[0] - s).abs() <= 1e-14 * (1.0 + s.abs())
    })
}

/// `μ̂(ξ) = ∫ e^{-i<γ(s),ξ>} χ(s) ds` at every lattice frequency.
///
/// Curves with `γ_1(s) = s` use a DFT in `s` per line of the first axis;
/// the sample count doubles until spot checks against adaptive quadrature
/// agree to `tol`. Other curves are evaluated point by point.
pub fn mu_hat_lattice(curve: &Curve, chi: &SmoothCutoff, grid: &GridSpec, tol: f64) -> Result<Vec<Complex64>> {
    check_cell(curve, chi, grid)?;
    let (a, b) = chi_support(curve, chi)?;
    if is_graph(curve, a, b) {
        let mut m = grid.n.max(64);
        loop {
            let table = mu_hat_graph(curve, chi, grid, (a, b), m)?;
            let err = spot_check(curve, chi, grid, &table)?;
            if err <= tol || m >= 1 << 18 {
                if err > tol {
                    return Err(Error::Accuracy { target: tol, achieved: err });
                }
                return Ok(table);
            }
            m *= 2;
        }
    }
    let mut out = vec![Complex64::default(); grid.len()];
    let errs: Vec<Result<()>> = out
        .par_chunks_mut(grid.n)
        .enumerate()
        .map(|(row, vals)| {
            let mut xi = [0.0; 4];
            for (j, v) in vals.iter_mut().enumerate() {
                grid.frequency(row * grid.n + j, &mut xi);
                *v = eval_mu_hat(curve, chi, &xi[..grid.d], tol * 0.5)?.value;
            }
            Ok(())
        })
        .collect();
    errs.into_iter().collect::<Result<Vec<()>>>()?;
    Ok(out)
}

fn spot_check(curve: &Curve, chi: &SmoothCutoff, grid: &GridSpec, table: &[Complex64]) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst = 0.0f64;
    let mut xi = [0.0; 4];
    let picks = [0usize, grid.len() - 1, grid.len() / 2 + grid.n / 2];
    let extra: Vec<usize> = (0..9).map(|_| rand::Rng::gen_range(&mut rng, 0..grid.len())).collect();
    for &idx in picks.iter().chain(&extra) {
        grid.frequency(idx, &mut xi);
        let want = eval_mu_hat(curve, chi, &xi[..grid.d], 1e-13)?.value;
        worst = worst.max((want - table[idx]).norm());
    }
    Ok(worst)
}

fn mu_hat_graph(curve: &Curve, chi: &SmoothCutoff, grid: &GridSpec, (a, _b): (f64, f64), m: usize) -> Result<Vec<Complex64>> {
    let n = grid.n;
    let d = grid.d;
    let ds = grid.period / m as f64;
    let mut pts = vec![0.0; m * d];
    let mut w = vec![0.0; m];
    let mut out = [0.0; crate::curve::MAX_DIM];
    for j in 0..m {
        let s = a + j as f64 * ds;
        w[j] = if curve.contains(s) { chi.value(s) } else { 0.0 };
        if w[j] != 0.0 {
            curve.eval_into(s, 0, &mut out);
            pts[j * d..(j + 1) * d].copy_from_slice(&out[..d]);
        }
    }
    let active: Vec<usize> = (0..m).filter(|&j| w[j] != 0.0).collect();
    let rest = n.pow(d as u32 - 1);
    let fft = plan(m, false);
    let st = grid.freq_step();
    let mut cols = vec![Complex64::default(); rest * n];
    cols.par_chunks_mut(n).enumerate().for_each(|(r, col)| {
        let mut buf = vec![Complex64::default(); m];
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        let mut xr = [0.0; 4];
        let mut rem = r;
        for ax in (1..d).rev() {
            xr[ax] = grid.wavenumber(rem % n) as f64 * st;
            rem /= n;
        }
        for &j in &active {
            let ph: f64 = (1..d).map(|ax| pts[j * d + ax] * xr[ax]).sum();
            buf[j] = Complex64::from_polar(w[j], -ph);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (i0, v) in col.iter_mut().enumerate() {
            let k = grid.wavenumber(i0);
            let xi1 = k as f64 * st;
            let slot = k.rem_euclid(m as i64) as usize;
            *v = buf[slot] * Complex64::from_polar(ds, -xi1 * a);
        }
    });
    let mut table = vec![Complex64::default(); grid.len()];
    table.par_chunks_mut(rest).enumerate().for_each(|(i0, row)| {
        for (r, v) in row.iter_mut().enumerate() {
            *v = cols[r * n + i0];
        }
    });
    Ok(table)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Backend {
    /// `μ̂` on the lattice, then a multiplier.
    Multiplier { tol: f64 },
    /// Composite Gauss quadrature in `s` (`panels` × 16 nodes) with
    /// separable periodic Lagrange interpolation on `taps` points per axis.
    Direct { panels: usize, taps: usize },
}

impl Default for Backend {
    fn default() -> Self {
        Backend::Multiplier { tol: 1e-10 }
    }
}

/// `A_γ f(x) = ∫ f(x - γ(s)) χ(s) ds`.
pub fn averaging_operator(curve: &Curve, chi: &SmoothCutoff, field: &PeriodicField, backend: Backend) -> Result<PeriodicField> {
    check_cell(curve, chi, &field.grid)?;
    if field.side != Side::Physical {
        return Err(Error::InvalidParameter("averaging_operator needs a physical-side field".into()));
    }
    match backend {
        Backend::Multiplier { tol } => {
            let m = mu_hat_lattice(curve, chi, &field.grid, tol)?;
            apply_multiplier_values(field, &m)
        }
        Backend::Direct { panels, taps } => direct_average(curve, chi, field, panels.max(1), taps),
    }
}

/// Lagrange weights for nodes `-(q-1)..=q` at offset `t ∈ [0, 1)`.
fn lagrange_weights(t: f64, taps: usize) -> Vec<f64> {
    let q = (taps / 2) as i64;
    let nodes: Vec<f64> = (-(q - 1)..=q).map(|m| m as f64).collect();
    nodes
        .iter()
        .map(|&xm| {
            nodes.iter().filter(|&&xj| xj != xm).fold(1.0, |acc, &xj| acc * (t - xj) / (xm - xj))
        })
        .collect()
}

/// `out(x) = f(x - v_axis e_axis)` by periodic Lagrange interpolation.
fn shift_axis(grid: &GridSpec, src: &[Complex64], out: &mut [Complex64], axis: usize, v: f64, taps: usize) {
    let n = grid.n;
    let inner = n.pow((grid.d - 1 - axis) as u32);
    let c = -v / grid.spacing();
    let base = c.floor();
    let w = lagrange_weights(c - base, taps);
    let base = base as i64;
    let q = (taps / 2) as i64;
    out.par_chunks_mut(inner).enumerate().for_each(|(row, dst)| {
        let o = row / n;
        let i = (row % n) as i64;
        dst.iter_mut().for_each(|z| *z = Complex64::default());
        for (t, wt) in w.iter().enumerate() {
            let m = t as i64 - (q - 1);
            let si = (i + base + m).rem_euclid(n as i64) as usize;
            let s0 = (o * n + si) * inner;
            for (z, y) in dst.iter_mut().zip(&src[s0..s0 + inner]) {
                *z += y * wt;
            }
        }
    });
}

fn direct_average(curve: &Curve, chi: &SmoothCutoff, field: &PeriodicField, panels: usize, taps: usize) -> Result<PeriodicField> {
    if taps < 2 || taps % 2 == 1 {
        return Err(Error::InvalidParameter(format!("taps = {taps} must be even and >= 2")));
    }
    let grid = field.grid;
    let (a, b) = chi_support(curve, chi)?;
    let rule = gauss(16);
    let width = (b - a) / panels as f64;
    let mut acc = PeriodicField::zeros(grid, Side::Physical);
    let mut cur = vec![Complex64::default(); grid.len()];
    let mut nxt = vec![Complex64::default(); grid.len()];
    let mut out = [0.0; crate::curve::MAX_DIM];
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let c = lo + 0.5 * width;
        for (x, wq) in rule.nodes.iter().zip(&rule.weights) {
            let s = c + 0.5 * width * x;
            let weight = wq * 0.5 * width * chi.value(s);
            if weight == 0.0 {
                continue;
            }
            curve.eval_into(s, 0, &mut out);
            cur.copy_from_slice(&field.data);
            for axis in 0..grid.d {
                shift_axis(&grid, &cur, &mut nxt, axis, out[axis], taps);
                std::mem::swap(&mut cur, &mut nxt);
            }
            acc.data.par_chunks_mut(CHUNK).zip(cur.par_chunks(CHUNK)).for_each(|(a, b)| {
                for (z, y) in a.iter_mut().zip(b) {
                    *z += y * weight;
                }
            });
        }
    }
    Ok(acc)
}

/// Relative `ℓ²` distance between two physical fields.
pub fn relative_l2(a: &PeriodicField, b: &PeriodicField) -> f64 {
    let num: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.data.iter().map(|y| y.norm_sqr()).sum();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeFamily {
    /// Complex Gaussian coefficients on the dyadic band.
    Random,
    /// `f̂ = β(ξ/λ) ψ̂(ξ/λ)`, `λ = 2^k`: concentrated near the origin.
    Bump,
    /// `conj(μ̂) · bump`: concentrated along the reflected curve, so that
    /// `A f` focuses at the origin.
    Focusing,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub families: Vec<ProbeFamily>,
    pub random_trials: usize,
    pub seed: u64,
    /// Width `c` of the Gaussian `ψ`, in units of `1/λ`.
    pub bump_width: f64,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        Self {
            families: vec![ProbeFamily::Random, ProbeFamily::Bump, ProbeFamily::Focusing],
            random_trials: 2,
            seed: 1,
            bump_width: 0.1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbeSample {
    pub k: u32,
    pub family: ProbeFamily,
    pub trial: usize,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OperatorProbeReport {
    pub k: u32,
    pub p: f64,
    pub samples: Vec<ProbeSample>,
    pub family_max: BTreeMap<ProbeFamily, f64>,
    pub max_ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbeSweep {
    pub grid: GridSpec,
    pub reports: Vec<OperatorProbeReport>,
    /// `log max_ratio` against `log 2^k`.
    pub fit: Option<LinearFit>,
}

/// Fields a probe run keeps alive at once: `μ̂`, the probe, the image and
/// transform scratch.
pub const PROBE_FIELDS: usize = 4;

/// Lattice data shared across bands.
pub struct ProbeContext {
    pub grid: GridSpec,
    pub mu: Vec<Complex64>,
}

impl ProbeContext {
    pub fn new(curve: &Curve, chi: &SmoothCutoff, grid: GridSpec, budget: u64) -> Result<Self> {
        grid.check_budget(PROBE_FIELDS, budget)?;
        let mu = mu_hat_lattice(curve, chi, &grid, 1e-9)?;
        Ok(Self { grid, mu })
    }
}

fn radius(xi: &[f64]) -> f64 {
    xi.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `‖β^k(D) A f‖_p / ‖f‖_p` for the requested families at one band.
pub fn dyadic_operator_probe(ctx: &ProbeContext, k: u32, p: f64, spec: &ProbeSpec) -> Result<OperatorProbeReport> {
    let grid = ctx.grid;
    let top = 2f64.powi(k as i32 + 1);
    if top > grid.nyquist() {
        return Err(Error::Nyquist { freq: top, nyquist: grid.nyquist() });
    }
    let beta = littlewood_paley(k);
    let lambda = 2f64.powi(k as i32);
    let c = spec.bump_width;
    let mut samples = Vec::new();
    for &family in &spec.families {
        let trials = if family == ProbeFamily::Random { spec.random_trials.max(1) } else { 1 };
        for trial in 0..trials {
            let mut f = PeriodicField::zeros(grid, Side::Frequency);
            match family {
                ProbeFamily::Random => {
                    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                    rng.set_stream(((k as u64) << 32) | trial as u64);
                    let mut xi = [0.0; 4];
                    for (idx, v) in f.data.iter_mut().enumerate() {
                        grid.frequency(idx, &mut xi);
                        let b = beta.value(radius(&xi[..grid.d]));
                        if b != 0.0 {
                            let re: f64 = StandardNormal.sample(&mut rng);
                            let im: f64 = StandardNormal.sample(&mut rng);
                            *v = Complex64::new(re, im) * (b / 2f64.sqrt());
                        }
                    }
                }
                ProbeFamily::Bump | ProbeFamily::Focusing => {
                    let focus = family == ProbeFamily::Focusing;
                    let mu = &ctx.mu;
                    let scale = lambda.powi(-(grid.d as i32)) / grid.cell_volume();
                    fill(&grid, &mut f.data, true, |idx, xi| {
                        let r = radius(xi);
                        let b = beta.value(r);
                        if b == 0.0 {
                            return Complex64::default();
                        }
                        let v = Complex64::new(b * (-0.5 * (c * r / lambda).powi(2)).exp() * scale, 0.0);
                        if focus {
                            v * mu[idx].conj()
                        } else {
                            v
                        }
                    });
                }
            }
            let mut g = f.clone();
            g.data.par_chunks_mut(CHUNK).zip(ctx.mu.par_chunks(CHUNK)).enumerate().for_each(|(ci, (a, m))| {
                let mut xi = [0.0; 4];
                for (j, (v, w)) in a.iter_mut().zip(m).enumerate() {
                    if *v == Complex64::default() {
                        continue;
                    }
                    grid.frequency(ci * CHUNK + j, &mut xi);
                    *v *= w * beta.value(radius(&xi[..grid.d]));
                }
            });
            f.inverse()?;
            let den = f.lp_norm(p)?;
            drop(f);
            g.inverse()?;
            let num = g.lp_norm(p)?;
            let ratio = if den > 0.0 { num / den } else { 0.0 };
            samples.push(ProbeSample { k, family, trial, ratio });
        }
    }
    let mut family_max = BTreeMap::new();
    for s in &samples {
        let e = family_max.entry(s.family).or_insert(0.0f64);
        *e = e.max(s.ratio);
    }
    let max_ratio = family_max.values().fold(0.0, |m: f64, v| m.max(*v));
    Ok(OperatorProbeReport { k, p, samples, family_max, max_ratio })
}

/// Probes over a range of bands and fits the decay of the maximal ratio.
pub fn probe_sweep(
    curve: &Curve,
    chi: &SmoothCutoff,
    grid: GridSpec,
    ks: &[u32],
    p: f64,
    spec: &ProbeSpec,
    budget: u64,
) -> Result<ProbeSweep> {
    for &k in ks {
        let top = 2f64.powi(k as i32 + 1);
        if top > grid.nyquist() {
            return Err(Error::Nyquist { freq: top, nyquist: grid.nyquist() });
        }
    }
    let ctx = ProbeContext::new(curve, chi, grid, budget)?;
    let mut reports = Vec::new();
    for &k in ks {
        reports.push(dyadic_operator_probe(&ctx, k, p, spec)?);
    }
    let x: Vec<f64> = reports.iter().map(|r| 2f64.powi(r.k as i32)).collect();
    let y: Vec<f64> = reports.iter().map(|r| r.max_ratio).collect();
    let fit = if reports.len() >= 4 { Some(LinearFit::loglog(&x, &y)?) } else { None };
    Ok(ProbeSweep { grid, reports, fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::moment_curve;
    use rand::Rng;

    fn random_band(grid: GridSpec, kmax: i64, seed: u64) -> PeriodicField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = PeriodicField::zeros(grid, Side::Frequency);
        let mut m = [0usize; 4];
        for (idx, v) in f.data.iter_mut().enumerate() {
            grid.split(idx, &mut m);
            if (0..grid.d).all(|a| grid.wavenumber(m[a]).abs() <= kmax) {
                *v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        f.into_physical().unwrap()
    }

    #[test]
    fn round_trip() {
        for d in 2..=4 {
            let grid = GridSpec::torus(d, 8).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(d as u64);
            let mut g = PeriodicField::zeros(grid, Side::Physical);
            for v in g.data.iter_mut() {
                *v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
            let h = g.clone().into_frequency().unwrap().into_physical().unwrap();
            assert!(relative_l2(&h, &g) <= 1e-12);
        }
    }

    #[test]
    fn single_mode_lands_on_its_index() {
        let grid = GridSpec::torus(3, 16).unwrap();
        let k = [3i64, -5, 7];
        let f = PeriodicField::from_fn(grid, |x| Complex64::from_polar(1.0, (0..3).map(|a| k[a] as f64 * x[a]).sum()));
        let f = f.into_frequency().unwrap();
        let idx = grid.index_of(&k).unwrap();
        assert!((f.data[idx] - Complex64::new(grid.len() as f64, 0.0)).norm() < 1e-8);
        let rest: f64 = f.data.iter().enumerate().filter(|(i, _)| *i != idx).map(|(_, v)| v.norm()).sum();
        assert!(rest < 1e-7, "{rest}");
    }

    #[test]
    fn identity_and_shift_multipliers() {
        let grid = GridSpec::torus(2, 32).unwrap();
        let f = random_band(grid, 10, 3);
        let g = apply_multiplier(&f, |_| Complex64::new(1.0, 0.0)).unwrap();
        assert!(relative_l2(&g, &f) <= 1e-12);
        let h = grid.spacing();
        let v = [3.0 * h, -5.0 * h];
        let g = apply_multiplier(&f, |xi| Complex64::from_polar(1.0, -(xi[0] * v[0] + xi[1] * v[1]))).unwrap();
        // e^{-i<v,ξ>} is translation by v: g(x) = f(x - v).
        let mut m = [0usize; 4];
        let mut worst = 0.0f64;
        for idx in 0..grid.len() {
            grid.split(idx, &mut m);
            let src = ((m[0] + 32 - 3) % 32) * 32 + (m[1] + 5) % 32;
            worst = worst.max((g.data[idx] - f.data[src]).norm());
        }
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn norms_of_simple_fields() {
        let grid = GridSpec::new(3, 16, 3.0).unwrap();
        let c = Complex64::new(0.0, 2.5);
        let f = PeriodicField::from_fn(grid, |_| c);
        for p in [1.0, 2.0, 3.5, 6.0] {
            let want = 2.5 * 3f64.powf(3.0 / p);
            assert!((f.lp_norm(p).unwrap() - want).abs() <= 1e-12 * want);
        }
        assert!((f.lp_norm(f64::INFINITY).unwrap() - 2.5).abs() < 1e-15);

        let grid = GridSpec::torus(2, 32).unwrap();
        let k = [4.0, -3.0];
        let f = PeriodicField::from_fn(grid, |x| Complex64::from_polar(1.0, k[0] * x[0] + k[1] * x[1]));
        for (p, alpha) in [(2.0, 0.5), (4.0, 1.0), (1.5, 2.0)] {
            let want = (1.0f64 + 25.0).powf(alpha / 2.0) * f.lp_norm(p).unwrap();
            let got = f.sobolev_norm(p, alpha).unwrap();
            assert!((got - want).abs() <= 1e-10 * want, "{got} {want}");
        }

        let f = random_band(grid, 12, 9);
        let a = f.lp_norm(2.0).unwrap();
        let b = f.clone().into_frequency().unwrap().l2_norm_spectral().unwrap();
        assert!((a - b).abs() <= 1e-10 * a);
    }

    #[test]
    fn mu_hat_table_matches_quadrature() {
        let g = moment_curve(2).unwrap();
        let chi = SmoothCutoff::bump(0.25);
        let grid = GridSpec::torus(2, 64).unwrap();
        let table = mu_hat_lattice(&g, &chi, &grid, 1e-10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut xi = [0.0; 4];
        for _ in 0..40 {
            let idx = rng.gen_range(0..grid.len());
            grid.frequency(idx, &mut xi);
            let want = eval_mu_hat(&g, &chi, &xi[..2], 1e-13).unwrap().value;
            assert!((table[idx] - want).norm() < 1e-9);
        }
    }

    #[test]
    fn averaging_constant_and_mode() {
        let g = moment_curve(2).unwrap();
        let chi = SmoothCutoff::bump(0.25);
        let grid = GridSpec::torus(2, 32).unwrap();
        let one = PeriodicField::from_fn(grid, |_| Complex64::new(1.0, 0.0));
        let mass = eval_mu_hat(&g, &chi, &[0.0, 0.0], 1e-13).unwrap().value.re;
        let a = averaging_operator(&g, &chi, &one, Backend::default()).unwrap();
        assert!(a.data.iter().all(|v| (v - mass).norm() < 1e-10));
        let k = [5.0, -2.0];
        let f = PeriodicField::from_fn(grid, |x| Complex64::from_polar(1.0, k[0] * x[0] + k[1] * x[1]));
        let mu = eval_mu_hat(&g, &chi, &k, 1e-13).unwrap().value;
        let a = averaging_operator(&g, &chi, &f, Backend::default()).unwrap();
        let worst = a.data.iter().zip(&f.data).map(|(x, y)| (x - mu * y).norm()).fold(0.0, f64::max);
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn backends_agree_in_two_dimensions() {
        let g = moment_curve(2).unwrap();
        let chi = SmoothCutoff::bump(0.25);
        let grid = GridSpec::torus(2, 64).unwrap();
        let f = random_band(grid, 6, 11);
        let a = averaging_operator(&g, &chi, &f, Backend::default()).unwrap();
        let b = averaging_operator(&g, &chi, &f, Backend::Direct { panels: 8, taps: 8 }).unwrap();
        let e = relative_l2(&a, &b);
        assert!(e < 1e-5, "{e}");
    }

    #[test]
    fn backends_agree_in_three_dimensions() {
        let g = moment_curve(3).unwrap();
        let chi = SmoothCutoff::bump(0.25);
        let grid = GridSpec::torus(3, 64).unwrap();
        let f = random_band(grid, 5, 12);
        let a = averaging_operator(&g, &chi, &f, Backend::default()).unwrap();
        let b = averaging_operator(&g, &chi, &f, Backend::Direct { panels: 4, taps: 8 }).unwrap();
        let e = relative_l2(&a, &b);
        assert!(e < 1e-4, "{e}");
    }

    #[test]
    fn linear_and_translation_covariant() {
        let g = moment_curve(2).unwrap();
        let chi = SmoothCutoff::bump(0.25);
        let grid = GridSpec::torus(2, 32).unwrap();
        let f = random_band(grid, 8, 1);
        let h = random_band(grid, 8, 2);
        let z = Complex64::new(0.3, -1.2);
        let mut comb = f.clone();
        comb.data.iter_mut().zip(&h.data).for_each(|(a, b)| *a = *a * z + b);
        let be = Backend::default();
        let lhs = averaging_operator(&g, &chi, &comb, be).unwrap();
        let af = averaging_operator(&g, &chi, &f, be).unwrap();
        let ah = averaging_operator(&g, &chi, &h, be).unwrap();
        let mut rhs = af.clone();
        rhs.data.iter_mut().zip(&ah.data).for_each(|(a, b)| *a = *a * z + b);
        assert!(relative_l2(&lhs, &rhs) < 1e-10);
        // shift by 5 rows
        let mut fs = f.clone();
        for idx in 0..grid.len() {
            fs.data[idx] = f.data[(idx + 5 * 32) % grid.len()];
        }
        let afs = averaging_operator(&g, &chi, &fs, be).unwrap();
        let mut want = af.clone();
        for idx in 0..grid.len() {
            want.data[idx] = af.data[(idx + 5 * 32) % grid.len()];
        }
        assert!(relative_l2(&afs, &want) < 1e-10);
    }

    #[test]
    fn wrap_is_refused() {
        let g = moment_curve(2).unwrap();
        let chi = SmoothCutoff::bump(0.8);
        let grid = GridSpec::new(2, 16, 2.0).unwrap();
        let f = PeriodicField::zeros(grid, Side::Physical);
        assert!(matches!(averaging_operator(&g, &chi, &f, Backend::default()), Err(Error::Wrap(_))));
    }

    #[test]
    fn budget_estimate() {
        let grid = GridSpec::torus(4, 256).unwrap();
        let err = grid.check_budget(1, DEFAULT_BUDGET).unwrap_err();
        assert_eq!(err, Error::Budget { required: 1 << 36, budget: DEFAULT_BUDGET });
        assert!(GridSpec::torus(4, 64).unwrap().check_budget(PROBE_FIELDS, DEFAULT_BUDGET).is_ok());
    }

    #[test]
    fn probe_refuses_bands_past_nyquist() {
        let g = moment_curve(2).unwrap();
        let chi = SmoothCutoff::bump(0.25);
        let grid = GridSpec::torus(2, 64).unwrap();
        let r = probe_sweep(&g, &chi, grid, &[4, 5], 4.0, &ProbeSpec::default(), DEFAULT_BUDGET);
        assert!(matches!(r, Err(Error::Nyquist { .. })));
    }

    #[test]
    fn probe_ratios_are_positive_and_decay() {
        let g = moment_curve(2).unwrap();
        let chi = SmoothCutoff::bump(0.25);
        let grid = GridSpec::torus(2, 256).unwrap();
        let sw = probe_sweep(&g, &chi, grid, &[3, 4, 5, 6], 4.0, &ProbeSpec::default(), DEFAULT_BUDGET).unwrap();
        for r in &sw.reports {
            assert!(r.samples.iter().all(|s| s.ratio > 0.0));
        }
        let fit = sw.fit.unwrap();
        assert!(fit.slope < 0.0, "{fit:?}");
    }
}
