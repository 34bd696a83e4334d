//! Slabs and plates around curves and cones, cone-generating tuples built
//! from the Frenet frame, the rescaling identities for tuples, and an
//! empirical decoupling estimator on periodic grids.

use crate::curve::Curve;
use crate::error::{Error, Result};
use crate::frenet::{frenet_frame, DEFAULT_CONDITION_CAP};
use crate::grid::{GridSpec, PeriodicField, Side};
use crate::stats::LinearFit;
use crate::symbols::FrenetBox;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Chebyshev series on `[a, b]`.
#[derive(Clone, Debug)]
struct Cheb {
    a: f64,
    b: f64,
    c: Vec<f64>,
}

impl Cheb {
    fn nodes(a: f64, b: f64, m: usize) -> Vec<f64> {
        (0..m).map(|k| 0.5 * (a + b) + 0.5 * (b - a) * (PI * (k as f64 + 0.5) / m as f64).cos()).collect()
    }

    fn fit(a: f64, b: f64, vals: &[f64]) -> Self {
        let m = vals.len();
        let mut c = vec![0.0; m];
        for (j, cj) in c.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, v) in vals.iter().enumerate() {
                acc += v * (PI * j as f64 * (k as f64 + 0.5) / m as f64).cos();
            }
            *cj = 2.0 * acc / m as f64;
        }
        c[0] *= 0.5;
        // Drop the rounding-noise tail so it is not amplified by differentiation.
        let big = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let keep = c.iter().rposition(|v| v.abs() > 1e-14 * big).map_or(1, |i| i + 1);
        c.truncate(keep);
        Self { a, b, c }
    }

    fn derivative(&self) -> Self {
        let m = self.c.len();
        let mut d = vec![0.0; m.max(1)];
        if m > 1 {
            for j in (1..m).rev() {
                let next = if j + 1 < m { d[j + 1] } else { 0.0 };
                d[j - 1] = next + 2.0 * j as f64 * self.c[j];
            }
            d[0] *= 0.5;
            d.truncate(m - 1);
        }
        let s = 2.0 / (self.b - self.a);
        Self { a: self.a, b: self.b, c: d.into_iter().map(|v| v * s).collect() }
    }

    fn eval(&self, s: f64) -> f64 {
        let x = (2.0 * s - self.a - self.b) / (self.b - self.a);
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.c.iter().skip(1).rev() {
            let t = 2.0 * x * b1 - b2 + c;
            b2 = b1;
            b1 = t;
        }
        x * b1 - b2 + self.c.first().copied().unwrap_or(0.0)
    }
}

enum TupleRepr {
    /// `entries[i * m + j][order]`, the Chebyshev series of `g_{d+1+j}` component `i`.
    Interpolated { entries: Vec<Vec<Cheb>> },
    /// `t ↦ [g_a]_{b,ρ}^{-1}(g(b + ρt) - g(b))`.
    Rescaled { parent: ConeTuple, b: f64, rho: f64, minv: DMatrix<f64>, g_b: DMatrix<f64> },
}

struct TupleInner {
    n: usize,
    d: usize,
    interval: (f64, f64),
    repr: TupleRepr,
    source: String,
}

/// A tuple `(g_{d+1}, …, g_n)` of curves into `R^d`; the cone it generates is
/// `{Σ λ_j ((g_j(s), 0) + e_j)}`.
#[derive(Clone)]
pub struct ConeTuple(Arc<TupleInner>);

impl std::fmt::Debug for ConeTuple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConeTuple")
            .field("n", &self.0.n)
            .field("d", &self.0.d)
            .field("interval", &self.0.interval)
            .field("source", &self.0.source)
            .finish()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TupleOptions {
    pub interval: (f64, f64),
    /// Chebyshev nodes per entry.
    pub nodes: usize,
}

impl Default for TupleOptions {
    fn default() -> Self {
        Self { interval: (-0.5, 0.5), nodes: 48 }
    }
}

/// Frame-derived pieces at one parameter: `A(s)` and `G(s) = E_tail A(s)`.
#[derive(Clone, Debug)]
pub struct TupleFrame {
    /// `[e_{d+1}(s) … e_n(s)]`.
    pub tail: DMatrix<f64>,
    pub a: DMatrix<f64>,
    /// Columns `G_j(s)`; the lower block is the identity by construction.
    pub g_full: DMatrix<f64>,
}

/// `A(s)` is the inverse of the lower-right block of the Frenet frame.
pub fn tuple_frame(curve: &Curve, d: usize, s: f64) -> Result<TupleFrame> {
    let n = curve.dim();
    if d < 2 || d + 1 > n {
        return Err(Error::InvalidParameter(format!("need 2 <= d <= n-1 = {}, got d = {d}", n - 1)));
    }
    let m = n - d;
    let e = frenet_frame(curve, s)?.e;
    let tail = e.columns(d, m).into_owned();
    let block = tail.rows(d, m).into_owned();
    let sv = block.clone().svd(false, false).singular_values;
    let (lo, hi) = (sv.min(), sv.max());
    if !(lo > 0.0) || hi / lo > DEFAULT_CONDITION_CAP {
        return Err(Error::Degenerate {
            s,
            detail: format!("lower frame block has condition number {:.3e}", hi / lo),
        });
    }
    let a = block.try_inverse().ok_or_else(|| Error::Degenerate { s, detail: "singular lower frame block".into() })?;
    let mut g_full = &tail * &a;
    for i in 0..m {
        for j in 0..m {
            g_full[(d + i, j)] = if i == j { 1.0 } else { 0.0 };
        }
    }
    Ok(TupleFrame { tail, a, g_full })
}

/// The tuple generating the cone spanned by `e_{d+1}, …, e_n`, as Chebyshev
/// interpolants on `opts.interval`.
pub fn cone_tuple_from_curve(curve: &Curve, d: usize, opts: &TupleOptions) -> Result<ConeTuple> {
    let n = curve.dim();
    let (a, b) = opts.interval;
    if !(b > a) || !curve.contains(a) || !curve.contains(b) {
        return Err(Error::InvalidParameter(format!("interval {:?} not inside the curve domain", opts.interval)));
    }
    if opts.nodes < 4 {
        return Err(Error::InvalidParameter("need at least 4 interpolation nodes".into()));
    }
    let nodes = Cheb::nodes(a, b, opts.nodes);
    let frames: Vec<TupleFrame> = nodes.iter().map(|&s| tuple_frame(curve, d, s)).collect::<Result<_>>()?;
    let m = n - d;
    let mut entries = Vec::with_capacity(d * m);
    for i in 0..d {
        for j in 0..m {
            let vals: Vec<f64> = frames.iter().map(|f| f.g_full[(i, j)]).collect();
            let mut chain = vec![Cheb::fit(a, b, &vals)];
            for o in 0..d + 2 {
                let next = chain[o].derivative();
                chain.push(next);
            }
            entries.push(chain);
        }
    }
    Ok(ConeTuple(Arc::new(TupleInner {
        n,
        d,
        interval: (a, b),
        repr: TupleRepr::Interpolated { entries },
        source: format!("frame of {:?} curve in R^{n}, d = {d}", curve.kind()),
    })))
}

fn rel_cols(lhs: &DMatrix<f64>, rhs: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..rhs.ncols() {
        let den = rhs.column(j).amax().max(f64::MIN_POSITIVE);
        worst = worst.max((lhs.column(j) - rhs.column(j)).amax() / den);
    }
    worst
}

impl ConeTuple {
    pub fn n(&self) -> usize {
        self.0.n
    }

    pub fn d(&self) -> usize {
        self.0.d
    }

    pub fn interval(&self) -> (f64, f64) {
        self.0.interval
    }

    pub fn source(&self) -> &str {
        &self.0.source
    }

    fn check(&self, s: f64) -> Result<()> {
        let (a, b) = self.0.interval;
        let tol = 1e-12 * (1.0 + a.abs().max(b.abs()));
        if s < a - tol || s > b + tol {
            return Err(Error::Domain { s, a, b });
        }
        Ok(())
    }

    /// `𝐠^{(order)}(s)`, the `d × (n-d)` matrix with columns `g_j^{(order)}(s)`.
    pub fn eval(&self, s: f64, order: usize) -> Result<DMatrix<f64>> {
        self.check(s)?;
        let (d, m) = (self.0.d, self.0.n - self.0.d);
        match &self.0.repr {
            TupleRepr::Interpolated { entries } => {
                let mut out = DMatrix::zeros(d, m);
                for i in 0..d {
                    for j in 0..m {
                        let chain = &entries[i * m + j];
                        out[(i, j)] = match chain.get(order) {
                            Some(c) => c.eval(s),
                            None => {
                                let mut c = chain.last().unwrap().clone();
                                for _ in chain.len() - 1..order {
                                    c = c.derivative();
                                }
                                c.eval(s)
                            }
                        };
                    }
                }
                Ok(out)
            }
            TupleRepr::Rescaled { parent, b, rho, minv, g_b } => {
                let x = b + rho * s;
                let v = parent.eval(x, order)?;
                Ok(if order == 0 { minv * (v - g_b) } else { minv * v * rho.powi(order as i32) })
            }
        }
    }

    /// `g_a^{(order)}(s) = Σ a_j g_j^{(order)}(s)`.
    pub fn combined(&self, a: &[f64], s: f64, order: usize) -> Result<DVector<f64>> {
        if a.len() != self.0.n - self.0.d {
            return Err(Error::InvalidParameter(format!("weights have length {}, need {}", a.len(), self.0.n - self.0.d)));
        }
        Ok(self.eval(s, order)? * DVector::from_column_slice(a))
    }

    /// `[g_a]_{s,r}`: columns `r^j g_a^{(j)}(s)`, `1 <= j <= d`.
    pub fn gamma_matrix(&self, a: &[f64], s: f64, r: f64) -> Result<DMatrix<f64>> {
        let d = self.0.d;
        let mut m = DMatrix::zeros(d, d);
        for j in 1..=d {
            m.set_column(j - 1, &(self.combined(a, s, j)? * r.powi(j as i32)));
        }
        Ok(m)
    }

    /// The block matrix `[[g_a]_{s,r}, 𝐠(s); 0, I]`.
    pub fn plate_matrix(&self, a: &[f64], s: f64, r: f64) -> Result<DMatrix<f64>> {
        let (n, d) = (self.0.n, self.0.d);
        let mut out = DMatrix::zeros(n, n);
        out.view_mut((0, 0), (d, d)).copy_from(&self.gamma_matrix(a, s, r)?);
        out.view_mut((0, d), (d, n - d)).copy_from(&self.eval(s, 0)?);
        for j in d..n {
            out[(j, j)] = 1.0;
        }
        Ok(out)
    }

    /// `min |det [g_a]_s|` over `samples` equispaced points.
    pub fn min_abs_det(&self, a: &[f64], samples: usize) -> Result<f64> {
        let (lo, hi) = self.0.interval;
        let mut best = f64::INFINITY;
        for i in 0..samples.max(2) {
            let s = lo + (hi - lo) * i as f64 / (samples.max(2) - 1) as f64;
            best = best.min(self.gamma_matrix(a, s, 1.0)?.determinant().abs());
        }
        Ok(best)
    }

    /// `𝐠_{a,b,ρ}(t) = [g_a]_{b,ρ}^{-1}(𝐠(b + ρt) - 𝐠(b))`, with derivatives
    /// by the chain rule.
    pub fn rescaled(&self, a: &[f64], b: f64, rho: f64) -> Result<ConeTuple> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::InvalidParameter(format!("ρ = {rho} must lie in (0, 1]")));
        }
        self.check(b)?;
        let m = self.gamma_matrix(a, b, rho)?;
        let minv = m.clone().try_inverse().ok_or_else(|| Error::Degenerate { s: b, detail: "[g_a]_{b,ρ} is singular".into() })?;
        let g_b = self.eval(b, 0)?;
        let (lo, hi) = self.0.interval;
        Ok(ConeTuple(Arc::new(TupleInner {
            n: self.0.n,
            d: self.0.d,
            interval: ((lo - b) / rho, (hi - b) / rho),
            repr: TupleRepr::Rescaled { parent: self.clone(), b, rho, minv, g_b },
            source: format!("rescaling of ({}) at b = {b}, ρ = {rho}", self.0.source),
        })))
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LorentzResidual {
    /// Column-relative residual of `[g_a]_{b,ρ} [g̃_a]_{t, r/ρ} = [g_a]_{s,r}`.
    pub matrix: f64,
    /// Residual of `[g_a]_{b,ρ} 𝐠̃(t) + 𝐠(b) = 𝐠(s)`, relative to `max(|𝐠(s)|, |𝐠(b)|)`.
    pub offset: f64,
}

impl LorentzResidual {
    pub fn worst(&self) -> f64 {
        self.matrix.max(self.offset)
    }
}

/// Both sides of the two rescaling identities at `t = (s - b)/ρ`.
pub fn lorentz_identity_check(tuple: &ConeTuple, a: &[f64], b: f64, rho: f64, s: f64, r: f64) -> Result<LorentzResidual> {
    if !(r > 0.0 && r <= rho) {
        return Err(Error::InvalidParameter(format!("need 0 < r <= ρ, got r = {r}, ρ = {rho}")));
    }
    let resc = tuple.rescaled(a, b, rho)?;
    let m = tuple.gamma_matrix(a, b, rho)?;
    let t = (s - b) / rho;
    let lhs = &m * resc.gamma_matrix(a, t, r / rho)?;
    let rhs = tuple.gamma_matrix(a, s, r)?;
    let matrix = rel_cols(&lhs, &rhs);
    let g_b = tuple.eval(b, 0)?;
    let g_s = tuple.eval(s, 0)?;
    let lhs = &m * resc.eval(t, 0)? + &g_b;
    let scale = g_s.amax().max(g_b.amax()).max(f64::MIN_POSITIVE);
    let offset = (lhs - &g_s).amax() / scale;
    Ok(LorentzResidual { matrix, offset })
}

/// A parallelepiped `g(s) + [g]_{s,r}([-2, 2]^d)` around a curve in `R^d`.
#[derive(Clone, Debug)]
pub struct Slab {
    pub s: f64,
    pub r: f64,
    pub center: DVector<f64>,
    pub matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
}

impl Slab {
    fn build(s: f64, r: f64, center: DVector<f64>, matrix: DMatrix<f64>) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::InvalidParameter(format!("slab scale r = {r} must be positive")));
        }
        let inverse = matrix.clone().try_inverse().ok_or_else(|| Error::Degenerate { s, detail: "[g]_{s,r} is singular".into() })?;
        Ok(Self { s, r, center, matrix, inverse })
    }

    /// Slab around a curve `g : I -> R^d`.
    pub fn from_curve(g: &Curve, s: f64, r: f64) -> Result<Self> {
        g.check_domain(s)?;
        let d = g.dim();
        let mut m = DMatrix::zeros(d, d);
        for j in 1..=d {
            m.set_column(j - 1, &(g.derivative(s, j) * r.powi(j as i32)));
        }
        Self::build(s, r, g.point(s), m)
    }

    /// Slab around `g_a` for a cone tuple.
    pub fn from_tuple(tuple: &ConeTuple, a: &[f64], s: f64, r: f64) -> Result<Self> {
        Self::build(s, r, tuple.combined(a, s, 0)?, tuple.gamma_matrix(a, s, r)?)
    }

    /// `[g]_{s,r}^{-1}(ξ - g(s))`.
    pub fn coordinates(&self, xi: &[f64]) -> DVector<f64> {
        &self.inverse * (DVector::from_column_slice(xi) - &self.center)
    }

    pub fn contains(&self, xi: &[f64], slack: f64) -> bool {
        self.coordinates(xi).amax() <= 2.0 * slack
    }
}

/// An `(a, K)`-truncated `r`-plate: `[𝐠]_{a,s,r}([-2,2]^n) ∩ Q(a, 1/K)`.
#[derive(Clone, Debug)]
pub struct Plate {
    pub tuple: ConeTuple,
    pub a: Vec<f64>,
    pub s: f64,
    pub r: f64,
    pub k_trunc: f64,
    pub matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
}

impl Plate {
    pub fn new(tuple: &ConeTuple, a: &[f64], s: f64, r: f64, k_trunc: f64) -> Result<Self> {
        if !(k_trunc >= 1.0) {
            return Err(Error::InvalidParameter(format!("K = {k_trunc} must be >= 1")));
        }
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::InvalidParameter(format!("plate scale r = {r} must lie in (0, 1]")));
        }
        let matrix = tuple.plate_matrix(a, s, r)?;
        let inverse = matrix.clone().try_inverse().ok_or_else(|| Error::Degenerate { s, detail: "plate matrix is singular".into() })?;
        Ok(Self { tuple: tuple.clone(), a: a.to_vec(), s, r, k_trunc, matrix, inverse })
    }

    pub fn coordinates(&self, xi: &[f64]) -> DVector<f64> {
        &self.inverse * DVector::from_column_slice(xi)
    }

    pub fn in_cube(&self, xi: &[f64], slack: f64) -> bool {
        let d = self.tuple.d();
        self.a.iter().enumerate().all(|(j, aj)| (xi[d + j] - aj).abs() <= slack / self.k_trunc)
    }

    pub fn contains(&self, xi: &[f64], slack: f64) -> bool {
        self.in_cube(xi, slack) && self.coordinates(xi).amax() <= 2.0 * slack
    }

    /// Point with plate coordinates `eta` (the last `n - d` entries are `ξ''`).
    pub fn point(&self, eta: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(eta)).iter().copied().collect()
    }

    /// Smallest `C` with `proj_d ξ ∈ α(g_a; s; C r)`.
    pub fn projection_slack(&self, xi: &[f64]) -> Result<f64> {
        let d = self.tuple.d();
        let m = self.tuple.gamma_matrix(&self.a, self.s, 1.0)?;
        let inv = m.try_inverse().ok_or_else(|| Error::Degenerate { s: self.s, detail: "[g_a]_s is singular".into() })?;
        let c = inv * (DVector::from_column_slice(&xi[..d]) - self.tuple.combined(&self.a, self.s, 0)?);
        Ok((0..d).map(|j| (c[j].abs() / 2.0).powf(1.0 / (j + 1) as f64) / self.r).fold(0.0, f64::max))
    }
}

/// Centres `i r` inside `interval` (inclusive up to rounding).
pub fn net_centres(interval: (f64, f64), r: f64) -> Vec<f64> {
    let lo = (interval.0 / r - 1e-9).ceil() as i64;
    let hi = (interval.1 / r + 1e-9).floor() as i64;
    (lo..=hi).map(|i| i as f64 * r).collect()
}

pub fn plate_decomposition(tuple: &ConeTuple, a: &[f64], k_trunc: f64, r: f64, interval: (f64, f64)) -> Result<Vec<Plate>> {
    net_centres(interval, r).into_iter().map(|s| Plate::new(tuple, a, s, r, k_trunc)).collect()
}

/// A frequency region for the decoupling estimator.
#[derive(Clone, Debug)]
pub enum Region {
    Box(FrenetBox),
    Slab(Slab),
    Plate(Plate),
}

impl Region {
    pub fn contains(&self, xi: &[f64]) -> bool {
        match self {
            Region::Box(b) => b.contains(xi, 1.0),
            Region::Slab(s) => s.contains(xi, 1.0),
            Region::Plate(p) => p.contains(xi, 1.0),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Box(b) => b.curve.dim(),
            Region::Slab(s) => s.center.len(),
            Region::Plate(p) => p.tuple.n(),
        }
    }

    /// Per-axis bound on `|ξ_i|` over the region.
    pub fn extent(&self) -> Vec<f64> {
        match self {
            Region::Box(b) => {
                let n = b.curve.dim();
                let mut ext = vec![0.0; n];
                for j in 1..=n {
                    let bound = if j <= b.d {
                        b.r.powi((b.d + 1 - j) as i32)
                    } else if j == b.d + 1 {
                        1.0
                    } else {
                        b.top
                    };
                    let mut c = vec![0.0; n];
                    c[j - 1] = bound;
                    for (e, v) in ext.iter_mut().zip(b.from_coordinates(&c)) {
                        *e += v.abs();
                    }
                }
                ext
            }
            Region::Slab(s) => (0..s.center.len())
                .map(|i| s.center[i].abs() + 2.0 * s.matrix.row(i).iter().map(|v| v.abs()).sum::<f64>())
                .collect(),
            Region::Plate(p) => {
                let n = p.tuple.n();
                let d = p.tuple.d();
                let mut top = vec![2.0; n];
                for (j, aj) in p.a.iter().enumerate() {
                    top[d + j] = aj.abs() + 1.0 / p.k_trunc;
                }
                (0..n).map(|i| (0..n).map(|j| p.matrix[(i, j)].abs() * top[j]).sum()).collect()
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Region::Box(b) => format!("box(s={:.6},r={})", b.center, b.r),
            Region::Slab(s) => format!("slab(s={:.6},r={})", s.s, s.r),
            Region::Plate(p) => format!("plate(s={:.6},r={})", p.s, p.r),
        }
    }
}

pub fn frenet_box_family(curve: &Curve, d: usize, r: f64, interval: (f64, f64)) -> Result<Vec<Region>> {
    net_centres(interval, r).into_iter().map(|s| Ok(Region::Box(FrenetBox::new(curve, d, s, r)?))).collect()
}

pub fn slab_family(curve: &Curve, r: f64, interval: (f64, f64)) -> Result<Vec<Region>> {
    net_centres(interval, r).into_iter().map(|s| Ok(Region::Slab(Slab::from_curve(curve, s, r)?))).collect()
}

pub fn plate_family(tuple: &ConeTuple, a: &[f64], k_trunc: f64, r: f64, interval: (f64, f64)) -> Result<Vec<Region>> {
    Ok(plate_decomposition(tuple, a, k_trunc, r, interval)?.into_iter().map(Region::Plate).collect())
}

/// Largest dilation `R` with every `R · region` inside the lattice box.
pub fn fit_dilation(regions: &[Region], grid: &GridSpec) -> Result<f64> {
    let lim = (grid.n / 2 - 1) as f64 * grid.freq_step();
    let mut worst = 0.0f64;
    for r in regions {
        if r.dim() != grid.d {
            return Err(Error::InvalidParameter(format!("region in R^{} on a {}-dimensional grid", r.dim(), grid.d)));
        }
        worst = r.extent().into_iter().fold(worst, f64::max);
    }
    if !(worst > 0.0) {
        return Err(Error::InvalidParameter("regions have zero extent".into()));
    }
    Ok(lim / worst)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialSpec {
    pub gaussian: usize,
    pub focusing: bool,
    pub seed: u64,
}

impl Default for TrialSpec {
    fn default() -> Self {
        Self { gaussian: 32, focusing: true, seed: 1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialMode {
    Gaussian,
    /// All coefficients equal to one.
    Focusing,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecouplingTrial {
    pub trial: usize,
    pub mode: TrialMode,
    /// `‖Σ f‖_p / (Σ ‖f‖_p^p)^{1/p}`, one entry per requested `p`.
    pub lp_ratio: Vec<f64>,
    /// `‖Σ f‖_p / (Σ ‖f‖_p^2)^{1/2}`.
    pub l2_ratio: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RatioSummary {
    pub p: f64,
    pub max_lp: f64,
    pub median_lp: f64,
    pub max_l2: f64,
    pub median_l2: f64,
    /// `N^{1 - 1/p}` for `N` non-empty regions.
    pub trivial_bound: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecouplingEstimate {
    pub regions: usize,
    pub lattice_points: Vec<usize>,
    /// Regions without lattice points, left out of every sum.
    pub excluded: Vec<String>,
    pub dilation: f64,
    pub trials: Vec<DecouplingTrial>,
    pub summary: Vec<RatioSummary>,
}

/// Lattice fields kept alive: the sum, one region and transform scratch.
pub const DECOUPLING_FIELDS: usize = 3;

fn lattice_members(region: &Region, grid: &GridSpec, dilation: f64) -> Vec<usize> {
    let st = grid.freq_step();
    let ext = region.extent();
    let h = (grid.n / 2) as i64;
    let kmax: Vec<i64> = ext.iter().map(|e| ((e * dilation / st).floor() as i64 + 1).min(h - 1)).collect();
    let d = grid.d;
    let mut k = vec![0i64; d];
    for a in 0..d {
        k[a] = -kmax[a];
    }
    let mut out = Vec::new();
    let mut xi = vec![0.0; d];
    'outer: loop {
        for a in 0..d {
            xi[a] = k[a] as f64 * st / dilation;
        }
        if region.contains(&xi) {
            if let Some(idx) = grid.index_of(&k) {
                out.push(idx);
            }
        }
        for a in (0..d).rev() {
            if k[a] < kmax[a] {
                k[a] += 1;
                continue 'outer;
            }
            k[a] = -kmax[a];
        }
        break;
    }
    out.sort_unstable();
    out
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len();
    if m == 0 {
        return f64::NAN;
    }
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Random-coefficient and focusing lower bounds for the decoupling constant
/// of `regions` dilated by `dilation`, on the lattice of `grid`.
pub fn decoupling_constant_estimate(
    regions: &[Region],
    ps: &[f64],
    grid: GridSpec,
    dilation: f64,
    trials: &TrialSpec,
    budget: u64,
) -> Result<DecouplingEstimate> {
    if ps.iter().any(|p| !(*p >= 2.0)) {
        return Err(Error::InvalidParameter(format!("exponents {ps:?} must be >= 2")));
    }
    if !(dilation > 0.0) {
        return Err(Error::InvalidParameter(format!("dilation {dilation} must be positive")));
    }
    grid.check_budget(DECOUPLING_FIELDS, budget)?;
    for r in regions {
        if r.dim() != grid.d {
            return Err(Error::InvalidParameter(format!("region in R^{} on a {}-dimensional grid", r.dim(), grid.d)));
        }
        let lim = grid.nyquist();
        if let Some(e) = r.extent().into_iter().find(|e| e * dilation > lim) {
            return Err(Error::Nyquist { freq: e * dilation, nyquist: lim });
        }
    }
    let mut members = Vec::new();
    let mut excluded = Vec::new();
    for r in regions {
        let m = lattice_members(r, &grid, dilation);
        if m.is_empty() {
            excluded.push(format!("{}: no lattice points", r.label()));
        } else {
            members.push(m);
        }
    }
    if members.is_empty() {
        return Err(Error::InsufficientData("every region is empty on the lattice".into()));
    }
    let nreg = members.len();
    let mut out_trials = Vec::new();
    let mut modes: Vec<(usize, TrialMode)> = (0..trials.gaussian).map(|t| (t, TrialMode::Gaussian)).collect();
    if trials.focusing {
        modes.push((trials.gaussian, TrialMode::Focusing));
    }
    for (trial, mode) in modes {
        let mut rng = ChaCha8Rng::seed_from_u64(trials.seed);
        rng.set_stream(trial as u64 + 1);
        let mut total = PeriodicField::zeros(grid, Side::Frequency);
        let mut pieces = vec![vec![0.0; nreg]; ps.len()];
        for (ri, m) in members.iter().enumerate() {
            let mut f = PeriodicField::zeros(grid, Side::Frequency);
            for &idx in m {
                let c = match mode {
                    TrialMode::Gaussian => {
                        let re: f64 = StandardNormal.sample(&mut rng);
                        let im: f64 = StandardNormal.sample(&mut rng);
                        Complex64::new(re, im) / 2f64.sqrt()
                    }
                    TrialMode::Focusing => Complex64::new(1.0, 0.0),
                };
                f.data[idx] = c;
                total.data[idx] += c;
            }
            f.inverse()?;
            for (pi, &p) in ps.iter().enumerate() {
                pieces[pi][ri] = f.lp_norm(p)?;
            }
        }
        total.inverse()?;
        let mut lp_ratio = Vec::new();
        let mut l2_ratio = Vec::new();
        for (pi, &p) in ps.iter().enumerate() {
            let whole = total.lp_norm(p)?;
            let sp: f64 = pieces[pi].iter().map(|v| v.powf(p)).sum::<f64>().powf(1.0 / p);
            let s2: f64 = pieces[pi].iter().map(|v| v * v).sum::<f64>().sqrt();
            lp_ratio.push(whole / sp);
            l2_ratio.push(whole / s2);
        }
        out_trials.push(DecouplingTrial { trial, mode, lp_ratio, l2_ratio });
    }
    let summary = ps
        .iter()
        .enumerate()
        .map(|(pi, &p)| {
            let mut lp: Vec<f64> = out_trials.iter().map(|t| t.lp_ratio[pi]).collect();
            let mut l2: Vec<f64> = out_trials.iter().map(|t| t.l2_ratio[pi]).collect();
            RatioSummary {
                p,
                max_lp: lp.iter().cloned().fold(0.0, f64::max),
                median_lp: median(&mut lp),
                max_l2: l2.iter().cloned().fold(0.0, f64::max),
                median_l2: median(&mut l2),
                trivial_bound: (nreg as f64).powf(1.0 - 1.0 / p),
            }
        })
        .collect();
    Ok(DecouplingEstimate {
        regions: nreg,
        lattice_points: members.iter().map(|m| m.len()).collect(),
        excluded,
        dilation,
        trials: out_trials,
        summary,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExponentFits {
    pub p: f64,
    /// Slope of `log max ℓ²-ratio` against `log(1/r)`.
    pub max_l2: LinearFit,
    pub median_l2: LinearFit,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecouplingSweep {
    pub scales: Vec<f64>,
    pub estimates: Vec<DecouplingEstimate>,
    pub fits: Vec<ExponentFits>,
}

/// Runs the estimator at each scale with a common dilation and fits the
/// growth of the `ℓ²` ratios in `1/r`.
pub fn decoupling_sweep<F>(
    scales: &[f64],
    build: F,
    ps: &[f64],
    grid: GridSpec,
    trials: &TrialSpec,
    budget: u64,
) -> Result<DecouplingSweep>
where
    F: Fn(f64) -> Result<Vec<Region>>,
{
    if scales.is_empty() {
        return Err(Error::InvalidParameter("no scales".into()));
    }
    let families: Vec<Vec<Region>> = scales.iter().map(|&r| build(r)).collect::<Result<_>>()?;
    let all: Vec<Region> = families.iter().flatten().cloned().collect();
    let dilation = fit_dilation(&all, &grid)?;
    let mut estimates = Vec::new();
    for fam in &families {
        estimates.push(decoupling_constant_estimate(fam, ps, grid, dilation, trials, budget)?);
    }
    let mut fits = Vec::new();
    if scales.len() >= 2 {
        let x: Vec<f64> = scales.iter().map(|r| 1.0 / r).collect();
        for (pi, &p) in ps.iter().enumerate() {
            let ymax: Vec<f64> = estimates.iter().map(|e| e.summary[pi].max_l2).collect();
            let ymed: Vec<f64> = estimates.iter().map(|e| e.summary[pi].median_l2).collect();
            fits.push(ExponentFits { p, max_l2: LinearFit::loglog(&x, &ymax)?, median_l2: LinearFit::loglog(&x, &ymed)? });
        }
    }
    Ok(DecouplingSweep { scales: scales.to_vec(), estimates, fits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::moment_curve;
    use crate::grid::DEFAULT_BUDGET;
    use rand::Rng;

    fn tuple(n: usize, d: usize) -> ConeTuple {
        cone_tuple_from_curve(&moment_curve(n).unwrap(), d, &TupleOptions::default()).unwrap()
    }

    /// For `d = n - 1` on the moment curve, `g(s)_i = (-s)^{n-i}/(n-i)!`.
    fn closed_form(n: usize, s: f64, order: usize) -> Vec<f64> {
        (1..n)
            .map(|i| {
                let p = n - i;
                if order > p {
                    0.0
                } else {
                    let fall: f64 = (p - order + 1..=p).map(|v| v as f64).product();
                    let fact: f64 = (1..=p).map(|v| v as f64).product();
                    (-1f64).powi(p as i32) * fall * s.powi((p - order) as i32) / fact
                }
            })
            .collect()
    }

    #[test]
    fn chebyshev_reproduces_polynomial_derivatives() {
        let f = |s: f64| 1.0 + 2.0 * s - s.powi(3) + 0.5 * s.powi(5);
        let nodes = Cheb::nodes(-0.3, 0.7, 12);
        let c = Cheb::fit(-0.3, 0.7, &nodes.iter().map(|&s| f(s)).collect::<Vec<_>>());
        let d1 = c.derivative();
        let d2 = d1.derivative();
        for s in [-0.3, 0.0, 0.41, 0.7] {
            assert!((c.eval(s) - f(s)).abs() < 1e-14);
            assert!((d1.eval(s) - (2.0 - 3.0 * s * s + 2.5 * s.powi(4))).abs() < 1e-12);
            assert!((d2.eval(s) - (-6.0 * s + 10.0 * s.powi(3))).abs() < 1e-11);
        }
    }

    #[test]
    fn tuple_matches_closed_form() {
        for n in [3, 4] {
            let t = tuple(n, n - 1);
            for s in [-0.5, -0.21, 0.0, 0.33, 0.5] {
                for order in 0..=n {
                    let got = t.eval(s, order).unwrap();
                    let want = closed_form(n, s, order);
                    for i in 0..n - 1 {
                        assert!((got[(i, 0)] - want[i]).abs() < 1e-10, "n={n} s={s} order={order} {} {}", got[(i, 0)], want[i]);
                    }
                }
            }
        }
    }

    #[test]
    fn last_coordinate_is_one() {
        let g = moment_curve(4).unwrap();
        for s in [-0.4, 0.0, 0.3] {
            let f = tuple_frame(&g, 3, s).unwrap();
            assert_eq!(f.g_full[(3, 0)], 1.0);
            let direct = &f.tail * &f.a;
            assert!((direct - &f.g_full).amax() < 1e-12);
        }
    }

    #[test]
    fn combined_curve_is_nondegenerate() {
        let t = tuple(3, 2);
        let h = 1e-3;
        let g = moment_curve(3).unwrap();
        let g_at = |s: f64| tuple_frame(&g, 2, s).unwrap().g_full.column(0).rows(0, 2).into_owned();
        for i in 0..=20 {
            let s = -0.1 + 0.01 * i as f64;
            let det = t.gamma_matrix(&[1.0], s, 1.0).unwrap().determinant();
            assert!(det.abs() >= 0.5);
            // Oracle: finite differences of frame-derived values.
            let d1 = (g_at(s + h) - g_at(s - h)) / (2.0 * h);
            let d2 = (g_at(s + h) - g_at(s) * 2.0 + g_at(s - h)) / (h * h);
            let fd = d1[0] * d2[1] - d1[1] * d2[0];
            assert!((fd - det).abs() < 1e-5, "{fd} {det}");
        }
    }

    #[test]
    fn reparametrisation_reproduces_frame_combinations() {
        let g = moment_curve(4).unwrap();
        let t = tuple(4, 2);
        let mut rng = <ChaCha8Rng as SeedableRng>::seed_from_u64(6);
        for _ in 0..100 {
            let s: f64 = rng.gen_range(-0.5..0.5);
            let mu = DVector::from_vec(vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]);
            let f = tuple_frame(&g, 2, s).unwrap();
            let lam = f.a.clone().try_inverse().unwrap() * &mu;
            let mut gm = DMatrix::zeros(4, 2);
            gm.view_mut((0, 0), (2, 2)).copy_from(&t.eval(s, 0).unwrap());
            gm[(2, 0)] = 1.0;
            gm[(3, 1)] = 1.0;
            let lhs = gm * lam;
            let rhs = &f.tail * &mu;
            assert!((lhs - rhs).amax() < 1e-11);
        }
    }

    #[test]
    fn lorentz_identities_hold() {
        let mut rng = <ChaCha8Rng as SeedableRng>::seed_from_u64(7);
        for (n, d) in [(3, 2), (4, 3), (4, 2)] {
            let t = tuple(n, d);
            let a: Vec<f64> = (0..n - d).map(|j| if j == 0 { rng.gen_range(0.5..1.5) } else { rng.gen_range(-0.3..0.3) }).collect();
            for _ in 0..200 {
                let rho: f64 = rng.gen_range(0.02..1.0);
                let r = rho * rng.gen_range(0.01..1.0);
                let b: f64 = rng.gen_range(-0.5..0.5);
                let s: f64 = rng.gen_range(-0.5..0.5);
                let res = lorentz_identity_check(&t, &a, b, rho, s, r).unwrap();
                assert!(res.worst() <= 1e-9, "{res:?}");
            }
            let res = lorentz_identity_check(&t, &a, 0.1, 0.3, 0.2, 0.3).unwrap();
            assert!(res.worst() <= 1e-9);
        }
    }

    #[test]
    fn unit_rescaling_at_origin_is_normalisation() {
        let t = tuple(4, 3);
        let a = [1.0];
        let resc = t.rescaled(&a, 0.0, 1.0).unwrap();
        let minv = t.gamma_matrix(&a, 0.0, 1.0).unwrap().try_inverse().unwrap();
        for s in [-0.5, 0.1, 0.5] {
            for order in 0..3 {
                let want = &minv * t.eval(s, order).unwrap();
                assert!((resc.eval(s, order).unwrap() - want).amax() <= 1e-12);
            }
        }
    }

    #[test]
    fn bad_scales_are_refused() {
        let t = tuple(3, 2);
        assert!(lorentz_identity_check(&t, &[1.0], 0.0, 0.2, 0.1, 0.3).is_err());
        assert!(lorentz_identity_check(&t, &[1.0], 0.0, 0.2, 0.1, 0.0).is_err());
    }

    #[test]
    fn plate_matrix_blocks() {
        let t = tuple(4, 2);
        let m = t.plate_matrix(&[1.0, 0.2], 0.13, 0.1).unwrap();
        for i in 2..4 {
            for j in 0..2 {
                assert_eq!(m[(i, j)], 0.0);
            }
            for j in 2..4 {
                assert_eq!(m[(i, j)], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn net_counts() {
        let t = tuple(3, 2);
        let plates = plate_decomposition(&t, &[1.0], 4.0, 0.125, (-0.25, 0.25)).unwrap();
        assert_eq!(plates.len(), 5);
        assert!((plates[0].s + 0.25).abs() < 1e-15);
    }

    fn sample_plate(p: &Plate, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let d = p.tuple.d();
        let n = p.tuple.n();
        let mut eta = vec![0.0; n];
        for v in eta.iter_mut().take(d) {
            *v = rng.gen_range(-2.0..2.0);
        }
        for j in d..n {
            eta[j] = p.a[j - d] + rng.gen_range(-1.0..1.0) / p.k_trunc;
        }
        p.point(&eta)
    }

    #[test]
    fn adjacent_plates_share_boundary_points() {
        let mut rng = <ChaCha8Rng as SeedableRng>::seed_from_u64(8);
        for (n, d) in [(3, 2), (4, 3)] {
            let t = tuple(n, d);
            let a: Vec<f64> = (0..n - d).map(|j| if j == 0 { 1.0 } else { 0.1 }).collect();
            let r: f64 = 0.125;
            let k = r.powi(-(d as i32));
            let plates = plate_decomposition(&t, &a, k, r, (-0.25, 0.25)).unwrap();
            for w in plates.windows(2) {
                let mid = Plate::new(&t, &a, 0.5 * (w[0].s + w[1].s), r, k).unwrap();
                for _ in 0..200 {
                    let xi = sample_plate(&mid, &mut rng);
                    assert!(w[0].contains(&xi, 2.0) && w[1].contains(&xi, 2.0));
                }
            }
        }
    }

    #[test]
    fn projection_lands_in_a_slab() {
        let mut rng = <ChaCha8Rng as SeedableRng>::seed_from_u64(9);
        for (n, d) in [(3, 2), (4, 3), (4, 2)] {
            let t = tuple(n, d);
            let a: Vec<f64> = (0..n - d).map(|j| if j == 0 { 1.0 } else { -0.2 }).collect();
            let mut worst = 0.0f64;
            for k in [16.0f64, 256.0, 4096.0] {
                let r = k.powf(-1.0 / d as f64);
                for s in [-0.3, 0.0, 0.2] {
                    let p = Plate::new(&t, &a, s, r, k).unwrap();
                    for _ in 0..100 {
                        let xi = sample_plate(&p, &mut rng);
                        let c = p.projection_slack(&xi).unwrap();
                        let slab = Slab::from_tuple(&t, &a, s, c * r).unwrap();
                        assert!(slab.contains(&xi[..d], 1.0 + 1e-9));
                        worst = worst.max(c);
                    }
                }
            }
            assert!(worst <= 2.0, "n={n} d={d} C={worst}");
        }
    }

    #[test]
    fn single_region_ratio_is_one() {
        let g = moment_curve(2).unwrap();
        let grid = GridSpec::torus(2, 64).unwrap();
        let regs = slab_family(&g, 0.25, (0.0, 0.0)).unwrap();
        let dil = fit_dilation(&regs, &grid).unwrap();
        let est = decoupling_constant_estimate(&regs, &[2.0, 6.0], grid, dil, &TrialSpec { gaussian: 4, focusing: true, seed: 3 }, DEFAULT_BUDGET).unwrap();
        for t in &est.trials {
            for v in &t.lp_ratio {
                assert!((v - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn disjoint_regions_are_orthogonal_at_p_two() {
        let g = moment_curve(2).unwrap();
        let grid = GridSpec::torus(2, 128).unwrap();
        // First slab coordinate is ξ_1 - s in units of 2r, so centres 5r apart are disjoint.
        let regs = slab_family(&g, 0.125, (-1.0, 1.0)).unwrap().into_iter().step_by(5).collect::<Vec<_>>();
        let dil = fit_dilation(&regs, &grid).unwrap();
        let est = decoupling_constant_estimate(&regs, &[2.0, 4.0], grid, dil, &TrialSpec { gaussian: 6, focusing: true, seed: 5 }, DEFAULT_BUDGET).unwrap();
        assert!(est.regions >= 3);
        for t in &est.trials {
            assert!(t.l2_ratio[0] <= 1.0 + 1e-6, "{t:?}");
            for (i, p) in [2.0f64, 4.0].iter().enumerate() {
                assert!(t.lp_ratio[i] <= (est.regions as f64).powf(1.0 - 1.0 / p) * (1.0 + 1e-6));
            }
        }
    }
}
