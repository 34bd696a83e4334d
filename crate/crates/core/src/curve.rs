//! Smooth curves in R^n with analytic derivatives, affine rescaling and
//! model-class checks.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// Largest ambient dimension supported by the stack buffers used in
/// inner quadrature loops.
pub const MAX_DIM: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Moment,
    PerturbedMoment,
    UserDefined,
}

/// Scalar shape added to one coordinate of the moment curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    /// sin(omega * s + phase)
    Sine { omega: f64, #[serde(default)] phase: f64 },
    /// s^power
    Monomial { power: u32 },
}

impl Shape {
    fn deriv(&self, s: f64, j: usize) -> f64 {
        match *self {
            Shape::Sine { omega, phase } => {
                let arg = omega * s + phase + j as f64 * std::f64::consts::FRAC_PI_2;
                omega.powi(j as i32) * arg.sin()
            }
            Shape::Monomial { power } => {
                let p = power as usize;
                if j > p {
                    return 0.0;
                }
                let mut c = 1.0;
                for m in 0..j {
                    c *= (p - m) as f64;
                }
                c * s.powi((p - j) as i32)
            }
        }
    }
}

/// `amplitude * shape(s)` added to coordinate `component` (0-based).
///
/// With `flatten` the degree-n Taylor polynomial of the shape at 0 is
/// subtracted, so the perturbed curve keeps `γ(0) = 0`, `γ^(j)(0) = e_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub component: usize,
    pub amplitude: f64,
    #[serde(flatten)]
    pub shape: Shape,
    #[serde(default)]
    pub flatten: bool,
}

impl Perturbation {
    pub fn new(component: usize, amplitude: f64, shape: Shape) -> Self {
        Self { component, amplitude, shape, flatten: false }
    }

    pub fn flattened(mut self) -> Self {
        self.flatten = true;
        self
    }

    fn deriv(&self, n: usize, s: f64, j: usize) -> f64 {
        let mut v = self.shape.deriv(s, j);
        if self.flatten {
            // d^j/ds^j of sum_{m<=n} g^(m)(0) s^m / m!
            let mut fact = 1.0;
            for m in j..=n {
                if m > j {
                    fact *= (m - j) as f64;
                }
                v -= self.shape.deriv(0.0, m) * s.powi((m - j) as i32) / fact;
            }
        }
        self.amplitude * v
    }

    /// Scalar analogue of `Curve::taylor_remainder` with terms `m >= first`.
    fn remainder(&self, n: usize, sigma: f64, h: f64, j: usize, first: usize) -> f64 {
        let mut v = match self.shape {
            Shape::Monomial { power } => scalar_poly_remainder(|k| self.shape.deriv(sigma, k), j, first, h, power as usize),
            Shape::Sine { omega, .. } => {
                if (omega * h).abs() <= 4.0 {
                    let mut acc = 0.0;
                    let mut m = first;
                    loop {
                        let term = self.shape.deriv(sigma, j + m) * h.powi(m as i32) * inv_factorial(m);
                        acc += term;
                        let bound = omega.abs().powi((j + m) as i32) * h.abs().powi(m as i32) * inv_factorial(m);
                        if m > first + 4 && bound < 1e-18 * (1.0 + acc.abs()) || m > first + 120 {
                            break;
                        }
                        m += 1;
                    }
                    acc
                } else {
                    let mut acc = self.shape.deriv(sigma + h, j);
                    for m in 0..first {
                        acc -= self.shape.deriv(sigma, j + m) * h.powi(m as i32) * inv_factorial(m);
                    }
                    acc
                }
            }
        };
        if self.flatten {
            // Taylor polynomial T(s) = Σ_{q<=n} g^(q)(0) s^q / q!
            let t = |k: usize| -> f64 {
                (k..=n).map(|q| self.shape.deriv(0.0, q) * sigma.powi((q - k) as i32) * inv_factorial(q - k)).sum()
            };
            v -= scalar_poly_remainder(t, j, first, h, n);
        }
        self.amplitude * v
    }
}

fn scalar_poly_remainder<D: Fn(usize) -> f64>(d: D, j: usize, first: usize, h: f64, top: usize) -> f64 {
    if j > top {
        return 0.0;
    }
    (first..=top - j).map(|m| d(j + m) * h.powi(m as i32) * inv_factorial(m)).sum()
}

type UserFn = dyn Fn(f64, usize, &mut [f64]) + Send + Sync;

enum Repr {
    Moment,
    Perturbed(Vec<Perturbation>),
    /// `coeffs[i][m]` is the coefficient of s^m in coordinate i.
    Polynomial(Vec<Vec<f64>>),
    Rescaled {
        parent: Curve,
        sigma: f64,
        lambda: f64,
        /// `[γ]_{σ,λ}^{-1}`
        inv: DMatrix<f64>,
    },
    User(Arc<UserFn>),
}

struct Inner {
    n: usize,
    domain: (f64, f64),
    kind: CurveKind,
    repr: Repr,
}

/// A curve `γ : [a, b] -> R^n` with derivatives of every order.
///
/// Cheap to clone; all state is shared and immutable.
#[derive(Clone)]
pub struct Curve(Arc<Inner>);

impl fmt::Debug for Curve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Curve")
            .field("n", &self.0.n)
            .field("domain", &self.0.domain)
            .field("kind", &self.0.kind)
            .finish()
    }
}

fn check_dim(n: usize) -> Result<()> {
    if !(2..=MAX_DIM).contains(&n) {
        return Err(Error::InvalidDimension(n));
    }
    Ok(())
}

fn inv_factorial(m: usize) -> f64 {
    (1..=m).fold(1.0, |acc, k| acc / k as f64)
}

pub const DEFAULT_DOMAIN: (f64, f64) = (-2.0, 2.0);

/// `(s, s^2/2, ..., s^n/n!)`.
pub fn moment_curve(n: usize) -> Result<Curve> {
    check_dim(n)?;
    Ok(Curve::new(n, DEFAULT_DOMAIN, CurveKind::Moment, Repr::Moment))
}

impl Curve {
    fn new(n: usize, domain: (f64, f64), kind: CurveKind, repr: Repr) -> Self {
        Curve(Arc::new(Inner { n, domain, kind, repr }))
    }

    /// Moment curve plus a sum of scalar perturbations.
    pub fn perturbed_moment(n: usize, terms: Vec<Perturbation>) -> Result<Curve> {
        check_dim(n)?;
        for t in &terms {
            if t.component >= n {
                return Err(Error::InvalidParameter(format!(
                    "perturbation component {} out of range for n = {n}",
                    t.component
                )));
            }
        }
        Ok(Curve::new(n, DEFAULT_DOMAIN, CurveKind::PerturbedMoment, Repr::Perturbed(terms)))
    }

    /// Polynomial curve, `coeffs[i][m]` multiplying `s^m` in coordinate `i`.
    pub fn polynomial(coeffs: Vec<Vec<f64>>) -> Result<Curve> {
        let n = coeffs.len();
        check_dim(n)?;
        Ok(Curve::new(n, DEFAULT_DOMAIN, CurveKind::UserDefined, Repr::Polynomial(coeffs)))
    }

    /// Curve from a derivative evaluator `f(s, j, out)` writing `γ^(j)(s)`.
    pub fn from_fn<F>(n: usize, domain: (f64, f64), f: F) -> Result<Curve>
    where
        F: Fn(f64, usize, &mut [f64]) + Send + Sync + 'static,
    {
        check_dim(n)?;
        if !(domain.0 < domain.1) {
            return Err(Error::InvalidParameter(format!("empty domain {domain:?}")));
        }
        Ok(Curve::new(n, domain, CurveKind::UserDefined, Repr::User(Arc::new(f))))
    }

    /// Same curve on a different parameter interval.
    pub fn with_domain(&self, a: f64, b: f64) -> Result<Curve> {
        if !(a < b) {
            return Err(Error::InvalidParameter(format!("empty domain [{a}, {b}]")));
        }
        let repr = match &self.0.repr {
            Repr::Moment => Repr::Moment,
            Repr::Perturbed(t) => Repr::Perturbed(t.clone()),
            Repr::Polynomial(c) => Repr::Polynomial(c.clone()),
            Repr::Rescaled { parent, sigma, lambda, inv } => Repr::Rescaled {
                parent: parent.clone(),
                sigma: *sigma,
                lambda: *lambda,
                inv: inv.clone(),
            },
            Repr::User(f) => Repr::User(f.clone()),
        };
        Ok(Curve::new(self.0.n, (a, b), self.0.kind, repr))
    }

    pub fn dim(&self) -> usize {
        self.0.n
    }

    pub fn domain(&self) -> (f64, f64) {
        self.0.domain
    }

    pub fn kind(&self) -> CurveKind {
        self.0.kind
    }

    pub fn contains(&self, s: f64) -> bool {
        let (a, b) = self.0.domain;
        s >= a - 1e-12 && s <= b + 1e-12
    }

    pub fn check_domain(&self, s: f64) -> Result<()> {
        if self.contains(s) {
            Ok(())
        } else {
            let (a, b) = self.0.domain;
            Err(Error::Domain { s, a, b })
        }
    }

    /// Writes `γ^(order)(s)` into `out[..n]`. No domain check.
    pub fn eval_into(&self, s: f64, order: usize, out: &mut [f64]) {
        let n = self.0.n;
        let out = &mut out[..n];
        match &self.0.repr {
            Repr::Moment => moment_into(n, s, order, out),
            Repr::Perturbed(terms) => {
                moment_into(n, s, order, out);
                for t in terms {
                    out[t.component] += t.deriv(n, s, order);
                }
            }
            Repr::Polynomial(coeffs) => {
                for (o, c) in out.iter_mut().zip(coeffs) {
                    *o = poly_deriv(c, s, order);
                }
            }
            Repr::Rescaled { parent, sigma, lambda, inv } => {
                // γ_{σ,λ}^(j)(s) = γ∘^(j)(s) + λ^j M^{-1} R_j, with R_j the Taylor
                // remainder of γ^(j) at σ; avoids cancelling γ(σ + λs) - γ(σ).
                let mut rem = [0.0; MAX_DIM];
                parent.taylor_remainder(*sigma, lambda * s, order, n.checked_sub(order), &mut rem);
                moment_into(n, s, order, out);
                let scale = lambda.powi(order as i32);
                for i in 0..n {
                    let mut acc = 0.0;
                    for k in 0..n {
                        acc += inv[(i, k)] * rem[k];
                    }
                    out[i] += scale * acc;
                }
            }
            Repr::User(f) => f(s, order, out),
        }
    }

    /// `γ^(j)(σ+h) - Σ_{m<=deg} γ^(j+m)(σ) h^m / m!`, computed without
    /// subtracting nearby values where the representation allows it.
    /// `deg = None` returns `γ^(j)(σ+h)`.
    pub fn taylor_remainder(&self, sigma: f64, h: f64, j: usize, deg: Option<usize>, out: &mut [f64]) {
        let n = self.0.n;
        let first = deg.map_or(0, |d| d + 1);
        match &self.0.repr {
            Repr::Moment => {
                let mut buf = [0.0; MAX_DIM];
                poly_remainder(|k, o| moment_into(n, sigma, k, o), n, j, first, h, n, &mut buf);
                out[..n].copy_from_slice(&buf[..n]);
            }
            Repr::Perturbed(terms) => {
                let mut buf = [0.0; MAX_DIM];
                poly_remainder(|k, o| moment_into(n, sigma, k, o), n, j, first, h, n, &mut buf);
                for t in terms {
                    buf[t.component] += t.remainder(n, sigma, h, j, first);
                }
                out[..n].copy_from_slice(&buf[..n]);
            }
            Repr::Polynomial(coeffs) => {
                let top = coeffs.iter().map(|c| c.len()).max().unwrap_or(1).saturating_sub(1);
                let mut buf = [0.0; MAX_DIM];
                poly_remainder(
                    |k, o| {
                        for (v, c) in o.iter_mut().zip(coeffs) {
                            *v = poly_deriv(c, sigma, k);
                        }
                    },
                    n,
                    j,
                    first,
                    h,
                    top,
                    &mut buf,
                );
                out[..n].copy_from_slice(&buf[..n]);
            }
            Repr::Rescaled { parent, sigma: s0, lambda, inv } => {
                let mut rem = [0.0; MAX_DIM];
                parent.taylor_remainder(s0 + lambda * sigma, lambda * h, j, deg, &mut rem);
                let scale = lambda.powi(j as i32);
                for i in 0..n {
                    out[i] = scale * (0..n).map(|k| inv[(i, k)] * rem[k]).sum::<f64>();
                }
            }
            Repr::User(f) => {
                f(sigma + h, j, out);
                let mut buf = [0.0; MAX_DIM];
                let mut fact = 1.0;
                for m in 0..first {
                    if m > 0 {
                        fact *= m as f64;
                    }
                    f(sigma, j + m, &mut buf);
                    for i in 0..n {
                        out[i] -= buf[i] * h.powi(m as i32) / fact;
                    }
                }
            }
        }
    }

    pub fn derivative(&self, s: f64, order: usize) -> DVector<f64> {
        let mut buf = [0.0; MAX_DIM];
        self.eval_into(s, order, &mut buf);
        DVector::from_column_slice(&buf[..self.0.n])
    }

    pub fn point(&self, s: f64) -> DVector<f64> {
        self.derivative(s, 0)
    }

    /// `<γ^(order)(s), ξ>`.
    pub fn pairing(&self, s: f64, order: usize, xi: &[f64]) -> f64 {
        let mut buf = [0.0; MAX_DIM];
        self.eval_into(s, order, &mut buf);
        buf[..self.0.n].iter().zip(xi).map(|(a, b)| a * b).sum()
    }

    /// `[γ]_s`, columns `γ'(s), ..., γ^(n)(s)`.
    pub fn matrix(&self, s: f64) -> DMatrix<f64> {
        let n = self.0.n;
        let mut m = DMatrix::zeros(n, n);
        let mut buf = [0.0; MAX_DIM];
        for j in 1..=n {
            self.eval_into(s, j, &mut buf);
            for i in 0..n {
                m[(i, j - 1)] = buf[i];
            }
        }
        m
    }

    pub fn det(&self, s: f64) -> f64 {
        self.matrix(s).determinant()
    }

    pub fn rescaling_matrices(&self, sigma: f64, lambda: f64) -> RescalingMatrices {
        RescalingMatrices::new(self, sigma, lambda)
    }

    /// The `(σ, λ)`-rescaling `[γ]_{σ,λ}^{-1}(γ(σ + λs) - γ(σ))`.
    ///
    /// The result is defined on the pulled-back domain, which contains
    /// `[-1, 1]`.
    pub fn rescale(&self, sigma: f64, lambda: f64) -> Result<Curve> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("rescaling scale {lambda} must be positive")));
        }
        let (a, b) = self.0.domain;
        if sigma - lambda < a - 1e-12 || sigma + lambda > b + 1e-12 {
            return Err(Error::Domain { s: if sigma - lambda < a { sigma - lambda } else { sigma + lambda }, a, b });
        }
        let degenerate = || Error::Degenerate { s: sigma, detail: "[γ]_σ is singular".into() };
        let mut inv = self.matrix(sigma).try_inverse().ok_or_else(degenerate)?;
        if inv.iter().any(|v| !v.is_finite()) {
            return Err(degenerate());
        }
        for i in 0..self.0.n {
            inv.row_mut(i).scale_mut(lambda.powi(-(i as i32 + 1)));
        }
        let kind = self.0.kind;
        let domain = ((a - sigma) / lambda, (b - sigma) / lambda);
        Ok(Curve::new(
            self.0.n,
            domain,
            kind,
            Repr::Rescaled { parent: self.clone(), sigma, lambda, inv },
        ))
    }

    /// Smallest `|det [γ]_s|` over `samples` equispaced points of the domain.
    pub fn min_abs_det(&self, samples: usize) -> f64 {
        let (a, b) = self.0.domain;
        let m = samples.max(2);
        (0..m)
            .map(|i| self.det(a + (b - a) * i as f64 / (m - 1) as f64).abs())
            .fold(f64::INFINITY, f64::min)
    }
}

fn moment_into(n: usize, s: f64, order: usize, out: &mut [f64]) {
    for i in 1..=n {
        out[i - 1] = if order > i {
            0.0
        } else {
            s.powi((i - order) as i32) * inv_factorial(i - order)
        };
    }
}

fn poly_deriv(c: &[f64], s: f64, order: usize) -> f64 {
    let mut acc = 0.0;
    for m in (order..c.len()).rev() {
        let mut f = 1.0;
        for q in 0..order {
            f *= (m - q) as f64;
        }
        acc = acc * s + c[m] * f;
    }
    acc
}

/// `Σ_{m=first}^{top-j} D(j+m) h^m / m!` for a vector function whose
/// derivatives `D(k)` vanish beyond order `top`.
fn poly_remainder<D>(d: D, n: usize, j: usize, first: usize, h: f64, top: usize, out: &mut [f64])
where
    D: Fn(usize, &mut [f64]),
{
    out[..n].iter_mut().for_each(|v| *v = 0.0);
    if j > top {
        return;
    }
    let mut buf = [0.0; MAX_DIM];
    for m in first..=top - j {
        d(j + m, &mut buf);
        let c = h.powi(m as i32) * inv_factorial(m);
        for i in 0..n {
            out[i] += c * buf[i];
        }
    }
}

/// `[γ]_σ`, `D_λ` and their product `[γ]_{σ,λ}`.
#[derive(Clone, Debug)]
pub struct RescalingMatrices {
    pub sigma: f64,
    pub lambda: f64,
    pub gamma_sigma: DMatrix<f64>,
    pub d_lambda: DMatrix<f64>,
    pub gamma_sigma_lambda: DMatrix<f64>,
}

impl RescalingMatrices {
    pub fn new(curve: &Curve, sigma: f64, lambda: f64) -> Self {
        let n = curve.dim();
        let gamma_sigma = curve.matrix(sigma);
        let d_lambda = DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| lambda.powi(i as i32 + 1)));
        let gamma_sigma_lambda = &gamma_sigma * &d_lambda;
        Self { sigma, lambda, gamma_sigma, d_lambda, gamma_sigma_lambda }
    }
}

/// Serializable curve description used by experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveSpec {
    Moment {
        n: usize,
    },
    Perturbed {
        n: usize,
        #[serde(default)]
        terms: Vec<Perturbation>,
    },
    Polynomial {
        coeffs: Vec<Vec<f64>>,
    },
}

impl CurveSpec {
    pub fn build(&self) -> Result<Curve> {
        match self {
            CurveSpec::Moment { n } => moment_curve(*n),
            CurveSpec::Perturbed { n, terms } => Curve::perturbed_moment(*n, terms.clone()),
            CurveSpec::Polynomial { coeffs } => Curve::polynomial(coeffs.clone()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            CurveSpec::Moment { n } | CurveSpec::Perturbed { n, .. } => *n,
            CurveSpec::Polynomial { coeffs } => coeffs.len(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelClassReport {
    pub delta: f64,
    /// Largest `|γ^(j)(s) - γ∘^(j)(s)|` over `1 <= j <= n+1` and the grid.
    pub deviation: f64,
    /// Same maximum split by derivative order `j = 1..=n+1`.
    pub per_order: Vec<f64>,
    /// Largest entry of `|γ(0)|` and `|γ^(j)(0) - e_j|`, `j <= n`.
    pub normalization_error: f64,
    pub normalized: bool,
    pub member: bool,
}

/// Compare a curve against the moment curve on `[-1, 1]`.
pub fn model_class_check(curve: &Curve, delta: f64, samples: usize) -> Result<ModelClassReport> {
    let (a, b) = curve.domain();
    if a > -1.0 + 1e-12 || b < 1.0 - 1e-12 {
        return Err(Error::Domain { s: if a > -1.0 { -1.0 } else { 1.0 }, a, b });
    }
    let n = curve.dim();
    let m = samples.max(2);
    let mut per_order = vec![0.0f64; n + 1];
    let mut g = [0.0; MAX_DIM];
    let mut g0 = [0.0; MAX_DIM];
    for i in 0..m {
        let s = -1.0 + 2.0 * i as f64 / (m - 1) as f64;
        for j in 1..=n + 1 {
            curve.eval_into(s, j, &mut g);
            moment_into(n, s, j, &mut g0);
            let d = (0..n).map(|q| (g[q] - g0[q]).powi(2)).sum::<f64>().sqrt();
            per_order[j - 1] = per_order[j - 1].max(d);
        }
    }
    let deviation = per_order.iter().cloned().fold(0.0, f64::max);
    let mut normalization_error = 0.0f64;
    for j in 0..=n {
        curve.eval_into(0.0, j, &mut g);
        for q in 0..n {
            let target = if j >= 1 && q == j - 1 { 1.0 } else { 0.0 };
            normalization_error = normalization_error.max((g[q] - target).abs());
        }
    }
    Ok(ModelClassReport {
        delta,
        deviation,
        per_order,
        normalization_error,
        normalized: normalization_error <= 1e-12,
        member: deviation <= delta,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TypeAtPoint {
    pub s: f64,
    /// Smallest `d` reaching the threshold, or `None` if even `d_max` fails.
    pub d: Option<usize>,
    /// `min_ξ Σ_{j<=d} |<γ^(j)(s), ξ>|` over the unit net, per `d = 1..=d_max`.
    pub c0_by_d: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FiniteTypeProfile {
    pub points: Vec<TypeAtPoint>,
    /// Largest per-point type, `None` if some point is of type > d_max.
    pub maximal_type: Option<usize>,
    /// Smallest attained constant at the selected `d` across points.
    pub c0: f64,
}

/// Per-point order of contact with hyperplanes, measured on a sphere net.
///
/// For `d < n` the unit normals of `span{γ', ..., γ^(d)}` are added to the
/// net, so an exactly degenerate direction is never missed by sampling.
pub fn finite_type_profile(
    curve: &Curve,
    d_max: usize,
    net: &[DVector<f64>],
    s_values: &[f64],
    threshold: f64,
) -> Result<FiniteTypeProfile> {
    let n = curve.dim();
    if d_max == 0 || d_max > n + 1 {
        return Err(Error::InvalidParameter(format!("d_max = {d_max} must lie in 1..={}", n + 1)));
    }
    if net.is_empty() {
        return Err(Error::InsufficientData("empty sphere net".into()));
    }
    let mut points = Vec::with_capacity(s_values.len());
    for &s in s_values {
        curve.check_domain(s)?;
        let derivs: Vec<DVector<f64>> = (1..=d_max).map(|j| curve.derivative(s, j)).collect();
        let mut dirs: Vec<DVector<f64>> = net.iter().map(|v| v.normalize()).collect();
        for d in 1..d_max.min(n) {
            dirs.extend(complement_directions(&derivs[..d], n));
        }
        let mut c0_by_d = vec![f64::INFINITY; d_max];
        for xi in &dirs {
            let mut acc = 0.0;
            for (d, g) in derivs.iter().enumerate() {
                acc += g.dot(xi).abs();
                c0_by_d[d] = c0_by_d[d].min(acc);
            }
        }
        let d = c0_by_d.iter().position(|&c| c >= threshold).map(|i| i + 1);
        points.push(TypeAtPoint { s, d, c0_by_d });
    }
    let maximal_type = points.iter().try_fold(0usize, |acc, p| p.d.map(|d| acc.max(d)));
    let c0 = points
        .iter()
        .filter_map(|p| p.d.map(|d| p.c0_by_d[d - 1]))
        .fold(f64::INFINITY, f64::min);
    Ok(FiniteTypeProfile { points, maximal_type, c0 })
}

fn complement_directions(vs: &[DVector<f64>], n: usize) -> Vec<DVector<f64>> {
    // Gram-Schmidt the given vectors, then the standard basis; what survives
    // from the latter spans the orthogonal complement.
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for v in vs {
        let mut w = v.clone();
        for b in &basis {
            w -= b * b.dot(&w);
        }
        let nrm = w.norm();
        if nrm > 1e-12 {
            basis.push(w / nrm);
        }
    }
    let k = basis.len();
    for i in 0..n {
        let mut w = DVector::zeros(n);
        w[i] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&w);
                w -= b * c;
            }
        }
        let nrm = w.norm();
        if nrm > 1e-8 {
            basis.push(w / nrm);
        }
    }
    basis.split_off(k)
}

/// Unit vectors with i.i.d. Gaussian coordinates, normalised.
pub fn sphere_net(n: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let v = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            let nrm: f64 = v.norm();
            v / nrm
        })
        .collect()
}
