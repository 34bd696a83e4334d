use crate::curve::Curve;
use crate::error::{Error, Result};
use crate::frenet::frenet_frame;
use nalgebra::{DMatrix, DVector};

/// Anisotropic box aligned with the Frenet frame at `center`, dilated by
/// `dilation`:
///
/// * `|<e_j, ξ>| <= r^{d+1-j}` for `j <= d`,
/// * `1/2 <= |<e_{d+1}, ξ>| <= 1`,
/// * `|<e_j, ξ>| <= top` for `j >= d+2` (`top = 1` for the standard box),
///
/// all after dividing `ξ` by `dilation`.
#[derive(Clone, Debug)]
pub struct FrenetBox {
    pub curve: Curve,
    pub d: usize,
    pub center: f64,
    pub r: f64,
    pub dilation: f64,
    pub top: f64,
    frame: DMatrix<f64>,
}

impl FrenetBox {
    pub fn new(curve: &Curve, d: usize, center: f64, r: f64) -> Result<Self> {
        let n = curve.dim();
        if d < 2 || d + 1 > n {
            return Err(Error::InvalidParameter(format!("box order d = {d} needs 2 <= d <= n-1 = {}", n - 1)));
        }
        if !(r > 0.0) {
            return Err(Error::InvalidParameter(format!("box scale r = {r} must be positive")));
        }
        let frame = frenet_frame(curve, center)?.e;
        Ok(Self { curve: curve.clone(), d, center, r, dilation: 1.0, top: 1.0, frame })
    }

    pub fn dilated(mut self, factor: f64) -> Self {
        self.dilation = factor;
        self
    }

    pub fn with_top(mut self, top: f64) -> Self {
        self.top = top;
        self
    }

    /// `<e_j(center), ξ> / dilation` for `j = 1..n`.
    pub fn coordinates(&self, xi: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(xi);
        (self.frame.transpose() * v).iter().map(|c| c / self.dilation).collect()
    }

    /// Per-coordinate ratios against the box bounds. The middle coordinate
    /// contributes `max(|c|, 1/(2|c|))`.
    pub fn ratios(&self, xi: &[f64]) -> Vec<f64> {
        let c = self.coordinates(xi);
        let d = self.d;
        c.iter()
            .enumerate()
            .map(|(i, v)| {
                let j = i + 1;
                let a = v.abs();
                if j <= d {
                    a / self.r.powi((d + 1 - j) as i32)
                } else if j == d + 1 {
                    a.max(0.5 / a)
                } else {
                    a / self.top
                }
            })
            .collect()
    }

    /// Smallest slack `C` with `ξ` in the box under the slackened conditions.
    pub fn slack(&self, xi: &[f64]) -> f64 {
        self.ratios(xi).into_iter().fold(0.0, f64::max)
    }

    pub fn contains(&self, xi: &[f64], slack: f64) -> bool {
        self.slack(xi) <= slack
    }

    /// `dilation * Σ c_j e_j`.
    pub fn from_coordinates(&self, c: &[f64]) -> Vec<f64> {
        let v = &self.frame * DVector::from_column_slice(c);
        v.iter().map(|x| x * self.dilation).collect()
    }
}

/// Membership with slack `C`: `|<e_j, ξ>| <= C r^{d+1-j}` for `j <= d`,
/// `|<e_{d+1}, ξ>| ∈ [1/(2C), C]`, `|<e_j, ξ>| <= C top` for `j >= d+2`.
pub fn frenet_box_contains(b: &FrenetBox, xi: &[f64], slack: f64) -> bool {
    b.contains(xi, slack)
}
