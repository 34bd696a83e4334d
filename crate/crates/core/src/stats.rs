//! Ordinary least squares on a line and small summary helpers.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; zero for exact fits, infinite for two
    /// points.
    pub slope_stderr: f64,
    pub residuals: Vec<f64>,
    pub points: usize,
}

impl LinearFit {
    pub fn ols(x: &[f64], y: &[f64]) -> Result<Self> {
        let m = x.len();
        if m != y.len() {
            return Err(Error::InvalidParameter("x and y lengths differ".into()));
        }
        if m < 2 {
            return Err(Error::InsufficientData(format!("{m} points for a line fit")));
        }
        let mx = x.iter().sum::<f64>() / m as f64;
        let my = y.iter().sum::<f64>() / m as f64;
        let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
        if sxx == 0.0 {
            return Err(Error::InsufficientData("all abscissae coincide".into()));
        }
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let residuals: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - intercept - slope * a).collect();
        let sse: f64 = residuals.iter().map(|r| r * r).sum();
        let slope_stderr = if m > 2 { (sse / (m - 2) as f64 / sxx).sqrt() } else { f64::INFINITY };
        Ok(Self { slope, intercept, slope_stderr, residuals, points: m })
    }

    /// Fit `log y = slope * log x + c`; pairs with non-positive entries are
    /// dropped.
    pub fn loglog(x: &[f64], y: &[f64]) -> Result<Self> {
        let (lx, ly): (Vec<f64>, Vec<f64>) = x
            .iter()
            .zip(y)
            .filter(|(a, b)| **a > 0.0 && **b > 0.0)
            .map(|(a, b)| (a.ln(), b.ln()))
            .unzip();
        Self::ols(&lx, &ly)
    }

    pub fn max_abs_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        let f = LinearFit::ols(&x, &y).unwrap();
        assert!((f.slope - 2.5).abs() < 1e-14);
        assert!((f.intercept + 1.0).abs() < 1e-14);
        assert!(f.slope_stderr < 1e-12);
    }

    #[test]
    fn stderr_against_hand_computation() {
        // x = 0..3, y = (0, 1, 1, 3): slope 0.9, residuals (0.1, 0.2, -0.7, 0.4)
        let f = LinearFit::ols(&[0.0, 1.0, 2.0, 3.0], &[0.0, 1.0, 1.0, 3.0]).unwrap();
        assert!((f.slope - 0.9).abs() < 1e-14);
        assert!((f.intercept + 0.1).abs() < 1e-14);
        let sse: f64 = f.residuals.iter().map(|r| r * r).sum();
        assert!((sse - 0.7).abs() < 1e-13);
        assert!((f.slope_stderr - (0.35f64 / 5.0).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn power_law() {
        let x: Vec<f64> = (0..8).map(|k| 2f64.powi(k)).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powf(-0.25)).collect();
        let f = LinearFit::loglog(&x, &y).unwrap();
        assert!((f.slope + 0.25).abs() < 1e-13);
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(LinearFit::ols(&[1.0], &[2.0]), Err(Error::InsufficientData(_))));
    }
}
