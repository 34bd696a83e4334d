use crate::cone::norm;
use crate::curve::Curve;
use crate::cutoff::step;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Thresholds `δ_1..δ_4`, transition widths of the mollified indicators and
/// the interval `I_0 = [-half_width, half_width]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeltaProfile {
    pub delta: [f64; 4],
    pub width: [f64; 4],
    pub half_width: f64,
    /// Grid points on `I_0` used for the infimum.
    pub grid: usize,
}

impl DeltaProfile {
    /// `δ = (δ0, δ0³, δ0, 9/10)`, widths `δ_j` for `j <= 3` and `δ0` for `j = 4`.
    pub fn standard(delta0: f64) -> Self {
        let d = [delta0, delta0.powi(3), delta0, 0.9];
        Self { delta: d, width: [d[0], d[1], d[2], delta0], half_width: delta0, grid: 401 }
    }
}

impl Default for DeltaProfile {
    fn default() -> Self {
        Self::standard(0.01)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JWeights {
    /// `χ_1..χ_4` at `ξ/|ξ|`.
    pub chi: [f64; 4],
    /// `ρ_1..ρ_4`.
    pub rho: [f64; 4],
    /// `inf_{I_0} |<γ^(j), ω>|`.
    pub inf_pairing: [f64; 4],
    /// `Π ρ_j`; nonzero means the four neighbourhoods overlap at this
    /// direction and the weights do not sum to one.
    pub overlap: f64,
    pub sum: f64,
}

impl JWeights {
    /// Index of the largest weight (1-based).
    pub fn dominant(&self) -> usize {
        let mut best = 0;
        for j in 1..4 {
            if self.chi[j] > self.chi[best] {
                best = j;
            }
        }
        best + 1
    }
}

fn inf_abs_pairing(curve: &Curve, omega: &[f64], order: usize, half: f64, grid: usize) -> f64 {
    let h = 2.0 * half / (grid - 1) as f64;
    let mut prev = curve.pairing(-half, order, omega);
    let mut best = prev.abs();
    for i in 1..grid {
        let s = -half + i as f64 * h;
        let v = curve.pairing(s, order, omega);
        if v == 0.0 || v.signum() != prev.signum() {
            return 0.0;
        }
        best = best.min(v.abs());
        prev = v;
    }
    best
}

/// Smooth partition `χ_J = (Π_{j<J} ρ_j)(1 - ρ_J)` of directions, where
/// `ρ_j = 1` when `inf_{I_0}|<γ^(j), ω>| <= δ_j` and `ρ_j = 0` once the
/// infimum exceeds `δ_j + width_j`.
pub fn classify_j(curve: &Curve, xi: &[f64], profile: &DeltaProfile) -> Result<JWeights> {
    if curve.dim() != 4 {
        return Err(Error::InvalidParameter(format!("classification needs n = 4, got {}", curve.dim())));
    }
    let nrm = norm(xi);
    if !(nrm > 0.0) {
        return Err(Error::InvalidParameter("ξ = 0 has no direction".into()));
    }
    let omega: Vec<f64> = xi.iter().map(|v| v / nrm).collect();
    let mut m = [0.0; 4];
    let mut rho = [0.0; 4];
    for j in 0..4 {
        m[j] = inf_abs_pairing(curve, &omega, j + 1, profile.half_width, profile.grid.max(3));
        rho[j] = 1.0 - step((m[j] - profile.delta[j]) / profile.width[j], 0);
    }
    let mut chi = [0.0; 4];
    let mut prefix = 1.0;
    for j in 0..4 {
        chi[j] = prefix * (1.0 - rho[j]);
        prefix *= rho[j];
    }
    let sum = chi.iter().sum();
    Ok(JWeights { chi, rho, inf_pairing: m, overlap: prefix, sum })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::moment_curve;

    fn unit(j: usize) -> Vec<f64> {
        let mut v = vec![0.0; 4];
        v[j] = 1.0;
        v
    }

    #[test]
    fn coordinate_directions() {
        let g = moment_curve(4).unwrap();
        let p = DeltaProfile::default();
        for (j, want) in [(0, 1), (2, 3), (3, 4)] {
            let w = classify_j(&g, &unit(j), &p).unwrap();
            assert_eq!(w.chi[want - 1], 1.0, "{w:?}");
            assert!((w.sum - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn weights_sum_to_one_on_random_directions() {
        let g = moment_curve(4).unwrap();
        let p = DeltaProfile::default();
        for v in crate::curve::sphere_net(4, 2000, 17) {
            let w = classify_j(&g, v.as_slice(), &p).unwrap();
            assert_eq!(w.overlap, 0.0);
            assert!((w.sum - 1.0).abs() <= 1e-12);
        }
    }
}
