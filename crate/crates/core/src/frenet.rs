//! Orthonormal frames from Gram-Schmidt on `γ', ..., γ^(n)`.

use crate::curve::Curve;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

pub const DEFAULT_CONDITION_CAP: f64 = 1e8;

#[derive(Clone, Debug)]
pub struct FrenetFrame {
    pub s: f64,
    /// Columns `e_1(s), ..., e_n(s)`.
    pub e: DMatrix<f64>,
    /// Upper-triangular `R` with `[γ]_s = E R`, positive diagonal.
    pub r: DMatrix<f64>,
}

impl FrenetFrame {
    pub fn column(&self, j: usize) -> DVector<f64> {
        self.e.column(j).into_owned()
    }

    pub fn orthonormality_error(&self) -> f64 {
        let n = self.e.ncols();
        (self.e.transpose() * &self.e - DMatrix::<f64>::identity(n, n)).amax()
    }

    /// Diagonal of `R`: lengths of the successive orthogonal components.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.r.nrows()).map(|i| self.r[(i, i)]).collect()
    }
}

pub fn frenet_frame(curve: &Curve, s: f64) -> Result<FrenetFrame> {
    frenet_frame_capped(curve, s, DEFAULT_CONDITION_CAP)
}

/// Modified Gram-Schmidt with one reorthogonalisation pass.
pub fn frenet_frame_capped(curve: &Curve, s: f64, cap: f64) -> Result<FrenetFrame> {
    curve.check_domain(s)?;
    let a = curve.matrix(s);
    let sv = a.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if !(smin > 0.0) || smax / smin > cap {
        return Err(Error::Degenerate {
            s,
            detail: format!("condition number {:.3e} exceeds cap {cap:.1e}", smax / smin),
        });
    }
    let (e, r) = mgs(&a);
    Ok(FrenetFrame { s, e, r })
}

fn mgs(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.ncols();
    let mut q = a.clone();
    let mut r = DMatrix::zeros(n, n);
    for j in 0..n {
        for _pass in 0..2 {
            for i in 0..j {
                let c = q.column(i).dot(&q.column(j));
                r[(i, j)] += c;
                let qi = q.column(i).into_owned();
                q.column_mut(j).axpy(-c, &qi, 1.0);
            }
        }
        let nrm = q.column(j).norm();
        r[(j, j)] = nrm;
        q.column_mut(j).scale_mut(1.0 / nrm);
    }
    (q, r)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FrameDecayAudit {
    pub pairs: usize,
    pub max_separation: f64,
    /// Smallest C with `|<e_i(s1), e_j(s2)>| <= C |s1 - s2|^|i-j|` over the
    /// sampled pairs and all `i != j`.
    pub constant: f64,
    /// Largest `||E^T E - I||_max` seen.
    pub orthonormality: f64,
}

/// Fit the decay constant of frame overlaps on random parameter pairs.
pub fn frame_decay_audit(
    curve: &Curve,
    window: (f64, f64),
    max_separation: f64,
    pairs: usize,
    seed: u64,
) -> Result<FrameDecayAudit> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = curve.dim();
    let mut constant = 0.0f64;
    let mut orth = 0.0f64;
    for _ in 0..pairs {
        let s1 = rng.gen_range(window.0..=window.1);
        let lo = (s1 - max_separation).max(window.0);
        let hi = (s1 + max_separation).min(window.1);
        let s2 = rng.gen_range(lo..=hi);
        let f1 = frenet_frame(curve, s1)?;
        let f2 = frenet_frame(curve, s2)?;
        orth = orth.max(f1.orthonormality_error()).max(f2.orthonormality_error());
        let h = (s1 - s2).abs();
        if h == 0.0 {
            continue;
        }
        let g = f1.e.transpose() * &f2.e;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let p = (i as i32 - j as i32).abs();
                    constant = constant.max(g[(i, j)].abs() / h.powi(p));
                }
            }
        }
    }
    Ok(FrameDecayAudit { pairs, max_separation, constant, orthonormality: orth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{moment_curve, Perturbation, Shape};

    #[test]
    fn identity_at_origin() {
        let f = frenet_frame(&moment_curve(4).unwrap(), 0.0).unwrap();
        assert!((f.e.clone() - DMatrix::<f64>::identity(4, 4)).amax() < 1e-15);
    }

    #[test]
    fn span_and_sign() {
        let g = moment_curve(4).unwrap();
        let f = frenet_frame(&g, 0.7).unwrap();
        let a = g.matrix(0.7);
        assert!((&f.e * &f.r - &a).amax() < 1e-13);
        for j in 0..4 {
            assert!(f.column(j).dot(&a.column(j)) > 0.0);
            for i in j + 1..4 {
                assert_eq!(f.r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn small_separation_overlap() {
        let g = moment_curve(4).unwrap();
        let a = frenet_frame(&g, 0.1).unwrap();
        let b = frenet_frame(&g, 0.0).unwrap();
        let v = a.column(0).dot(&b.column(2)).abs();
        assert!(v <= 5.0 * 0.01, "{v}");
    }

    #[test]
    fn degenerate_point_is_reported() {
        let g = crate::curve::Curve::polynomial(vec![vec![0.0, 1.0], vec![0.0, 0.0, 0.0, 1.0]]).unwrap();
        match frenet_frame(&g, 0.0) {
            Err(Error::Degenerate { s, .. }) => assert_eq!(s, 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn decay_constant_is_moderate() {
        let g = moment_curve(4).unwrap();
        let audit = frame_decay_audit(&g, (-1.0, 1.0), 0.3, 2000, 11).unwrap();
        assert!(audit.constant <= 10.0, "{}", audit.constant);
        assert!(audit.orthonormality <= 1e-12);
    }

    #[test]
    fn perturbed_frames_orthonormal() {
        let p = Perturbation::new(3, 0.005, Shape::Sine { omega: 1.0, phase: 0.0 });
        let g = crate::curve::Curve::perturbed_moment(4, vec![p]).unwrap();
        for i in 0..=20 {
            let f = frenet_frame(&g, -1.0 + 0.1 * i as f64).unwrap();
            assert!(f.orthonormality_error() <= 1e-12);
        }
    }
}
