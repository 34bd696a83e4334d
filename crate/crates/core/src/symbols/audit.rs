use super::{FrenetBox, Point, Symbol, SymbolTree};
use crate::curve::Curve;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// How `s` is drawn for a sample.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub enum SRange {
    Fixed(f64, f64),
    /// Uniform in `[t - w, t + w]` around the chart parameter.
    AroundT(f64),
}

/// Draws `ξ` through the pairings at a chart point: pick `t`, pick values
/// `v_i = <γ^(i)(t), ξ>` with `v_{root_order} = 0`, and solve for `ξ`. Every
/// `ξ` whose root of `<γ^(root_order), ξ>` lies in the `t` range and whose
/// pairings lie in the `v` ranges is reachable, so the ranges double as a
/// description of a superset of the piece support.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChartSampler {
    pub root_order: usize,
    pub t: (f64, f64),
    /// Ranges for `v_1..v_4`; `None` means `±|γ^(i)(t)| norm_max`.
    pub v: [Option<(f64, f64)>; 4],
    pub norm_max: f64,
    pub s: SRange,
}

impl ChartSampler {
    pub fn draw(&self, curve: &Curve, rng: &mut ChaCha8Rng) -> Option<(Vec<f64>, f64)> {
        let (a, b) = self.t;
        if !(b > a) {
            return None;
        }
        let t = rng.gen_range(a..b);
        let m = curve.matrix(t);
        let mut v = DVector::zeros(4);
        for i in 0..4 {
            if i + 1 == self.root_order {
                continue;
            }
            let (lo, hi) = match self.v[i] {
                Some(r) => r,
                None => {
                    let c = m.column(i).norm() * self.norm_max;
                    (-c, c)
                }
            };
            v[i] = if hi > lo { rng.gen_range(lo..hi) } else { lo };
        }
        let xi = m.transpose().lu().solve(&v)?;
        let s = match self.s {
            SRange::Fixed(lo, hi) => rng.gen_range(lo..hi),
            SRange::AroundT(w) => rng.gen_range(t - w..t + w),
        };
        Some((xi.iter().copied().collect(), s))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Angular pieces of the three-derivative decomposition in `2^k π_1`.
    J3Angular,
    /// Angular pieces `a^μ_{k,ℓ,ι}` in `2^k π_2`.
    J4Angular,
    /// Grouped pieces `b^{*,μ}` in `2^k π_2`.
    J4Grouped,
    /// Pieces `b^ν` in `2^{k-ℓ_2} π_1(s_ν; r_1, 2^{ℓ_2})`.
    J4Fine,
    /// Rescaled pieces `b̃^ν` in `2^{k-4ℓ_2} π̃_1`.
    J4Rescaled,
}

/// One containment claim: `T ξ ∈ box` on the support of a symbol, with
/// `T` the identity unless a rescaling is attached.
#[derive(Clone, Debug)]
pub struct BoxCheck {
    pub family: Family,
    pub fbox: FrenetBox,
    pub transform: Option<DMatrix<f64>>,
}

#[derive(Clone, Debug)]
pub struct AuditTarget {
    pub symbol: Symbol,
    pub sampler: ChartSampler,
    pub checks: Vec<BoxCheck>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PieceAudit {
    pub label: String,
    pub family: Family,
    pub accepted: usize,
    pub attempts: usize,
    /// Smallest slack making every accepted sample a member; `None` when no
    /// sample with a nonzero value was found.
    pub c_min: Option<f64>,
    /// Per-coordinate maxima of the box ratios.
    pub max_ratios: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SupportAuditReport {
    pub pieces: Vec<PieceAudit>,
    /// Largest `c_min` per family.
    pub by_family: BTreeMap<Family, f64>,
    pub vacuous: usize,
}

impl SupportAuditReport {
    pub fn worst(&self) -> f64 {
        self.by_family.values().fold(0.0, |m, v| m.max(*v))
    }
}

/// Draw up to `n` points of `supp symbol` by chart sampling and rejection on
/// the evaluator.
pub fn sample_piece(
    curve: &Curve,
    symbol: &Symbol,
    sampler: &ChartSampler,
    n: usize,
    max_attempts: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<(Vec<f64>, f64)>, usize)> {
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n && attempts < max_attempts {
        attempts += 1;
        let Some((xi, s)) = sampler.draw(curve, rng) else { continue };
        if !curve.contains(s) {
            continue;
        }
        let p = Point::new(curve, &xi, s);
        if symbol.eval(&p)? != 0.0 {
            out.push((xi, s));
        }
    }
    Ok((out, attempts))
}

fn target_rng(seed: u64, idx: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(idx as u64 + 1);
    rng
}

/// For each target and each of its box checks, the smallest slack `C` with
/// all sampled support points inside.
pub fn support_audit(curve: &Curve, targets: &[AuditTarget], n_samples: usize, seed: u64) -> Result<SupportAuditReport> {
    let per: Vec<Result<Vec<PieceAudit>>> = targets
        .par_iter()
        .enumerate()
        .map(|(idx, t)| {
            let mut rng = target_rng(seed, idx);
            let (pts, attempts) = sample_piece(curve, &t.symbol, &t.sampler, n_samples, n_samples * 400, &mut rng)?;
            let mut res = Vec::new();
            for chk in &t.checks {
                let mut c_min: Option<f64> = None;
                let mut max_ratios = vec![0.0f64; curve.dim()];
                for (xi, _) in &pts {
                    let x = match &chk.transform {
                        Some(m) => (m * DVector::from_column_slice(xi)).iter().copied().collect(),
                        None => xi.clone(),
                    };
                    let r = chk.fbox.ratios(&x);
                    for (m, v) in max_ratios.iter_mut().zip(&r) {
                        *m = m.max(*v);
                    }
                    let c = r.into_iter().fold(0.0, f64::max);
                    c_min = Some(c_min.map_or(c, |m| m.max(c)));
                }
                res.push(PieceAudit {
                    label: t.symbol.label.clone(),
                    family: chk.family,
                    accepted: pts.len(),
                    attempts,
                    c_min,
                    max_ratios,
                });
            }
            Ok(res)
        })
        .collect();
    let mut pieces = Vec::new();
    for r in per {
        pieces.extend(r?);
    }
    let mut by_family = BTreeMap::new();
    let mut vacuous = 0;
    for p in &pieces {
        match p.c_min {
            Some(c) => {
                let e = by_family.entry(p.family).or_insert(0.0f64);
                *e = e.max(c);
            }
            None => vacuous += 1,
        }
    }
    Ok(SupportAuditReport { pieces, by_family, vacuous })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub points: usize,
    /// Largest `|node - Σ children|` over all nodes and points.
    pub max_defect: f64,
    /// Largest `|root - Σ leaves|`.
    pub max_leaf_defect: f64,
    /// Largest root value seen (guards against testing only where all vanish).
    pub max_root_value: f64,
}

/// Evaluate the tree at points drawn from the supports of its leaves (round
/// robin over leaves with a sampler) and check every partition identity.
pub fn reconstruction_audit(curve: &Curve, tree: &SymbolTree, n_points: usize, seed: u64) -> Result<ReconstructionReport> {
    let samplers: Vec<&AuditTarget> = tree.nodes().into_iter().filter_map(|n| n.audit.as_ref()).collect();
    if samplers.is_empty() {
        return Err(Error::InsufficientData("tree has no samplers".into()));
    }
    let leaves = tree.leaves();
    let chunks: Vec<Result<(usize, f64, f64, f64)>> = (0..n_points)
        .into_par_iter()
        .map(|i| {
            let mut rng = target_rng(seed, i);
            let t = samplers[i % samplers.len()];
            let (pts, _) = sample_piece(curve, &t.symbol, &t.sampler, 1, 4000, &mut rng)?;
            let Some((xi, s)) = pts.into_iter().next() else { return Ok((0, 0.0, 0.0, 0.0)) };
            let p = Point::new(curve, &xi, s);
            let d = tree.partition_defect(&p)?;
            let root = tree.symbol.eval(&p)?;
            let mut sum = 0.0;
            for l in &leaves {
                sum += l.symbol.eval(&p)?;
            }
            Ok((1, d, (root - sum).abs(), root.abs()))
        })
        .collect();
    let mut rep = ReconstructionReport { points: 0, max_defect: 0.0, max_leaf_defect: 0.0, max_root_value: 0.0 };
    for c in chunks {
        let (n, d, l, r) = c?;
        rep.points += n;
        rep.max_defect = rep.max_defect.max(d);
        rep.max_leaf_defect = rep.max_leaf_defect.max(l);
        rep.max_root_value = rep.max_root_value.max(r);
    }
    Ok(rep)
}
