use nalgebra::Matrix2;

use super::{
    AssignerConfig, AssignmentResult, GtAssignment, GtInstance, Label, Prediction, Strategy,
};
use crate::divergence::divergence;
use crate::error::{Error, Result};
use crate::geometry::{invert_spd, rotated_iou, Gaussian2, Point};
use crate::priors::PriorSet;

/// Level chosen by FCOS-style regression ranges: the gt goes to the first
/// level whose upper bound `8 * stride` covers half the longer side of its
/// horizontal bounding box; the last level is unbounded.
pub fn single_layer_level(gt: &GtInstance, strides: &[u32]) -> usize {
    let (s, c) = gt.bbox.theta.sin_cos();
    let (w, h) = (gt.bbox.w, gt.bbox.h);
    let hbb_w = (w * c).abs() + (h * s).abs();
    let hbb_h = (w * s).abs() + (h * c).abs();
    let reach = 0.5 * hbb_w.max(hbb_h);
    strides
        .iter()
        .position(|&st| reach <= 8.0 * f64::from(st))
        .unwrap_or(strides.len().saturating_sub(1))
}

/// Indices of the `k` smallest scores, ties broken by lower index, in order.
fn smallest_k(mut scored: Vec<(f64, usize)>, k: usize) -> Vec<usize> {
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < scored.len() {
        scored.select_nth_unstable_by(k, cmp);
        scored.truncate(k);
    }
    scored.sort_unstable_by(cmp);
    scored.into_iter().map(|(_, i)| i).collect()
}

/// Coarse positive samples for every gt.
pub fn coarse_match(
    priors: &PriorSet,
    gts: &[GtInstance],
    config: &AssignerConfig,
) -> Result<Vec<Vec<usize>>> {
    config.validate()?;
    if gts.is_empty() {
        return Ok(Vec::new());
    }
    let strides: Vec<u32> = (0..priors.num_levels())
        .map(|l| priors.level(l).first().map_or(0, |p| p.stride))
        .collect();

    gts.iter()
        .map(|gt| {
            let range = match config.strategy {
                Strategy::SingleLayer => priors.level_range(single_layer_level(gt, &strides)),
                Strategy::CrossLayer | Strategy::AllLayer => 0..priors.len(),
            };
            let scored = range
                .map(|idx| {
                    let prior = &priors.priors()[idx];
                    let pg = match config.strategy {
                        Strategy::AllLayer => Gaussian2 {
                            mu: prior.dynamic_loc,
                            sigma: Matrix2::identity(),
                        },
                        _ => prior.gaussian,
                    };
                    Ok((
                        divergence(config.measurement, &pg, &gt.gaussian, config.alpha)?,
                        idx,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(smallest_k(scored, config.k))
        })
        .collect()
}

/// Posterior quality of a sample: the mean of its confidence and its IoU.
pub fn posterior_quality(cls: f64, iou: f64) -> f64 {
    0.5 * (cls + iou)
}

/// [`posterior_quality`] of a prediction against `gt`.
pub fn pt_score(pred: &Prediction, gt: &GtInstance) -> f64 {
    posterior_quality(pred.cls_score, rotated_iou(&pred.bbox, &gt.bbox))
}

/// Keeps the `q` highest-PT members of each gt's CPS (ties: lower prior index).
pub fn medium_match(
    cps: &[Vec<usize>],
    preds: &[Prediction],
    gts: &[GtInstance],
    config: &AssignerConfig,
) -> Result<Vec<Vec<usize>>> {
    cps.iter()
        .zip(gts)
        .map(|(cands, gt)| {
            let scored = cands
                .iter()
                .map(|&idx| {
                    let pred = preds.get(idx).ok_or(Error::SizeMismatch {
                        expected: idx + 1,
                        got: preds.len(),
                    })?;
                    Ok((-pt_score(pred, gt), idx))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(smallest_k(scored, config.q))
        })
        .collect()
}

/// Mean dynamic location of the MPS members; `fallback` when the set is empty.
pub fn semantic_center(mps: &[usize], priors: &PriorSet, fallback: Point) -> Point {
    if mps.is_empty() {
        return fallback;
    }
    let sum: Point = mps.iter().map(|&i| priors.priors()[i].dynamic_loc).sum();
    sum / mps.len() as f64
}

/// Two-component instance mixture sharing the gt covariance, one component at
/// the geometry centre and one at the semantic centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dgmm {
    pub mu1: Point,
    pub mu2: Point,
    pub sigma: Matrix2<f64>,
    pub w1: f64,
    pub w2: f64,
    precision: Matrix2<f64>,
}

impl Dgmm {
    /// Mixture value at `loc`, peak-normalized so each component contributes
    /// its weight at its own mean.
    pub fn score(&self, loc: &Point) -> f64 {
        let d1 = loc - self.mu1;
        let d2 = loc - self.mu2;
        let m1 = d1.dot(&(self.precision * d1));
        let m2 = d2.dot(&(self.precision * d2));
        self.w1 * (-0.5 * m1).exp() + self.w2 * (-0.5 * m2).exp()
    }
}

pub fn build_dgmm(gt: &GtInstance, semantic_center: Point, w1: f64) -> Result<Dgmm> {
    if !(0.0..=1.0).contains(&w1) {
        return Err(Error::InvalidConfig(format!(
            "w1 must lie in [0, 1], got {w1}"
        )));
    }
    let precision = invert_spd(&gt.gaussian.sigma)?;
    Ok(Dgmm {
        mu1: gt.center(),
        mu2: semantic_center,
        sigma: gt.gaussian.sigma,
        w1,
        w2: 1.0 - w1,
        precision,
    })
}

pub fn dgmm_score(dgmm: &Dgmm, loc: &Point) -> f64 {
    dgmm.score(loc)
}

/// Drops MPS members whose mixture score at their dynamic location is below
/// `exp(-g)`.
pub fn fine_match(
    mps: &[Vec<usize>],
    dgmms: &[Dgmm],
    priors: &PriorSet,
    config: &AssignerConfig,
) -> Vec<Vec<usize>> {
    let cutoff = config.threshold();
    mps.iter()
        .zip(dgmms)
        .map(|(cands, dgmm)| {
            cands
                .iter()
                .copied()
                .filter(|&i| dgmm.score(&priors.priors()[i].dynamic_loc) >= cutoff)
                .collect()
        })
        .collect()
}

/// Full coarse-to-fine assignment. `preds` is indexed by flat prior index.
pub fn assign(
    priors: &PriorSet,
    gts: &[GtInstance],
    preds: &[Prediction],
    config: &AssignerConfig,
) -> Result<AssignmentResult> {
    config.validate()?;
    if preds.len() != priors.len() {
        return Err(Error::SizeMismatch {
            expected: priors.len(),
            got: preds.len(),
        });
    }
    if gts.is_empty() {
        return Ok(AssignmentResult::all_negative(priors.len()));
    }

    let cps = coarse_match(priors, gts, config)?;
    let mps = medium_match(&cps, preds, gts, config)?;
    let centers: Vec<Point> = mps
        .iter()
        .zip(gts)
        .map(|(m, gt)| semantic_center(m, priors, gt.center()))
        .collect();
    let dgmms = gts
        .iter()
        .zip(&centers)
        .map(|(gt, sc)| build_dgmm(gt, *sc, config.w1))
        .collect::<Result<Vec<_>>>()?;
    let fps = fine_match(&mps, &dgmms, priors, config);

    // Highest mixture score wins a contested prior; ties go to the lower gt.
    let mut owner: Vec<Option<(f64, usize)>> = vec![None; priors.len()];
    for (gi, members) in fps.iter().enumerate() {
        for &p in members {
            let score = dgmms[gi].score(&priors.priors()[p].dynamic_loc);
            match owner[p] {
                Some((best, _)) if score <= best => {}
                _ => owner[p] = Some((score, gi)),
            }
        }
    }
    let labels = owner
        .into_iter()
        .map(|o| o.map_or(Label::Negative, |(_, g)| Label::Positive(g)))
        .collect();

    let per_gt = cps
        .into_iter()
        .zip(mps)
        .zip(fps)
        .zip(centers)
        .map(|(((cps, mps), fps), sc)| GtAssignment {
            cps,
            mps,
            fps,
            semantic_center: [sc.x, sc.y],
        })
        .collect();
    Ok(AssignmentResult { labels, per_gt })
}
