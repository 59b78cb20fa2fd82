use serde::{Deserialize, Serialize};

use super::{AssignmentResult, GtAssignment, GtInstance, Label};
use crate::error::{Error, Result};
use crate::geometry::rotated_iou;
use crate::priors::PriorSet;

/// Thresholds of the static IoU assigner (RetinaNet-O style defaults).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxIouConfig {
    pub pos_thr: f64,
    pub neg_thr: f64,
    pub low_quality: bool,
}

impl Default for MaxIouConfig {
    fn default() -> Self {
        Self {
            pos_thr: 0.5,
            neg_thr: 0.4,
            low_quality: true,
        }
    }
}

/// Labels each prior by its best rotated IoU against the gts: positive at or
/// above `pos_thr`, negative below `neg_thr`, ignored in between. With
/// `low_quality`, every gt also claims its single best-overlapping prior.
pub fn max_iou_assign(
    priors: &PriorSet,
    gts: &[GtInstance],
    config: &MaxIouConfig,
) -> Result<AssignmentResult> {
    let MaxIouConfig {
        pos_thr,
        neg_thr,
        low_quality,
    } = *config;
    if !(0.0 <= neg_thr && neg_thr <= pos_thr && pos_thr <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "need 0 <= neg_thr <= pos_thr <= 1, got ({pos_thr}, {neg_thr})"
        )));
    }
    if gts.is_empty() {
        return Ok(AssignmentResult::all_negative(priors.len()));
    }

    let mut labels = Vec::with_capacity(priors.len());
    // Per gt: (best IoU, prior index), first maximum wins.
    let mut gt_best: Vec<(f64, usize)> = vec![(0.0, 0); gts.len()];
    for (pi, prior) in priors.iter().enumerate() {
        let mut best = (0.0_f64, None);
        for (gi, gt) in gts.iter().enumerate() {
            let iou = rotated_iou(&prior.bbox, &gt.bbox);
            if iou > best.0 {
                best = (iou, Some(gi));
            }
            if iou > gt_best[gi].0 {
                gt_best[gi] = (iou, pi);
            }
        }
        labels.push(match best {
            (iou, Some(gi)) if iou >= pos_thr => Label::Positive(gi),
            (iou, _) if iou < neg_thr => Label::Negative,
            _ => Label::Ignore,
        });
    }
    if low_quality {
        for (gi, &(iou, pi)) in gt_best.iter().enumerate() {
            if iou > 0.0 {
                labels[pi] = Label::Positive(gi);
            }
        }
    }

    let mut per_gt: Vec<GtAssignment> = gts
        .iter()
        .map(|gt| GtAssignment {
            cps: Vec::new(),
            mps: Vec::new(),
            fps: Vec::new(),
            semantic_center: [gt.bbox.cx, gt.bbox.cy],
        })
        .collect();
    for (pi, l) in labels.iter().enumerate() {
        if let Label::Positive(gi) = l {
            per_gt[*gi].fps.push(pi);
        }
    }
    for s in &mut per_gt {
        s.cps = s.fps.clone();
        s.mps = s.fps.clone();
    }
    Ok(AssignmentResult { labels, per_gt })
}
