//! Label assignment: the coarse-to-fine matcher and the MaxIoU baseline.
//!
//! The coarse-to-fine matcher runs three per-gt stages over the prior set:
//!
//! 1. **coarse** (CPS): the `k` priors whose Gaussians are closest to the
//!    gt's Gaussian under the configured divergence;
//! 2. **medium** (MPS): the `q` CPS members with the highest PT score
//!    (`0.5 * cls + 0.5 * IoU` of their predictions);
//! 3. **fine** (FPS): MPS members whose score under the gt's two-component
//!    mixture (geometry centre + semantic centre) reaches `exp(-g)`.
//!
//! Priors claimed by several gts go to the gt whose mixture scores them
//! highest.

mod dcfl;
mod max_iou;

pub use dcfl::{
    assign, build_dgmm, coarse_match, dgmm_score, fine_match, medium_match, posterior_quality,
    pt_score, semantic_center, single_layer_level, Dgmm,
};
pub use max_iou::{max_iou_assign, MaxIouConfig};

use serde::{Deserialize, Serialize};

use crate::divergence::{Alpha, DivergenceKind};
use crate::error::{Error, Result};
use crate::geometry::{box_to_gaussian, Gaussian2, Point, RotatedBox};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtInstance {
    pub bbox: RotatedBox,
    pub class_id: usize,
    pub gaussian: Gaussian2,
}

impl GtInstance {
    pub fn new(bbox: RotatedBox, class_id: usize) -> Result<Self> {
        let gaussian = box_to_gaussian(&bbox)?;
        Ok(Self {
            bbox,
            class_id,
            gaussian,
        })
    }

    pub fn center(&self) -> Point {
        self.bbox.center()
    }
}

/// Network posterior attached to one prior: confidence for the gt's class and
/// the decoded box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prediction {
    pub cls_score: f64,
    #[serde(rename = "box")]
    pub bbox: RotatedBox,
}

impl Prediction {
    pub fn new(cls_score: f64, bbox: RotatedBox) -> Result<Self> {
        let p = Self { cls_score, bbox };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.cls_score) {
            return Err(Error::InvalidConfig(format!(
                "cls_score must lie in [0, 1], got {}",
                self.cls_score
            )));
        }
        self.bbox.validate()
    }
}

/// How the coarse stage restricts its candidate priors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// All levels, each prior with its own covariance.
    #[default]
    CrossLayer,
    /// Only the level picked by FCOS-style regression ranges.
    SingleLayer,
    /// All levels, prior covariance replaced by the identity.
    AllLayer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignerConfig {
    pub k: usize,
    pub q: usize,
    pub g: f64,
    pub w1: f64,
    pub measurement: DivergenceKind,
    pub strategy: Strategy,
    pub alpha: Alpha,
}

impl Default for AssignerConfig {
    fn default() -> Self {
        Self {
            k: 16,
            q: 12,
            g: 0.8,
            w1: 0.7,
            measurement: DivergenceKind::Gjsd,
            strategy: Strategy::CrossLayer,
            alpha: Alpha::default(),
        }
    }
}

impl AssignerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q < 1 || self.q > self.k {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= q <= k, got q = {}, k = {}",
                self.q, self.k
            )));
        }
        if !(self.g > 0.0) || !self.g.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "g must be > 0, got {}",
                self.g
            )));
        }
        if !(0.0..=1.0).contains(&self.w1) {
            return Err(Error::InvalidConfig(format!(
                "w1 must lie in [0, 1], got {}",
                self.w1
            )));
        }
        Ok(())
    }

    /// DGMM cutoff `exp(-g)`.
    pub fn threshold(&self) -> f64 {
        (-self.g).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Negative,
    /// Excluded from both positives and negatives (MaxIoU's middle band).
    Ignore,
    Positive(usize),
}

/// Per-gt stage outputs. Lists hold flat prior indices in ranking order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtAssignment {
    pub cps: Vec<usize>,
    pub mps: Vec<usize>,
    pub fps: Vec<usize>,
    pub semantic_center: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentResult {
    pub labels: Vec<Label>,
    pub per_gt: Vec<GtAssignment>,
}

impl AssignmentResult {
    pub fn all_negative(num_priors: usize) -> Self {
        Self {
            labels: vec![Label::Negative; num_priors],
            per_gt: Vec::new(),
        }
    }

    /// Priors finally labelled positive for `gt`, ascending.
    pub fn positives(&self, gt: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| matches!(l, Label::Positive(g) if *g == gt).then_some(i))
            .collect()
    }

    pub fn positive_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.per_gt.len()];
        for l in &self.labels {
            if let Label::Positive(g) = l {
                counts[*g] += 1;
            }
        }
        counts
    }

    /// Checks the structural invariants: `FPS ⊆ MPS ⊆ CPS`, the `k`/`q` size
    /// caps and that every positive label is backed by its gt's FPS.
    pub fn check_invariants(&self, k: usize, q: usize) -> std::result::Result<(), String> {
        for (i, s) in self.per_gt.iter().enumerate() {
            if s.cps.len() > k {
                return Err(format!("gt {i}: |CPS| = {} > k = {k}", s.cps.len()));
            }
            if s.mps.len() > q {
                return Err(format!("gt {i}: |MPS| = {} > q = {q}", s.mps.len()));
            }
            if let Some(p) = s.mps.iter().find(|p| !s.cps.contains(p)) {
                return Err(format!("gt {i}: MPS member {p} not in CPS"));
            }
            if let Some(p) = s.fps.iter().find(|p| !s.mps.contains(p)) {
                return Err(format!("gt {i}: FPS member {p} not in MPS"));
            }
        }
        for (p, l) in self.labels.iter().enumerate() {
            if let Label::Positive(g) = l {
                let stages = self
                    .per_gt
                    .get(*g)
                    .ok_or_else(|| format!("prior {p} labelled for missing gt {g}"))?;
                if !stages.fps.contains(&p) {
                    return Err(format!("prior {p} positive for gt {g} but not in its FPS"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_validation() {
        let c = AssignerConfig::default();
        assert_eq!((c.k, c.q, c.g, c.w1), (16, 12, 0.8, 0.7));
        assert!(c.validate().is_ok());
        assert!((c.threshold() - 0.449_328_964_117_221_6).abs() < 1e-15);

        for bad in [
            AssignerConfig { q: 0, ..c },
            AssignerConfig { q: 17, ..c },
            AssignerConfig { g: 0.0, ..c },
            AssignerConfig { w1: 1.5, ..c },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn config_json_strict() {
        let json = r#"{"k":16,"q":12,"g":0.8,"w1":0.7,"measurement":"gjsd","strategy":"cross_layer","alpha":0.5}"#;
        let c: AssignerConfig = serde_json::from_str(json).unwrap();
        assert_eq!(c, AssignerConfig::default());
        let extra = json.replace("\"k\":16", "\"k\":16,\"extra\":1");
        assert!(serde_json::from_str::<AssignerConfig>(&extra).is_err());
        let bad_alpha = json.replace("\"alpha\":0.5", "\"alpha\":1.5");
        assert!(serde_json::from_str::<AssignerConfig>(&bad_alpha).is_err());
    }

    #[test]
    fn prediction_score_range() {
        let b = RotatedBox::new(0.0, 0.0, 1.0, 1.0, 0.0).unwrap();
        assert!(Prediction::new(1.2, b).is_err());
        assert!(Prediction::new(-0.1, b).is_err());
        assert!(Prediction::new(0.5, b).is_ok());
    }

    #[test]
    fn invariant_checker_flags_violations() {
        let mut r = AssignmentResult {
            labels: vec![Label::Negative, Label::Positive(0), Label::Negative],
            per_gt: vec![GtAssignment {
                cps: vec![0, 1, 2],
                mps: vec![1, 2],
                fps: vec![1],
                semantic_center: [0.0, 0.0],
            }],
        };
        assert!(r.check_invariants(3, 2).is_ok());
        assert!(r.check_invariants(2, 2).is_err());
        r.per_gt[0].fps = vec![0];
        assert!(r.check_invariants(3, 2).is_err());
        assert_eq!(r.positives(0), vec![1]);
        assert_eq!(r.positive_counts(), vec![1]);
    }
}
