//! Synthetic populations and positive-sample imbalance statistics.
//!
//! A population is a grid of (angle bin x scale bin) cells, each filled with
//! `per_bin` non-overlapping oriented boxes of fixed aspect ratio. Running an
//! assigner over it and binning the per-gt positive counts along each axis
//! shows how evenly the assigner supervises unusual angles and sizes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::assigner::{
    assign, max_iou_assign, AssignerConfig, AssignmentResult, GtInstance, Label, MaxIouConfig,
    Prediction,
};
use crate::error::{Error, Result};
use crate::geometry::{intersection_area, RotatedBox};
use crate::priors::{build_prior_grid, FpnConfig, PriorSet};

const PLACEMENT_ATTEMPTS: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    /// Half-open `[lo, hi)` ranges of the long-edge direction, degrees.
    pub angle_bins: Vec<[f64; 2]>,
    /// Half-open `[lo, hi)` ranges of `sqrt(w * h)`, pixels.
    pub scale_bins: Vec<[f64; 2]>,
    /// `w / h`.
    pub aspect: f64,
    pub per_bin: usize,
    pub seed: u64,
    pub image_size: [u32; 2],
    /// Minimum distance between instance centres, pixels.
    pub spacing: f64,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        Self {
            angle_bins: (0..12)
                .map(|i| [15.0 * i as f64, 15.0 * (i + 1) as f64])
                .collect(),
            scale_bins: vec![[8.0, 16.0], [16.0, 32.0], [32.0, 64.0]],
            aspect: 4.0,
            per_bin: 4,
            seed: 0,
            image_size: [2048, 2048],
            spacing: 96.0,
        }
    }
}

fn check_bins(name: &str, bins: &[[f64; 2]]) -> Result<()> {
    if bins.is_empty() {
        return Err(Error::InvalidConfig(format!("population.{name} is empty")));
    }
    if bins
        .iter()
        .any(|b| !(b[0] < b[1]) || !b[0].is_finite() || !b[1].is_finite())
    {
        return Err(Error::InvalidConfig(format!(
            "population.{name}: every bin needs lo < hi"
        )));
    }
    let mut sorted = bins.to_vec();
    sorted.sort_by(|a, b| a[0].total_cmp(&b[0]));
    if sorted.windows(2).any(|w| w[1][0] < w[0][1]) {
        return Err(Error::InvalidConfig(format!("population.{name} overlap")));
    }
    Ok(())
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<()> {
        check_bins("angle_bins", &self.angle_bins)?;
        check_bins("scale_bins", &self.scale_bins)?;
        if !(self.aspect > 0.0) || !self.aspect.is_finite() {
            return Err(Error::InvalidConfig("population.aspect must be > 0".into()));
        }
        if self.per_bin == 0 {
            return Err(Error::InvalidConfig(
                "population.per_bin must be >= 1".into(),
            ));
        }
        if self.image_size[0] == 0 || self.image_size[1] == 0 {
            return Err(Error::EmptyImage {
                width: self.image_size[0],
                height: self.image_size[1],
            });
        }
        if !(self.spacing > 0.0) || !self.spacing.is_finite() {
            return Err(Error::InvalidConfig(
                "population.spacing must be > 0".into(),
            ));
        }
        Ok(())
    }

    fn angle_bin(&self, deg: f64) -> Option<usize> {
        self.angle_bins
            .iter()
            .position(|b| b[0] <= deg && deg < b[1])
    }

    fn scale_bin(&self, size: f64) -> Option<usize> {
        self.scale_bins
            .iter()
            .position(|b| b[0] <= size && size < b[1])
    }
}

/// Draws the population. Shapes are sampled cell by cell; placement runs from
/// the largest instance down so that crowded images still pack.
pub fn synth_population(spec: &PopulationSpec) -> Result<Vec<GtInstance>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let stretch = spec.aspect.sqrt();

    let mut shapes = Vec::new();
    for a in &spec.angle_bins {
        for s in &spec.scale_bins {
            for _ in 0..spec.per_bin {
                let angle = rng.random_range(a[0]..a[1]);
                let size = rng.random_range(s[0]..s[1]);
                shapes.push((angle.to_radians(), size * stretch, size / stretch));
            }
        }
    }

    let mut order: Vec<usize> = (0..shapes.len()).collect();
    order.sort_by(|&i, &j| (shapes[j].1 * shapes[j].2).total_cmp(&(shapes[i].1 * shapes[i].2)));

    let (width, height) = (f64::from(spec.image_size[0]), f64::from(spec.image_size[1]));
    let mut placed: Vec<Option<RotatedBox>> = vec![None; shapes.len()];
    let mut accepted: Vec<RotatedBox> = Vec::with_capacity(shapes.len());
    for idx in order {
        let (theta, w, h) = shapes[idx];
        let r = 0.5 * w.hypot(h);
        if 2.0 * r >= width || 2.0 * r >= height {
            return Err(Error::PlacementFailure {
                index: idx,
                attempts: 0,
            });
        }
        let mut found = None;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let cx = rng.random_range(r..width - r);
            let cy = rng.random_range(r..height - r);
            let cand = RotatedBox::new(cx, cy, w, h, theta)?.canonicalize()?;
            let clear = accepted.iter().all(|o| {
                (o.center() - cand.center()).norm() >= spec.spacing
                    && intersection_area(o, &cand) == 0.0
            });
            if clear {
                found = Some(cand);
                break;
            }
        }
        let b = found.ok_or(Error::PlacementFailure {
            index: idx,
            attempts: PLACEMENT_ATTEMPTS,
        })?;
        accepted.push(b);
        placed[idx] = Some(b);
    }
    placed
        .into_iter()
        .map(|b| GtInstance::new(b.expect("every shape placed"), 0))
        .collect()
}

/// Stand-in for network posteriors. Each prior predicts the box of its nearest
/// gt (jittered by `noise`) with a confidence that decays with the Mahalanobis
/// distance of the prior's location from that gt.
pub fn prediction_oracle(
    priors: &PriorSet,
    gts: &[GtInstance],
    noise: f64,
    seed: u64,
) -> Result<Vec<Prediction>> {
    if !(noise >= 0.0) || !noise.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "noise must be >= 0, got {noise}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    priors
        .iter()
        .map(|prior| {
            let z: [f64; 5] = std::array::from_fn(|_| rng.sample(StandardNormal));
            let u: f64 = rng.random();
            let nearest = gts
                .iter()
                .enumerate()
                .map(|(i, g)| ((g.center() - prior.dynamic_loc).norm_squared(), i))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let Some((_, gi)) = nearest else {
                return Ok(Prediction {
                    cls_score: 0.0,
                    bbox: prior.bbox,
                });
            };
            let gt = &gts[gi];
            let b = gt.bbox;
            let size = b.size();
            let bbox = if noise > 0.0 {
                RotatedBox::new(
                    b.cx + noise * size * z[0],
                    b.cy + noise * size * z[1],
                    b.w * (noise * z[2]).exp(),
                    b.h * (noise * z[3]).exp(),
                    b.theta + noise * z[4],
                )?
            } else {
                b
            };
            let d_sq = gt.gaussian.mahalanobis_sq(&prior.dynamic_loc)?;
            let cls = ((-0.5 * d_sq).exp() * (1.0 - u * noise)).clamp(0.0, 1.0);
            Ok(Prediction {
                cls_score: cls,
                bbox,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Angle,
    Scale,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Angle => "angle",
            Axis::Scale => "scale",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRecord {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub axis: Axis,
    pub mean_pos: f64,
    pub mean_quality: f64,
    pub n_gt: usize,
}

/// Max/min ratio of the per-bin mean positive counts over the non-empty bins
/// of one axis. `ratio` is `None` when some bin has no positives while another
/// has some; an all-zero axis reports `Some(1.0)` with `degenerate` set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisSummary {
    pub ratio: Option<f64>,
    pub degenerate: bool,
}

impl AxisSummary {
    fn from_records<'a>(records: impl Iterator<Item = &'a BinRecord>) -> Self {
        let means: Vec<f64> = records.filter(|r| r.n_gt > 0).map(|r| r.mean_pos).collect();
        let max = means.iter().copied().fold(0.0, f64::max);
        let min = means.iter().copied().fold(f64::INFINITY, f64::min);
        if max == 0.0 {
            Self {
                ratio: Some(1.0),
                degenerate: true,
            }
        } else if min == 0.0 {
            Self {
                ratio: None,
                degenerate: false,
            }
        } else {
            Self {
                ratio: Some(max / min),
                degenerate: false,
            }
        }
    }

    /// Unbounded ratios compare as infinite.
    pub fn ratio_or_inf(&self) -> f64 {
        self.ratio.unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceReport {
    pub records: Vec<BinRecord>,
    pub angle: AxisSummary,
    pub scale: AxisSummary,
}

impl ImbalanceReport {
    pub fn axis_records(&self, axis: Axis) -> impl Iterator<Item = &BinRecord> {
        self.records.iter().filter(move |r| r.axis == axis)
    }

    /// Smallest mean positive count over the non-empty bins of `axis`.
    pub fn min_mean_pos(&self, axis: Axis) -> f64 {
        self.axis_records(axis)
            .filter(|r| r.n_gt > 0)
            .map(|r| r.mean_pos)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Bins each gt by long-edge angle and absolute size and averages its
/// positive count and its best positive prediction IoU (0 without positives).
pub fn imbalance_report(
    result: &AssignmentResult,
    gts: &[GtInstance],
    preds: &[Prediction],
    spec: &PopulationSpec,
) -> Result<ImbalanceReport> {
    let mut counts = vec![0usize; gts.len()];
    let mut quality = vec![0.0f64; gts.len()];
    for (pi, label) in result.labels.iter().enumerate() {
        if let Label::Positive(gi) = *label {
            let gt = gts.get(gi).ok_or(Error::SizeMismatch {
                expected: gi + 1,
                got: gts.len(),
            })?;
            counts[gi] += 1;
            if let Some(p) = preds.get(pi) {
                quality[gi] = quality[gi].max(crate::geometry::rotated_iou(&p.bbox, &gt.bbox));
            }
        }
    }

    let mut angle_acc = vec![(0usize, 0.0f64, 0usize); spec.angle_bins.len()];
    let mut scale_acc = vec![(0usize, 0.0f64, 0usize); spec.scale_bins.len()];
    for (i, gt) in gts.iter().enumerate() {
        let angle_deg = gt.bbox.long_edge_angle_deg();
        let size = gt.bbox.size();
        let (Some(ai), Some(si)) = (spec.angle_bin(angle_deg), spec.scale_bin(size)) else {
            return Err(Error::BinMismatch {
                index: i,
                angle_deg,
                size,
            });
        };
        for acc in [&mut angle_acc[ai], &mut scale_acc[si]] {
            acc.0 += counts[i];
            acc.1 += quality[i];
            acc.2 += 1;
        }
    }

    let mut records = Vec::with_capacity(angle_acc.len() + scale_acc.len());
    for (axis, bins, acc) in [
        (Axis::Angle, &spec.angle_bins, &angle_acc),
        (Axis::Scale, &spec.scale_bins, &scale_acc),
    ] {
        for (bin, &(pos, qual, n)) in bins.iter().zip(acc.iter()) {
            let denom = n.max(1) as f64;
            records.push(BinRecord {
                bin_lo: bin[0],
                bin_hi: bin[1],
                axis,
                mean_pos: pos as f64 / denom,
                mean_quality: qual / denom,
                n_gt: n,
            });
        }
    }
    let angle = AxisSummary::from_records(records.iter().filter(|r| r.axis == Axis::Angle));
    let scale = AxisSummary::from_records(records.iter().filter(|r| r.axis == Axis::Scale));
    Ok(ImbalanceReport {
        records,
        angle,
        scale,
    })
}

/// Both assigners' reports over one synthetic population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub max_iou: ImbalanceReport,
    pub dcfl: ImbalanceReport,
}

/// Everything produced by one sweep, kept for inspection.
#[derive(Debug, Clone)]
pub struct SweepRun {
    pub gts: Vec<GtInstance>,
    pub priors: PriorSet,
    pub preds: Vec<Prediction>,
    pub dcfl: AssignmentResult,
    pub max_iou: AssignmentResult,
    pub report: SweepReport,
}

/// Builds the population and priors, runs both assigners against the
/// noiseless prediction oracle and reports their imbalance.
pub fn run_sweep(
    fpn: &FpnConfig,
    assigner: &AssignerConfig,
    population: &PopulationSpec,
    seed: u64,
) -> Result<SweepRun> {
    let gts = synth_population(population)?;
    let priors = build_prior_grid(fpn, (population.image_size[0], population.image_size[1]))?;
    let preds = prediction_oracle(&priors, &gts, 0.0, seed)?;
    let dcfl = assign(&priors, &gts, &preds, assigner)?;
    let max_iou = max_iou_assign(&priors, &gts, &MaxIouConfig::default())?;
    let report = SweepReport {
        max_iou: imbalance_report(&max_iou, &gts, &preds, population)?,
        dcfl: imbalance_report(&dcfl, &gts, &preds, population)?,
    };
    Ok(SweepRun {
        gts,
        priors,
        preds,
        dcfl,
        max_iou,
        report,
    })
}
