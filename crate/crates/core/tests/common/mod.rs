#![allow(dead_code)]

use nalgebra::{Matrix2, Rotation2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use oriented_assign::divergence::divergence;
use oriented_assign::{
    rotated_iou, AssignerConfig, AssignmentResult, Gaussian2, GtInstance, Label, Point, Prediction,
    PriorSet, RotatedBox,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_box(rng: &mut ChaCha8Rng, extent: f64, min_side: f64, max_side: f64) -> RotatedBox {
    RotatedBox::new(
        rng.random_range(-extent..extent),
        rng.random_range(-extent..extent),
        rng.random_range(min_side..max_side),
        rng.random_range(min_side..max_side),
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
    )
    .unwrap()
}

/// A random SPD Gaussian with eigenvalues in `[lo, hi]`.
pub fn random_gaussian(rng: &mut ChaCha8Rng, extent: f64, lo: f64, hi: f64) -> Gaussian2 {
    let r = Rotation2::new(rng.random_range(0.0..std::f64::consts::PI));
    let d = Matrix2::from_diagonal(&Vector2::new(
        rng.random_range(lo..hi),
        rng.random_range(lo..hi),
    ));
    let mut sigma = r.matrix() * d * r.matrix().transpose();
    let off = 0.5 * (sigma[(0, 1)] + sigma[(1, 0)]);
    sigma[(0, 1)] = off;
    sigma[(1, 0)] = off;
    let mu = Point::new(
        rng.random_range(-extent..extent),
        rng.random_range(-extent..extent),
    );
    Gaussian2::new(mu, sigma).unwrap()
}

/// Applies `x -> s R x + t` to a Gaussian.
pub fn similarity(g: &Gaussian2, scale: f64, angle: f64, t: Point) -> Gaussian2 {
    let r = *Rotation2::new(angle).matrix();
    let mut sigma = r * g.sigma * r.transpose() * (scale * scale);
    let off = 0.5 * (sigma[(0, 1)] + sigma[(1, 0)]);
    sigma[(0, 1)] = off;
    sigma[(1, 0)] = off;
    Gaussian2 {
        mu: r * g.mu * scale + t,
        sigma,
    }
}

/// Point-in-rectangle test in the box frame.
struct Frame {
    c: Point,
    cos: f64,
    sin: f64,
    hw: f64,
    hh: f64,
}

impl Frame {
    fn new(b: &RotatedBox) -> Self {
        let (sin, cos) = b.theta.sin_cos();
        Self {
            c: b.center(),
            cos,
            sin,
            hw: 0.5 * b.w,
            hh: 0.5 * b.h,
        }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.c.x, y - self.c.y);
        (self.cos * dx + self.sin * dy).abs() <= self.hw
            && (-self.sin * dx + self.cos * dy).abs() <= self.hh
    }
}

/// IoU estimated by uniform sampling over a square covering both boxes.
pub fn monte_carlo_iou(
    a: &RotatedBox,
    b: &RotatedBox,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let ra = 0.5 * a.w.hypot(a.h);
    let rb = 0.5 * b.w.hypot(b.h);
    let x0 = (a.cx - ra).min(b.cx - rb);
    let x1 = (a.cx + ra).max(b.cx + rb);
    let y0 = (a.cy - ra).min(b.cy - rb);
    let y1 = (a.cy + ra).max(b.cy + rb);
    let (fa, fb) = (Frame::new(a), Frame::new(b));
    let (mut both, mut either) = (0usize, 0usize);
    for _ in 0..samples {
        let x = rng.random_range(x0..x1);
        let y = rng.random_range(y0..y1);
        let (ia, ib) = (fa.contains(x, y), fb.contains(x, y));
        both += (ia && ib) as usize;
        either += (ia || ib) as usize;
    }
    if either == 0 {
        0.0
    } else {
        both as f64 / either as f64
    }
}

fn log_density(g: &Gaussian2, x: &Point) -> f64 {
    let s = g.sigma;
    let det = s[(0, 0)] * s[(1, 1)] - s[(0, 1)] * s[(1, 0)];
    let d = x - g.mu;
    let m = (s[(1, 1)] * d.x * d.x - 2.0 * s[(0, 1)] * d.x * d.y + s[(0, 0)] * d.y * d.y) / det;
    -0.5 * m - (2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln()
}

/// `KL(a || b)` by midpoint quadrature over `±8` standard deviations of `a`,
/// carried out in `a`'s whitened coordinates.
pub fn quadrature_kld(a: &Gaussian2, b: &Gaussian2, cells: usize) -> f64 {
    let eig = a.sigma.symmetric_eigen();
    let l = eig.eigenvectors * Matrix2::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    let h = 16.0 / cells as f64;
    let mut acc = 0.0;
    for i in 0..cells {
        let zx = -8.0 + (i as f64 + 0.5) * h;
        for j in 0..cells {
            let zy = -8.0 + (j as f64 + 0.5) * h;
            let z = Vector2::new(zx, zy);
            let phi = (-0.5 * z.norm_squared()).exp() / (2.0 * std::f64::consts::PI);
            let x = a.mu + l * z;
            acc += phi * (log_density(a, &x) - log_density(b, &x));
        }
    }
    acc * h * h
}

/// Exhaustive coarse-to-fine assignment: every selection is decided by
/// counting how many candidates outrank each prior.
pub fn reference_assign(
    priors: &PriorSet,
    gts: &[GtInstance],
    preds: &[Prediction],
    cfg: &AssignerConfig,
) -> AssignmentResult {
    let n = priors.len();
    let mut labels = vec![Label::Negative; n];
    if gts.is_empty() {
        return AssignmentResult {
            labels,
            per_gt: Vec::new(),
        };
    }
    let locs: Vec<Point> = priors.iter().map(|p| p.dynamic_loc).collect();
    let mut per_gt = Vec::new();
    let mut scores_by_gt = Vec::new();
    for gt in gts {
        let div: Vec<f64> = priors
            .iter()
            .map(|p| divergence(cfg.measurement, &p.gaussian, &gt.gaussian, cfg.alpha).unwrap())
            .collect();
        let cps = rank_select(&(0..n).collect::<Vec<_>>(), |i| div[i], cfg.k);

        let pt: Vec<f64> = (0..n)
            .map(|i| 0.5 * preds[i].cls_score + 0.5 * rotated_iou(&preds[i].bbox, &gt.bbox))
            .collect();
        let mps = rank_select(&cps, |i| -pt[i], cfg.q);

        let center = if mps.is_empty() {
            gt.center()
        } else {
            let mut sum = Point::zeros();
            for &i in &mps {
                sum += locs[i];
            }
            sum / mps.len() as f64
        };
        let score = |i: usize| {
            let m1 = gt.gaussian.mahalanobis_sq(&locs[i]).unwrap();
            let shifted = Gaussian2 {
                mu: center,
                sigma: gt.gaussian.sigma,
            };
            let m2 = shifted.mahalanobis_sq(&locs[i]).unwrap();
            cfg.w1 * (-0.5 * m1).exp() + (1.0 - cfg.w1) * (-0.5 * m2).exp()
        };
        let cutoff = (-cfg.g).exp();
        let fps: Vec<usize> = mps
            .iter()
            .copied()
            .filter(|&i| score(i) >= cutoff)
            .collect();
        scores_by_gt.push(fps.iter().map(|&i| (i, score(i))).collect::<Vec<_>>());
        per_gt.push(oriented_assign::assigner::GtAssignment {
            cps,
            mps,
            fps,
            semantic_center: [center.x, center.y],
        });
    }

    for (p, label) in labels.iter_mut().enumerate() {
        let claims: Vec<(usize, f64)> = scores_by_gt
            .iter()
            .enumerate()
            .filter_map(|(g, s)| s.iter().find(|(i, _)| *i == p).map(|&(_, v)| (g, v)))
            .collect();
        // Winner: nobody scores strictly higher, and nobody earlier scores equal.
        for &(g, v) in &claims {
            let beaten = claims.iter().any(|&(h, w)| w > v || (w == v && h < g));
            if !beaten {
                *label = Label::Positive(g);
            }
        }
    }
    AssignmentResult { labels, per_gt }
}

/// Members of `cands` whose rank by `(key, index)` is below `keep`, listed by
/// rank.
fn rank_select(cands: &[usize], key: impl Fn(usize) -> f64, keep: usize) -> Vec<usize> {
    let mut ranked: Vec<(usize, usize)> = cands
        .iter()
        .map(|&i| {
            let ki = key(i);
            let rank = cands
                .iter()
                .filter(|&&j| {
                    let kj = key(j);
                    kj < ki || (kj == ki && j < i)
                })
                .count();
            (rank, i)
        })
        .filter(|&(rank, _)| rank < keep)
        .collect();
    ranked.sort_unstable();
    ranked.into_iter().map(|(_, i)| i).collect()
}

pub struct Scene {
    pub priors: PriorSet,
    pub gts: Vec<GtInstance>,
    pub preds: Vec<Prediction>,
}

/// Random gts (possibly overlapping) inside `image`, optional random prior
/// offsets and noisy oracle predictions.
pub fn random_scene(
    seed: u64,
    fpn: &oriented_assign::FpnConfig,
    image: (u32, u32),
    max_gts: usize,
    max_side: f64,
) -> Scene {
    let mut r = rng(seed);
    let base = oriented_assign::build_prior_grid(fpn, image).unwrap();
    let priors = if r.random_bool(0.5) {
        let offsets: Vec<Vec<Point>> = (0..base.len())
            .map(|_| {
                (0..r.random_range(1..10))
                    .map(|_| Point::new(r.random_range(-1.5..1.5), r.random_range(-1.5..1.5)))
                    .collect()
            })
            .collect();
        base.with_offsets(&offsets).unwrap()
    } else {
        base
    };
    let n = r.random_range(1..=max_gts);
    let (w, h) = (f64::from(image.0), f64::from(image.1));
    let gts = (0..n)
        .map(|_| {
            let b = RotatedBox::new(
                r.random_range(0.0..w),
                r.random_range(0.0..h),
                r.random_range(2.0..max_side),
                r.random_range(2.0..max_side),
                r.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            )
            .unwrap();
            GtInstance::new(b, r.random_range(0..18)).unwrap()
        })
        .collect::<Vec<_>>();
    let noise = if r.random_bool(0.5) { 0.0 } else { 0.15 };
    let preds = oriented_assign::analysis::prediction_oracle(&priors, &gts, noise, seed).unwrap();
    Scene { priors, gts, preds }
}

pub fn small_grid() -> oriented_assign::FpnConfig {
    oriented_assign::FpnConfig {
        strides: vec![8],
        ..Default::default()
    }
}
