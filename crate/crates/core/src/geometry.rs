//! Rotated-rectangle primitives.
//!
//! A [`RotatedBox`] is a rectangle of extent `w` along direction `theta` and
//! extent `h` perpendicular to it, centred at `(cx, cy)`. Angles are radians,
//! positive counterclockwise in a y-up frame. Every box can be viewed either as
//! a convex [`Polygon`] (for exact IoU) or as a [`Gaussian2`] whose covariance
//! is `R(theta) diag(w^2/4, h^2/4) R(theta)^T`.

use std::cmp::Ordering;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = Vector2<f64>;

/// Boxes with an extent at or below this many pixels are rejected.
pub const MIN_EXTENT: f64 = 1e-6;

/// Covariances with a determinant at or below this are treated as singular.
pub const MIN_DET: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotatedBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub theta: f64,
}

impl RotatedBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64, theta: f64) -> Result<Self> {
        let b = Self {
            cx,
            cy,
            w,
            h,
            theta,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.cx, self.cy, self.w, self.h, self.theta]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.w <= MIN_EXTENT || self.h <= MIN_EXTENT {
            return Err(Error::DegenerateBox {
                w: self.w,
                h: self.h,
            });
        }
        Ok(())
    }

    pub fn center(&self) -> Point {
        Point::new(self.cx, self.cy)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Absolute size `sqrt(w * h)`.
    pub fn size(&self) -> f64 {
        self.area().sqrt()
    }

    /// Radius of the circumscribed circle.
    pub fn circumradius(&self) -> f64 {
        0.5 * self.w.hypot(self.h)
    }

    /// Direction of the longer side in degrees, in `[0, 180)`. Independent of
    /// the `(w, h, theta)` representation chosen for the box.
    pub fn long_edge_angle_deg(&self) -> f64 {
        let theta = if self.w >= self.h {
            self.theta
        } else {
            self.theta + FRAC_PI_2
        };
        let deg = theta.to_degrees().rem_euclid(180.0);
        if deg >= 180.0 {
            0.0
        } else {
            deg
        }
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            cx: self.cx + dx,
            cy: self.cy + dy,
            ..*self
        }
    }

    pub fn canonicalize(&self) -> Result<Self> {
        canonicalize(self)
    }

    pub fn vertices(&self) -> Polygon {
        box_vertices(self)
    }

    pub fn to_gaussian(&self) -> Result<Gaussian2> {
        box_to_gaussian(self)
    }

    fn total_cmp(&self, other: &Self) -> Ordering {
        self.cx
            .total_cmp(&other.cx)
            .then(self.cy.total_cmp(&other.cy))
            .then(self.w.total_cmp(&other.w))
            .then(self.h.total_cmp(&other.h))
            .then(self.theta.total_cmp(&other.theta))
    }
}

/// A 2-D Gaussian with mean `mu` and covariance `sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian2 {
    pub mu: Point,
    pub sigma: Matrix2<f64>,
}

impl Gaussian2 {
    /// Builds a Gaussian, checking that `sigma` is symmetric positive definite.
    pub fn new(mu: Point, sigma: Matrix2<f64>) -> Result<Self> {
        let scale = sigma[(0, 0)].abs().max(sigma[(1, 1)].abs());
        if (sigma[(0, 1)] - sigma[(1, 0)]).abs() > 1e-9 * scale {
            return Err(Error::AsymmetricCovariance);
        }
        let det = sigma.determinant();
        if !(det > MIN_DET) || !(sigma.trace() > 0.0) {
            return Err(Error::SingularCovariance { det });
        }
        Ok(Self { mu, sigma })
    }

    /// Returns `sigma^-1`, rejecting near-singular covariances.
    pub fn precision(&self) -> Result<Matrix2<f64>> {
        invert_spd(&self.sigma)
    }

    /// Squared Mahalanobis distance of `p` from the mean.
    pub fn mahalanobis_sq(&self, p: &Point) -> Result<f64> {
        let d = p - self.mu;
        Ok(d.dot(&(self.precision()? * d)))
    }
}

pub(crate) fn invert_spd(m: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    if !(det > MIN_DET) {
        return Err(Error::SingularCovariance { det });
    }
    Ok(Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det)
}

/// An ordered vertex loop. Polygons produced here are convex and
/// counterclockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Self {
        Self { vertices }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Shoelace area; positive for counterclockwise loops.
    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return 0.0;
        }
        let mut acc = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            acc += a.x * b.y - b.x * a.y;
        }
        0.5 * acc
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn centroid(&self) -> Point {
        let n = self.vertices.len().max(1) as f64;
        self.vertices.iter().sum::<Point>() / n
    }

    /// Point-in-convex-polygon test for a counterclockwise loop (boundary inclusive).
    pub fn contains(&self, p: &Point) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            cross(&(b - a), &(p - a)) >= 0.0
        })
    }
}

#[inline]
pub(crate) fn cross(a: &Point, b: &Point) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Brings `theta` into `[-pi/4, pi/4)`, swapping `w` and `h` for every odd
/// quarter turn removed. The result describes the same point set and lies in
/// the `[-pi/2, pi/2)` canonical range.
pub fn canonicalize(b: &RotatedBox) -> Result<RotatedBox> {
    b.validate()?;
    if (-FRAC_PI_4..FRAC_PI_4).contains(&b.theta) {
        return Ok(*b);
    }
    let mut quarters = ((b.theta + FRAC_PI_4) / FRAC_PI_2).floor();
    let mut theta = b.theta - quarters * FRAC_PI_2;
    if theta >= FRAC_PI_4 {
        theta -= FRAC_PI_2;
        quarters += 1.0;
    } else if theta < -FRAC_PI_4 {
        theta += FRAC_PI_2;
        quarters -= 1.0;
    }
    let (w, h) = if quarters.rem_euclid(2.0) == 1.0 {
        (b.h, b.w)
    } else {
        (b.w, b.h)
    };
    Ok(RotatedBox {
        cx: b.cx,
        cy: b.cy,
        w,
        h,
        theta,
    })
}

/// Corners in counterclockwise order, starting from the `(+w/2, +h/2)` corner.
pub fn box_vertices(b: &RotatedBox) -> Polygon {
    let (s, c) = b.theta.sin_cos();
    let hw = 0.5 * b.w;
    let hh = 0.5 * b.h;
    let corners = [(hw, hh), (-hw, hh), (-hw, -hh), (hw, -hh)];
    Polygon::new(
        corners
            .iter()
            .map(|&(dx, dy)| Point::new(b.cx + c * dx - s * dy, b.cy + s * dx + c * dy))
            .collect(),
    )
}

pub fn box_to_gaussian(b: &RotatedBox) -> Result<Gaussian2> {
    b.validate()?;
    let (s, c) = b.theta.sin_cos();
    let a = 0.25 * b.w * b.w;
    let d = 0.25 * b.h * b.h;
    let off = c * s * (a - d);
    let sigma = Matrix2::new(c * c * a + s * s * d, off, off, s * s * a + c * c * d);
    Gaussian2::new(b.center(), sigma)
}

/// Clips convex `subject` against convex counterclockwise `clip`.
fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut output = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let edge = clip[(i + 1) % n] - a;
        let input = std::mem::take(&mut output);
        let m = input.len();
        for j in 0..m {
            let cur = input[j];
            let prev = input[(j + m - 1) % m];
            let d_cur = cross(&edge, &(cur - a));
            let d_prev = cross(&edge, &(prev - a));
            if d_cur >= 0.0 {
                if d_prev < 0.0 {
                    output.push(prev + (cur - prev) * (d_prev / (d_prev - d_cur)));
                }
                output.push(cur);
            } else if d_prev >= 0.0 {
                output.push(prev + (cur - prev) * (d_prev / (d_prev - d_cur)));
            }
        }
    }
    output
}

/// Area of the intersection of two rotated rectangles.
pub fn intersection_area(a: &RotatedBox, b: &RotatedBox) -> f64 {
    let reach = a.circumradius() + b.circumradius();
    if (a.center() - b.center()).norm_squared() >= reach * reach {
        return 0.0;
    }
    let pa = box_vertices(a);
    let pb = box_vertices(b);
    let clipped = clip_convex(&pa.vertices, &pb.vertices);
    if clipped.len() < 3 {
        return 0.0;
    }
    Polygon::new(clipped).area()
}

/// Intersection-over-union of two rotated rectangles, in `[0, 1]`.
pub fn rotated_iou(a: &RotatedBox, b: &RotatedBox) -> f64 {
    // Fixed argument order makes the result bitwise symmetric.
    let (a, b) = match a.total_cmp(b) {
        Ordering::Greater => (b, a),
        _ => (a, b),
    };
    if a == b {
        return 1.0;
    }
    let inter = intersection_area(a, b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Counterclockwise convex hull (Andrew's monotone chain), collinear points dropped.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(pts.len() * 2);
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for p in iter {
            while hull.len() >= start + 2 {
                let a = hull[hull.len() - 2];
                let b = hull[hull.len() - 1];
                if cross(&(b - a), &(p - a)) <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(*p);
        }
        hull.pop();
    }
    hull
}

/// Smallest-area rectangle enclosing `points`, by rotating calipers over the
/// convex hull edges. The result is canonicalized.
pub fn min_area_rect(points: &[Point]) -> Result<RotatedBox> {
    let hull = convex_hull(points);
    if hull.len() < 3 {
        return Err(Error::CollinearInput);
    }
    let extent = hull
        .iter()
        .flat_map(|p| [p.x.abs(), p.y.abs()])
        .fold(1.0_f64, f64::max);
    if Polygon::new(hull.clone()).area() <= 1e-12 * extent * extent {
        return Err(Error::CollinearInput);
    }

    let n = hull.len();
    let mut best: Option<(f64, RotatedBox)> = None;
    for i in 0..n {
        let edge = hull[(i + 1) % n] - hull[i];
        let u = edge / edge.norm();
        let v = Point::new(-u.y, u.x);
        let (mut u_lo, mut u_hi, mut v_lo, mut v_hi) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in &hull {
            let pu = p.dot(&u);
            let pv = p.dot(&v);
            u_lo = u_lo.min(pu);
            u_hi = u_hi.max(pu);
            v_lo = v_lo.min(pv);
            v_hi = v_hi.max(pv);
        }
        let area = (u_hi - u_lo) * (v_hi - v_lo);
        if best.as_ref().is_none_or(|(a, _)| area < *a) {
            let c = u * (0.5 * (u_lo + u_hi)) + v * (0.5 * (v_lo + v_hi));
            let rect = RotatedBox {
                cx: c.x,
                cy: c.y,
                w: u_hi - u_lo,
                h: v_hi - v_lo,
                theta: u.y.atan2(u.x),
            };
            best = Some((area, rect));
        }
    }
    let (_, rect) = best.ok_or(Error::CollinearInput)?;
    rect.canonicalize().map_err(|_| Error::CollinearInput)
}
