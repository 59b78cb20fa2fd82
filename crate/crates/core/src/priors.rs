//! Multi-level prior grids with dynamically updatable locations.
//!
//! Every feature point carries one square prior of side `prior_scale * stride`
//! at `theta = 0`. The prior's location starts at the feature point remapped to
//! the image and can be moved by a set of offsets; its Gaussian always follows
//! the dynamic location while the covariance stays fixed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{box_to_gaussian, Gaussian2, Point, RotatedBox};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FpnConfig {
    pub strides: Vec<u32>,
    pub prior_scale: f64,
    pub point_offset: f64,
}

impl Default for FpnConfig {
    fn default() -> Self {
        Self {
            strides: vec![8, 16, 32, 64, 128],
            prior_scale: 4.0,
            point_offset: 0.5,
        }
    }
}

impl FpnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.strides.is_empty() {
            return Err(Error::InvalidConfig("fpn.strides is empty".into()));
        }
        if self.strides.contains(&0) {
            return Err(Error::InvalidConfig("fpn.strides must be positive".into()));
        }
        if self.strides.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "fpn.strides must be strictly ascending".into(),
            ));
        }
        if !(self.prior_scale > 0.0) || !self.prior_scale.is_finite() {
            return Err(Error::InvalidConfig("fpn.prior_scale must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.point_offset) {
            return Err(Error::InvalidConfig(
                "fpn.point_offset must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }

    /// Side length of the square prior at `level`.
    pub fn prior_side(&self, level: usize) -> f64 {
        self.prior_scale * f64::from(self.strides[level])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    pub level: usize,
    pub stride: u32,
    pub static_loc: Point,
    pub dynamic_loc: Point,
    /// Square prior box centred on the dynamic location.
    pub bbox: RotatedBox,
    pub gaussian: Gaussian2,
}

impl Prior {
    fn new(level: usize, stride: u32, loc: Point, side: f64) -> Result<Self> {
        let bbox = RotatedBox::new(loc.x, loc.y, side, side, 0.0)?;
        let gaussian = box_to_gaussian(&bbox)?;
        Ok(Self {
            level,
            stride,
            static_loc: loc,
            dynamic_loc: loc,
            bbox,
            gaussian,
        })
    }

    /// Moves the prior by `stride * sum(offsets) / (2n)`, offsets in
    /// feature-grid units. Extents and covariance are untouched.
    pub fn apply_offsets(&self, offsets: &[Point]) -> Result<Prior> {
        if offsets.is_empty() {
            return Err(Error::EmptyOffsets);
        }
        let n = offsets.len() as f64;
        let sum: Point = offsets.iter().sum();
        let shift = sum * (f64::from(self.stride) / (2.0 * n));
        let loc = self.static_loc + shift;
        Ok(Prior {
            dynamic_loc: loc,
            bbox: RotatedBox {
                cx: loc.x,
                cy: loc.y,
                ..self.bbox
            },
            gaussian: Gaussian2 {
                mu: loc,
                sigma: self.gaussian.sigma,
            },
            ..self.clone()
        })
    }

    pub fn gaussian(&self) -> Gaussian2 {
        self.gaussian
    }
}

pub fn apply_offsets(prior: &Prior, offsets: &[Point]) -> Result<Prior> {
    prior.apply_offsets(offsets)
}

pub fn prior_gaussian(prior: &Prior) -> Gaussian2 {
    prior.gaussian()
}

/// All priors of an image, stored level-major then row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSet {
    priors: Vec<Prior>,
    level_starts: Vec<usize>,
    grid_dims: Vec<(usize, usize)>,
    image_size: (u32, u32),
}

impl PriorSet {
    pub fn len(&self) -> usize {
        self.priors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.priors.is_empty()
    }

    pub fn num_levels(&self) -> usize {
        self.grid_dims.len()
    }

    pub fn image_size(&self) -> (u32, u32) {
        self.image_size
    }

    pub fn priors(&self) -> &[Prior] {
        &self.priors
    }

    pub fn get(&self, index: usize) -> Option<&Prior> {
        self.priors.get(index)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Prior> {
        self.priors.iter()
    }

    /// Priors of one level.
    pub fn level(&self, level: usize) -> &[Prior] {
        let start = self.level_starts[level];
        let end = self
            .level_starts
            .get(level + 1)
            .copied()
            .unwrap_or(self.priors.len());
        &self.priors[start..end]
    }

    /// Flat index range of one level.
    pub fn level_range(&self, level: usize) -> std::ops::Range<usize> {
        let start = self.level_starts[level];
        let end = self
            .level_starts
            .get(level + 1)
            .copied()
            .unwrap_or(self.priors.len());
        start..end
    }

    /// `(columns, rows)` of a level's grid.
    pub fn grid_dims(&self, level: usize) -> (usize, usize) {
        self.grid_dims[level]
    }

    /// Returns a copy with per-prior offsets applied. `offsets[i]` moves prior
    /// `i`; empty entries leave the prior at its static location.
    pub fn with_offsets(&self, offsets: &[Vec<Point>]) -> Result<PriorSet> {
        if offsets.len() != self.priors.len() {
            return Err(Error::SizeMismatch {
                expected: self.priors.len(),
                got: offsets.len(),
            });
        }
        let priors = self
            .priors
            .iter()
            .zip(offsets)
            .map(|(p, o)| {
                if o.is_empty() {
                    Ok(p.clone())
                } else {
                    p.apply_offsets(o)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PriorSet {
            priors,
            ..self.clone()
        })
    }
}

pub fn build_prior_grid(config: &FpnConfig, image_size: (u32, u32)) -> Result<PriorSet> {
    let (width, height) = image_size;
    if width == 0 || height == 0 {
        return Err(Error::EmptyImage { width, height });
    }
    config.validate()?;

    let mut priors = Vec::new();
    let mut level_starts = Vec::with_capacity(config.strides.len());
    let mut grid_dims = Vec::with_capacity(config.strides.len());
    for (level, &stride) in config.strides.iter().enumerate() {
        let cols = width.div_ceil(stride) as usize;
        let rows = height.div_ceil(stride) as usize;
        let side = config.prior_side(level);
        let st = f64::from(stride);
        level_starts.push(priors.len());
        grid_dims.push((cols, rows));
        priors.reserve(cols * rows);
        for j in 0..rows {
            for i in 0..cols {
                let loc = Point::new(
                    (i as f64 + config.point_offset) * st,
                    (j as f64 + config.point_offset) * st,
                );
                priors.push(Prior::new(level, stride, loc, side)?);
            }
        }
    }
    Ok(PriorSet {
        priors,
        level_starts,
        grid_dims,
        image_size,
    })
}
