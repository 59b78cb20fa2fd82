//! Coarse-to-fine label assignment for oriented tiny objects.
//!
//! Boxes and priors are modelled as 2-D Gaussians; priors are ranked against
//! each ground truth by a closed-form divergence, re-ranked by prediction
//! quality and finally filtered by a two-component instance mixture. A static
//! MaxIoU assigner and an imbalance harness are included for comparison.

// `!(x > 0.0)` guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod assigner;
pub mod divergence;
pub mod error;
pub mod geometry;
pub mod io;
pub mod priors;

pub use assigner::{
    assign, max_iou_assign, AssignerConfig, AssignmentResult, GtInstance, Label, MaxIouConfig,
    Prediction, Strategy,
};
pub use divergence::{gjsd, gwd, kld, Alpha, DivergenceKind};
pub use error::{Error, Result};
pub use geometry::{box_to_gaussian, rotated_iou, Gaussian2, Point, Polygon, RotatedBox};
pub use priors::{build_prior_grid, FpnConfig, Prior, PriorSet};
