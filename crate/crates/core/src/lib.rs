//! Semantic Gaussian-splat mapping fused with a LiDAR distance field for
//! off-road navigation, plus a small simulated world to drive it.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod esdf;
pub mod geometry;
pub mod harness;
pub mod planner;
pub mod semantics;
pub mod splat;
pub mod worldsim;

pub use error::{Error, Result};
