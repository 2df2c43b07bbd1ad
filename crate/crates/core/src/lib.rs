#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cli;
pub mod distortion;
pub mod error;
pub mod geometry;
pub mod json;
pub mod quartic;
pub mod rectify;
pub mod samples;
pub mod synth;
pub mod warp;

pub use error::{Error, PipelineError, Stage};
pub use geometry::{Camera, StereoRig};
pub use rectify::{assemble, RectifiedPair};
