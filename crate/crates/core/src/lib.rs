#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod archive;
pub mod cli;
pub mod colorspace;
pub mod error;
pub mod geometry;
pub mod isometry;
pub mod linalg;
pub mod metric;
pub mod pipeline;
pub mod rnc;
pub mod service;
pub mod synth;
pub mod thresholds;

pub use error::{Error, Result};
