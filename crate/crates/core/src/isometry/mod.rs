//! Maps between observers' color spaces built from matching normal
//! coordinates, and the one-dimensional lightness isometry.

pub mod lightness;
pub mod map;

pub use lightness::{build_lightness_map, LightnessMap};
pub use map::{compose_isometry, isometry_residual, Direction, IsometryMap, Mapped, JACOBIAN_STEP};
