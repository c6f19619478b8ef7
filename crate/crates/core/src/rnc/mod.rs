//! Riemann normal coordinate charts: geodesic fans, cell location and
//! secondary patches.

pub mod chart;
pub mod fan;
pub mod mesh;

pub use chart::{
    build_chart_2d, build_chart_3d, default_frame_3d, default_reference_2d, gamut_region, gamut_slice,
    grid_point_ratio, ChartLocation, FanId, NormalChart, NormalCoords, Patch, DEFAULT_ANGLES,
    DEFAULT_AZIMUTH, DEFAULT_ORIGIN_3D, DEFAULT_POLAR,
};
pub use fan::{orthonormal_frame, CellKey, ChartConfig, Fan, Layout, Ray, RegionFn};
pub use mesh::{BarycentricLocation, SimplexMesh};
