//! Threshold measurements, ellipsoid fits and smooth metric fields.

pub mod ellipsoid;
pub mod field;
pub mod measurement;

pub use ellipsoid::{fit_ellipsoid, fit_measurements, Ellipsoid};
pub use field::{
    build_metric_field, restrict_to_lightness_axis, volume_ratio, volume_ratio_of, AxisMetric,
    FieldConfig, Interpolation, Lattice, MetricField,
};
pub use measurement::{
    default_directions, parse_measurements, write_csv_header, write_csv_rows, MeasurementRecord, MeasurementSet,
};
