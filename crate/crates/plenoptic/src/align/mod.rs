//! Sensor-level correction and resampling of a raw capture into a
//! [`LightField4D`](crate::lightfield::LightField4D).

mod bayer;
mod resample;
mod rotate;
mod vignette;

pub use bayer::{
    demosaic, mosaic, remove_cfa_outliers, BayerImage, BayerPattern, Demosaic, GradientCorrected,
    OutlierReport,
};
pub use resample::{hex_to_rect, resample_global, resample_local, stretched_cols};
pub use rotate::{apply_rotation, estimate_rotation, rotate_point};
pub use vignette::{devignette_divide, devignette_fit, basis_terms, VignetteFit, DIVISION_FLOOR};
