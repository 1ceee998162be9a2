//! Decoding of raw plenoptic captures into calibrated 4-D light fields,
//! sub-aperture views and refocused renderings.
//!
//! The pipeline stages live in [`calibrate`], [`align`], [`extract`] and
//! [`render`]; [`metrics`] scores their output and [`synth`] produces
//! ground-truth inputs for every stage.

pub mod align;
pub mod calibrate;
pub mod extract;
pub mod error;
pub mod filter;
pub mod image;
pub mod lightfield;
pub mod metrics;
pub mod pipeline;
pub mod render;
pub mod synth;

pub use error::{Error, Result};
pub use image::Image2D;
pub use lightfield::{lf_to_views, views_to_lf, LightField4D, ViewStack};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Book chapters, compiled so their snippets run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/light-fields.md")]
    mod light_fields {}
    #[doc = include_str!("../../../book/src/calibration.md")]
    mod calibration {}
    #[doc = include_str!("../../../book/src/decoding.md")]
    mod decoding {}
    #[doc = include_str!("../../../book/src/colour.md")]
    mod colour {}
    #[doc = include_str!("../../../book/src/refocusing.md")]
    mod refocusing {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
}
