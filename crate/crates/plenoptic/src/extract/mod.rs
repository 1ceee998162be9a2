//! Sub-aperture view processing: hexagonal fringe repair, histogram and
//! Gaussian colour transfer, view-stack equalization and range alignment.

mod equalize;
mod hexfix;
mod histogram;
mod transfer;

pub use equalize::{
    align_dynamic_range, equalize_colors, equalize_colors_in_place, srgb_decode, srgb_encode, RangeAlignment, Scheme,
    RANGE_PERCENTILES,
};
pub use hexfix::{correct_hex_artifacts, fix_view, FringeMask, DEFAULT_TAU, MIN_RUN};
pub use histogram::{hist_match, ChannelHistogram, Matched, BINS};
pub use transfer::{analytic_matrix, analytic_transfer, apply_linear, mkl_matrix, mkl_transfer, ColorStats};
