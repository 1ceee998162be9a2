//! Shift-and-sum refocusing and tilted-focus rendering.
//!
//! View `(i, g)` is shifted by `a·(i, g)` before summation, so the central
//! view stays fixed and the step `a` (pixels per view) selects the focal
//! plane. Samples that fall outside a view contribute nothing; with
//! normalization each output pixel is divided by its number of contributions.

mod refocus;
mod scheimpflug;

pub use refocus::{refocus, refocus_micro, refocus_refined, shift_units, RefocusParams, Variant};
pub use scheimpflug::{scheimpflug, Direction, ScheimpflugParams};
