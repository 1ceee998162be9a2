//! Colour equalization of a view stack toward its central view, dynamic-range
//! alignment and sRGB transfer functions.

use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filter::percentile_sorted;
use crate::image::Image2D;
use crate::lightfield::ViewStack;

use super::histogram::{hist_match, ChannelHistogram, BINS};
use super::transfer::{apply_linear_in_place, mkl_matrix, ColorStats};

/// Colour-equalization scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Leave views untouched.
    None,
    /// Channel-wise histogram matching.
    Hm,
    /// Monge–Kantorovich linear transfer.
    Mkl,
    /// Histogram matching, then MKL, then histogram matching again.
    #[default]
    HmMklHm,
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Self::None),
            "hm" => Ok(Self::Hm),
            "mkl" => Ok(Self::Mkl),
            "hm-mkl-hm" | "hmmklhm" => Ok(Self::HmMklHm),
            other => Err(Error::InvalidInput(format!(
                "unknown colour scheme {other:?}; expected none, hm, mkl or hm-mkl-hm"
            ))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Hm => "hm",
            Self::Mkl => "mkl",
            Self::HmMklHm => "hm-mkl-hm",
        })
    }
}

struct Target {
    hists: Vec<ChannelHistogram>,
    stats: Option<ColorStats>,
}

fn hm_in_place(view: &mut Image2D, target: &Target) {
    for (ch, hist) in target.hists.iter().enumerate() {
        let matched = hist_match(view.plane(ch), hist);
        view.plane_mut(ch).copy_from_slice(&matched.values);
    }
}

fn mkl_in_place(view: &mut Image2D, target: &Target) -> Result<()> {
    let Some(tgt) = target.stats.as_ref() else {
        return Ok(());
    };
    let src = ColorStats::from_image(view)?;
    apply_linear_in_place(view, &mkl_matrix(&src, tgt), &src.mean, &tgt.mean)
}

/// Equalizes every view toward the central view; the central view itself is
/// copied. MKL steps are skipped for single-channel stacks.
pub fn equalize_colors(vs: &ViewStack, scheme: Scheme) -> Result<ViewStack> {
    let mut out = vs.clone();
    equalize_colors_in_place(&mut out, scheme)?;
    Ok(out)
}

/// In-place form of [`equalize_colors`]; only the central view is copied.
pub fn equalize_colors_in_place(vs: &mut ViewStack, scheme: Scheme) -> Result<()> {
    if scheme == Scheme::None {
        return Ok(());
    }
    let central = vs.central().clone();
    let target = Target {
        hists: (0..central.channels())
            .map(|ch| ChannelHistogram::from_values(central.plane(ch), BINS))
            .collect(),
        stats: if central.channels() >= 3 {
            Some(ColorStats::from_image(&central)?)
        } else {
            None
        },
    };
    let centre = vs.center() * vs.pitch() + vs.center();
    vs.views_mut()
        .par_iter_mut()
        .enumerate()
        .filter(|(n, _)| *n != centre)
        .try_for_each(|(_, view)| -> Result<()> {
            match scheme {
                Scheme::None => {}
                Scheme::Hm => hm_in_place(view, &target),
                Scheme::Mkl => mkl_in_place(view, &target)?,
                Scheme::HmMklHm => {
                    hm_in_place(view, &target);
                    mkl_in_place(view, &target)?;
                    hm_in_place(view, &target);
                }
            }
            Ok(())
        })
}

/// Lower and upper percentiles used by [`align_dynamic_range`].
pub const RANGE_PERCENTILES: (f64, f64) = (0.005, 99.9);

/// Outcome of [`align_dynamic_range`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RangeAlignment {
    pub lo: f64,
    pub hi: f64,
    /// The central view was flat; the stack was left unchanged.
    pub degenerate: bool,
}

/// Maps the central view's pooled-channel percentile range
/// [`RANGE_PERCENTILES`] to `[0, 1]` with one affine map applied to all views.
/// Values outside the range are not clamped.
pub fn align_dynamic_range(vs: &ViewStack) -> (ViewStack, RangeAlignment) {
    let mut pooled = vs.central().data().to_vec();
    pooled.sort_unstable_by(f64::total_cmp);
    let lo = percentile_sorted(&pooled, RANGE_PERCENTILES.0);
    let hi = percentile_sorted(&pooled, RANGE_PERCENTILES.1);
    if !(hi > lo) {
        return (
            vs.clone(),
            RangeAlignment {
                lo,
                hi,
                degenerate: true,
            },
        );
    }
    let scale = 1.0 / (hi - lo);
    let views = vs.views().par_iter().map(|v| v.map(|x| (x - lo) * scale)).collect();
    (
        ViewStack::from_views(vs.pitch(), views).expect("same shape as input"),
        RangeAlignment {
            lo,
            hi,
            degenerate: false,
        },
    )
}

/// sRGB encoding of a linear value, clamped to `[0, 1]` first.
pub fn srgb_encode(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    if x <= 0.003_130_8 {
        12.92 * x
    } else {
        1.055 * x.powf(1.0 / 2.4) - 0.055
    }
}

/// Inverse of [`srgb_encode`] on `[0, 1]`.
pub fn srgb_decode(y: f64) -> f64 {
    let y = y.clamp(0.0, 1.0);
    if y <= 0.040_45 {
        y / 12.92
    } else {
        ((y + 0.055) / 1.055).powf(2.4)
    }
}
