use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image2D;
use crate::lightfield::ViewStack;

use super::refocus::{refocus, shift_units, RefocusParams};

/// Axis along which the focus scale varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// Left to right.
    #[default]
    Horizontal,
    /// Top to bottom.
    Vertical,
    /// Top-left to bottom-right.
    DiagMain,
    /// Top-right to bottom-left.
    DiagAnti,
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "horizontal" | "h" => Ok(Self::Horizontal),
            "vertical" | "v" => Ok(Self::Vertical),
            "diag-main" | "diagonal" => Ok(Self::DiagMain),
            "diag-anti" => Ok(Self::DiagAnti),
            other => Err(Error::InvalidInput(format!(
                "unknown direction {other:?}; expected horizontal, vertical, diag-main or diag-anti"
            ))),
        }
    }
}

impl Direction {
    /// Position in `[0, 1]` of pixel `(k, l)` along the sweep.
    fn position(self, k: usize, l: usize, height: usize, width: usize) -> f64 {
        let ty = if height > 1 { k as f64 / (height - 1) as f64 } else { 0.0 };
        let tx = if width > 1 { l as f64 / (width - 1) as f64 } else { 0.0 };
        match self {
            Self::Horizontal => tx,
            Self::Vertical => ty,
            Self::DiagMain => 0.5 * (tx + ty),
            Self::DiagAnti => 0.5 * (1.0 - tx + ty),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheimpflugParams {
    pub a_start: f64,
    pub a_stop: f64,
    pub direction: Direction,
    /// Blend the two nearest stack slices linearly instead of taking the
    /// nearest one.
    pub blend: bool,
}

impl ScheimpflugParams {
    pub fn new(a_start: f64, a_stop: f64, direction: Direction) -> Self {
        Self {
            a_start,
            a_stop,
            direction,
            blend: false,
        }
    }
}

/// Renders a tilted focal plane.
///
/// A refocus stack is computed from `a_start` to `a_stop` in steps of
/// `1 / refine_factor`. Each output pixel takes its focus scale by linear
/// interpolation along `direction` and reads the slice nearest to it.
pub fn scheimpflug(vs: &ViewStack, sp: &ScheimpflugParams, refine: &RefocusParams) -> Result<Image2D> {
    if sp.a_start == sp.a_stop {
        return Err(Error::InvalidInput("a_start and a_stop must differ".into()));
    }
    let r = refine.refine_factor.max(1);
    let start = shift_units(sp.a_start, r)?;
    let stop = shift_units(sp.a_stop, r)?;
    let sign = if stop >= start { 1 } else { -1 };
    let slices: Vec<Image2D> = (0..=(stop - start).unsigned_abs())
        .into_par_iter()
        .map(|n| {
            let p = RefocusParams {
                a: (start + sign * n as isize) as f64 / r as f64,
                refine_factor: r,
                ..*refine
            };
            refocus(vs, &p)
        })
        .collect::<Result<_>>()?;

    let last = slices.len() - 1;
    let (kk, ll) = slices[0].dims();
    let span = (stop - start).unsigned_abs() as f64;
    Ok(Image2D::from_fn(kk, ll, slices[0].channels(), |k, l, ch| {
        let pos = sp.direction.position(k, l, kk, ll) * span;
        if sp.blend {
            let lo = (pos.floor() as usize).min(last);
            let hi = (lo + 1).min(last);
            let f = pos - lo as f64;
            (1.0 - f) * slices[lo].get(k, l, ch) + f * slices[hi].get(k, l, ch)
        } else {
            slices[(pos.round() as usize).min(last)].get(k, l, ch)
        }
    })
    .expect("stack slice shape"))
}
