//! The full decode chain from a raw capture to an equalized view stack.

use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::align::{apply_rotation, devignette_divide, devignette_fit, resample_global, resample_local};
use crate::calibrate::{fit_grid, CalibModel, Packing};
use crate::error::{Error, Result};
use crate::extract::{align_dynamic_range, correct_hex_artifacts, equalize_colors_in_place, RangeAlignment, Scheme};
use crate::image::Image2D;
use crate::lightfield::{lf_to_views, LightField4D, ViewStack};

/// How the white image is used to flatten the raw capture.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Devignette {
    None,
    /// Pixel-wise division by the white image.
    Divide,
    /// Division by per-lens polynomial fits of the white image.
    #[default]
    Fit,
}

impl FromStr for Devignette {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "divide" => Ok(Self::Divide),
            "fit" => Ok(Self::Fit),
            other => Err(Error::InvalidInput(format!("unknown devignette mode {other:?}; expected none, divide or fit"))),
        }
    }
}

/// Lens-array resampling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Resample {
    /// Through the fitted homography.
    Global,
    /// Around each fitted centroid at native scale.
    #[default]
    Local,
}

impl FromStr for Resample {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(Self::Global),
            "local" => Ok(Self::Local),
            other => Err(Error::InvalidInput(format!("unknown resample mode {other:?}; expected global or local"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeOptions {
    pub devignette: Devignette,
    /// Polynomial order of the per-lens vignetting fit (2 or 3).
    pub vignette_order: usize,
    pub rotate: bool,
    pub resample: Resample,
    pub hexfix: bool,
    /// Fringe threshold relative to the view range.
    pub tau: f64,
    #[serde(with = "scheme_serde")]
    pub coloreq: Scheme,
    pub range_align: bool,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        Self {
            devignette: Devignette::Fit,
            vignette_order: 2,
            rotate: true,
            resample: Resample::Local,
            hexfix: true,
            tau: crate::extract::DEFAULT_TAU,
            coloreq: Scheme::HmMklHm,
            range_align: true,
        }
    }
}

mod scheme_serde {
    use super::Scheme;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: &Scheme, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&s.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Scheme, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Products of [`decode`].
#[derive(Clone, Debug)]
pub struct Decoded {
    pub field: LightField4D,
    pub views: ViewStack,
    /// Calibration after rotation compensation.
    pub calib: CalibModel,
    pub fringe_pixels: usize,
    pub range: Option<RangeAlignment>,
    /// `(stage, seconds)` in execution order.
    pub timings: Vec<(String, f64)>,
}

struct Timer(Vec<(String, f64)>, Instant);

impl Timer {
    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.0.push((stage.to_string(), (now - self.1).as_secs_f64()));
        self.1 = now;
    }
}

/// Flattens, aligns and resamples `raw`, then extracts and equalizes the
/// sub-aperture views. `white` is required unless devignetting is off.
pub fn decode(raw: &Image2D, white: Option<&Image2D>, calib: &CalibModel, opts: &DecodeOptions) -> Result<Decoded> {
    calib.validate()?;
    let mut timer = Timer(Vec::new(), Instant::now());
    let flat = match (opts.devignette, white) {
        (Devignette::None, _) => raw.clone(),
        (_, None) => return Err(Error::InvalidInput("devignetting needs a white image".into())),
        (Devignette::Divide, Some(w)) => devignette_divide(raw, w)?,
        (Devignette::Fit, Some(w)) => devignette_fit(raw, w, calib, opts.vignette_order)?.0,
    };
    timer.lap("devignette");

    let (aligned, calib) = if opts.rotate && calib.rotation_rad != 0.0 {
        let (img, grid) = apply_rotation(&flat, &calib.fitted_grid(), calib.rotation_rad)?;
        let (model, _) = fit_grid(&grid, calib.pitch, 0.0)?;
        (img, model)
    } else {
        (flat, calib.clone())
    };
    timer.lap("rotate");

    let field = match opts.resample {
        Resample::Global => resample_global(&aligned, &calib)?,
        Resample::Local => resample_local(&aligned, &calib)?,
    };
    timer.lap("resample");

    let mut views = lf_to_views(&field);
    let mut fringe_pixels = 0;
    if opts.hexfix && calib.packing == Packing::Hexagonal {
        let (fixed, masks) = correct_hex_artifacts(&views, calib.hex_row_phase, opts.tau);
        fringe_pixels = masks.iter().map(|m| m.count()).sum();
        views = fixed;
    }
    timer.lap("hexfix");

    equalize_colors_in_place(&mut views, opts.coloreq)?;
    timer.lap("coloreq");

    let range = if opts.range_align {
        let (v, r) = align_dynamic_range(&views);
        views = v;
        Some(r)
    } else {
        None
    };
    timer.lap("range-align");

    Ok(Decoded {
        field,
        views,
        calib,
        fringe_pixels,
        range,
        timings: timer.0,
    })
}
