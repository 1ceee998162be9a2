//! Blob-response maxima and their sub-pixel refinement.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{dog, percentile};
use crate::image::Image2D;

use super::CentroidSet;

/// Maxima weaker than this fraction of the strongest one are discarded.
const MIN_RELATIVE_RESPONSE: f64 = 0.2;

/// Blob response `I_c` of a white image at scale `sigma`; micro-image centres
/// are maxima.
pub fn blob_response(white: &Image2D, sigma: f64) -> Image2D {
    let white = white.luma();
    let (k, l) = white.dims();
    Image2D::from_vec(k, l, 1, dog(white.plane(0), k, l, sigma)).expect("same shape as input")
}

/// Integer-position maxima of the blob response at `sigma_star` under 3×3
/// non-maximum suppression.
pub fn extract_centroids(white: &Image2D, sigma_star: f64) -> Result<CentroidSet> {
    if !(sigma_star > 0.0) {
        return Err(Error::InvalidInput(format!("sigma_star must be positive, got {sigma_star}")));
    }
    maxima(&blob_response(white, sigma_star))
}

/// Strict 3×3 local maxima of a response image that exceed a small fraction
/// of its global maximum.
pub(crate) fn maxima(response: &Image2D) -> Result<CentroidSet> {
    let (kk, ll) = response.dims();
    let r = response.plane(0);
    let top = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(top > 0.0) || kk < 3 || ll < 3 {
        return Err(Error::NoCentroids);
    }
    let floor = MIN_RELATIVE_RESPONSE * top;
    let mut points = Vec::new();
    for k in 1..kk - 1 {
        for l in 1..ll - 1 {
            let v = r[k * ll + l];
            if v <= floor {
                continue;
            }
            let mut is_max = true;
            'scan: for dk in 0..3 {
                for dl in 0..3 {
                    if (dk, dl) == (1, 1) {
                        continue;
                    }
                    let n = r[(k + dk - 1) * ll + (l + dl - 1)];
                    // ties resolve toward the earlier pixel in raster order
                    let earlier = dk < 1 || (dk == 1 && dl < 1);
                    if n > v || (earlier && n == v) {
                        is_max = false;
                        break 'scan;
                    }
                }
            }
            if is_max {
                points.push([k as f64, l as f64]);
            }
        }
    }
    if points.is_empty() {
        return Err(Error::NoCentroids);
    }
    Ok(CentroidSet::new(points))
}

/// Sub-pixel refinement scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefineMode {
    /// Response-weighted mean over the micro-image region.
    Peak,
    /// Unweighted mean of region pixels at or above the region's 75th percentile.
    #[default]
    Area,
}

impl FromStr for RefineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "peak" => Ok(Self::Peak),
            "area" => Ok(Self::Area),
            other => Err(Error::InvalidInput(format!("unknown refine mode {other:?}; expected peak or area"))),
        }
    }
}

/// Refined centroids plus the indices of seeds that could not be refined.
#[derive(Clone, Debug)]
pub struct Refined {
    pub centroids: CentroidSet,
    pub fallbacks: Vec<usize>,
}

/// Maximum number of region re-centring passes per seed.
const REFINE_PASSES: usize = 10;
/// Re-centring stops once the estimate moves less than this many pixels.
const REFINE_STEP: f64 = 1e-3;

/// One refinement pass over the disc of radius `pitch / 2` around `centre`.
fn refine_once(
    r: &[f64],
    dims: (usize, usize),
    centre: [f64; 2],
    pitch: usize,
    mode: RefineMode,
    values: &mut Vec<f64>,
) -> Option<[f64; 2]> {
    let (kk, ll) = dims;
    let radius = pitch as f64 / 2.0;
    let k0 = (centre[0] - radius).ceil().max(0.0) as usize;
    let k1 = ((centre[0] + radius).floor().max(0.0) as usize).min(kk - 1);
    let l0 = (centre[1] - radius).ceil().max(0.0) as usize;
    let l1 = ((centre[1] + radius).floor().max(0.0) as usize).min(ll - 1);
    let inside = |k: usize, l: usize| {
        (k as f64 - centre[0]).powi(2) + (l as f64 - centre[1]).powi(2) <= radius * radius
    };
    let (mut sw, mut sk, mut sl) = (0.0, 0.0, 0.0);
    let mut accumulate = |w: f64, k: usize, l: usize| {
        sw += w;
        sk += w * k as f64;
        sl += w * l as f64;
    };
    match mode {
        RefineMode::Peak => {
            for k in k0..=k1 {
                for l in (l0..=l1).filter(|&l| inside(k, l)) {
                    accumulate(r[k * ll + l].max(0.0), k, l);
                }
            }
        }
        RefineMode::Area => {
            values.clear();
            for k in k0..=k1 {
                values.extend((l0..=l1).filter(|&l| inside(k, l)).map(|l| r[k * ll + l]));
            }
            if values.is_empty() {
                return None;
            }
            let threshold = percentile(values, 75.0);
            for k in k0..=k1 {
                for l in (l0..=l1).filter(|&l| inside(k, l)) {
                    if r[k * ll + l] >= threshold {
                        accumulate(1.0, k, l);
                    }
                }
            }
        }
    }
    (sw > 0.0).then(|| [sk / sw, sl / sw])
}

/// Refines each seed to a sub-pixel centroid of the blob response.
///
/// The region is the disc of diameter `pitch` around the current estimate,
/// clipped at the image border; the disc keeps parts of neighbouring micro
/// images out of the estimate. The region is re-centred on each new
/// estimate until it moves less than a thousandth of a pixel.
///
/// `Peak` weights by the positive part of the response; `Area` averages the
/// pixels at or above the region's 75th percentile. A seed whose region has
/// no usable pixel is kept and listed in `fallbacks`.
pub fn refine_centroids(white_log: &Image2D, seeds: &CentroidSet, pitch: usize, mode: RefineMode) -> Refined {
    let dims = white_log.dims();
    let r = white_log.plane(0);
    let mut points = Vec::with_capacity(seeds.len());
    let mut fallbacks = Vec::new();
    let mut values = Vec::with_capacity(pitch * pitch);
    for (n, seed) in seeds.points.iter().enumerate() {
        let mut current = *seed;
        let mut ok = false;
        for _ in 0..REFINE_PASSES {
            match refine_once(r, dims, current, pitch, mode, &mut values) {
                Some(next) => {
                    ok = true;
                    let step = ((next[0] - current[0]).powi(2) + (next[1] - current[1]).powi(2)).sqrt();
                    current = next;
                    if step < REFINE_STEP {
                        break;
                    }
                }
                None => break,
            }
        }
        if !ok {
            fallbacks.push(n);
        }
        points.push(current);
    }
    Refined {
        centroids: CentroidSet::new(points),
        fallbacks,
    }
}
