//! Half-octave scale space and micro-image pitch estimation.

use crate::error::{Error, Result};
use crate::filter::{dog, gaussian_blur, resize_bilinear};
use crate::image::Image2D;

use super::centroids;

/// Blur width (level pixels) of the per-level blob filter.
const LEVEL_SIGMA: f64 = 1.2;
/// Anti-alias blur applied before each √2 downsampling step.
const ANTI_ALIAS_SIGMA: f64 = 0.5;
/// Levels stop once the smaller side would drop below this many pixels.
const MIN_LEVEL_SIDE: usize = 8;

/// One pyramid level: the blob response of the downsampled white image.
#[derive(Clone, Debug)]
pub struct PyramidLevel {
    pub height: usize,
    pub width: usize,
    /// Linear downscale factor relative to the input.
    pub scale: f64,
    /// Effective Gaussian scale of the response, in input pixels.
    pub sigma: f64,
    pub response: Vec<f64>,
    pub max_response: f64,
    /// `(k, l)` of the maximum, in level pixels.
    pub argmax: (usize, usize),
}

#[derive(Clone, Debug)]
pub struct ScaleSpacePyramid {
    pub levels: Vec<PyramidLevel>,
}

impl ScaleSpacePyramid {
    /// Index of the level with the strongest response.
    pub fn peak_level(&self) -> usize {
        self.levels
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.max_response.total_cmp(&b.1.max_response))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

/// Result of [`estimate_pitch`].
#[derive(Clone, Debug)]
pub struct PitchEstimate {
    /// Blob scale at the input resolution, interpolated between levels.
    pub sigma_star: f64,
    /// Pyramid level with the strongest response.
    pub level: usize,
    /// `2√2·σ★` forced odd.
    pub coarse_pitch: usize,
    /// Median nearest-neighbour spacing of blob maxima at `σ★`, in pixels.
    pub spacing: f64,
    /// Micro-image diameter: `spacing` rounded and forced odd.
    pub pitch: usize,
    pub pyramid: ScaleSpacePyramid,
}

/// Rounds to the nearest integer, then adds one if even.
pub fn force_odd(x: f64) -> usize {
    let n = x.round().max(1.0) as usize;
    if n % 2 == 0 {
        n + 1
    } else {
        n
    }
}

/// Diameter of a disc whose scale-normalized Laplacian peaks at `sigma`
/// (`M = 2√2·σ`), forced odd.
pub fn scale_to_pitch(sigma: f64) -> usize {
    force_odd(2.0 * std::f64::consts::SQRT_2 * sigma)
}

/// Builds the half-octave pyramid of blob responses.
///
/// Level `ν + 1` is the anti-aliased level `ν` downsampled to
/// `ceil(dim / √2)` per side; each level is filtered with the same
/// scale-normalized Difference of Gaussians.
pub fn build_pyramid(white: &Image2D) -> Result<ScaleSpacePyramid> {
    let white = white.luma();
    let (k0, l0) = white.dims();
    if k0.min(l0) < MIN_LEVEL_SIDE {
        return Err(Error::InvalidInput(format!(
            "white image {k0}x{l0} is smaller than {MIN_LEVEL_SIDE} pixels"
        )));
    }
    let q = 2f64.powf(0.25);
    let (s1, s2) = (LEVEL_SIGMA / q, LEVEL_SIGMA * q);

    let mut levels = Vec::new();
    // The base level is upsampled by √2 so that the finest scale reaches
    // half an octave below the filter width; this covers pitches down to
    // about five pixels.
    let (mut kk, mut ll) = (
        (k0 as f64 * std::f64::consts::SQRT_2).ceil() as usize,
        (l0 as f64 * std::f64::consts::SQRT_2).ceil() as usize,
    );
    let mut base = resize_bilinear(white.plane(0), k0, l0, kk, ll);
    // accumulated pre-blur variance in input pixels; linear interpolation
    // contributes about a sixth of a pixel squared
    let mut pre_var = 1.0 / 6.0;
    loop {
        let scale = ((k0 * l0) as f64 / (kk * ll) as f64).sqrt();
        let b2 = pre_var / (scale * scale);
        let e1 = (s1 * s1 + b2).sqrt();
        let e2 = (s2 * s2 + b2).sqrt();
        let norm = 2.0 * e1 * e2 / (e2 * e2 - e1 * e1);
        let sigma = scale * (e1 * e2).sqrt();

        let response: Vec<f64> = dog(&base, kk, ll, LEVEL_SIGMA)
            .into_iter()
            .map(|v| v * norm)
            .collect();
        let (idx, max_response) = response
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        levels.push(PyramidLevel {
            height: kk,
            width: ll,
            scale,
            sigma,
            argmax: (idx / ll, idx % ll),
            max_response,
            response,
        });

        let nk = (kk as f64 / std::f64::consts::SQRT_2).ceil() as usize;
        let nl = (ll as f64 / std::f64::consts::SQRT_2).ceil() as usize;
        if nk.min(nl) < MIN_LEVEL_SIDE || (nk, nl) == (kk, ll) {
            break;
        }
        let smoothed = gaussian_blur(&base, kk, ll, ANTI_ALIAS_SIGMA);
        pre_var += (ANTI_ALIAS_SIGMA * scale).powi(2);
        base = resize_bilinear(&smoothed, kk, ll, nk, nl);
        kk = nk;
        ll = nl;
    }
    Ok(ScaleSpacePyramid { levels })
}

/// Detects the blob scale `σ★` of a white image and derives the pitch.
///
/// The strongest level must be interior to the pyramid. `σ★` is refined by a
/// parabola through the peak level and its neighbours in log-scale. The
/// returned `pitch` comes from the lattice spacing of the blob maxima found
/// at `σ★`; `coarse_pitch` is the scale-only value.
pub fn estimate_pitch(white: &Image2D) -> Result<PitchEstimate> {
    let white = white.luma();
    let pyramid = build_pyramid(&white)?;
    let n = pyramid.levels.len();
    let peak = pyramid.peak_level();
    let top = pyramid.levels[peak].max_response;
    if peak == 0 || peak + 1 >= n || !(top > 0.0) {
        return Err(Error::NoDominantScale {
            level: peak,
            levels: n,
        });
    }
    let (a, b, c) = (
        pyramid.levels[peak - 1].max_response,
        top,
        pyramid.levels[peak + 1].max_response,
    );
    let denom = a - 2.0 * b + c;
    let offset = if denom < 0.0 {
        (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let log_sigma = |i: usize| pyramid.levels[i].sigma.ln();
    let step = if offset >= 0.0 {
        log_sigma(peak + 1) - log_sigma(peak)
    } else {
        log_sigma(peak) - log_sigma(peak - 1)
    };
    let sigma_star = (log_sigma(peak) + offset * step).exp();
    let coarse_pitch = scale_to_pitch(sigma_star);

    let response = centroids::blob_response(&white, sigma_star);
    let maxima = centroids::maxima(&response).map(|s| s.points).unwrap_or_default();
    let spacing = lattice_spacing(&maxima, 0.5 * coarse_pitch as f64)
        .unwrap_or(coarse_pitch as f64);
    Ok(PitchEstimate {
        sigma_star,
        level: peak,
        coarse_pitch,
        spacing,
        pitch: force_odd(spacing),
        pyramid,
    })
}

/// Median nearest-neighbour distance among `points`, ignoring pairs closer
/// than `min_dist` (duplicate detections).
pub fn lattice_spacing(points: &[[f64; 2]], min_dist: f64) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let cell = min_dist.max(1.0) * 2.0;
    let index = SpatialIndex::new(points, cell);
    let mut nn: Vec<f64> = points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let mut best = f64::INFINITY;
            for r in 1..=4 {
                index.for_each_near(*p, r, |j| {
                    if j != i {
                        let d = dist(*p, points[j]);
                        if d >= min_dist && d < best {
                            best = d;
                        }
                    }
                });
                if best <= cell * r as f64 {
                    break;
                }
            }
            best.is_finite().then_some(best)
        })
        .collect();
    if nn.is_empty() {
        return None;
    }
    nn.sort_unstable_by(f64::total_cmp);
    Some(nn[nn.len() / 2])
}

pub(crate) fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Uniform-cell bucket index over 2-D points.
pub(crate) struct SpatialIndex {
    cell: f64,
    buckets: std::collections::HashMap<(i64, i64), Vec<usize>>,
}

impl SpatialIndex {
    pub(crate) fn new(points: &[[f64; 2]], cell: f64) -> Self {
        let mut buckets: std::collections::HashMap<(i64, i64), Vec<usize>> = Default::default();
        for (i, p) in points.iter().enumerate() {
            buckets
                .entry(((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64))
                .or_default()
                .push(i);
        }
        Self { cell, buckets }
    }

    /// Visits indices in cells within `radius` cells of `p`, in ascending cell order.
    pub(crate) fn for_each_near(&self, p: [f64; 2], radius: i64, mut f: impl FnMut(usize)) {
        let ck = (p[0] / self.cell).floor() as i64;
        let cl = (p[1] / self.cell).floor() as i64;
        for dk in -radius..=radius {
            for dl in -radius..=radius {
                if let Some(v) = self.buckets.get(&(ck + dk, cl + dl)) {
                    v.iter().for_each(|&i| f(i));
                }
            }
        }
    }
}
