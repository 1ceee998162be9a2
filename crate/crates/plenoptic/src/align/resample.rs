//! Resampling of the raw capture onto a regular lens lattice with integer
//! pitch, and hexagonal to rectangular conversion.

use rayon::prelude::*;

use crate::calibrate::{canonical_point, project, CalibModel, Packing};
use crate::error::{Error, Result};
use crate::image::Image2D;
use crate::lightfield::LightField4D;

/// Coordinates closer than this to an integer are sampled at that integer.
const SNAP: f64 = 1e-9;

fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < SNAP {
        r
    } else {
        x
    }
}

/// Bilinear sample with near-integer snapping and clamp-to-edge.
fn sample(src: &[f64], kk: usize, ll: usize, k: f64, l: f64) -> f64 {
    crate::filter::bilinear(src, kk, ll, snap(k), snap(l))
}

/// Lens-column count after converting a hexagonal row of `cols` lenses.
pub fn stretched_cols(cols: usize) -> usize {
    ((2.0 * cols as f64) / 3f64.sqrt()).round().max(1.0) as usize
}

/// Fills a `J × H` lens array where every micro-image pixel is sampled at
/// `source(j, h, du, dv)`, offsets relative to the centre pixel.
fn sample_lenses(
    img: &Image2D,
    rows: usize,
    cols: usize,
    pitch: usize,
    source: impl Fn(usize, usize, f64, f64) -> [f64; 2] + Sync,
) -> Result<LightField4D> {
    let (kk, ll) = img.dims();
    let ch = img.channels();
    let c = (pitch / 2) as f64;
    let mut data = vec![0.0; ch * rows * cols * pitch * pitch];
    let block = cols * pitch * pitch;
    data.par_chunks_mut(block).enumerate().for_each(|(idx, chunk)| {
        let (channel, j) = (idx / rows, idx % rows);
        let src = img.plane(channel);
        for h in 0..cols {
            for u in 0..pitch {
                for v in 0..pitch {
                    let p = source(j, h, u as f64 - c, v as f64 - c);
                    chunk[(h * pitch + u) * pitch + v] = sample(src, kk, ll, p[0], p[1]);
                }
            }
        }
    });
    LightField4D::from_vec(rows, cols, pitch, ch, data)
}

fn check_inside(calib: &CalibModel, dims: (usize, usize)) -> Result<()> {
    for j in 0..calib.rows {
        for h in 0..calib.cols {
            let p = calib.predicted(j, h);
            if !(p[0] >= -0.5 && p[1] >= -0.5 && p[0] <= dims.0 as f64 - 0.5 && p[1] <= dims.1 as f64 - 0.5) {
                return Err(Error::InvalidInput(format!(
                    "centroid ({j}, {h}) at ({:.2}, {:.2}) lies outside the {}x{} image",
                    p[0], p[1], dims.0, dims.1
                )));
            }
        }
    }
    Ok(())
}

fn check_calib(img: &Image2D, calib: &CalibModel) -> Result<()> {
    calib.validate()?;
    check_inside(calib, img.dims())
}

/// Warps the whole image through the calibration homography: lens `(j, h)`,
/// pixel `(u, v)` is read from `P★ (g(j, h) + (u − c, v − c) / M)`, so the
/// micro images are rescaled from the measured lens spacing to `M`.
/// Hexagonal lattices are then converted with [`hex_to_rect`].
pub fn resample_global(img: &Image2D, calib: &CalibModel) -> Result<LightField4D> {
    check_calib(img, calib)?;
    let m = calib.pitch as f64;
    let p = calib.homography;
    let lf = sample_lenses(img, calib.rows, calib.cols, calib.pitch, |j, h, du, dv| {
        let g = canonical_point(j, h, calib.rows, calib.cols, calib.packing, calib.hex_row_phase);
        project(&p, [g[0] + du / m, g[1] + dv / m])
    })?;
    finish(lf, calib)
}

/// Reads each micro image around its fitted centroid at native pixel scale:
/// pixel `(u, v)` of lens `(j, h)` comes from `ĉ★ + (u − c, v − c)`.
/// Hexagonal lattices are then converted with [`hex_to_rect`].
pub fn resample_local(img: &Image2D, calib: &CalibModel) -> Result<LightField4D> {
    check_calib(img, calib)?;
    let centres: Vec<[f64; 2]> = (0..calib.rows)
        .flat_map(|j| (0..calib.cols).map(move |h| (j, h)))
        .map(|(j, h)| calib.predicted(j, h))
        .collect();
    let cols = calib.cols;
    let lf = sample_lenses(img, calib.rows, calib.cols, calib.pitch, |j, h, du, dv| {
        let c = centres[j * cols + h];
        [c[0] + du, c[1] + dv]
    })?;
    finish(lf, calib)
}

fn finish(lf: LightField4D, calib: &CalibModel) -> Result<LightField4D> {
    match calib.packing {
        Packing::Rectangular => Ok(lf),
        Packing::Hexagonal => hex_to_rect(&lf, calib.hex_row_phase),
    }
}

/// Converts a hexagonal lens array to a rectangular one.
///
/// Shifted rows are first moved half a lens to the left by interpolating
/// between horizontally adjacent lenses. Each row is then upsampled by
/// `2/√3` along the lens axis, giving [`stretched_cols`] lenses. Every
/// angular sample `(u, v)` is interpolated independently across lenses.
pub fn hex_to_rect(lf: &LightField4D, hex_row_phase: u8) -> Result<LightField4D> {
    let (rows, cols, m, ch) = (lf.rows(), lf.cols(), lf.pitch(), lf.channels());
    let out_cols = stretched_cols(cols);
    let step = 3f64.sqrt() / 2.0;
    let mm = m * m;
    let mut data = vec![0.0; ch * rows * out_cols * mm];
    data.par_chunks_mut(out_cols * mm).enumerate().for_each(|(idx, chunk)| {
        let (c, j) = (idx / rows, idx % rows);
        let shifted = (j + hex_row_phase as usize) % 2 == 1;
        // aligned row, lens-major with angular samples contiguous
        let mut aligned = vec![0.0; cols * mm];
        for h in 0..cols {
            let cur = lf.micro_image(j, h, c);
            if shifted {
                let prev = lf.micro_image(j, h.saturating_sub(1), c);
                for t in 0..mm {
                    aligned[h * mm + t] = 0.5 * (prev[t] + cur[t]);
                }
            } else {
                aligned[h * mm..(h + 1) * mm].copy_from_slice(cur);
            }
        }
        for q in 0..out_cols {
            let x = (q as f64 * step).min((cols - 1) as f64);
            let x = snap(x);
            let h0 = x.floor() as usize;
            let h1 = (h0 + 1).min(cols - 1);
            let f = x - h0 as f64;
            for t in 0..mm {
                let a = aligned[h0 * mm + t];
                let b = aligned[h1 * mm + t];
                chunk[q * mm + t] = if f == 0.0 { a } else { a + f * (b - a) };
            }
        }
    });
    LightField4D::from_vec(rows, out_cols, m, ch, data)
}
