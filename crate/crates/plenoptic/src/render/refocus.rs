use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filter::bilinear;
use crate::image::Image2D;
use crate::lightfield::{lf_to_views, LightField4D, ViewStack};

/// Which array the shift-and-sum runs over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Variant {
    /// Sub-aperture view stack.
    #[default]
    Sai,
    /// Aligned micro-image array.
    Micro,
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sai" => Ok(Self::Sai),
            "micro" => Ok(Self::Micro),
            other => Err(Error::InvalidInput(format!("unknown refocus variant {other:?}; expected sai or micro"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefocusParams {
    /// Shift per angular step, in view pixels.
    pub a: f64,
    pub variant: Variant,
    /// Spatial upsampling applied before summation; `a · refine_factor` must
    /// be an integer.
    pub refine_factor: usize,
    /// Divide each pixel by its number of in-bounds contributions.
    pub normalize: bool,
}

impl Default for RefocusParams {
    fn default() -> Self {
        Self {
            a: 0.0,
            variant: Variant::Sai,
            refine_factor: 1,
            normalize: true,
        }
    }
}

impl RefocusParams {
    pub fn new(a: f64) -> Self {
        Self { a, ..Self::default() }
    }

    pub fn refined(a: f64, refine_factor: usize) -> Self {
        Self {
            a,
            refine_factor,
            ..Self::default()
        }
    }
}

/// `a · refine` as an integer shift, or the nearest representable `a`.
pub fn shift_units(a: f64, refine: usize) -> Result<isize> {
    if refine == 0 {
        return Err(Error::InvalidInput("refine factor must be at least 1".into()));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite(format!("focus scale {a}")));
    }
    let scaled = a * refine as f64;
    let n = scaled.round();
    if (scaled - n).abs() > 1e-9 {
        return Err(Error::NotRepresentable {
            requested: a,
            refine,
            nearest: n / refine as f64,
        });
    }
    Ok(n as isize)
}

/// Shift-and-sum over `pitch²` angular samples on a `rows × cols` grid.
///
/// `fetch(u, v, y, x, ch)` reads angular sample `(u, v)` at in-bounds spatial
/// position `(y, x)`. Per output pixel the sum runs `u` outer, `v` inner.
fn shift_sum(
    rows: usize,
    cols: usize,
    channels: usize,
    pitch: usize,
    step: isize,
    normalize: bool,
    fetch: impl Fn(usize, usize, usize, usize, usize) -> f64 + Sync,
) -> Image2D {
    let c = ((pitch - 1) / 2) as isize;
    let mut out = Image2D::new(rows, cols, channels).expect("positive dimensions");
    let fetch = &fetch;
    out.data_mut()
        .par_chunks_mut(cols)
        .enumerate()
        .for_each(|(row, dst)| {
            let (ch, y) = (row / rows, (row % rows) as isize);
            for (x, d) in dst.iter_mut().enumerate() {
                let x = x as isize;
                let (mut sum, mut count) = (0.0, 0usize);
                for i in -c..=c {
                    let sy = y - step * i;
                    if sy < 0 || sy >= rows as isize {
                        continue;
                    }
                    for g in -c..=c {
                        let sx = x - step * g;
                        if sx < 0 || sx >= cols as isize {
                            continue;
                        }
                        sum += fetch((c + i) as usize, (c + g) as usize, sy as usize, sx as usize, ch);
                        count += 1;
                    }
                }
                *d = if normalize && count > 0 { sum / count as f64 } else { sum };
            }
        });
    out
}

/// Refocuses a view stack. `refine_factor > 1` delegates to
/// [`refocus_refined`].
pub fn refocus(vs: &ViewStack, p: &RefocusParams) -> Result<Image2D> {
    if p.refine_factor > 1 {
        return refocus_refined(vs, p);
    }
    let step = shift_units(p.a, 1)?;
    let views = vs.views();
    let m = vs.pitch();
    Ok(shift_sum(vs.rows(), vs.cols(), vs.channels(), m, step, p.normalize, |u, v, y, x, ch| {
        views[u * m + v].get(y, x, ch)
    }))
}

/// Upsamples every view by `refine_factor` with bilinear interpolation, then
/// applies integer shifts of `refine_factor · a` per angular step. The output
/// is `refine_factor` times larger in both spatial axes.
pub fn refocus_refined(vs: &ViewStack, p: &RefocusParams) -> Result<Image2D> {
    let r = p.refine_factor;
    let step = shift_units(p.a, r)?;
    let (jj, hh) = (vs.rows(), vs.cols());
    let (rj, rh) = (jj * r, hh * r);
    let up: Vec<Image2D> = vs
        .views()
        .par_iter()
        .map(|view| {
            Image2D::from_fn(rj, rh, view.channels(), |k, l, ch| {
                bilinear(view.plane(ch), jj, hh, k as f64 / r as f64, l as f64 / r as f64)
            })
            .expect("positive dimensions")
        })
        .collect();
    let m = vs.pitch();
    Ok(shift_sum(rj, rh, vs.channels(), m, step, p.normalize, |u, v, y, x, ch| {
        up[u * m + v].get(y, x, ch)
    }))
}

/// Refocuses directly on the micro-image array: lens `(j − a·i, h − a·g)`
/// contributes its pixel `(c + i, c + g)`. Matches [`refocus`] on the
/// corresponding view stack exactly.
pub fn refocus_micro(lf: &LightField4D, p: &RefocusParams) -> Result<Image2D> {
    if p.refine_factor > 1 {
        return refocus_refined(&lf_to_views(lf), p);
    }
    let step = shift_units(p.a, 1)?;
    Ok(shift_sum(lf.rows(), lf.cols(), lf.channels(), lf.pitch(), step, p.normalize, |u, v, y, x, ch| {
        lf.get(y, x, u, v, ch)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(rows: usize, cols: usize, pitch: usize) -> LightField4D {
        LightField4D::from_fn(rows, cols, pitch, 1, |j, h, u, v, _| {
            ((j * 31 + h * 17 + u * 7 + v * 3) % 23) as f64 / 23.0
        })
        .unwrap()
    }

    #[test]
    fn zero_shift_is_view_mean() {
        let lf = field(5, 6, 3);
        let vs = lf_to_views(&lf);
        let out = refocus(&vs, &RefocusParams::new(0.0)).unwrap();
        for j in 0..5 {
            for h in 0..6 {
                let mean = lf.micro_image(j, h, 0).iter().sum::<f64>() / 9.0;
                assert!((out.get(j, h, 0) - mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hand_enumerated_unit_shift() {
        // J = 5, H = 1, M = 3: only the g = 0 column of views stays in bounds
        // horizontally when h = 0 and the shift is one.
        let lf = field(5, 1, 3);
        let p = RefocusParams {
            a: 1.0,
            normalize: false,
            ..RefocusParams::default()
        };
        let out = refocus_micro(&lf, &p).unwrap();
        for j in 0..5isize {
            let mut expected = 0.0;
            for i in -1isize..=1 {
                let sj = j - i;
                if (0..5).contains(&sj) {
                    expected += lf.get(sj as usize, 0, (1 + i) as usize, 1, 0);
                }
            }
            assert_eq!(out.get(j as usize, 0, 0), expected);
        }
    }

    #[test]
    fn micro_and_view_variants_agree_bitwise() {
        let lf = field(7, 9, 5);
        let vs = lf_to_views(&lf);
        for a in -2..=2 {
            let p = RefocusParams::new(a as f64);
            assert_eq!(refocus(&vs, &p).unwrap(), refocus_micro(&lf, &p).unwrap());
        }
    }

    #[test]
    fn fractional_shift_needs_refinement() {
        let vs = lf_to_views(&field(4, 4, 3));
        match refocus(&vs, &RefocusParams::new(0.5)) {
            Err(Error::NotRepresentable { nearest, .. }) => assert!(nearest == 0.0 || nearest == 1.0),
            other => panic!("{other:?}"),
        }
        let out = refocus(&vs, &RefocusParams::refined(0.5, 2)).unwrap();
        assert_eq!(out.dims(), (8, 8));
        assert_eq!(shift_units(0.3, 2).unwrap_err(), Error::NotRepresentable { requested: 0.3, refine: 2, nearest: 0.5 });
    }

    #[test]
    fn refined_integer_shift_downsamples_to_plain() {
        let lf = field(6, 7, 3);
        let vs = lf_to_views(&lf);
        let plain = refocus(&vs, &RefocusParams::new(1.0)).unwrap();
        let fine = refocus(&vs, &RefocusParams::refined(1.0, 2)).unwrap();
        for j in 0..6 {
            for h in 0..7 {
                assert!((fine.get(2 * j, 2 * h, 0) - plain.get(j, h, 0)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn single_view_is_returned_unchanged() {
        let lf = field(4, 5, 1);
        let vs = lf_to_views(&lf);
        for a in [-3.0, 0.0, 2.0] {
            assert_eq!(&refocus(&vs, &RefocusParams::new(a)).unwrap(), vs.central());
        }
    }
}
