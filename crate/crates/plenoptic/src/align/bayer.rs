//! Colour filter array handling: outlier repair, mosaicking and demosaicking.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::median3x3;
use crate::image::Image2D;

/// 2×2 colour filter layout, read row-major from the top-left pixel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BayerPattern {
    Rggb,
    Bggr,
    Grbg,
    Gbrg,
}

impl BayerPattern {
    /// Colour index (0 red, 1 green, 2 blue) sampled at `(k, l)`.
    pub fn color_at(self, k: usize, l: usize) -> usize {
        let cell = match self {
            BayerPattern::Rggb => [0, 1, 1, 2],
            BayerPattern::Bggr => [2, 1, 1, 0],
            BayerPattern::Grbg => [1, 0, 2, 1],
            BayerPattern::Gbrg => [1, 2, 0, 1],
        };
        cell[(k % 2) * 2 + l % 2]
    }
}

impl FromStr for BayerPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "RGGB" => Ok(BayerPattern::Rggb),
            "BGGR" => Ok(BayerPattern::Bggr),
            "GRBG" => Ok(BayerPattern::Grbg),
            "GBRG" => Ok(BayerPattern::Gbrg),
            _ => Err(Error::InvalidInput(format!("unknown Bayer pattern {s:?}"))),
        }
    }
}

/// Single-channel sensor mosaic with even dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct BayerImage {
    mosaic: Image2D,
    pattern: BayerPattern,
}

impl BayerImage {
    pub fn new(mosaic: Image2D, pattern: BayerPattern) -> Result<Self> {
        if mosaic.channels() != 1 {
            return Err(Error::InvalidInput(format!(
                "a Bayer mosaic has one channel, got {}",
                mosaic.channels()
            )));
        }
        let (k, l) = mosaic.dims();
        if k % 2 != 0 || l % 2 != 0 {
            return Err(Error::InvalidInput(format!("Bayer mosaic dimensions must be even, got {k}x{l}")));
        }
        Ok(Self { mosaic, pattern })
    }

    pub fn mosaic(&self) -> &Image2D {
        &self.mosaic
    }

    pub fn pattern(&self) -> BayerPattern {
        self.pattern
    }

    pub fn into_mosaic(self) -> Image2D {
        self.mosaic
    }
}

/// Samples an RGB image through the colour filter array.
pub fn mosaic(rgb: &Image2D, pattern: BayerPattern) -> Result<BayerImage> {
    if rgb.channels() < 3 {
        return Err(Error::InvalidInput("mosaicking needs an RGB image".into()));
    }
    let (kk, ll) = rgb.dims();
    let m = Image2D::from_fn(kk, ll, 1, |k, l, _| rgb.get(k, l, pattern.color_at(k, l)))?;
    BayerImage::new(m, pattern)
}

/// Counts from [`remove_cfa_outliers`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OutlierReport {
    /// Pixels exceeding the local residual threshold.
    pub candidates: usize,
    /// Candidates replaced by their median.
    pub replaced: usize,
}

/// Replaces hot pixels on each of the four Bayer sub-lattices.
///
/// A pixel is a candidate when it exceeds the local mean plus four standard
/// deviations of the median residual within a `(2n+1)²` window. Candidates are
/// replaced by the 3×3 median unless more than `n` candidates share an
/// `n²×n²` window, which protects saturated regions.
pub fn remove_cfa_outliers(b: &BayerImage, n: usize) -> Result<(BayerImage, OutlierReport)> {
    if n == 0 {
        return Err(Error::InvalidInput("outlier window parameter n must be at least 1".into()));
    }
    let (kk, ll) = b.mosaic.dims();
    let src = b.mosaic.plane(0);
    let mut out = src.to_vec();
    let mut report = OutlierReport::default();
    let (sk, sl) = (kk / 2, ll / 2);
    for (ok, ol) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        let sub: Vec<f64> = (0..sk)
            .flat_map(|k| (0..sl).map(move |l| (k, l)))
            .map(|(k, l)| src[(2 * k + ok) * ll + 2 * l + ol])
            .collect();
        let med = median3x3(&sub, sk, sl);
        let resid: Vec<f64> = sub.iter().zip(&med).map(|(a, m)| a - m).collect();
        let r = n as isize;
        let mut cand = vec![false; sk * sl];
        for k in 0..sk {
            for l in 0..sl {
                let (mut s, mut s2, mut cnt) = (0.0, 0.0, 0.0);
                for dk in -r..=r {
                    for dl in -r..=r {
                        let (y, x) = (k as isize + dk, l as isize + dl);
                        if y >= 0 && x >= 0 && (y as usize) < sk && (x as usize) < sl {
                            let v = resid[y as usize * sl + x as usize];
                            s += v;
                            s2 += v * v;
                            cnt += 1.0;
                        }
                    }
                }
                let mean = s / cnt;
                let sd = (s2 / cnt - mean * mean).max(0.0).sqrt();
                cand[k * sl + l] = sub[k * sl + l] > mean + 4.0 * sd;
            }
        }
        let w = (n * n) as isize;
        let (lo, hi) = ((w - 1) / 2, w / 2);
        for k in 0..sk {
            for l in 0..sl {
                if !cand[k * sl + l] {
                    continue;
                }
                report.candidates += 1;
                let mut cluster = 0;
                for dk in -lo..=hi {
                    for dl in -lo..=hi {
                        let (y, x) = (k as isize + dk, l as isize + dl);
                        if y >= 0 && x >= 0 && (y as usize) < sk && (x as usize) < sl && cand[y as usize * sl + x as usize] {
                            cluster += 1;
                        }
                    }
                }
                if cluster <= n {
                    out[(2 * k + ok) * ll + 2 * l + ol] = med[k * sl + l];
                    report.replaced += 1;
                }
            }
        }
    }
    let img = Image2D::from_vec(kk, ll, 1, out)?;
    Ok((BayerImage::new(img, b.pattern)?, report))
}

/// A demosaicking algorithm.
pub trait Demosaic {
    fn demosaic(&self, b: &BayerImage) -> Image2D;
}

/// Gradient-corrected bilinear interpolation with 5×5 kernels
/// (Malvar, He and Cutler). Borders mirror without repeating the edge pixel,
/// which keeps the colour parity.
#[derive(Clone, Copy, Debug, Default)]
pub struct GradientCorrected;

// Kernels in eighths, indexed [dk + 2][dl + 2].
const G_AT_RB: [[f64; 5]; 5] = [
    [0.0, 0.0, -1.0, 0.0, 0.0],
    [0.0, 0.0, 2.0, 0.0, 0.0],
    [-1.0, 2.0, 4.0, 2.0, -1.0],
    [0.0, 0.0, 2.0, 0.0, 0.0],
    [0.0, 0.0, -1.0, 0.0, 0.0],
];
/// Colour whose samples are the horizontal neighbours of a green site.
const ROW_NEIGHBOUR: [[f64; 5]; 5] = [
    [0.0, 0.0, 0.5, 0.0, 0.0],
    [0.0, -1.0, 0.0, -1.0, 0.0],
    [-1.0, 4.0, 5.0, 4.0, -1.0],
    [0.0, -1.0, 0.0, -1.0, 0.0],
    [0.0, 0.0, 0.5, 0.0, 0.0],
];
/// Colour whose samples are the vertical neighbours of a green site.
const COL_NEIGHBOUR: [[f64; 5]; 5] = [
    [0.0, 0.0, -1.0, 0.0, 0.0],
    [0.0, -1.0, 4.0, -1.0, 0.0],
    [0.5, 0.0, 5.0, 0.0, 0.5],
    [0.0, -1.0, 4.0, -1.0, 0.0],
    [0.0, 0.0, -1.0, 0.0, 0.0],
];
/// Red at blue sites and vice versa.
const DIAGONAL: [[f64; 5]; 5] = [
    [0.0, 0.0, -1.5, 0.0, 0.0],
    [0.0, 2.0, 0.0, 2.0, 0.0],
    [-1.5, 0.0, 6.0, 0.0, -1.5],
    [0.0, 2.0, 0.0, 2.0, 0.0],
    [0.0, 0.0, -1.5, 0.0, 0.0],
];

fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    if i < 0 {
        i = -i;
    }
    if i >= n {
        i = 2 * (n - 1) - i;
    }
    i.clamp(0, n - 1) as usize
}

impl Demosaic for GradientCorrected {
    fn demosaic(&self, b: &BayerImage) -> Image2D {
        let (kk, ll) = b.mosaic.dims();
        let src = b.mosaic.plane(0);
        let p = b.pattern;
        let apply = |kernel: &[[f64; 5]; 5], k: usize, l: usize| -> f64 {
            let mut s = 0.0;
            for (dk, row) in kernel.iter().enumerate() {
                for (dl, &w) in row.iter().enumerate() {
                    if w != 0.0 {
                        let y = reflect(k as isize + dk as isize - 2, kk);
                        let x = reflect(l as isize + dl as isize - 2, ll);
                        s += w * src[y * ll + x];
                    }
                }
            }
            s / 8.0
        };
        Image2D::from_fn(kk, ll, 3, |k, l, c| {
            let here = p.color_at(k, l);
            if here == c {
                return src[k * ll + l];
            }
            if c == 1 {
                return apply(&G_AT_RB, k, l);
            }
            if here == 1 {
                let row_colour = p.color_at(k, l + 1);
                if row_colour == c {
                    apply(&ROW_NEIGHBOUR, k, l)
                } else {
                    apply(&COL_NEIGHBOUR, k, l)
                }
            } else {
                apply(&DIAGONAL, k, l)
            }
        })
        .expect("shape derived from a valid mosaic")
    }
}

/// Demosaics with [`GradientCorrected`].
pub fn demosaic(b: &BayerImage) -> Image2D {
    GradientCorrected.demosaic(b)
}
