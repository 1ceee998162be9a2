//! Detection and repair of zipper fringes left by hexagonal-to-rectangular
//! resampling.
//!
//! In a hex lattice every other lens row is offset by half a lens, so after
//! resampling those rows carry a sub-pixel horizontal shift relative to the
//! unshifted ones. The shifted and unshifted rows are split into two
//! de-interlaced images; a pixel is a fringe candidate when the difference
//! between them exceeds the local vertical derivative of the unshifted image
//! by more than a fraction of the view's range.

use crate::image::Image2D;
use crate::lightfield::ViewStack;

/// Default detection threshold as a fraction of the view's intensity range.
pub const DEFAULT_TAU: f64 = 0.1;
/// Candidates must form horizontal runs at least this long.
pub const MIN_RUN: usize = 4;

/// Per-view fringe detections. `mask[k * width + l]` is set where the pixel
/// was replaced.
#[derive(Clone, Debug, PartialEq)]
pub struct FringeMask {
    pub height: usize,
    pub width: usize,
    pub mask: Vec<bool>,
    /// Absolute threshold used, `τ` times the view range.
    pub threshold: f64,
}

impl FringeMask {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn get(&self, k: usize, l: usize) -> bool {
        self.mask[k * self.width + l]
    }
}

/// Whether view row `k` belongs to the offset set given the lattice phase
/// (row `k` is offset when `k + phase` is odd).
fn is_shifted(k: usize, phase: u8) -> bool {
    (k + phase as usize) % 2 == 1
}

/// Detects fringes in one view and replaces them by the mean of the pixels
/// directly above and below. Channels share one mask computed on luma.
pub fn fix_view(view: &Image2D, phase: u8, tau: f64) -> (Image2D, FringeMask) {
    let (kk, ll) = view.dims();
    let luma = view.luma();
    let y = luma.plane(0);
    let (lo, hi) = luma.min_max();
    let threshold = tau * (hi - lo);

    let shifted: Vec<usize> = (0..kk).filter(|&k| is_shifted(k, phase)).collect();
    let plain: Vec<usize> = (0..kk).filter(|&k| !is_shifted(k, phase)).collect();
    let pairs = shifted.len().min(plain.len());

    let mut candidate = vec![false; kk * ll];
    if pairs >= 2 && threshold > 0.0 {
        for m in 0..pairs {
            let (ks, kp) = (shifted[m], plain[m]);
            // vertical derivative of the de-interlaced unshifted image
            let kn = if m + 1 < plain.len() { plain[m + 1] } else { plain[m - 1] };
            for l in 0..ll {
                let diff = y[ks * ll + l] - y[kp * ll + l];
                let deriv = y[kn * ll + l] - y[kp * ll + l];
                if diff.abs() - deriv.abs() > threshold {
                    candidate[ks * ll + l] = true;
                }
            }
        }
    }

    let mut mask = vec![false; kk * ll];
    for k in 0..kk {
        let row = &candidate[k * ll..(k + 1) * ll];
        let mut l = 0;
        while l < ll {
            if !row[l] {
                l += 1;
                continue;
            }
            let start = l;
            while l < ll && row[l] {
                l += 1;
            }
            if l - start >= MIN_RUN {
                mask[k * ll + start..k * ll + l].iter_mut().for_each(|m| *m = true);
            }
        }
    }

    let mut out = view.clone();
    for ch in 0..view.channels() {
        let src = view.plane(ch);
        let dst = out.plane_mut(ch);
        for k in 0..kk {
            for l in 0..ll {
                if !mask[k * ll + l] {
                    continue;
                }
                let (mut sum, mut n) = (0.0, 0.0);
                if k > 0 {
                    sum += src[(k - 1) * ll + l];
                    n += 1.0;
                }
                if k + 1 < kk {
                    sum += src[(k + 1) * ll + l];
                    n += 1.0;
                }
                if n > 0.0 {
                    dst[k * ll + l] = sum / n;
                }
            }
        }
    }
    (
        out,
        FringeMask {
            height: kk,
            width: ll,
            mask,
            threshold,
        },
    )
}

/// Applies [`fix_view`] to every view of a stack resampled from a hexagonal
/// lattice with row phase `phase`.
pub fn correct_hex_artifacts(vs: &ViewStack, phase: u8, tau: f64) -> (ViewStack, Vec<FringeMask>) {
    use rayon::prelude::*;
    let (views, masks): (Vec<_>, Vec<_>) = vs.views().par_iter().map(|v| fix_view(v, phase, tau)).unzip();
    (
        ViewStack::from_views(vs.pitch(), views).expect("same shape as input"),
        masks,
    )
}
