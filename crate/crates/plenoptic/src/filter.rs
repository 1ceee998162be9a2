//! Separable Gaussian filtering, median filtering and bilinear sampling on
//! single-channel row-major planes.
//!
//! Borders are handled by clamping to the nearest edge sample.

/// Normalized Gaussian taps truncated at `ceil(4σ)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (4.0 * sigma).ceil() as isize;
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|x| (-((x * x) as f64) * inv).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

fn convolve_rows(src: &[f64], height: usize, width: usize, taps: &[f64]) -> Vec<f64> {
    let r = (taps.len() / 2) as isize;
    let last = width as isize - 1;
    let mut out = vec![0.0; src.len()];
    for k in 0..height {
        let row = &src[k * width..(k + 1) * width];
        let dst = &mut out[k * width..(k + 1) * width];
        for (l, d) in dst.iter_mut().enumerate() {
            let l = l as isize;
            let mut acc = 0.0;
            if l - r >= 0 && l + r <= last {
                let base = (l - r) as usize;
                for (t, &w) in taps.iter().enumerate() {
                    acc += w * row[base + t];
                }
            } else {
                for (t, &w) in taps.iter().enumerate() {
                    let x = (l + t as isize - r).clamp(0, last) as usize;
                    acc += w * row[x];
                }
            }
            *d = acc;
        }
    }
    out
}

fn convolve_cols(src: &[f64], height: usize, width: usize, taps: &[f64]) -> Vec<f64> {
    let r = (taps.len() / 2) as isize;
    let last = height as isize - 1;
    let mut out = vec![0.0; src.len()];
    for k in 0..height {
        let dst = &mut out[k * width..(k + 1) * width];
        for (t, &w) in taps.iter().enumerate() {
            let y = (k as isize + t as isize - r).clamp(0, last) as usize;
            let row = &src[y * width..(y + 1) * width];
            for (d, &s) in dst.iter_mut().zip(row) {
                *d += w * s;
            }
        }
    }
    out
}

/// Gaussian blur with standard deviation `sigma` (pixels).
pub fn gaussian_blur(src: &[f64], height: usize, width: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return src.to_vec();
    }
    let taps = gaussian_kernel(sigma);
    let tmp = convolve_rows(src, height, width, &taps);
    convolve_cols(&tmp, height, width, &taps)
}

/// Scale-normalized blob response at `sigma`: a Difference of Gaussians with
/// σ-ratio √2 whose pair is centred geometrically on `sigma`.
///
/// The sign is flipped relative to the Laplacian so bright blobs give
/// positive peaks.
pub fn dog(src: &[f64], height: usize, width: usize, sigma: f64) -> Vec<f64> {
    let q = 2f64.powf(0.25);
    let narrow = gaussian_blur(src, height, width, sigma / q);
    let wide = gaussian_blur(src, height, width, sigma * q);
    narrow.iter().zip(&wide).map(|(a, b)| a - b).collect()
}

/// 3×3 median filter.
pub fn median3x3(src: &[f64], height: usize, width: usize) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    let mut win = [0.0f64; 9];
    for k in 0..height {
        for l in 0..width {
            let mut n = 0;
            for dk in -1isize..=1 {
                let y = (k as isize + dk).clamp(0, height as isize - 1) as usize;
                for dl in -1isize..=1 {
                    let x = (l as isize + dl).clamp(0, width as isize - 1) as usize;
                    win[n] = src[y * width + x];
                    n += 1;
                }
            }
            win.sort_unstable_by(f64::total_cmp);
            out[k * width + l] = win[4];
        }
    }
    out
}

/// Bilinear sample at real coordinates `(y, x)`; integer coordinates are pixel
/// centres. Coordinates outside the raster clamp to the edge.
#[inline]
pub fn bilinear(src: &[f64], height: usize, width: usize, y: f64, x: f64) -> f64 {
    let y = y.clamp(0.0, (height - 1) as f64);
    let x = x.clamp(0.0, (width - 1) as f64);
    let y0 = y.floor() as usize;
    let x0 = x.floor() as usize;
    let fy = y - y0 as f64;
    let fx = x - x0 as f64;
    let y1 = (y0 + 1).min(height - 1);
    let x1 = (x0 + 1).min(width - 1);
    let a = src[y0 * width + x0];
    let b = src[y0 * width + x1];
    let c = src[y1 * width + x0];
    let d = src[y1 * width + x1];
    if fy == 0.0 && fx == 0.0 {
        return a;
    }
    let top = a + fx * (b - a);
    let bottom = c + fx * (d - c);
    top + fy * (bottom - top)
}

/// Bilinear resize with pixel-centre alignment.
pub fn resize_bilinear(
    src: &[f64],
    height: usize,
    width: usize,
    new_height: usize,
    new_width: usize,
) -> Vec<f64> {
    let sy = height as f64 / new_height as f64;
    let sx = width as f64 / new_width as f64;
    let mut out = Vec::with_capacity(new_height * new_width);
    for k in 0..new_height {
        let y = (k as f64 + 0.5) * sy - 0.5;
        for l in 0..new_width {
            let x = (l as f64 + 0.5) * sx - 0.5;
            out.push(bilinear(src, height, width, y, x));
        }
    }
    out
}

/// Linear-interpolated percentile (`q` in `[0, 100]`) of `values`.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    percentile_sorted(&sorted, q)
}

/// Percentile of an already sorted slice.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty slice");
    let pos = (q / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let f = pos - lo as f64;
    sorted[lo] + f * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_is_normalized_and_truncated() {
        let k = gaussian_kernel(2.5);
        assert_eq!(k.len(), 2 * 10 + 1);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn blur_preserves_constants() {
        let src = vec![0.3; 40];
        let out = gaussian_blur(&src, 5, 8, 1.7);
        assert!(out.iter().all(|v| (v - 0.3).abs() < 1e-12));
    }

    #[test]
    fn bilinear_matches_hand_value() {
        let src = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(bilinear(&src, 2, 2, 0.5, 0.5), 1.5);
        assert_eq!(bilinear(&src, 2, 2, 1.0, 0.0), 2.0);
        assert_eq!(bilinear(&src, 2, 2, -3.0, 9.0), 1.0);
    }

    #[test]
    fn median_removes_isolated_spike() {
        let mut src = vec![0.2; 25];
        src[12] = 1.0;
        let out = median3x3(&src, 5, 5);
        assert_eq!(out[12], 0.2);
    }

    #[test]
    fn percentile_interpolates() {
        let v = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 100.0), 4.0);
        assert_eq!(percentile(&v, 50.0), 2.5);
    }
}
