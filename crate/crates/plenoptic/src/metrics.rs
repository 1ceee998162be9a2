//! Quality scores: centroid deviation, histogram distances, PSNR and a
//! spectral sharpness ratio.

use rustfft::{num_complex::Complex, FftPlanner};

use crate::calibrate::CentroidGrid;
use crate::error::{Error, Result};
use crate::extract::{ChannelHistogram, BINS};
use crate::image::Image2D;

/// Mean Euclidean distance between corresponding centroids.
pub fn centroid_deviation(est: &CentroidGrid, truth: &CentroidGrid) -> Result<f64> {
    if (est.rows(), est.cols()) != (truth.rows(), truth.cols()) {
        return Err(Error::DimensionMismatch(format!(
            "estimate is {}x{}, truth is {}x{}",
            est.rows(),
            est.cols(),
            truth.rows(),
            truth.cols()
        )));
    }
    let sum: f64 = est
        .entries()
        .iter()
        .zip(truth.entries())
        .map(|(a, b)| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt())
        .sum();
    Ok(sum / truth.entries().len() as f64)
}

/// Mean distance from each true centroid to its nearest estimate, for
/// unsorted point sets.
pub fn nearest_deviation(est: &[[f64; 2]], truth: &CentroidGrid) -> Result<f64> {
    if est.is_empty() {
        return Err(Error::NoCentroids);
    }
    let sum: f64 = truth
        .entries()
        .iter()
        .map(|t| {
            est.iter()
                .map(|e| (e[0] - t[0]).powi(2) + (e[1] - t[1]).powi(2))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .sum();
    Ok(sum / truth.entries().len() as f64)
}

/// First Wasserstein distance between the value distributions of two
/// samples, `Σ |F_r − F_z|` times the bin width over [`BINS`] bins of `[0, 1]`.
pub fn wasserstein_w1(r: &[f64], z: &[f64]) -> f64 {
    let hr = ChannelHistogram::from_values(r, BINS);
    let hz = ChannelHistogram::from_values(z, BINS);
    hr.cdf().iter().zip(hz.cdf()).map(|(a, b)| (a - b).abs()).sum::<f64>() / BINS as f64
}

fn check_same_shape(a: &Image2D, b: &Image2D) -> Result<()> {
    if (a.dims(), a.channels()) != (b.dims(), b.channels()) {
        return Err(Error::DimensionMismatch(format!(
            "{:?}x{} vs {:?}x{}",
            a.dims(),
            a.channels(),
            b.dims(),
            b.channels()
        )));
    }
    Ok(())
}

/// [`wasserstein_w1`] per channel.
pub fn w1_channels(r: &Image2D, z: &Image2D) -> Result<Vec<f64>> {
    if r.channels() != z.channels() {
        return Err(Error::DimensionMismatch("channel counts differ".into()));
    }
    Ok((0..r.channels()).map(|c| wasserstein_w1(r.plane(c), z.plane(c))).collect())
}

/// Euclidean norm of the difference between the concatenated per-channel
/// normalized histograms.
pub fn hist_distance_d2(r: &Image2D, z: &Image2D) -> Result<f64> {
    if r.channels() != z.channels() {
        return Err(Error::DimensionMismatch("channel counts differ".into()));
    }
    let mut sum = 0.0;
    for c in 0..r.channels() {
        let hr = ChannelHistogram::from_values(r.plane(c), BINS);
        let hz = ChannelHistogram::from_values(z.plane(c), BINS);
        sum += hr.pdf().iter().zip(hz.pdf()).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    }
    Ok(sum.sqrt())
}

/// Peak signal-to-noise ratio in dB with both images scaled from `[0, 1]`
/// to `[0, 255]`. Identical images give `f64::INFINITY`.
pub fn psnr(test: &Image2D, truth: &Image2D) -> Result<f64> {
    check_same_shape(test, truth)?;
    let n = test.data().len() as f64;
    let mse = test
        .data()
        .iter()
        .zip(truth.data())
        .map(|(a, b)| (255.0 * (a - b)).powi(2))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (255.0 / mse.sqrt()).log10())
}

/// Region and low-frequency limits for [`sharpness`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SharpnessConfig {
    /// `(k0, k1, l0, l1)` half-open crop; the whole image when `None`.
    pub crop: Option<(usize, usize, usize, usize)>,
    /// `(horizontal, vertical)` low-frequency limits; one twentieth of the
    /// crop size (at least one) when `None`.
    pub low: Option<(usize, usize)>,
}

/// Output of [`sharpness`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sharpness {
    /// High-frequency share of spectral energy, in `[0, 1]`.
    pub value: f64,
    pub total_energy: f64,
    pub high_energy: f64,
    /// The crop had no energy outside DC; `value` is zero by convention.
    pub flat: bool,
}

/// Fraction of spectral energy above a low-frequency block.
///
/// The squared magnitudes of the unnormalized 2-D DFT of the crop's luma are
/// summed over frequencies `1..=⌈w/2⌉` horizontally and `1..=⌈h/2⌉`
/// vertically (total energy); the block `1..=Q_H × 1..=Q_V` is subtracted to
/// get the high-frequency energy.
pub fn sharpness(img: &Image2D, cfg: &SharpnessConfig) -> Result<Sharpness> {
    let (kk, ll) = img.dims();
    let (k0, k1, l0, l1) = cfg.crop.unwrap_or((0, kk, 0, ll));
    if !(k0 < k1 && k1 <= kk && l0 < l1 && l1 <= ll) {
        return Err(Error::InvalidInput(format!("crop ({k0}, {k1}, {l0}, {l1}) is outside {kk}x{ll}")));
    }
    let (h, w) = (k1 - k0, l1 - l0);
    let luma = img.luma();
    let y = luma.plane(0);
    let mut buf: Vec<Complex<f64>> = (k0..k1)
        .flat_map(|k| (l0..l1).map(move |l| Complex::new(y[k * ll + l], 0.0)))
        .collect();

    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft_forward(w);
    buf.chunks_exact_mut(w).for_each(|row| row_fft.process(row));
    let col_fft = planner.plan_fft_forward(h);
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for l in 0..w {
        for k in 0..h {
            col[k] = buf[k * w + l];
        }
        col_fft.process(&mut col);
        for k in 0..h {
            buf[k * w + l] = col[k];
        }
    }

    let omega = w.div_ceil(2).min(w - 1);
    let psi = h.div_ceil(2).min(h - 1);
    let (qh, qv) = cfg.low.unwrap_or((
        ((0.05 * w as f64).round() as usize).max(1),
        ((0.05 * h as f64).round() as usize).max(1),
    ));
    let (qh, qv) = (qh.min(omega), qv.min(psi));
    let energy = |kmax: usize, lmax: usize| -> f64 {
        (1..=kmax)
            .flat_map(|k| (1..=lmax).map(move |l| (k, l)))
            .map(|(k, l)| buf[k * w + l].norm_sqr())
            .sum()
    };
    let total = energy(psi, omega);
    let high = (total - energy(qv, qh)).max(0.0);
    if !(total > 0.0) {
        return Ok(Sharpness {
            value: 0.0,
            total_energy: 0.0,
            high_energy: 0.0,
            flat: true,
        });
    }
    Ok(Sharpness {
        value: (high / total).clamp(0.0, 1.0),
        total_energy: total,
        high_energy: high,
        flat: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibrate::Packing;

    #[test]
    fn deviation_of_uniform_offset() {
        let truth = CentroidGrid::new(2, 2, vec![[0.0, 0.0], [0.0, 5.0], [5.0, 0.0], [5.0, 5.0]], Packing::Rectangular, 0).unwrap();
        let est = truth.map(|p| [p[0] + 0.3, p[1] + 0.4]);
        assert!((centroid_deviation(&est, &truth).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(centroid_deviation(&truth, &truth).unwrap(), 0.0);
        assert!((nearest_deviation(est.entries(), &truth).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn w1_of_point_masses() {
        assert!((wasserstein_w1(&[0.2; 50], &[0.7; 50]) - 0.5).abs() < 1e-9);
        let v: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        assert_eq!(wasserstein_w1(&v, &v), 0.0);
    }

    #[test]
    fn d2_of_disjoint_deltas() {
        let a = Image2D::filled(4, 4, 1, 0.2).unwrap();
        let b = Image2D::filled(4, 4, 1, 0.7).unwrap();
        assert!((hist_distance_d2(&a, &b).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(hist_distance_d2(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn psnr_closed_forms() {
        let a = Image2D::filled(3, 3, 3, 0.5).unwrap();
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let b = a.map(|v| v + 1.0 / 255.0);
        assert!((psnr(&b, &a).unwrap() - 20.0 * 255f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn sharpness_extremes() {
        let flat = Image2D::filled(16, 16, 1, 0.4).unwrap();
        let s = sharpness(&flat, &SharpnessConfig::default()).unwrap();
        assert!(s.flat && s.value == 0.0);
        let checker = Image2D::from_fn(32, 32, 1, |k, l, _| ((k + l) % 2) as f64).unwrap();
        assert!(sharpness(&checker, &SharpnessConfig::default()).unwrap().value >= 0.99);
    }

    #[test]
    fn crop_bounds_are_checked() {
        let img = Image2D::filled(8, 8, 1, 0.0).unwrap();
        let cfg = SharpnessConfig {
            crop: Some((0, 9, 0, 4)),
            low: None,
        };
        assert!(sharpness(&img, &cfg).is_err());
    }
}
