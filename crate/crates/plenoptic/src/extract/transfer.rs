//! Linear colour transfer between Gaussian-modelled colour distributions.
//!
//! A transfer maps source colours `r` to `M (r - μ_src) + μ_tgt`. The
//! Monge–Kantorovich matrix depends on the two covariances only; the analytic
//! matrix is a pseudo-inverse solution over pixel-aligned source and target
//! images.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::error::{Error, Result};
use crate::image::Image2D;

/// Eigenvalues are floored here before square roots and inverses.
const EIGEN_FLOOR: f64 = 1e-10;
/// Ridge added to every covariance.
const RIDGE: f64 = 1e-8;

/// Mean and covariance (normalized by the sample count) of RGB samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColorStats {
    pub mean: [f64; 3],
    pub cov: [[f64; 3]; 3],
}

fn check_rgb(img: &Image2D) -> Result<()> {
    if img.channels() < 3 {
        return Err(Error::InvalidInput(format!(
            "colour transfer needs at least 3 channels, got {}",
            img.channels()
        )));
    }
    Ok(())
}

impl ColorStats {
    /// Statistics of the first three channels.
    pub fn from_image(img: &Image2D) -> Result<Self> {
        check_rgb(img)?;
        let n = img.plane_len();
        let planes = [img.plane(0), img.plane(1), img.plane(2)];
        let mut mean = [0.0; 3];
        for (m, p) in mean.iter_mut().zip(&planes) {
            *m = p.iter().sum::<f64>() / n as f64;
        }
        let mut cov = [[0.0; 3]; 3];
        for i in 0..n {
            let d = [planes[0][i] - mean[0], planes[1][i] - mean[1], planes[2][i] - mean[2]];
            for a in 0..3 {
                for b in a..3 {
                    cov[a][b] += d[a] * d[b];
                }
            }
        }
        for a in 0..3 {
            for b in a..3 {
                cov[a][b] /= n as f64;
                cov[b][a] = cov[a][b];
            }
        }
        Ok(Self { mean, cov })
    }

    pub fn cov_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.cov[r][c])
    }

    pub fn mean_vector(&self) -> Vector3<f64> {
        Vector3::from(self.mean)
    }
}

/// `f(Σ)` for a symmetric matrix via its eigendecomposition, with eigenvalues
/// floored at [`EIGEN_FLOOR`].
fn sym_fn(m: &Matrix3<f64>, f: impl Fn(f64) -> f64) -> Matrix3<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let d = Matrix3::from_diagonal(&eig.eigenvalues.map(|v| f(v.max(EIGEN_FLOOR))));
    eig.eigenvectors * d * eig.eigenvectors.transpose()
}

fn regularized(s: &ColorStats) -> Matrix3<f64> {
    s.cov_matrix() + Matrix3::identity() * RIDGE
}

/// Monge–Kantorovich transfer matrix taking `src` covariance to `tgt`:
/// `Σs^-½ (Σs^½ Σt Σs^½)^½ Σs^-½`.
pub fn mkl_matrix(src: &ColorStats, tgt: &ColorStats) -> Matrix3<f64> {
    let s = regularized(src);
    let t = regularized(tgt);
    let s_half = sym_fn(&s, f64::sqrt);
    let s_inv_half = sym_fn(&s, |v| 1.0 / v.sqrt());
    let inner = sym_fn(&(s_half * t * s_half), f64::sqrt);
    s_inv_half * inner * s_inv_half
}

/// Transfer matrix for pixel-aligned `src` and `tgt` images.
///
/// With one row per pixel, `P = (Z - μz)ᵀ Σz⁻¹` and `Q = (R - μr)ᵀ Σr⁻¹`, the
/// matrix is `P⁺ Q = (PᵀP)⁻¹ PᵀQ`. Both products are accumulated as 3×3
/// sums, so memory stays independent of the image size.
pub fn analytic_matrix(src: &Image2D, tgt: &Image2D) -> Result<Matrix3<f64>> {
    check_rgb(src)?;
    check_rgb(tgt)?;
    if src.dims() != tgt.dims() {
        return Err(Error::DimensionMismatch(format!(
            "analytic transfer needs aligned images, got {:?} and {:?}",
            src.dims(),
            tgt.dims()
        )));
    }
    let ss = ColorStats::from_image(src)?;
    let ts = ColorStats::from_image(tgt)?;
    let s_inv = sym_fn(&regularized(&ss), |v| 1.0 / v);
    let t_inv = sym_fn(&regularized(&ts), |v| 1.0 / v);
    let (sp, tp) = ([src.plane(0), src.plane(1), src.plane(2)], [tgt.plane(0), tgt.plane(1), tgt.plane(2)]);
    let (mut ptp, mut ptq) = (Matrix3::zeros(), Matrix3::zeros());
    for i in 0..src.plane_len() {
        let r = Vector3::new(sp[0][i], sp[1][i], sp[2][i]) - ss.mean_vector();
        let z = Vector3::new(tp[0][i], tp[1][i], tp[2][i]) - ts.mean_vector();
        let p = t_inv * z;
        let q = s_inv * r;
        ptp += p * p.transpose();
        ptq += p * q.transpose();
    }
    ptp.cholesky()
        .map(|c| c.solve(&ptq))
        .ok_or_else(|| Error::Singular("target colours span fewer than three dimensions".into()))
}

/// Applies `M (r - μ_src) + μ_tgt` to the first three channels; extra
/// channels are copied.
pub fn apply_linear(src: &Image2D, m: &Matrix3<f64>, src_mean: &[f64; 3], tgt_mean: &[f64; 3]) -> Result<Image2D> {
    let mut out = src.clone();
    apply_linear_in_place(&mut out, m, src_mean, tgt_mean)?;
    Ok(out)
}

pub(crate) fn apply_linear_in_place(
    img: &mut Image2D,
    m: &Matrix3<f64>,
    src_mean: &[f64; 3],
    tgt_mean: &[f64; 3],
) -> Result<()> {
    check_rgb(img)?;
    let n = img.plane_len();
    let data = img.data_mut();
    let (r, rest) = data.split_at_mut(n);
    let (g, rest) = rest.split_at_mut(n);
    let b = &mut rest[..n];
    for i in 0..n {
        let d = Vector3::new(r[i] - src_mean[0], g[i] - src_mean[1], b[i] - src_mean[2]);
        let o = m * d;
        r[i] = o[0] + tgt_mean[0];
        g[i] = o[1] + tgt_mean[1];
        b[i] = o[2] + tgt_mean[2];
    }
    Ok(())
}

/// Monge–Kantorovich transfer of `src` onto the target statistics.
pub fn mkl_transfer(src: &Image2D, tgt: &ColorStats) -> Result<Image2D> {
    let ss = ColorStats::from_image(src)?;
    apply_linear(src, &mkl_matrix(&ss, tgt), &ss.mean, &tgt.mean)
}

/// Least-squares linear transfer of `src` onto the pixel-aligned `tgt`.
pub fn analytic_transfer(src: &Image2D, tgt: &Image2D) -> Result<Image2D> {
    let ss = ColorStats::from_image(src)?;
    let ts = ColorStats::from_image(tgt)?;
    apply_linear(src, &analytic_matrix(src, tgt)?, &ss.mean, &ts.mean)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(seed: f64) -> Image2D {
        Image2D::from_fn(24, 32, 3, |k, l, c| {
            let x = k as f64 * 0.37 + l as f64 * 0.11 + seed;
            0.5 + 0.2 * (x + c as f64).sin() + 0.1 * (1.7 * x * (c + 1) as f64).cos()
        })
        .unwrap()
    }

    #[test]
    fn identical_statistics_give_identity() {
        let s = ColorStats::from_image(&textured(0.0)).unwrap();
        let m = mkl_matrix(&s, &s);
        assert!((m - Matrix3::identity()).abs().max() < 1e-5);
        let img = textured(0.0);
        let a = analytic_matrix(&img, &img).unwrap();
        assert!((a - Matrix3::identity()).abs().max() < 1e-5);
    }

    #[test]
    fn mkl_maps_covariance_onto_target() {
        let src = ColorStats::from_image(&textured(0.0)).unwrap();
        let tgt = ColorStats::from_image(&textured(1.3).map(|v| 0.3 + 0.5 * v * v)).unwrap();
        let m = mkl_matrix(&src, &tgt);
        let mapped = m * regularized(&src) * m.transpose();
        assert!((mapped - regularized(&tgt)).abs().max() < 1e-6);
        // the MKL solution is symmetric positive definite
        assert!((m - m.transpose()).abs().max() < 1e-9);
    }

    #[test]
    fn analytic_recovers_known_linear_map() {
        let src = textured(0.4);
        let truth = Matrix3::new(0.9, 0.1, 0.0, -0.05, 1.1, 0.02, 0.0, 0.2, 0.7);
        let tgt = apply_linear(&src, &truth, &[0.0; 3], &[0.0; 3]).unwrap();
        let m = analytic_matrix(&src, &tgt).unwrap();
        assert!((m - truth).abs().max() < 1e-5, "{m}");
    }

    #[test]
    fn single_channel_is_rejected() {
        assert!(ColorStats::from_image(&Image2D::filled(2, 2, 1, 0.0).unwrap()).is_err());
    }
}
