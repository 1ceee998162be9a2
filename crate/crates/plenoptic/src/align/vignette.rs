//! Flat-field correction by plain division or by per-lens polynomial
//! surfaces fitted to the white image.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::calibrate::CalibModel;
use crate::error::{Error, Result};
use crate::image::Image2D;

/// Lower bound applied to the white image before dividing.
pub const DIVISION_FLOOR: f64 = 1e-3;

fn check_pair(raw: &Image2D, white: &Image2D) -> Result<()> {
    if raw.dims() != white.dims() {
        return Err(Error::DimensionMismatch(format!(
            "raw {:?} vs white {:?}",
            raw.dims(),
            white.dims()
        )));
    }
    if white.channels() != 1 && white.channels() != raw.channels() {
        return Err(Error::DimensionMismatch(format!(
            "white has {} channels, raw has {}",
            white.channels(),
            raw.channels()
        )));
    }
    Ok(())
}

fn white_plane(white: &Image2D, c: usize) -> &[f64] {
    white.plane(if white.channels() == 1 { 0 } else { c })
}

/// `raw / max(white, 1e-3)` per pixel; a single-channel white applies to
/// every raw channel. The white image is expected to peak at one.
pub fn devignette_divide(raw: &Image2D, white: &Image2D) -> Result<Image2D> {
    check_pair(raw, white)?;
    let mut out = raw.clone();
    for c in 0..raw.channels() {
        let w = white_plane(white, c).to_vec();
        for (o, w) in out.plane_mut(c).iter_mut().zip(w) {
            *o /= w.max(DIVISION_FLOOR);
        }
    }
    Ok(out)
}

/// Exponent pairs `(a, b)` of the basis `u^a v^b` for a polynomial order:
/// all monomials of total degree at most `order`, plus `u^k v^k` for
/// `k ≤ order`. Order 2 gives `{1, u, v, u², uv, v², u²v²}`.
pub fn basis_terms(order: usize) -> Vec<(u32, u32)> {
    let mut terms = Vec::new();
    for d in 0..=order as u32 {
        for a in (0..=d).rev() {
            terms.push((a, d - a));
        }
    }
    for k in 0..=order as u32 {
        if !terms.contains(&(k, k)) {
            terms.push((k, k));
        }
    }
    terms
}

/// Per-lens result of [`devignette_fit`].
#[derive(Clone, Debug, PartialEq)]
pub struct VignetteFit {
    pub order: usize,
    pub terms: Vec<(u32, u32)>,
    /// Coefficients per channel, lens-major: `coefficients[c][j * H + h]`.
    /// Empty for lenses that fell back to division.
    pub coefficients: Vec<Vec<Vec<f64>>>,
    /// Root-mean-square fit error per channel and lens.
    pub rms: Vec<Vec<f64>>,
    /// Lenses `(j, h)` corrected by division because their fit was rank deficient.
    pub fallbacks: Vec<(usize, usize)>,
    /// Pixels outside every lens cell, corrected by division.
    pub uncovered: usize,
}

/// Assigns every pixel within one pitch of a lens centre to its nearest lens.
fn lens_cells(dims: (usize, usize), centres: &[[f64; 2]], pitch: f64) -> Vec<Vec<usize>> {
    let (kk, ll) = dims;
    let mut best = vec![(f64::INFINITY, usize::MAX); kk * ll];
    let r = pitch;
    for (n, c) in centres.iter().enumerate() {
        let k0 = (c[0] - r).floor().max(0.0) as usize;
        let k1 = ((c[0] + r).ceil().max(0.0) as usize).min(kk.saturating_sub(1));
        let l0 = (c[1] - r).floor().max(0.0) as usize;
        let l1 = ((c[1] + r).ceil().max(0.0) as usize).min(ll.saturating_sub(1));
        for k in k0..=k1 {
            for l in l0..=l1 {
                let d = (k as f64 - c[0]).powi(2) + (l as f64 - c[1]).powi(2);
                if d <= r * r && d < best[k * ll + l].0 {
                    best[k * ll + l] = (d, n);
                }
            }
        }
    }
    let mut cells = vec![Vec::new(); centres.len()];
    for (i, &(_, n)) in best.iter().enumerate() {
        if n != usize::MAX {
            cells[n].push(i);
        }
    }
    cells
}

/// Divides the raw image by per-lens polynomial fits of the white image.
///
/// Each pixel belongs to the nearest fitted lens centre. Coordinates are
/// normalized by half the pitch. The assembled surface is scaled to a peak of
/// one, so a max-normalized white image that lies in the polynomial span
/// yields the same output as [`devignette_divide`]. Lenses with too few
/// pixels or an ill-conditioned system fall back to the white image itself.
pub fn devignette_fit(raw: &Image2D, white: &Image2D, calib: &CalibModel, order: usize) -> Result<(Image2D, VignetteFit)> {
    check_pair(raw, white)?;
    if !(2..=3).contains(&order) {
        return Err(Error::InvalidInput(format!("vignette polynomial order must be 2 or 3, got {order}")));
    }
    let (kk, ll) = raw.dims();
    let terms = basis_terms(order);
    let nt = terms.len();
    let centres: Vec<[f64; 2]> = calib.fitted_grid().entries().to_vec();
    let half = calib.pitch as f64 / 2.0;
    let cells = lens_cells((kk, ll), &centres, calib.pitch as f64);
    let covered: usize = cells.iter().map(Vec::len).sum();

    let mut out = raw.clone();
    let mut coefficients = Vec::new();
    let mut rms = Vec::new();
    let mut fallback_set = std::collections::BTreeSet::new();
    for c in 0..raw.channels() {
        let w = white_plane(white, c);
        let fits: Vec<Option<(Vec<f64>, f64, Vec<f64>)>> = cells
            .par_iter()
            .zip(&centres)
            .map(|(cell, centre)| {
                if cell.len() < nt {
                    return None;
                }
                let a = DMatrix::from_fn(cell.len(), nt, |r, t| {
                    let i = cell[r];
                    let u = ((i / ll) as f64 - centre[0]) / half;
                    let v = ((i % ll) as f64 - centre[1]) / half;
                    let (pa, pb) = terms[t];
                    u.powi(pa as i32) * v.powi(pb as i32)
                });
                let b = DVector::from_iterator(cell.len(), cell.iter().map(|&i| w[i]));
                let ata = a.transpose() * &a;
                let chol = ata.clone().cholesky()?;
                // reject near-singular systems that Cholesky still accepts
                let diag_ratio = chol.l().diagonal().iter().fold(f64::INFINITY, |m, &d| m.min(d.abs()))
                    / chol.l().diagonal().iter().fold(0.0f64, |m, &d| m.max(d.abs()));
                if !(diag_ratio > 1e-7) {
                    return None;
                }
                let coef = chol.solve(&(a.transpose() * &b));
                let surf = &a * &coef;
                let err = (&surf - &b).norm() / (cell.len() as f64).sqrt();
                Some((coef.as_slice().to_vec(), err, surf.as_slice().to_vec()))
            })
            .collect();

        let mut surface = w.to_vec();
        for (cell, fit) in cells.iter().zip(&fits) {
            if let Some((_, _, s)) = fit {
                for (&i, &v) in cell.iter().zip(s) {
                    surface[i] = v;
                }
            }
        }
        let peak = surface.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let norm = if peak > 0.0 { peak } else { 1.0 };
        for (o, s) in out.plane_mut(c).iter_mut().zip(&surface) {
            *o /= (s / norm).max(DIVISION_FLOOR);
        }

        let mut cc = Vec::with_capacity(fits.len());
        let mut rr = Vec::with_capacity(fits.len());
        for (n, fit) in fits.into_iter().enumerate() {
            match fit {
                Some((coef, err, _)) => {
                    cc.push(coef);
                    rr.push(err);
                }
                None => {
                    fallback_set.insert((n / calib.cols, n % calib.cols));
                    cc.push(Vec::new());
                    rr.push(f64::NAN);
                }
            }
        }
        coefficients.push(cc);
        rms.push(rr);
    }
    Ok((
        out,
        VignetteFit {
            order,
            terms,
            coefficients,
            rms,
            fallbacks: fallback_set.into_iter().collect(),
            uncovered: kk * ll - covered,
        },
    ))
}
