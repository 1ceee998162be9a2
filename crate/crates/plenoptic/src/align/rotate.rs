//! In-plane lattice rotation: estimation from the central lens row and
//! compensation about the image centre.

use crate::calibrate::CentroidGrid;
use crate::error::{Error, Result};
use crate::filter::bilinear;
use crate::image::Image2D;

/// Angle of the central lens row against the pixel-row axis, in radians.
///
/// Positive angles mean the row descends (growing `k`) to the right.
pub fn estimate_rotation(grid: &CentroidGrid) -> Result<f64> {
    if grid.cols() < 2 {
        return Err(Error::InvalidInput("rotation needs at least two lenses per row".into()));
    }
    let j = ((grid.rows() as f64 - 1.0) / 2.0).round() as usize;
    let pts: Vec<[f64; 2]> = (0..grid.cols()).map(|h| grid.get(j, h)).collect();
    let n = pts.len() as f64;
    let mk = pts.iter().map(|p| p[0]).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p[1]).sum::<f64>() / n;
    let (mut sll, mut slk) = (0.0, 0.0);
    for p in &pts {
        sll += (p[1] - ml) * (p[1] - ml);
        slk += (p[1] - ml) * (p[0] - mk);
    }
    if !(sll > 1e-12) {
        return Err(Error::InvalidInput("central lens row is degenerate (vertical line)".into()));
    }
    Ok((slk / sll).atan())
}

/// Rotates `p` by `-theta` about `centre`, undoing a lattice rotation of `theta`.
pub fn rotate_point(p: [f64; 2], centre: [f64; 2], theta: f64) -> [f64; 2] {
    let (s, c) = theta.sin_cos();
    let (dk, dl) = (p[0] - centre[0], p[1] - centre[1]);
    [centre[0] + c * dk - s * dl, centre[1] + s * dk + c * dl]
}

/// Rotates the image by `-theta` about its centre (bilinear, clamp-to-edge)
/// and maps the centroids through the same transform.
pub fn apply_rotation(img: &Image2D, grid: &CentroidGrid, theta: f64) -> Result<(Image2D, CentroidGrid)> {
    if !(theta.abs() < 10f64.to_radians()) {
        return Err(Error::InvalidInput(format!(
            "rotation {:.3}° exceeds the supported ±10°",
            theta.to_degrees()
        )));
    }
    if theta == 0.0 {
        return Ok((img.clone(), grid.clone()));
    }
    let (kk, ll) = img.dims();
    let centre = [(kk as f64 - 1.0) / 2.0, (ll as f64 - 1.0) / 2.0];
    let mut out = Image2D::new(kk, ll, img.channels())?;
    for c in 0..img.channels() {
        let src = img.plane(c);
        let dst = out.plane_mut(c);
        for k in 0..kk {
            for l in 0..ll {
                // inverse map: rotate the output position forward by theta
                let q = rotate_point([k as f64, l as f64], centre, -theta);
                dst[k * ll + l] = bilinear(src, kk, ll, q[0], q[1]);
            }
        }
    }
    Ok((out, grid.map(|p| rotate_point(p, centre, theta))))
}
