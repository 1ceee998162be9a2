//! Persisted calibration result.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::fit::{canonical_point, project};
use super::{CentroidGrid, Packing};

pub const SCHEMA_VERSION: u32 = 1;

/// Lattice geometry, fitted homography and measured centroids of one
/// micro-lens array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibModel {
    pub schema: u32,
    /// Micro-image diameter in pixels, odd.
    pub pitch: usize,
    pub packing: Packing,
    #[serde(rename = "J")]
    pub rows: usize,
    #[serde(rename = "H")]
    pub cols: usize,
    /// Which hexagonal rows carry the half-pitch shift; see [`CentroidGrid`].
    pub hex_row_phase: u8,
    /// Row-major 3×3 map from the canonical grid to sensor `(k, l)`.
    pub homography: [f64; 9],
    pub rotation_rad: f64,
    /// Measured centroids, row-major.
    pub centroids: Vec<[f64; 2]>,
    /// Largest distance between a measured centroid and its fitted position.
    pub fit_residual: f64,
}

impl CalibModel {
    pub fn new(grid: CentroidGrid, pitch: usize, homography: [f64; 9], rotation_rad: f64, fit_residual: f64) -> Result<Self> {
        let model = Self {
            schema: SCHEMA_VERSION,
            pitch,
            packing: grid.packing(),
            rows: grid.rows(),
            cols: grid.cols(),
            hex_row_phase: grid.hex_row_phase(),
            homography,
            rotation_rad,
            centroids: grid.entries().to_vec(),
            fit_residual,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported calibration schema {} (expected {SCHEMA_VERSION})",
                self.schema
            )));
        }
        if self.pitch % 2 == 0 {
            return Err(Error::EvenPitch(self.pitch));
        }
        if self.centroids.len() != self.rows * self.cols {
            return Err(Error::DimensionMismatch(format!(
                "{} centroids for a {}x{} grid",
                self.centroids.len(),
                self.rows,
                self.cols
            )));
        }
        if self.hex_row_phase > 1 {
            return Err(Error::InvalidInput("hex_row_phase must be 0 or 1".into()));
        }
        if self.homography.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("homography".into()));
        }
        if self.matrix().determinant().abs() <= 1e-12 {
            return Err(Error::Singular("calibration homography".into()));
        }
        Ok(())
    }

    pub fn matrix(&self) -> nalgebra::Matrix3<f64> {
        nalgebra::Matrix3::from_row_slice(&self.homography)
    }

    /// Measured centroids as a grid.
    pub fn grid(&self) -> CentroidGrid {
        CentroidGrid::new(self.rows, self.cols, self.centroids.clone(), self.packing, self.hex_row_phase)
            .expect("validated model")
    }

    /// Sensor position of lens `(j, h)` predicted by the homography.
    pub fn predicted(&self, j: usize, h: usize) -> [f64; 2] {
        project(
            &self.homography,
            canonical_point(j, h, self.rows, self.cols, self.packing, self.hex_row_phase),
        )
    }

    /// Fitted centroids `ĉ★` as a grid.
    pub fn fitted_grid(&self) -> CentroidGrid {
        self.grid().map_indexed(|j, h| self.predicted(j, h))
    }

    /// Pretty JSON with a trailing newline; stable key order.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plain data serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self =
            serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("calibration JSON: {e}")))?;
        model.validate()?;
        Ok(model)
    }
}
