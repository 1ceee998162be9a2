pub mod calibrate;
pub mod decode;
pub mod metrics;
pub mod render;
pub mod synth;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use plenoptic::calibrate::{CalibModel, CentroidGrid, Packing};

use crate::failure::{io_failure, IoContext, Result};
use crate::imageio::read_json;

/// Exact lens centres of a synthetic white image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub rows: usize,
    pub cols: usize,
    pub packing: Packing,
    pub hex_row_phase: u8,
    /// Row-major `(k, l)`.
    pub centroids: Vec<[f64; 2]>,
}

impl TruthFile {
    pub fn from_grid(grid: &CentroidGrid) -> Self {
        Self {
            rows: grid.rows(),
            cols: grid.cols(),
            packing: grid.packing(),
            hex_row_phase: grid.hex_row_phase(),
            centroids: grid.entries().to_vec(),
        }
    }

    pub fn grid(&self) -> Result<CentroidGrid> {
        CentroidGrid::new(self.rows, self.cols, self.centroids.clone(), self.packing, self.hex_row_phase)
            .io("truth centroids")
    }
}

pub fn read_calib(path: &Path) -> Result<CalibModel> {
    let model: CalibModel = read_json(path)?;
    model.validate().io(format!("calibration {}", path.display()))?;
    Ok(model)
}

/// The path given on the command line, else the one from the config file.
pub fn required(flag: &Option<PathBuf>, configured: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| configured.clone())
        .ok_or_else(|| io_failure(format!("no {what} given on the command line or in the config")))
}

/// `"x:y"` or `"x:y:z"` as numbers.
pub fn parse_range(text: &str, parts: usize) -> Result<Vec<f64>> {
    let values = text
        .split(':')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .io(format!("range {text:?}"))?;
    if values.len() != parts {
        return Err(io_failure(format!("range {text:?} needs {parts} colon-separated numbers")));
    }
    Ok(values)
}

/// Inclusive arithmetic sweep, rounded to nine decimals so that file names
/// stay stable.
pub fn sweep(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) {
        return Err(io_failure(format!("sweep {start}:{stop}:{step} needs start <= stop and a positive step")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| ((start + k as f64 * step) * 1e9).round() / 1e9 + 0.0).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_includes_both_ends() {
        assert_eq!(sweep(-2.0, 2.0, 1.0).unwrap(), vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
        assert_eq!(sweep(0.0, 0.3, 0.1).unwrap(), vec![0.0, 0.1, 0.2, 0.3]);
        assert!(sweep(1.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn ranges_need_the_stated_arity() {
        assert_eq!(parse_range("-1:2.5", 2).unwrap(), vec![-1.0, 2.5]);
        assert!(parse_range("1:2", 3).is_err());
        assert!(parse_range("a:2", 2).is_err());
    }
}
