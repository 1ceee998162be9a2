//! Run configuration: built-in defaults, overlaid by an optional JSON file,
//! overlaid by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use plenoptic::calibrate::RefineMode;
use plenoptic::pipeline::DecodeOptions;
use plenoptic::render::Direction;

use crate::failure::{IoContext, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub white: Option<PathBuf>,
    pub calib: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// Treat PNG/TIFF samples as linear light instead of sRGB.
    pub linear: bool,
    /// Worker cap; all cores when absent.
    pub threads: Option<usize>,
    /// Overrides the seed of synthetic specs.
    pub seed: Option<u64>,
    pub calibrate: CalibrateSection,
    pub outliers: OutlierSection,
    pub decode: DecodeOptions,
    pub render: RenderSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: None,
            white: None,
            calib: None,
            output: None,
            linear: false,
            threads: None,
            seed: None,
            calibrate: CalibrateSection::default(),
            outliers: OutlierSection::default(),
            decode: DecodeOptions::default(),
            render: RenderSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateSection {
    pub refine: RefineMode,
    /// Grid-fit regularizer weight.
    pub beta: f64,
}

impl Default for CalibrateSection {
    fn default() -> Self {
        Self {
            refine: RefineMode::Area,
            beta: 0.0,
        }
    }
}

/// Hot-pixel repair of Bayer captures before demosaicking.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutlierSection {
    pub enabled: bool,
    /// Window parameter: statistics over `(2n+1)²` pixels.
    pub n: usize,
}

impl Default for OutlierSection {
    fn default() -> Self {
        Self { enabled: true, n: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderSection {
    /// Focus scales to render.
    pub a: Vec<f64>,
    pub refine: usize,
    pub normalize: bool,
    pub scheimpflug: Option<ScheimpflugSection>,
}

impl Default for RenderSection {
    fn default() -> Self {
        Self {
            a: vec![0.0],
            refine: 1,
            normalize: true,
            scheimpflug: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheimpflugSection {
    pub start: f64,
    pub stop: f64,
    pub direction: Direction,
    pub blend: bool,
}

impl Default for ScheimpflugSection {
    fn default() -> Self {
        Self {
            start: 0.0,
            stop: 1.0,
            direction: Direction::Horizontal,
            blend: false,
        }
    }
}

impl PipelineConfig {
    /// Defaults when `path` is absent, otherwise the file over the defaults.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).io(format!("reading config {}", p.display()))?;
                serde_json::from_str(&text).io(format!("parsing config {}", p.display()))
            }
        }
    }
}

/// Replaces `slot` when the flag was given.
pub fn overlay<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_remaining_defaults() {
        let cfg: PipelineConfig = serde_json::from_str(r#"{"decode": {"hexfix": false}, "render": {"a": [1, 2]}}"#).unwrap();
        assert!(!cfg.decode.hexfix);
        assert!(cfg.decode.rotate);
        assert_eq!(cfg.render.a, vec![1.0, 2.0]);
        assert_eq!(cfg.outliers, OutlierSection::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"decod": {}}"#).is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let mut cfg = PipelineConfig::default();
        cfg.render.scheimpflug = Some(ScheimpflugSection::default());
        cfg.decode.coloreq = plenoptic::extract::Scheme::Mkl;
        let back: PipelineConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
