//! White-image calibration: pitch estimation, centroid detection and
//! refinement, lattice sorting and projective grid fitting.

mod centroids;
mod fit;
mod model;
mod pyramid;
mod sort;

pub use centroids::{blob_response, extract_centroids, refine_centroids, RefineMode, Refined};
pub use fit::{
    canonical_grid, canonical_point, fit_grid, fit_grid_with, project, FitOptions, GridFitState,
};
pub use model::{CalibModel, SCHEMA_VERSION};
pub use pyramid::{
    build_pyramid, estimate_pitch, force_odd, lattice_spacing, scale_to_pitch, PitchEstimate,
    PyramidLevel, ScaleSpacePyramid,
};
pub use sort::{classify_packing, merge_duplicates, sort_centroids, PackingReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image2D;

/// Gaussian smoothing of the white image before refinement, in pixels.
const REFINE_SMOOTHING: f64 = 1.0;

/// Micro-lens lattice geometry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Packing {
    Hexagonal,
    Rectangular,
}

impl std::fmt::Display for Packing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Packing::Hexagonal => "hexagonal",
            Packing::Rectangular => "rectangular",
        })
    }
}

/// Unordered sub-pixel centroids `(k, l)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CentroidSet {
    pub points: Vec<[f64; 2]>,
}

impl CentroidSet {
    pub fn new(points: Vec<[f64; 2]>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Centroids indexed by lens row `j` and column `h`.
///
/// For hexagonal grids, row `j` is displaced by half a pitch to the right of
/// its neighbours when `(j + hex_row_phase)` is odd.
#[derive(Clone, Debug, PartialEq)]
pub struct CentroidGrid {
    rows: usize,
    cols: usize,
    entries: Vec<[f64; 2]>,
    packing: Packing,
    hex_row_phase: u8,
}

impl CentroidGrid {
    /// `entries` in row-major order.
    pub fn new(
        rows: usize,
        cols: usize,
        entries: Vec<[f64; 2]>,
        packing: Packing,
        hex_row_phase: u8,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput("grid must have at least one lens".into()));
        }
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} grid needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if hex_row_phase > 1 {
            return Err(Error::InvalidInput("hex_row_phase must be 0 or 1".into()));
        }
        Ok(Self {
            rows,
            cols,
            entries,
            packing,
            hex_row_phase,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn packing(&self) -> Packing {
        self.packing
    }

    pub fn hex_row_phase(&self) -> u8 {
        self.hex_row_phase
    }

    pub fn get(&self, j: usize, h: usize) -> [f64; 2] {
        self.entries[j * self.cols + h]
    }

    pub fn entries(&self) -> &[[f64; 2]] {
        &self.entries
    }

    /// Whether row `j` carries the half-pitch shift.
    pub fn is_shifted(&self, j: usize) -> bool {
        row_shifted(self.packing, self.hex_row_phase, j)
    }

    /// Copy with every entry mapped by `f`.
    pub fn map(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> CentroidGrid {
        CentroidGrid {
            entries: self.entries.iter().map(|&p| f(p)).collect(),
            ..self.clone()
        }
    }

    /// Copy with entry `(j, h)` replaced by `f(j, h)`.
    pub fn map_indexed(&self, f: impl Fn(usize, usize) -> [f64; 2]) -> CentroidGrid {
        CentroidGrid {
            entries: (0..self.rows)
                .flat_map(|j| (0..self.cols).map(move |h| (j, h)))
                .map(|(j, h)| f(j, h))
                .collect(),
            ..self.clone()
        }
    }

    pub fn to_set(&self) -> CentroidSet {
        CentroidSet::new(self.entries.clone())
    }
}

pub(crate) fn row_shifted(packing: Packing, phase: u8, j: usize) -> bool {
    packing == Packing::Hexagonal && (j + phase as usize) % 2 == 1
}

/// Image that centroid refinement operates on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RefineSource {
    /// The white image smoothed with a one-pixel Gaussian. Unlike the
    /// coarse-scale blob response it is not skewed at the lattice border,
    /// where micro images lack neighbours on one side.
    #[default]
    SmoothedWhite,
    /// The blob response at `σ★` used for extraction.
    BlobResponse,
}

/// Settings for [`calibrate`].
#[derive(Clone, Debug, Default)]
pub struct CalibrateOptions {
    pub refine_mode: RefineMode,
    pub refine_source: RefineSource,
    /// Regularizer weight of the grid fit; zero disables it.
    pub beta: f64,
}

/// Every intermediate product of a calibration run.
#[derive(Clone, Debug)]
pub struct CalibrationRun {
    pub pitch: PitchEstimate,
    pub extracted: CentroidSet,
    pub refined: Refined,
    pub grid: CentroidGrid,
    pub report: PackingReport,
    pub model: CalibModel,
    pub fit: GridFitState,
    /// `(stage, seconds)` for pitch, extract, refine, sort and fit.
    pub timings: Vec<(String, f64)>,
}

impl CalibrationRun {
    /// Name of the stage that raises `err`.
    pub fn failing_stage(err: &Error) -> &'static str {
        match err {
            Error::NoDominantScale { .. } => "pitch",
            Error::NoCentroids => "extract",
            Error::AmbiguousPacking { .. } | Error::InconsistentLattice(_) => "sort",
            Error::Divergence { .. } | Error::Singular(_) => "fit",
            _ => "input",
        }
    }
}

/// Runs pitch estimation, extraction, refinement, sorting and fitting on a
/// white image.
pub fn calibrate(white: &Image2D, opts: &CalibrateOptions) -> Result<CalibrationRun> {
    let mut timings = Vec::new();
    let mut clock = std::time::Instant::now();
    let mut lap = |stage: &str| {
        let now = std::time::Instant::now();
        timings.push((stage.to_string(), (now - clock).as_secs_f64()));
        clock = now;
    };
    let white = white.luma();
    let pitch = estimate_pitch(&white)?;
    lap("pitch");
    let response = blob_response(&white, pitch.sigma_star);
    let extracted = centroids::maxima(&response)?;
    lap("extract");
    let source = match opts.refine_source {
        RefineSource::BlobResponse => response,
        RefineSource::SmoothedWhite => {
            let (k, l) = white.dims();
            Image2D::from_vec(k, l, 1, crate::filter::gaussian_blur(white.plane(0), k, l, REFINE_SMOOTHING))?
        }
    };
    let refined = refine_centroids(&source, &extracted, pitch.pitch, opts.refine_mode);
    lap("refine");
    let (grid, report) = sort_centroids(&refined.centroids, white.dims())?;
    lap("sort");
    let (model, fit) = fit_grid(&grid, pitch.pitch, opts.beta)?;
    lap("fit");
    Ok(CalibrationRun {
        pitch,
        extracted,
        refined,
        grid,
        report,
        model,
        fit,
        timings,
    })
}
