use std::path::PathBuf;

use anyhow::anyhow;
use clap::Args;
use serde_json::json;

use plenoptic::calibrate::{calibrate, CalibrateOptions, CalibrationRun, RefineMode};
use plenoptic::metrics::{centroid_deviation, nearest_deviation};

use crate::config::{overlay, PipelineConfig};
use crate::failure::Result;
use crate::imageio::{read_capture, read_json, write_text};
use crate::manifest::Recorder;

use super::{required, TruthFile};

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// White image (PNG or TIFF).
    pub white: Option<PathBuf>,
    /// Calibration JSON to write [default: calib.json].
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Ground-truth centroids (from `synth white --truth`); prints the
    /// deviation after every stage.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Centroid refinement: area or peak.
    #[arg(long)]
    pub refine: Option<RefineMode>,
    /// Grid-fit regularizer weight.
    #[arg(long)]
    pub beta: Option<f64>,
}

pub fn run(args: &CalibrateArgs, mut cfg: PipelineConfig) -> Result<()> {
    let white_path = required(&args.white, &cfg.white, "white image")?;
    cfg.white = Some(white_path.clone());
    let out = args.output.clone().or(cfg.output.clone()).unwrap_or_else(|| "calib.json".into());
    cfg.output = Some(out.clone());
    overlay(&mut cfg.calibrate.refine, args.refine);
    overlay(&mut cfg.calibrate.beta, args.beta);
    let truth = args.truth.as_deref().map(read_json::<TruthFile>).transpose()?;

    let mut rec = Recorder::new("calibrate");
    let white = read_capture(&white_path, cfg.linear, &cfg.outliers)?.image;
    rec.lap("read");
    let opts = CalibrateOptions {
        refine_mode: cfg.calibrate.refine,
        beta: cfg.calibrate.beta,
        ..CalibrateOptions::default()
    };
    let run = calibrate(&white, &opts)
        .map_err(|e| anyhow!("calibration failed in stage {}: {e}", CalibrationRun::failing_stage(&e)))?;
    for (stage, secs) in &run.timings {
        rec.push(stage, *secs);
    }

    let mut details = json!({
        "pitch": run.model.pitch,
        "sigma_star": run.pitch.sigma_star,
        "packing": run.model.packing,
        "rows": run.model.rows,
        "cols": run.model.cols,
        "rotation_rad": run.model.rotation_rad,
        "fit_residual": run.model.fit_residual,
        "refine_fallbacks": run.refined.fallbacks.len(),
    });
    if let Some(truth) = truth {
        let truth = truth.grid()?;
        let fitted = run.model.fitted_grid();
        let sorted = centroid_deviation(&run.grid, &truth).or_else(|_| nearest_deviation(run.grid.entries(), &truth))?;
        let stages = json!({
            "extract": nearest_deviation(&run.extracted.points, &truth)?,
            "refine": nearest_deviation(&run.refined.centroids.points, &truth)?,
            "sort": sorted,
            "fit": centroid_deviation(&fitted, &truth).or_else(|_| nearest_deviation(fitted.entries(), &truth))?,
        });
        for stage in ["extract", "refine", "sort", "fit"] {
            println!("C {stage} {:.6}", stages[stage].as_f64().unwrap_or(f64::NAN));
        }
        details["deviation"] = stages;
    }

    write_text(&out, &run.model.to_json())?;
    rec.output(&out);
    rec.lap("write");
    println!(
        "pitch {} packing {} grid {}x{} residual {:.4}",
        run.model.pitch, run.model.packing, run.model.rows, run.model.cols, run.model.fit_residual
    );
    rec.finish(&out.with_extension("manifest.json"), &cfg, details)
}
