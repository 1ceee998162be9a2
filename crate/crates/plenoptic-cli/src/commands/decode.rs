use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use plenoptic::extract::Scheme;
use plenoptic::pipeline::{decode, Devignette, Resample};

use crate::config::{overlay, PipelineConfig};
use crate::failure::{io_failure, Result};
use crate::imageio::{read_capture, write_image, write_text, write_views};
use crate::manifest::Recorder;

use super::{read_calib, required};

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// Raw capture: PNG, TIFF, or Bayer TIFF with a JSON sidecar.
    pub raw: Option<PathBuf>,
    /// Calibration JSON from `calibrate`.
    #[arg(long)]
    pub calib: Option<PathBuf>,
    /// White image, needed unless devignetting is off.
    #[arg(long)]
    pub white: Option<PathBuf>,
    /// Output directory [default: decoded].
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// none, divide or fit.
    #[arg(long)]
    pub devignette: Option<Devignette>,
    /// Order of the per-lens vignetting polynomial (2 or 3).
    #[arg(long)]
    pub vignette_order: Option<usize>,
    #[arg(long)]
    pub rotate: Option<bool>,
    /// global or local.
    #[arg(long)]
    pub resample: Option<Resample>,
    /// Repair hexagonal resampling fringes.
    #[arg(long)]
    pub hexfix: Option<bool>,
    /// Fringe threshold relative to the view range.
    #[arg(long)]
    pub tau: Option<f64>,
    /// none, hm, mkl or hm-mkl-hm.
    #[arg(long)]
    pub coloreq: Option<Scheme>,
    #[arg(long)]
    pub range_align: Option<bool>,
    /// Hot-pixel repair of Bayer captures.
    #[arg(long)]
    pub outliers: Option<bool>,
    /// Outlier window parameter n.
    #[arg(long)]
    pub outlier_window: Option<usize>,
}

pub fn run(args: &DecodeArgs, mut cfg: PipelineConfig) -> Result<()> {
    let raw_path = required(&args.raw, &cfg.input, "raw capture")?;
    let calib_path = required(&args.calib, &cfg.calib, "calibration")?;
    overlay(&mut cfg.white, args.white.clone().map(Some));
    let out = args.output.clone().or(cfg.output.clone()).unwrap_or_else(|| "decoded".into());
    cfg.input = Some(raw_path.clone());
    cfg.calib = Some(calib_path.clone());
    cfg.output = Some(out.clone());
    let d = &mut cfg.decode;
    overlay(&mut d.devignette, args.devignette);
    overlay(&mut d.vignette_order, args.vignette_order);
    overlay(&mut d.rotate, args.rotate);
    overlay(&mut d.resample, args.resample);
    overlay(&mut d.hexfix, args.hexfix);
    overlay(&mut d.tau, args.tau);
    overlay(&mut d.coloreq, args.coloreq);
    overlay(&mut d.range_align, args.range_align);
    overlay(&mut cfg.outliers.enabled, args.outliers);
    overlay(&mut cfg.outliers.n, args.outlier_window);
    if cfg.decode.devignette != Devignette::None && cfg.white.is_none() {
        return Err(io_failure("devignetting needs --white (or pass --devignette none)"));
    }

    let mut rec = Recorder::new("decode");
    let calib = read_calib(&calib_path)?;
    let capture = read_capture(&raw_path, cfg.linear, &cfg.outliers)?;
    let white = match (&cfg.white, cfg.decode.devignette) {
        (Some(p), mode) if mode != Devignette::None => Some(read_capture(p, cfg.linear, &cfg.outliers)?.image),
        _ => None,
    };
    rec.lap("read");

    let decoded = decode(&capture.image, white.as_ref(), &calib, &cfg.decode)?;
    for (stage, secs) in &decoded.timings {
        rec.push(stage, *secs);
    }

    let views_dir = out.join("views");
    write_views(&views_dir, &decoded.views, cfg.linear)?;
    rec.output(&views_dir);
    for (name, img) in [("overview.png", decoded.views.stitched()), ("central.png", decoded.views.central().clone())] {
        let path = out.join(name);
        write_image(&path, &img, cfg.linear)?;
        rec.output(&path);
    }
    let aligned = out.join("calib_aligned.json");
    write_text(&aligned, &decoded.calib.to_json())?;
    rec.output(&aligned);
    rec.lap("write");

    let details = json!({
        "views": {
            "pitch": decoded.views.pitch(),
            "rows": decoded.views.rows(),
            "cols": decoded.views.cols(),
            "channels": decoded.views.channels(),
        },
        "fringe_pixels": decoded.fringe_pixels,
        "range": decoded.range.map(|r| json!({"lo": r.lo, "hi": r.hi, "degenerate": r.degenerate})),
        "bayer": capture.bayer,
        "outliers": capture.outliers.map(|r| json!({"candidates": r.candidates, "replaced": r.replaced})),
    });
    println!(
        "{}x{} views of {}x{} px written to {}",
        decoded.views.pitch(),
        decoded.views.pitch(),
        decoded.views.rows(),
        decoded.views.cols(),
        views_dir.display()
    );
    rec.finish(&out.join("manifest.json"), &cfg, details)
}
