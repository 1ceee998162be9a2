use std::path::PathBuf;

use clap::{Args, Subcommand};
use serde_json::json;

use plenoptic::align::{mosaic, BayerPattern};
use plenoptic::calibrate::Packing;
use plenoptic::synth::{
    scene_calibration, scene_white, synth_scene, synth_white, ScenePlane, SceneSpec, SynthSpec, Texture,
};
use plenoptic::lf_to_views;

use crate::config::{overlay, PipelineConfig};
use crate::failure::Result;
use crate::imageio::{read_json, sidecar_path, write_image, write_json, write_text, write_views, BayerSidecar};
use crate::manifest::Recorder;

use super::TruthFile;

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// White image of a tilted lens lattice, with exact centres.
    White(WhiteArgs),
    /// Lenslet capture of a layered scene with its white image, exact
    /// calibration and truth views.
    Scene(SceneArgs),
}

#[derive(Debug, Args)]
pub struct WhiteArgs {
    /// Image to write [default: white.png].
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// JSON lattice description; flags override its fields.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Where to write the exact centroids.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub pitch: Option<f64>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    /// hexagonal or rectangular.
    #[arg(long, value_parser = parse_packing)]
    pub packing: Option<Packing>,
    /// Additive Gaussian noise standard deviation.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub micro_vignette: Option<f64>,
    /// In-plane rotation in degrees.
    #[arg(long, allow_negative_numbers = true)]
    pub rotation: Option<f64>,
}

fn parse_packing(s: &str) -> std::result::Result<Packing, String> {
    match s.to_ascii_lowercase().as_str() {
        "hexagonal" | "hex" => Ok(Packing::Hexagonal),
        "rectangular" | "rect" => Ok(Packing::Rectangular),
        other => Err(format!("unknown packing {other:?}; expected hexagonal or rectangular")),
    }
}

#[derive(Debug, Args)]
pub struct SceneArgs {
    /// Output directory [default: scene].
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// JSON scene description; flags override its fields.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Odd lens pitch.
    #[arg(long)]
    pub pitch: Option<usize>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long)]
    pub micro_vignette: Option<f64>,
    /// Also write the capture as a 16-bit Bayer TIFF with this pattern.
    #[arg(long)]
    pub bayer: Option<BayerPattern>,
}

/// Seven-pixel lenses over a 32×40 grid showing one textured plane.
fn default_scene(seed: u64) -> SceneSpec {
    SceneSpec {
        pitch: 7,
        rows: 32,
        cols: 40,
        channels: 3,
        planes: vec![ScenePlane {
            texture: Texture::random(seed, 8, 0.02, 0.1),
            disparity: 0.5,
            region: None,
        }],
        micro_vignette: 0.5,
        aperture_samples: 1,
    }
}

pub fn run(cmd: &SynthCommand, cfg: PipelineConfig) -> Result<()> {
    match cmd {
        SynthCommand::White(args) => white(args, cfg),
        SynthCommand::Scene(args) => scene(args, cfg),
    }
}

fn white(args: &WhiteArgs, mut cfg: PipelineConfig) -> Result<()> {
    let out = args.output.clone().or(cfg.output.clone()).unwrap_or_else(|| "white.png".into());
    cfg.output = Some(out.clone());
    let mut spec: SynthSpec = args.spec.as_deref().map(read_json).transpose()?.unwrap_or_default();
    overlay(&mut spec.pitch, args.pitch);
    overlay(&mut spec.rows, args.rows);
    overlay(&mut spec.cols, args.cols);
    overlay(&mut spec.packing, args.packing);
    overlay(&mut spec.noise, args.noise);
    overlay(&mut spec.micro_vignette, args.micro_vignette);
    overlay(&mut spec.tilt_deg[0], args.rotation);
    overlay(&mut spec.seed, cfg.seed);

    let mut rec = Recorder::new("synth white");
    let w = synth_white(&spec)?;
    rec.lap("render");
    write_image(&out, &w.image, cfg.linear)?;
    rec.output(&out);
    if let Some(t) = &args.truth {
        write_json(t, &TruthFile::from_grid(&w.truth))?;
        rec.output(t);
    }
    rec.lap("write");
    println!("{}x{} white image written to {}", w.image.height(), w.image.width(), out.display());
    rec.finish(&out.with_extension("manifest.json"), &cfg, json!({ "spec": spec }))
}

fn scene(args: &SceneArgs, mut cfg: PipelineConfig) -> Result<()> {
    let out = args.output.clone().or(cfg.output.clone()).unwrap_or_else(|| "scene".into());
    cfg.output = Some(out.clone());
    let mut spec = match &args.spec {
        Some(p) => read_json(p)?,
        None => default_scene(cfg.seed.unwrap_or(0)),
    };
    overlay(&mut spec.pitch, args.pitch);
    overlay(&mut spec.rows, args.rows);
    overlay(&mut spec.cols, args.cols);
    overlay(&mut spec.micro_vignette, args.micro_vignette);

    let mut rec = Recorder::new("synth scene");
    let (raw, truth) = synth_scene(&spec)?;
    let white = scene_white(&spec)?;
    let calib = scene_calibration(&spec)?;
    rec.lap("render");

    let mut files = vec![out.join("raw.png"), out.join("white.png")];
    write_image(&files[0], &raw, cfg.linear)?;
    write_image(&files[1], &white, cfg.linear)?;
    if let Some(pattern) = args.bayer {
        // sensor data is linear, so the sidecar gamma is one
        let tiff = out.join("raw.tiff");
        write_image(&tiff, mosaic(&raw, pattern)?.mosaic(), true)?;
        write_json(&sidecar_path(&tiff), &BayerSidecar { pattern, gamma: 1.0 })?;
        files.push(tiff);
    }
    let calib_path = out.join("calib.json");
    write_text(&calib_path, &calib.to_json())?;
    write_json(&out.join("scene.json"), &spec)?;
    let truth_dir = out.join("truth");
    write_views(&truth_dir, &lf_to_views(&truth), cfg.linear)?;
    files.extend([calib_path, out.join("scene.json"), truth_dir]);
    for f in &files {
        rec.output(f);
    }
    rec.lap("write");
    println!("{}x{} capture written to {}", raw.height(), raw.width(), out.display());
    rec.finish(&out.join("manifest.json"), &cfg, json!({ "pitch": spec.pitch, "rows": spec.rows, "cols": spec.cols }))
}
