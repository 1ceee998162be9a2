use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use plenoptic::render::{refocus, refocus_refined, scheimpflug, Direction, RefocusParams, ScheimpflugParams};

use crate::config::{overlay, PipelineConfig, ScheimpflugSection};
use crate::failure::Result;
use crate::imageio::{read_views, write_image};
use crate::manifest::Recorder;

use super::{parse_range, required, sweep};

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// View directory written by `decode`.
    pub views: Option<PathBuf>,
    /// Output directory [default: rendered].
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Focus scale in view pixels per angular step; repeatable.
    #[arg(short = 'a', long = "a", allow_negative_numbers = true)]
    pub a: Vec<f64>,
    /// Focus sweep `start:stop:step`, inclusive.
    #[arg(long, allow_hyphen_values = true)]
    pub sweep: Option<String>,
    /// Spatial upsampling factor; `a · refine` must be an integer.
    #[arg(long)]
    pub refine: Option<usize>,
    /// Divide by the number of in-bounds contributions.
    #[arg(long)]
    pub normalize: Option<bool>,
    /// Tilted focal plane `start:stop` in addition to the refocus images.
    #[arg(long, allow_hyphen_values = true)]
    pub scheimpflug: Option<String>,
    /// horizontal, vertical, diag-main or diag-anti.
    #[arg(long)]
    pub direction: Option<Direction>,
    /// Blend neighbouring focus slices.
    #[arg(long)]
    pub blend: Option<bool>,
}

/// `refocus_a{a}.png` with the shortest decimal form of `a`.
pub fn refocus_file_name(a: f64) -> String {
    format!("refocus_a{}.png", a + 0.0)
}

pub fn run(args: &RenderArgs, mut cfg: PipelineConfig) -> Result<()> {
    let views_dir = required(&args.views, &cfg.input, "view directory")?;
    let out = args.output.clone().or(cfg.output.clone()).unwrap_or_else(|| "rendered".into());
    cfg.input = Some(views_dir.clone());
    cfg.output = Some(out.clone());
    let mut scales = args.a.clone();
    if let Some(s) = &args.sweep {
        let v = parse_range(s, 3)?;
        scales.extend(sweep(v[0], v[1], v[2])?);
    }
    if !scales.is_empty() {
        cfg.render.a = scales;
    }
    overlay(&mut cfg.render.refine, args.refine);
    overlay(&mut cfg.render.normalize, args.normalize);
    if args.scheimpflug.is_some() || args.direction.is_some() || args.blend.is_some() {
        let section = cfg.render.scheimpflug.get_or_insert_with(ScheimpflugSection::default);
        if let Some(s) = &args.scheimpflug {
            let v = parse_range(s, 2)?;
            section.start = v[0];
            section.stop = v[1];
        }
        overlay(&mut section.direction, args.direction);
        overlay(&mut section.blend, args.blend);
    }

    let mut rec = Recorder::new("render");
    let vs = read_views(&views_dir)?;
    rec.lap("read");
    let r = &cfg.render;
    for &a in &r.a {
        let params = RefocusParams {
            normalize: r.normalize,
            ..RefocusParams::refined(a, r.refine)
        };
        let img = if r.refine > 1 { refocus_refined(&vs, &params)? } else { refocus(&vs, &params)? };
        let path = out.join(refocus_file_name(a));
        write_image(&path, &img, cfg.linear)?;
        rec.output(&path);
    }
    rec.lap("refocus");
    if let Some(s) = &r.scheimpflug {
        let sp = ScheimpflugParams {
            blend: s.blend,
            ..ScheimpflugParams::new(s.start, s.stop, s.direction)
        };
        let params = RefocusParams {
            normalize: r.normalize,
            ..RefocusParams::refined(0.0, r.refine)
        };
        let img = scheimpflug(&vs, &sp, &params)?;
        let direction = serde_json::to_value(s.direction).expect("unit enum serializes");
        let path = out.join(format!(
            "scheimpflug_{}_a{}_{}.png",
            direction.as_str().unwrap_or("plane"),
            s.start + 0.0,
            s.stop + 0.0
        ));
        write_image(&path, &img, cfg.linear)?;
        rec.output(&path);
        rec.lap("scheimpflug");
    }
    println!("{} image(s) written to {}", r.a.len() + r.scheimpflug.is_some() as usize, out.display());
    let details = json!({ "pitch": vs.pitch(), "rows": vs.rows(), "cols": vs.cols() });
    rec.finish(&out.join("manifest.json"), &cfg, details)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_names_use_the_shortest_decimal() {
        assert_eq!(refocus_file_name(0.0), "refocus_a0.png");
        assert_eq!(refocus_file_name(-0.0), "refocus_a0.png");
        assert_eq!(refocus_file_name(-2.0), "refocus_a-2.png");
        assert_eq!(refocus_file_name(0.5), "refocus_a0.5.png");
    }
}
