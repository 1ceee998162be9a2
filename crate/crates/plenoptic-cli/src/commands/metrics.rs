use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;
use serde_json::json;

use plenoptic::metrics::{hist_distance_d2, psnr, sharpness, w1_channels, SharpnessConfig};
use plenoptic::Image2D;

use crate::config::PipelineConfig;
use crate::failure::{io_failure, IoContext, Result};
use crate::imageio::{read_image, read_views, view_file_name};
use crate::manifest::Recorder;

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Images to score against `--truth`.
    pub tests: Vec<PathBuf>,
    /// Reference image.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Score every view of a decoded directory against its central view.
    #[arg(long, conflicts_with_all = ["tests", "truth"])]
    pub views: Option<PathBuf>,
    /// Half-open crop `k0,k1,l0,l1` applied to both images.
    #[arg(long)]
    pub crop: Option<String>,
    /// CSV file to write [default: metrics.csv].
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// One CSV row; colour columns are empty for single-channel images.
#[derive(Debug, Serialize)]
pub struct Row {
    pub image: String,
    #[serde(rename = "W1_r")]
    pub w1_r: f64,
    #[serde(rename = "W1_g")]
    pub w1_g: Option<f64>,
    #[serde(rename = "W1_b")]
    pub w1_b: Option<f64>,
    #[serde(rename = "D2")]
    pub d2: f64,
    #[serde(rename = "PSNR")]
    pub psnr: f64,
    #[serde(rename = "S")]
    pub s: f64,
}

fn parse_crop(text: &str) -> Result<(usize, usize, usize, usize)> {
    let v = text
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .io(format!("crop {text:?}"))?;
    match v[..] {
        [k0, k1, l0, l1] => Ok((k0, k1, l0, l1)),
        _ => Err(io_failure(format!("crop {text:?} needs four comma-separated integers"))),
    }
}

pub fn score(name: &str, test: &Image2D, truth: &Image2D) -> Result<Row> {
    let w1 = w1_channels(test, truth)?;
    Ok(Row {
        image: name.to_string(),
        w1_r: w1[0],
        w1_g: w1.get(1).copied(),
        w1_b: w1.get(2).copied(),
        d2: hist_distance_d2(test, truth)?,
        psnr: psnr(test, truth)?,
        s: sharpness(test, &SharpnessConfig::default())?.value,
    })
}

fn file_label(p: &Path) -> String {
    p.display().to_string()
}

pub fn run(args: &MetricsArgs, mut cfg: PipelineConfig) -> Result<()> {
    let out = args.output.clone().or(cfg.output.clone()).unwrap_or_else(|| "metrics.csv".into());
    cfg.output = Some(out.clone());
    let crop = args.crop.as_deref().map(parse_crop).transpose()?;
    let cut = |img: Image2D| -> Result<Image2D> {
        match crop {
            Some((k0, k1, l0, l1)) => Ok(img.crop(k0, k1, l0, l1)?),
            None => Ok(img),
        }
    };

    let mut rec = Recorder::new("metrics");
    let (truth, tests): (Image2D, Vec<(String, Image2D)>) = if let Some(dir) = &args.views {
        cfg.input = Some(dir.clone());
        let vs = read_views(dir)?;
        let m = vs.pitch();
        let tests = vs
            .views()
            .iter()
            .enumerate()
            .map(|(n, v)| (view_file_name(n / m, n % m), v.clone()))
            .collect();
        (vs.central().clone(), tests)
    } else {
        let truth_path = args
            .truth
            .clone()
            .ok_or_else(|| io_failure("metrics needs --truth with test images, or --views"))?;
        if args.tests.is_empty() {
            return Err(io_failure("no test images given"));
        }
        let tests = args
            .tests
            .iter()
            .map(|p| Ok((file_label(p), read_image(p, cfg.linear)?)))
            .collect::<Result<Vec<_>>>()?;
        (read_image(&truth_path, cfg.linear)?, tests)
    };
    rec.lap("read");

    let truth = cut(truth)?;
    let rows = tests
        .into_iter()
        .map(|(name, img)| score(&name, &cut(img)?, &truth))
        .collect::<Result<Vec<_>>>()?;
    rec.lap("score");

    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).io(format!("creating {}", parent.display()))?;
    }
    let mut writer = csv::Writer::from_path(&out).io(format!("writing {}", out.display()))?;
    for row in &rows {
        writer.serialize(row).io(format!("writing {}", out.display()))?;
    }
    writer.flush().io(format!("writing {}", out.display()))?;
    rec.output(&out);
    rec.lap("write");
    println!("{} row(s) written to {}", rows.len(), out.display());
    rec.finish(&out.with_extension("manifest.json"), &cfg, json!({ "rows": rows.len() }))
}
