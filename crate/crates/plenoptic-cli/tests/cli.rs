use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use plenoptic::extract::srgb_decode;
use plenoptic::metrics::{psnr, sharpness, SharpnessConfig};
use plenoptic::Image2D;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_plenoptic"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run_in(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Independent PNG reader: 16-bit samples through the sRGB decoding curve.
fn load(path: &Path) -> Image2D {
    let img = image::open(path).unwrap();
    let (w, h) = (img.width() as usize, img.height() as usize);
    if img.color().has_color() {
        let rgb = img.to_rgb16();
        Image2D::from_fn(h, w, 3, |k, l, c| srgb_decode(rgb.get_pixel(l as u32, k as u32)[c] as f64 / 65535.0)).unwrap()
    } else {
        let g = img.to_luma16();
        Image2D::from_fn(h, w, 1, |k, l, _| srgb_decode(g.get_pixel(l as u32, k as u32)[0] as f64 / 65535.0)).unwrap()
    }
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn files_in(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

const EXACT_DECODE: [&str; 6] = ["--devignette", "divide", "--coloreq", "none", "--range-align", "false"];

#[test]
fn synthetic_scene_decodes_to_its_truth_views() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "scene", "-o", "sc"]);
    let mut args = vec!["decode", "sc/raw.png", "--calib", "sc/calib.json", "--white", "sc/white.png", "-o", "dec"];
    args.extend(EXACT_DECODE);
    ok(d, &args);
    let db = psnr(&load(&d.join("dec/central.png")), &load(&d.join("sc/truth/view_03_03.png"))).unwrap();
    assert!(db >= 40.0, "central view PSNR {db}");

    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("dec/manifest.json")).unwrap()).unwrap();
    let stages: Vec<&str> = manifest["timings"].as_array().unwrap().iter().map(|t| t["stage"].as_str().unwrap()).collect();
    for s in ["read", "devignette", "rotate", "resample", "hexfix", "coloreq", "range-align", "write"] {
        assert!(stages.contains(&s), "missing stage {s} in {stages:?}");
    }
    assert_eq!(manifest["library_version"], plenoptic::VERSION);
    assert_eq!(manifest["config"]["decode"]["coloreq"], "none");
}

#[test]
fn equal_runs_give_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "scene", "-o", "sc"]);
    for out in ["a", "b"] {
        ok(d, &["decode", "sc/raw.png", "--calib", "sc/calib.json", "--white", "sc/white.png", "-o", out]);
    }
    let (a, b) = (files_in(&d.join("a/views")), files_in(&d.join("b/views")));
    assert_eq!(a.len(), 50);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap(), "{}", x.display());
    }
    assert_eq!(std::fs::read(d.join("a/overview.png")).unwrap(), std::fs::read(d.join("b/overview.png")).unwrap());
    // no stage writes into its inputs
    let raw = std::fs::read(d.join("sc/raw.png")).unwrap();
    ok(d, &["decode", "sc/raw.png", "--calib", "sc/calib.json", "--white", "sc/white.png", "-o", "c"]);
    assert_eq!(std::fs::read(d.join("sc/raw.png")).unwrap(), raw);
}

#[test]
fn colour_equalization_lowers_corner_view_distance() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "scene", "-o", "sc", "--micro-vignette", "0.8"]);
    let mut w1 = Vec::new();
    for scheme in ["none", "hm-mkl-hm"] {
        let out = format!("dec-{scheme}");
        ok(d, &["decode", "sc/raw.png", "--calib", "sc/calib.json", "--devignette", "none", "--range-align", "false", "--coloreq", scheme, "-o", &out]);
        let csv = format!("{out}.csv");
        ok(d, &["metrics", "--views", &format!("{out}/views"), "-o", &csv]);
        let rows = csv_rows(&d.join(&csv));
        assert_eq!(rows[0], ["image", "W1_r", "W1_g", "W1_b", "D2", "PSNR", "S"]);
        let corner = rows.iter().find(|r| r[0] == "view_00_00.png").unwrap();
        w1.push(corner[2].parse::<f64>().unwrap());
    }
    assert!(w1[1] < w1[0], "corner W1_g {} -> {}", w1[0], w1[1]);
}

#[test]
fn render_sweep_names_files_and_a0_is_the_view_mean() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "scene", "-o", "sc"]);
    let mut args = vec!["decode", "sc/raw.png", "--calib", "sc/calib.json", "--white", "sc/white.png", "-o", "dec"];
    args.extend(EXACT_DECODE);
    ok(d, &args);
    ok(d, &["render", "dec/views", "--sweep", "-2:2:1", "-o", "r"]);
    let pngs: Vec<String> = files_in(&d.join("r"))
        .iter()
        .filter_map(|p| p.file_name().unwrap().to_str().map(str::to_string))
        .filter(|n| n.ends_with(".png"))
        .collect();
    assert_eq!(pngs, ["refocus_a-1.png", "refocus_a-2.png", "refocus_a0.png", "refocus_a1.png", "refocus_a2.png"]);

    // mean over the view files, read back independently
    let views: Vec<Image2D> = files_in(&d.join("dec/views"))
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "png"))
        .map(|p| load(&p))
        .collect();
    assert_eq!(views.len(), 49);
    let first = &views[0];
    let mean = Image2D::from_fn(first.height(), first.width(), first.channels(), |k, l, c| {
        views.iter().map(|v| v.get(k, l, c)).sum::<f64>() / views.len() as f64
    })
    .unwrap();
    let rendered = load(&d.join("r/refocus_a0.png"));
    let worst = rendered.data().iter().zip(mean.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    // one 16-bit code of the output file
    assert!(worst < 2e-5, "max deviation {worst}");
}

#[test]
fn scheimpflug_focus_rises_towards_the_plane_disparity() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let spec = serde_json::json!({
        "pitch": 5, "rows": 64, "cols": 160, "channels": 1,
        "planes": [{
            "texture": serde_json::to_value(plenoptic::synth::Texture::random(3, 40, 0.01, 0.3)).unwrap(),
            "disparity": 1.0,
            "region": null
        }],
        "micro_vignette": 0.0,
        "aperture_samples": 3
    });
    std::fs::write(d.join("scene.json"), spec.to_string()).unwrap();
    ok(d, &["synth", "scene", "--spec", "scene.json", "-o", "sc"]);
    let mut args = vec!["decode", "sc/raw.png", "--calib", "sc/calib.json", "--white", "sc/white.png", "-o", "dec"];
    args.extend(EXACT_DECODE);
    ok(d, &args);
    ok(d, &["render", "dec/views", "--scheimpflug", "0:1", "--direction", "horizontal", "--refine", "4", "-a", "1", "-o", "r"]);
    let tilted = load(&d.join("r/scheimpflug_horizontal_a0_1.png"));
    // the plane is in focus everywhere at a = 1; dividing by it cancels texture content
    let focused = load(&d.join("r/refocus_a1.png"));
    let bands = 5;
    let width = tilted.width() / bands;
    let band_s = |img: &Image2D, b: usize| {
        let cfg = SharpnessConfig { crop: Some((8, img.height() - 8, b * width, (b + 1) * width)), low: None };
        sharpness(img, &cfg).unwrap().value
    };
    let s: Vec<f64> = (0..bands).map(|b| band_s(&tilted, b) / band_s(&focused, b)).collect();
    assert!(s.windows(2).all(|w| w[1] >= w[0]), "relative band sharpness {s:?}");
    assert!(s[bands - 1] > 0.95, "{s:?}");
}

#[test]
fn calibrate_is_deterministic_and_reports_stage_deviation() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "white", "--pitch", "52", "--rows", "13", "--cols", "13", "--packing", "hexagonal", "--micro-vignette", "0.3", "--truth", "t.json"]);
    let out = ok(d, &["calibrate", "white.png", "--truth", "t.json", "-o", "a.json"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for stage in ["extract", "refine", "sort", "fit"] {
        assert!(text.contains(&format!("C {stage} ")), "{text}");
    }
    ok(d, &["calibrate", "white.png", "-o", "b.json"]);
    let a = std::fs::read(d.join("a.json")).unwrap();
    assert_eq!(a, std::fs::read(d.join("b.json")).unwrap());
    let model: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(model["packing"], "hexagonal");
    assert_eq!(model["J"], 13);
    assert_eq!(model["schema"], 1);
}

#[test]
fn exit_codes_separate_io_from_processing() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let out = run_in(d, &["calibrate", "missing.png", "-o", "calib.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!d.join("calib.json").exists());
    assert!(!d.join("calib.manifest.json").exists());

    std::fs::write(d.join("bad.json"), "{\"decode\": {\"hexfix\": 3}}").unwrap();
    assert_eq!(run_in(d, &["--config", "bad.json", "synth", "white"]).status.code(), Some(2));

    ok(d, &["synth", "scene", "-o", "sc"]);
    let mut args = vec!["decode", "sc/raw.png", "--calib", "sc/calib.json", "--white", "sc/white.png", "-o", "dec"];
    args.extend(EXACT_DECODE);
    ok(d, &args);
    assert_eq!(run_in(d, &["render", "dec/views", "-a", "0.5"]).status.code(), Some(1));

    // a flat image has no lens lattice
    let flat = Image2D::filled(64, 64, 1, 0.5).unwrap();
    let buf = image::ImageBuffer::<image::Luma<u16>, _>::from_fn(64, 64, |_, _| image::Luma([(flat.get(0, 0, 0) * 65535.0) as u16]));
    buf.save(d.join("flat.png")).unwrap();
    let out = run_in(d, &["calibrate", "flat.png"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage"));
}

#[test]
fn command_line_overrides_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "scene", "-o", "sc"]);
    let cfg = serde_json::json!({
        "input": "sc/raw.png",
        "calib": "sc/calib.json",
        "white": "sc/white.png",
        "output": "from-file",
        "decode": {"coloreq": "mkl", "hexfix": false, "devignette": "divide"}
    });
    std::fs::write(d.join("run.json"), cfg.to_string()).unwrap();
    ok(d, &["--config", "run.json", "decode", "--coloreq", "none", "-o", "from-cli"]);
    assert!(!d.join("from-file").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("from-cli/manifest.json")).unwrap()).unwrap();
    let dec = &manifest["config"]["decode"];
    assert_eq!(dec["coloreq"], "none");
    assert_eq!(dec["hexfix"], false);
    assert_eq!(dec["devignette"], "divide");
    assert_eq!(dec["resample"], "local");
}

#[test]
fn bayer_tiff_captures_decode_through_the_sidecar() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "scene", "-o", "sc", "--bayer", "GRBG"]);
    let sidecar: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("sc/raw.json")).unwrap()).unwrap();
    assert_eq!(sidecar["pattern"], "GRBG");
    let mut args = vec!["decode", "sc/raw.tiff", "--calib", "sc/calib.json", "--white", "sc/white.png", "-o", "dec"];
    args.extend(EXACT_DECODE);
    ok(d, &args);
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("dec/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["details"]["bayer"]["pattern"], "GRBG");
    assert!(manifest["details"]["outliers"]["candidates"].is_u64());
    // demosaicking a lenslet raster loses detail, but the views stay close
    let db = psnr(&load(&d.join("dec/central.png")), &load(&d.join("sc/truth/view_03_03.png"))).unwrap();
    assert!(db >= 25.0, "central view PSNR {db}");
}
