//! PNG/TIFF images, Bayer captures with JSON sidecars, and view-stack
//! directories.
//!
//! Samples are read as `value / max` in `[0, 1]`. Unless linear mode is on,
//! PNG/TIFF data is taken as sRGB and decoded to linear light on read and
//! encoded on write. Output is always 16 bits per sample.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use plenoptic::align::{demosaic, remove_cfa_outliers, BayerImage, BayerPattern, OutlierReport};
use plenoptic::extract::{srgb_decode, srgb_encode};
use plenoptic::{Image2D, ViewStack};

use crate::config::OutlierSection;
use crate::failure::{io_failure, IoContext, Result};

/// Sidecar of a Bayer TIFF, stored next to it with a `.json` extension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BayerSidecar {
    pub pattern: BayerPattern,
    /// Stored samples are `linear^gamma`; one means linear data.
    #[serde(default = "unit_gamma")]
    pub gamma: f64,
}

fn unit_gamma() -> f64 {
    1.0
}

fn is_tiff(path: &Path) -> bool {
    matches!(extension(path).as_str(), "tif" | "tiff")
}

fn extension(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase()
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Samples in `[0, 1]` as stored, without any transfer curve.
fn read_stored(path: &Path) -> Result<Image2D> {
    let img = image::ImageReader::open(path)
        .io(format!("opening {}", path.display()))?
        .with_guessed_format()
        .io(format!("reading {}", path.display()))?
        .decode()
        .io(format!("decoding {}", path.display()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let scale = 1.0 / u16::MAX as f64;
    let out = if img.color().has_color() {
        let rgb = img.to_rgb16();
        Image2D::from_fn(h, w, 3, |k, l, c| rgb.get_pixel(l as u32, k as u32)[c] as f64 * scale)
    } else {
        let luma = img.to_luma16();
        Image2D::from_fn(h, w, 1, |k, l, _| luma.get_pixel(l as u32, k as u32)[0] as f64 * scale)
    };
    out.io(format!("image {}", path.display()))
}

/// Reads an image as linear light.
pub fn read_image(path: &Path, linear: bool) -> Result<Image2D> {
    let img = read_stored(path)?;
    Ok(if linear { img } else { img.map(srgb_decode) })
}

/// A decoded sensor capture and what happened on the way.
pub struct Capture {
    pub image: Image2D,
    pub bayer: Option<BayerSidecar>,
    pub outliers: Option<OutlierReport>,
}

/// Reads a raw capture. A TIFF with a sidecar is a Bayer mosaic: it is
/// linearized with the sidecar gamma, repaired and demosaicked. Anything
/// else goes through [`read_image`].
pub fn read_capture(path: &Path, linear: bool, outliers: &OutlierSection) -> Result<Capture> {
    let sidecar = sidecar_path(path);
    if !(is_tiff(path) && sidecar.is_file()) {
        return Ok(Capture {
            image: read_image(path, linear)?,
            bayer: None,
            outliers: None,
        });
    }
    let meta: BayerSidecar = serde_json::from_str(
        &std::fs::read_to_string(&sidecar).io(format!("reading {}", sidecar.display()))?,
    )
    .io(format!("parsing {}", sidecar.display()))?;
    if !(meta.gamma > 0.0) {
        return Err(io_failure(format!("{}: gamma must be positive", sidecar.display())));
    }
    let stored = read_stored(path)?;
    if stored.channels() != 1 {
        return Err(io_failure(format!("{}: a Bayer mosaic must be single-channel", path.display())));
    }
    let inv = 1.0 / meta.gamma;
    let mosaic = BayerImage::new(stored.map(|v| v.powf(inv)), meta.pattern)?;
    let (mosaic, report) = if outliers.enabled {
        let (m, r) = remove_cfa_outliers(&mosaic, outliers.n)?;
        (m, Some(r))
    } else {
        (mosaic, None)
    };
    Ok(Capture {
        image: demosaic(&mosaic),
        bayer: Some(meta),
        outliers: report,
    })
}

fn quantize(v: f64, linear: bool) -> u16 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    let v = if linear { v } else { srgb_encode(v) };
    (v * u16::MAX as f64).round() as u16
}

/// Writes a mono or RGB image as 16-bit PNG or TIFF, chosen by extension.
/// PNG files carry an sRGB chunk, or a unit gamma in linear mode.
pub fn write_image(path: &Path, img: &Image2D, linear: bool) -> Result<()> {
    let (h, w, ch) = (img.height(), img.width(), img.channels());
    if ch != 1 && ch != 3 {
        return Err(io_failure(format!("cannot store a {ch}-channel image in {}", path.display())));
    }
    let samples: Vec<u16> = (0..h * w)
        .flat_map(|i| (0..ch).map(move |c| (i, c)))
        .map(|(i, c)| quantize(img.plane(c)[i], linear))
        .collect();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).io(format!("creating {}", parent.display()))?;
    }
    match extension(path).as_str() {
        "png" => write_png(path, w, h, ch, &samples, linear),
        "tif" | "tiff" => {
            let result = if ch == 1 {
                image::ImageBuffer::<image::Luma<u16>, _>::from_raw(w as u32, h as u32, samples)
                    .expect("buffer matches dimensions")
                    .save(path)
            } else {
                image::ImageBuffer::<image::Rgb<u16>, _>::from_raw(w as u32, h as u32, samples)
                    .expect("buffer matches dimensions")
                    .save(path)
            };
            result.io(format!("writing {}", path.display()))
        }
        other => Err(io_failure(format!("unsupported output format {other:?} for {}", path.display()))),
    }
}

fn write_png(path: &Path, w: usize, h: usize, ch: usize, samples: &[u16], linear: bool) -> Result<()> {
    let what = || format!("writing {}", path.display());
    let file = File::create(path).io(what())?;
    let mut enc = png::Encoder::new(BufWriter::new(file), w as u32, h as u32);
    enc.set_color(if ch == 1 { png::ColorType::Grayscale } else { png::ColorType::Rgb });
    enc.set_depth(png::BitDepth::Sixteen);
    if linear {
        enc.set_source_gamma(png::ScaledFloat::new(1.0));
    } else {
        enc.set_source_srgb(png::SrgbRenderingIntent::Perceptual);
    }
    let bytes: Vec<u8> = samples.iter().flat_map(|s| s.to_be_bytes()).collect();
    let mut writer = enc.write_header().io(what())?;
    writer.write_image_data(&bytes).io(what())?;
    writer.finish().io(what())
}

/// Index file of a view-stack directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewsIndex {
    pub pitch: usize,
    pub rows: usize,
    pub cols: usize,
    pub channels: usize,
    /// Whether the PNGs hold linear samples rather than sRGB.
    pub linear: bool,
    /// Row-major over the angular offsets, first index outermost.
    pub files: Vec<String>,
}

pub const VIEWS_INDEX: &str = "views.json";

pub fn view_file_name(u: usize, v: usize) -> String {
    format!("view_{u:02}_{v:02}.png")
}

/// Writes every view plus [`VIEWS_INDEX`] into `dir`.
pub fn write_views(dir: &Path, vs: &ViewStack, linear: bool) -> Result<()> {
    let m = vs.pitch();
    let mut files = Vec::with_capacity(m * m);
    for (n, view) in vs.views().iter().enumerate() {
        let name = view_file_name(n / m, n % m);
        write_image(&dir.join(&name), view, linear)?;
        files.push(name);
    }
    let index = ViewsIndex {
        pitch: m,
        rows: vs.rows(),
        cols: vs.cols(),
        channels: vs.channels(),
        linear,
        files,
    };
    write_json(&dir.join(VIEWS_INDEX), &index)
}

pub fn read_views(dir: &Path) -> Result<ViewStack> {
    let index_path = dir.join(VIEWS_INDEX);
    let index: ViewsIndex = read_json(&index_path)?;
    if index.files.len() != index.pitch * index.pitch {
        return Err(io_failure(format!(
            "{}: {} files listed for pitch {}",
            index_path.display(),
            index.files.len(),
            index.pitch
        )));
    }
    let views = index
        .files
        .iter()
        .map(|f| read_image(&dir.join(f), index.linear))
        .collect::<Result<Vec<_>>>()?;
    ViewStack::from_views(index.pitch, views).io(format!("view stack {}", dir.display()))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).io(format!("reading {}", path.display()))?;
    serde_json::from_str(&text).io(format!("parsing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value).expect("serializable") + "\n"))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).io(format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, text).io(format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_is_within_one_code() {
        let dir = tempfile::tempdir().unwrap();
        let img = Image2D::from_fn(5, 7, 3, |k, l, c| (k * 7 + l) as f64 / 40.0 + 0.01 * c as f64).unwrap();
        for linear in [false, true] {
            let path = dir.path().join(format!("x{linear}.png"));
            write_image(&path, &img, linear).unwrap();
            let back = read_image(&path, linear).unwrap();
            assert_eq!(back.dims(), img.dims());
            for (a, b) in back.data().iter().zip(img.data()) {
                // half a code, times the steepest slope of the decoding curve (about 2.28 at white)
                assert!((a - b).abs() <= 1.15 / 65535.0, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn tiff_round_trip_mono() {
        let dir = tempfile::tempdir().unwrap();
        let img = Image2D::from_fn(4, 6, 1, |k, l, _| (k + l) as f64 / 8.0).unwrap();
        let path = dir.path().join("m.tif");
        write_image(&path, &img, true).unwrap();
        let back = read_image(&path, true).unwrap();
        assert_eq!(back.channels(), 1);
        for (a, b) in back.data().iter().zip(img.data()) {
            assert!((a - b).abs() <= 0.5 / 65535.0);
        }
    }

    #[test]
    fn bayer_capture_is_linearized_and_demosaicked() {
        let dir = tempfile::tempdir().unwrap();
        let stored = Image2D::filled(8, 8, 1, 0.25).unwrap();
        let path = dir.path().join("cap.tiff");
        write_image(&path, &stored, true).unwrap();
        write_json(&sidecar_path(&path), &BayerSidecar { pattern: BayerPattern::Rggb, gamma: 0.5 }).unwrap();
        let cap = read_capture(&path, true, &OutlierSection::default()).unwrap();
        assert_eq!(cap.image.channels(), 3);
        // 0.25 stored with gamma 0.5 is 0.0625 linear
        for v in cap.image.data() {
            assert!((v - 0.0625).abs() < 1e-4, "{v}");
        }
        assert_eq!(cap.outliers.unwrap().replaced, 0);
    }
}
