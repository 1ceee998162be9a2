use plenoptic::align::{hex_to_rect, resample_global, resample_local, stretched_cols};
use plenoptic::calibrate::{CalibModel, CentroidGrid, Packing};
use plenoptic::extract::Scheme;
use plenoptic::metrics::psnr;
use plenoptic::pipeline::{decode, DecodeOptions, Devignette, Resample};
use plenoptic::synth::{synth_scene, ScenePlane, SceneSpec, Texture};
use plenoptic::{lf_to_views, LightField4D};

fn scene(pitch: usize, rows: usize, cols: usize, micro_vignette: f64) -> SceneSpec {
    SceneSpec {
        pitch,
        rows,
        cols,
        channels: 3,
        planes: vec![ScenePlane {
            texture: Texture::random(11, 6, 0.02, 0.12),
            disparity: 0.5,
            region: None,
        }],
        micro_vignette,
        aperture_samples: 1,
    }
}

/// Calibration of an axis-aligned tiling with lens `(j, h)` centred on pixel
/// `(j·M + c, h·M + c)`.
fn tiled_model(pitch: usize, rows: usize, cols: usize) -> CalibModel {
    let m = pitch as f64;
    let c = (pitch / 2) as f64;
    let entries = (0..rows)
        .flat_map(|j| (0..cols).map(move |h| [j as f64 * m + c, h as f64 * m + c]))
        .collect();
    let grid = CentroidGrid::new(rows, cols, entries, Packing::Rectangular, 0).unwrap();
    let homography = [
        m,
        0.0,
        c + m * (rows as f64 - 1.0) / 2.0,
        0.0,
        m,
        c + m * (cols as f64 - 1.0) / 2.0,
        0.0,
        0.0,
        1.0,
    ];
    CalibModel::new(grid, pitch, homography, 0.0, 0.0).unwrap()
}

#[test]
fn tiled_raster_resamples_exactly() {
    let spec = scene(5, 9, 11, 0.0);
    let (raw, truth) = synth_scene(&spec).unwrap();
    let model = tiled_model(5, 9, 11);
    assert_eq!(resample_local(&raw, &model).unwrap(), truth);
    assert_eq!(resample_global(&raw, &model).unwrap(), truth);
}

#[test]
fn centroids_outside_the_image_are_rejected() {
    let (raw, _) = synth_scene(&scene(5, 4, 4, 0.0)).unwrap();
    let model = tiled_model(5, 6, 4);
    assert!(resample_local(&raw, &model).is_err());
}

#[test]
fn hex_conversion_stretches_rows() {
    let lf = LightField4D::from_fn(4, 10, 3, 1, |_, h, _, _, _| h as f64).unwrap();
    let out = hex_to_rect(&lf, 0).unwrap();
    assert_eq!(out.cols(), stretched_cols(10));
    assert_eq!(stretched_cols(10), 12);
    let step = 3f64.sqrt() / 2.0;
    for q in 0..out.cols() {
        let x = (q as f64 * step).min(9.0);
        // unshifted row: linear ramp sampled at x
        assert!((out.get(0, q, 1, 1, 0) - x).abs() < 1e-12);
        // shifted row: averaged with the left neighbour first, so half a lens lower
        if x >= 1.0 {
            assert!((out.get(1, q, 1, 1, 0) - (x - 0.5)).abs() < 1e-12);
        }
    }
    let flat = LightField4D::from_fn(3, 7, 3, 3, |_, _, _, _, _| 0.25).unwrap();
    assert!(hex_to_rect(&flat, 1).unwrap().data().iter().all(|&v| (v - 0.25).abs() < 1e-15));
}

#[test]
fn decode_recovers_truth_views() {
    let (pitch, rows, cols) = (7, 24, 30);
    let (raw, truth) = synth_scene(&scene(pitch, rows, cols, 0.8)).unwrap();
    let mut flat_spec = scene(pitch, rows, cols, 0.8);
    flat_spec.planes[0].texture.components.clear();
    let white = synth_scene(&flat_spec).unwrap().0.map(|v| 2.0 * v);
    let model = tiled_model(pitch, rows, cols);
    let opts = DecodeOptions {
        devignette: Devignette::Divide,
        resample: Resample::Local,
        coloreq: Scheme::None,
        range_align: false,
        ..DecodeOptions::default()
    };
    let out = decode(&raw, Some(&white), &model, &opts).unwrap();
    let truth_views = lf_to_views(&truth);
    // white maximum is one, so division restores the texture exactly
    let db = psnr(out.views.central(), truth_views.central()).unwrap();
    assert!(db >= 40.0, "central view PSNR {db}");
    assert_eq!(out.timings.len(), 6);
    assert!(decode(&raw, None, &model, &opts).is_err());
}
