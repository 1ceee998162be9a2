//! Ground-truth generators: white calibration images, textured multi-plane
//! scenes and additive noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibrate::{canonical_point, project, CalibModel, CentroidGrid, Packing};
use crate::error::{Error, Result};
use crate::image::Image2D;
use crate::lightfield::{views_to_lf, LightField4D, ViewStack};

/// Shape of every micro image in a synthetic white image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WhiteProfile {
    /// Anti-aliased disc of radius `fill·M/2` with dark gaps between lenses.
    #[default]
    Disc,
    /// Every pixel lit by its nearest lens, no gaps.
    Cell,
}

/// Parameters of a synthetic white image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    /// Lens spacing in pixels.
    pub pitch: f64,
    pub rows: usize,
    pub cols: usize,
    pub packing: Packing,
    /// In-plane and out-of-plane tilt `(θ_z, θ_x)` in degrees.
    pub tilt_deg: [f64; 2],
    pub profile: WhiteProfile,
    /// Disc diameter as a fraction of the pitch.
    pub fill: f64,
    /// Radial fall-off inside each micro image, `1 / (1 + (s·r/R)²)²`.
    pub micro_vignette: f64,
    /// Same fall-off over the whole sensor, relative to the half diagonal.
    pub global_vignette: f64,
    /// Standard deviation of the per-lens gain factor around 1.
    pub gain_jitter: f64,
    /// Additive Gaussian noise standard deviation.
    pub noise: f64,
    /// Empty border around the lattice in pixels; defaults to one pitch.
    pub margin: Option<f64>,
    /// Canvas `(K, L)`; derived from the lattice when absent.
    pub dims: Option<[usize; 2]>,
    /// Canonical-to-sensor homography; derived from pitch and tilts when absent.
    pub homography: Option<[f64; 9]>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            pitch: 21.0,
            rows: 5,
            cols: 5,
            packing: Packing::Rectangular,
            tilt_deg: [0.0, 0.0],
            profile: WhiteProfile::Disc,
            fill: 0.9,
            micro_vignette: 0.0,
            global_vignette: 0.0,
            gain_jitter: 0.0,
            noise: 0.0,
            margin: None,
            dims: None,
            homography: None,
            seed: 0,
        }
    }
}

/// A rendered white image with its exact geometry.
#[derive(Clone, Debug)]
pub struct SynthWhite {
    pub image: Image2D,
    /// Exact lens centres.
    pub truth: CentroidGrid,
    /// Homography mapping the canonical grid onto `truth`.
    pub homography: [f64; 9],
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if !(self.pitch >= 2.0) {
            return Err(Error::InvalidInput(format!("synthetic pitch must be at least 2, got {}", self.pitch)));
        }
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidInput("synthetic lattice needs at least one lens".into()));
        }
        if !(self.fill > 0.0 && self.fill <= 1.5) || self.noise < 0.0 || self.gain_jitter < 0.0 {
            return Err(Error::InvalidInput("fill, noise and gain jitter must be in range".into()));
        }
        Ok(())
    }

    /// Homography and canvas implied by the spec.
    pub fn geometry(&self) -> Result<([f64; 9], (usize, usize))> {
        self.validate()?;
        let margin = self.margin.unwrap_or(self.pitch);
        let lattice = |p: &[f64; 9]| -> Vec<[f64; 2]> {
            (0..self.rows)
                .flat_map(|j| (0..self.cols).map(move |h| (j, h)))
                .map(|(j, h)| project(p, canonical_point(j, h, self.rows, self.cols, self.packing, 0)))
                .collect()
        };
        let bounds = |pts: &[[f64; 2]]| {
            pts.iter().fold([f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY], |b, p| {
                [b[0].min(p[0]), b[1].min(p[1]), b[2].max(p[0]), b[3].max(p[1])]
            })
        };
        let r = self.pitch / 2.0;
        let mut p = match self.homography {
            Some(p) => p,
            None => {
                let (s, c) = self.tilt_deg[0].to_radians().sin_cos();
                let m = self.pitch;
                [m * c, m * s, 0.0, -m * s, m * c, 0.0, self.tilt_deg[1].to_radians().sin() / self.rows as f64, 0.0, 1.0]
            }
        };
        let dims = match self.dims {
            Some([k, l]) => (k, l),
            None => {
                let b = bounds(&lattice(&p));
                let k = ((b[2] - b[0]) + 2.0 * (r + margin)).ceil() as usize;
                let l = ((b[3] - b[1]) + 2.0 * (r + margin)).ceil() as usize;
                (k + k % 2, l + l % 2)
            }
        };
        if self.homography.is_none() {
            // centre the lattice on the canvas
            let b = bounds(&lattice(&p));
            let dk = (dims.0 as f64 - 1.0) / 2.0 - (b[0] + b[2]) / 2.0;
            let dl = (dims.1 as f64 - 1.0) / 2.0 - (b[1] + b[3]) / 2.0;
            // translate in homogeneous form: add d·(row 3) to rows 1 and 2
            for i in 0..3 {
                p[i] += dk * p[6 + i];
                p[3 + i] += dl * p[6 + i];
            }
        }
        let b = bounds(&lattice(&p));
        if b[0] - r < -0.5 || b[1] - r < -0.5 || b[2] + r > dims.0 as f64 - 0.5 || b[3] + r > dims.1 as f64 - 0.5 {
            return Err(Error::InvalidInput(format!(
                "lenses exceed the {}x{} canvas",
                dims.0, dims.1
            )));
        }
        Ok((p, dims))
    }
}

fn falloff(strength: f64, rel: f64) -> f64 {
    let t = strength * rel;
    1.0 / ((1.0 + t * t) * (1.0 + t * t))
}

/// Renders a white image and its exact lens centres. Hexagonal lattices use
/// shifted odd rows (`hex_row_phase` 0).
pub fn synth_white(spec: &SynthSpec) -> Result<SynthWhite> {
    let (p, (kk, ll)) = spec.geometry()?;
    let (rows, cols) = (spec.rows, spec.cols);
    let centres: Vec<[f64; 2]> = (0..rows)
        .flat_map(|j| (0..cols).map(move |h| (j, h)))
        .map(|(j, h)| project(&p, canonical_point(j, h, rows, cols, spec.packing, 0)))
        .collect();
    let gains: Vec<f64> = (0..rows * cols)
        .map(|n| {
            if spec.gain_jitter == 0.0 {
                return 1.0;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(1 + n as u64);
            let z: f64 = Normal::new(0.0, 1.0).expect("unit normal").sample(&mut rng);
            (1.0 + spec.gain_jitter * z).clamp(0.5, 1.0)
        })
        .collect();

    let radius = spec.fill * spec.pitch / 2.0;
    let half_pitch = spec.pitch / 2.0;
    let centre = [(kk as f64 - 1.0) / 2.0, (ll as f64 - 1.0) / 2.0];
    let half_diag = (centre[0] * centre[0] + centre[1] * centre[1]).sqrt().max(1.0);
    let reach = match spec.profile {
        WhiteProfile::Disc => radius + 1.0,
        WhiteProfile::Cell => spec.pitch * 1.2,
    };

    // nearest lens (and its distance) per pixel within reach
    let mut owner = vec![(f64::INFINITY, usize::MAX); kk * ll];
    for (n, c) in centres.iter().enumerate() {
        let k0 = (c[0] - reach).floor().max(0.0) as usize;
        let k1 = ((c[0] + reach).ceil() as usize).min(kk - 1);
        let l0 = (c[1] - reach).floor().max(0.0) as usize;
        let l1 = ((c[1] + reach).ceil() as usize).min(ll - 1);
        for k in k0..=k1 {
            for l in l0..=l1 {
                let d = ((k as f64 - c[0]).powi(2) + (l as f64 - c[1]).powi(2)).sqrt();
                if d < owner[k * ll + l].0 {
                    owner[k * ll + l] = (d, n);
                }
            }
        }
    }
    let mut data = vec![0.0; kk * ll];
    data.par_chunks_mut(ll).enumerate().for_each(|(k, row)| {
        for (l, px) in row.iter_mut().enumerate() {
            let (d, n) = owner[k * ll + l];
            if n == usize::MAX {
                continue;
            }
            let shape = match spec.profile {
                WhiteProfile::Disc => (radius + 0.5 - d).clamp(0.0, 1.0) * falloff(spec.micro_vignette, d / radius),
                WhiteProfile::Cell => falloff(spec.micro_vignette, d / half_pitch),
            };
            let rho = ((k as f64 - centre[0]).powi(2) + (l as f64 - centre[1]).powi(2)).sqrt();
            *px = gains[n] * shape * falloff(spec.global_vignette, rho / half_diag);
        }
    });
    let mut image = Image2D::from_vec(kk, ll, 1, data)?;
    if spec.noise > 0.0 {
        image = add_noise(&image, spec.noise, spec.seed ^ 0x9e37_79b9_7f4a_7c15)?;
    }
    let truth = CentroidGrid::new(rows, cols, centres, spec.packing, 0)?;
    Ok(SynthWhite {
        image,
        truth,
        homography: p,
    })
}

/// Adds i.i.d. Gaussian noise; every image row draws from its own stream so
/// the result does not depend on scheduling. No clamping.
pub fn add_noise(img: &Image2D, sigma: f64, seed: u64) -> Result<Image2D> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidInput(format!("noise sigma must be non-negative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let normal = Normal::new(0.0, sigma).expect("valid sigma");
    let mut out = img.clone();
    let w = img.width();
    out.data_mut().par_chunks_mut(w).enumerate().for_each(|(r, row)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        for v in row {
            *v += normal.sample(&mut rng);
        }
    });
    Ok(out)
}

/// Band-limited random texture: a sum of oriented sinusoids around 0.5.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Texture {
    /// `(frequency in cycles/pixel, orientation, phase, amplitude)` per component.
    pub components: Vec<[f64; 4]>,
    /// Per-channel gains applied to the modulation.
    pub channel_gain: [f64; 3],
}

impl Texture {
    /// `count` components with frequencies in `[f_lo, f_hi]` and total
    /// amplitude 0.4.
    pub fn random(seed: u64, count: usize, f_lo: f64, f_hi: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amp = 0.4 / count.max(1) as f64;
        let components = (0..count)
            .map(|_| {
                [
                    rng.random_range(f_lo..=f_hi),
                    rng.random_range(0.0..std::f64::consts::PI),
                    rng.random_range(0.0..std::f64::consts::TAU),
                    amp,
                ]
            })
            .collect();
        let channel_gain = [rng.random_range(0.6..1.0), rng.random_range(0.6..1.0), rng.random_range(0.6..1.0)];
        Self { components, channel_gain }
    }

    pub fn eval(&self, y: f64, x: f64, channel: usize) -> f64 {
        let s: f64 = self
            .components
            .iter()
            .map(|c| {
                let (sn, cs) = c[1].sin_cos();
                c[3] * (std::f64::consts::TAU * c[0] * (y * sn + x * cs) + c[2]).cos()
            })
            .sum();
        0.5 + self.channel_gain[channel.min(2)] * s
    }
}

/// One fronto-parallel plane of a synthetic scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenePlane {
    pub texture: Texture,
    /// Spatial shift per unit of angular offset, in lens pixels.
    pub disparity: f64,
    /// Support `[j0, j1, h0, h1)` in texture coordinates; the whole plane when absent.
    pub region: Option<[f64; 4]>,
}

/// A multi-plane scene seen through a rectangular lens array of integer pitch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub pitch: usize,
    pub rows: usize,
    pub cols: usize,
    pub channels: usize,
    /// Back to front; later planes occlude earlier ones.
    pub planes: Vec<ScenePlane>,
    /// Radial fall-off strength applied inside each micro image of the raw output.
    pub micro_vignette: f64,
    /// Samples per axis across each view's sub-aperture. One gives pinhole
    /// views; more integrate a box of one angular step, so defocus blurs
    /// continuously instead of leaving shifted copies.
    #[serde(default = "one")]
    pub aperture_samples: usize,
}

fn one() -> usize {
    1
}

/// Views of the scene: view `(i, g)` shows plane texture at `(j + d·i, h + d·g)`,
/// averaged over the sub-aperture when `aperture_samples > 1`.
pub fn synth_views(spec: &SceneSpec) -> Result<ViewStack> {
    if spec.planes.is_empty() {
        return Err(Error::InvalidInput("a scene needs at least one plane".into()));
    }
    if spec.pitch % 2 == 0 {
        return Err(Error::EvenPitch(spec.pitch));
    }
    let c = (spec.pitch / 2) as f64;
    let max_shift = spec.planes.iter().map(|p| p.disparity.abs() * c).fold(0.0, f64::max);
    if max_shift > spec.rows.min(spec.cols) as f64 / 2.0 {
        log_warning(&format!(
            "scene disparity shifts views by up to {max_shift:.1} px on a {}x{} field",
            spec.rows, spec.cols
        ));
    }
    let n = spec.aperture_samples.max(1);
    let offsets: Vec<f64> = (0..n).map(|s| (s as f64 + 0.5) / n as f64 - 0.5).collect();
    let point = |y0: f64, x0: f64, i: f64, g: f64, ch: usize| {
        let mut value = 0.0;
        for plane in &spec.planes {
            let y = y0 + plane.disparity * i;
            let x = x0 + plane.disparity * g;
            let inside = plane
                .region
                .is_none_or(|r| y >= r[0] && y < r[1] && x >= r[2] && x < r[3]);
            if inside {
                value = plane.texture.eval(y, x, ch);
            }
        }
        value
    };
    ViewStack::from_fn(spec.pitch, |i, g| {
        Image2D::from_fn(spec.rows, spec.cols, spec.channels, |j, h, ch| {
            let mut sum = 0.0;
            for di in &offsets {
                for dg in &offsets {
                    sum += point(j as f64, h as f64, i as f64 + di, g as f64 + dg, ch);
                }
            }
            sum / (n * n) as f64
        })
        .expect("valid scene dimensions")
    })
}

fn log_warning(msg: &str) {
    eprintln!("warning: {msg}");
}

/// Raw lenslet image of the scene (micro images tiled at integer pitch, with
/// optional per-lens fall-off) together with the unvignetted truth field.
pub fn synth_scene(spec: &SceneSpec) -> Result<(Image2D, LightField4D)> {
    let truth = views_to_lf(&synth_views(spec)?)?;
    let m = spec.pitch;
    let c = (m / 2) as f64;
    let mut raw = truth.to_raw();
    if spec.micro_vignette > 0.0 {
        let (kk, ll) = raw.dims();
        for ch in 0..raw.channels() {
            let plane = raw.plane_mut(ch);
            for k in 0..kk {
                for l in 0..ll {
                    let (u, v) = ((k % m) as f64 - c, (l % m) as f64 - c);
                    let r = (u * u + v * v).sqrt() / (m as f64 / 2.0);
                    plane[k * ll + l] *= falloff(spec.micro_vignette, r);
                }
            }
        }
    }
    Ok((raw, truth))
}

/// Exact calibration of the raw tiling produced by [`synth_scene`]: lens
/// `(j, h)` sits on pixel `(j·M + c, h·M + c)` with `c = ⌊M/2⌋`.
pub fn scene_calibration(spec: &SceneSpec) -> Result<CalibModel> {
    let m = spec.pitch as f64;
    let c = (spec.pitch / 2) as f64;
    let entries = (0..spec.rows)
        .flat_map(|j| (0..spec.cols).map(move |h| [j as f64 * m + c, h as f64 * m + c]))
        .collect();
    let grid = CentroidGrid::new(spec.rows, spec.cols, entries, Packing::Rectangular, 0)?;
    let homography = [
        m,
        0.0,
        c + m * (spec.rows as f64 - 1.0) / 2.0,
        0.0,
        m,
        c + m * (spec.cols as f64 - 1.0) / 2.0,
        0.0,
        0.0,
        1.0,
    ];
    CalibModel::new(grid, spec.pitch, homography, 0.0, 0.0)
}

/// White image matching [`synth_scene`]: the per-lens fall-off alone, peaking at one.
pub fn scene_white(spec: &SceneSpec) -> Result<Image2D> {
    let m = spec.pitch;
    if m % 2 == 0 {
        return Err(Error::EvenPitch(m));
    }
    let c = (m / 2) as f64;
    Image2D::from_fn(spec.rows * m, spec.cols * m, 1, |k, l, _| {
        let (u, v) = ((k % m) as f64 - c, (l % m) as f64 - c);
        falloff(spec.micro_vignette, (u * u + v * v).sqrt() / (m as f64 / 2.0))
    })
}

/// Illumination fall-off applied to a view stack: every non-central view
/// gets a per-channel gain and a spatial radial term that both grow with the
/// angular distance from the centre.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewVignetting {
    /// Relative gain loss at the corner views.
    pub gain_loss: f64,
    /// Random spread of the per-channel gains.
    pub channel_spread: f64,
    /// Spatial radial fall-off strength at the corner views.
    pub spatial: f64,
    pub seed: u64,
}

pub fn vignette_views(vs: &ViewStack, vig: &ViewVignetting) -> Result<ViewStack> {
    let c = vs.center() as f64;
    let corner = (2.0f64).sqrt() * c.max(1.0);
    let (rows, cols) = (vs.rows(), vs.cols());
    let mid = [(rows as f64 - 1.0) / 2.0, (cols as f64 - 1.0) / 2.0];
    let half_diag = (mid[0] * mid[0] + mid[1] * mid[1]).sqrt().max(1.0);
    let m = vs.pitch() as isize;
    let mut views = vs.views().to_vec();
    views.par_iter_mut().enumerate().for_each(|(n, view)| {
        let (i, g) = (n as isize / m - c as isize, n as isize % m - c as isize);
        let t = ((i * i + g * g) as f64).sqrt() / corner;
        if t == 0.0 {
            return;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(vig.seed);
        rng.set_stream(n as u64);
        let gains: Vec<f64> = (0..view.channels())
            .map(|_| (1.0 - vig.gain_loss * t) * (1.0 + vig.channel_spread * t * rng.random_range(-1.0..=1.0)))
            .collect();
        for ch in 0..view.channels() {
            let plane = view.plane_mut(ch);
            for j in 0..rows {
                for h in 0..cols {
                    let rho = ((j as f64 - mid[0]).powi(2) + (h as f64 - mid[1]).powi(2)).sqrt() / half_diag;
                    plane[j * cols + h] *= gains[ch] * falloff(vig.spatial * t, rho);
                }
            }
        }
    });
    ViewStack::from_views(vs.pitch(), views)
}
