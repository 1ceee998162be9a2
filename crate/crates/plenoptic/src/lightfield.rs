//! Aligned 4-D micro-image arrays and their sub-aperture view stacks.
//!
//! A [`LightField4D`] holds `J × H` micro images of `M × M` pixels. A
//! [`ViewStack`] holds `M × M` views of `J × H` pixels. Angular offsets `i, g`
//! are signed and run over `-c..=c` with `c = (M - 1) / 2`; view `(i, g)` takes
//! micro-image pixel `(u, v) = (c + i, c + g)` from every lens.

use crate::error::{Error, Result};
use crate::image::Image2D;

/// Micro-image array indexed `[j, h, u, v, channel]`.
///
/// Storage is channel-planar and lens-major: each micro image of one channel
/// is a contiguous `M × M` block.
#[derive(Clone, Debug, PartialEq)]
pub struct LightField4D {
    rows: usize,
    cols: usize,
    pitch: usize,
    channels: usize,
    data: Vec<f64>,
}

fn check_pitch(pitch: usize) -> Result<()> {
    if pitch % 2 == 0 {
        return Err(Error::EvenPitch(pitch));
    }
    Ok(())
}

impl LightField4D {
    pub fn new(rows: usize, cols: usize, pitch: usize, channels: usize) -> Result<Self> {
        Self::from_vec(
            rows,
            cols,
            pitch,
            channels,
            vec![0.0; rows * cols * pitch * pitch * channels],
        )
    }

    pub fn from_vec(
        rows: usize,
        cols: usize,
        pitch: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        check_pitch(pitch)?;
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput("light-field dimensions must be positive".into()));
        }
        if !matches!(channels, 1 | 3 | 4) {
            return Err(Error::InvalidInput(format!(
                "channel count must be 1, 3 or 4, got {channels}"
            )));
        }
        let n = rows * cols * pitch * pitch * channels;
        if data.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "expected {n} samples, got {}",
                data.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            pitch,
            channels,
            data,
        })
    }

    /// Builds a field from `f(j, h, u, v, channel)`.
    pub fn from_fn(
        rows: usize,
        cols: usize,
        pitch: usize,
        channels: usize,
        f: impl Fn(usize, usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut lf = Self::new(rows, cols, pitch, channels)?;
        for ch in 0..channels {
            for j in 0..rows {
                for h in 0..cols {
                    for u in 0..pitch {
                        for v in 0..pitch {
                            let idx = lf.index(j, h, u, v, ch);
                            lf.data[idx] = f(j, h, u, v, ch);
                        }
                    }
                }
            }
        }
        Ok(lf)
    }

    /// Lens rows `J`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Lens columns `H`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Micro-image diameter `M` (odd).
    pub fn pitch(&self) -> usize {
        self.pitch
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Central angular index `c = (M - 1) / 2`.
    pub fn center(&self) -> usize {
        (self.pitch - 1) / 2
    }

    #[inline]
    pub fn index(&self, j: usize, h: usize, u: usize, v: usize, ch: usize) -> usize {
        let m = self.pitch;
        (((ch * self.rows + j) * self.cols + h) * m + u) * m + v
    }

    #[inline]
    pub fn get(&self, j: usize, h: usize, u: usize, v: usize, ch: usize) -> f64 {
        self.data[self.index(j, h, u, v, ch)]
    }

    #[inline]
    pub fn set(&mut self, j: usize, h: usize, u: usize, v: usize, ch: usize, value: f64) {
        let idx = self.index(j, h, u, v, ch);
        self.data[idx] = value;
    }

    /// The `M × M` block of lens `(j, h)` in channel `ch`, row-major in `(u, v)`.
    pub fn micro_image(&self, j: usize, h: usize, ch: usize) -> &[f64] {
        let start = self.index(j, h, 0, 0, ch);
        &self.data[start..start + self.pitch * self.pitch]
    }

    pub fn micro_image_mut(&mut self, j: usize, h: usize, ch: usize) -> &mut [f64] {
        let start = self.index(j, h, 0, 0, ch);
        let n = self.pitch * self.pitch;
        &mut self.data[start..start + n]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Stitched raster of all micro images, `(J·M) × (H·M)`.
    pub fn to_raw(&self) -> Image2D {
        let m = self.pitch;
        Image2D::from_fn(self.rows * m, self.cols * m, self.channels, |k, l, ch| {
            self.get(k / m, l / m, k % m, l % m, ch)
        })
        .expect("non-empty light field")
    }

    /// Inverse of [`to_raw`](Self::to_raw) for rasters of exactly `(J·M) × (H·M)` pixels.
    pub fn from_raw(raw: &Image2D, pitch: usize) -> Result<Self> {
        check_pitch(pitch)?;
        let (kk, ll) = raw.dims();
        if kk % pitch != 0 || ll % pitch != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{kk}x{ll} raster is not a multiple of pitch {pitch}"
            )));
        }
        Self::from_fn(kk / pitch, ll / pitch, pitch, raw.channels(), |j, h, u, v, ch| {
            raw.get(j * pitch + u, h * pitch + v, ch)
        })
    }
}

/// Sub-aperture images, one `J × H` image per angular position.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewStack {
    pitch: usize,
    views: Vec<Image2D>,
}

impl ViewStack {
    /// Wraps `M²` views given in row-major angular order (`i` outer, `g` inner).
    pub fn from_views(pitch: usize, views: Vec<Image2D>) -> Result<Self> {
        check_pitch(pitch)?;
        if views.len() != pitch * pitch {
            return Err(Error::DimensionMismatch(format!(
                "pitch {pitch} needs {} views, got {}",
                pitch * pitch,
                views.len()
            )));
        }
        let first = &views[0];
        let shape = (first.height(), first.width(), first.channels());
        if views
            .iter()
            .any(|v| (v.height(), v.width(), v.channels()) != shape)
        {
            return Err(Error::DimensionMismatch("views differ in shape".into()));
        }
        Ok(Self { pitch, views })
    }

    /// Builds `M²` views from `f(i, g)` with signed angular offsets.
    pub fn from_fn(pitch: usize, f: impl Fn(isize, isize) -> Image2D) -> Result<Self> {
        check_pitch(pitch)?;
        let c = ((pitch - 1) / 2) as isize;
        let mut views = Vec::with_capacity(pitch * pitch);
        for i in -c..=c {
            for g in -c..=c {
                views.push(f(i, g));
            }
        }
        Self::from_views(pitch, views)
    }

    pub fn pitch(&self) -> usize {
        self.pitch
    }

    /// Central angular index `c`.
    pub fn center(&self) -> usize {
        (self.pitch - 1) / 2
    }

    /// Lens rows `J` (view height).
    pub fn rows(&self) -> usize {
        self.views[0].height()
    }

    /// Lens columns `H` (view width).
    pub fn cols(&self) -> usize {
        self.views[0].width()
    }

    pub fn channels(&self) -> usize {
        self.views[0].channels()
    }

    fn slot(&self, i: isize, g: isize) -> usize {
        let c = self.center() as isize;
        assert!(
            (-c..=c).contains(&i) && (-c..=c).contains(&g),
            "view ({i}, {g}) outside -{c}..={c}"
        );
        ((i + c) as usize) * self.pitch + (g + c) as usize
    }

    /// View at signed offset `(i, g)`.
    pub fn view(&self, i: isize, g: isize) -> &Image2D {
        &self.views[self.slot(i, g)]
    }

    pub fn view_mut(&mut self, i: isize, g: isize) -> &mut Image2D {
        let s = self.slot(i, g);
        &mut self.views[s]
    }

    /// The `(0, 0)` view.
    pub fn central(&self) -> &Image2D {
        self.view(0, 0)
    }

    /// All views in row-major angular order.
    pub fn views(&self) -> &[Image2D] {
        &self.views
    }

    pub fn views_mut(&mut self) -> &mut [Image2D] {
        &mut self.views
    }

    /// Signed offsets in storage order.
    pub fn offsets(&self) -> impl Iterator<Item = (isize, isize)> {
        let c = self.center() as isize;
        (-c..=c).flat_map(move |i| (-c..=c).map(move |g| (i, g)))
    }

    pub fn into_views(self) -> Vec<Image2D> {
        self.views
    }

    /// Mosaic of all views, `(M·J) × (M·H)`, view `(i, g)` at block `(i + c, g + c)`.
    pub fn stitched(&self) -> Image2D {
        let (jj, hh, m) = (self.rows(), self.cols(), self.pitch);
        Image2D::from_fn(m * jj, m * hh, self.channels(), |k, l, ch| {
            self.views[(k / jj) * m + l / hh].get(k % jj, l % hh, ch)
        })
        .expect("non-empty stack")
    }
}

/// `views[i + c, g + c][j, h] = lf[j, h, c + i, c + g]`.
pub fn lf_to_views(lf: &LightField4D) -> ViewStack {
    let m = lf.pitch();
    let mut views = Vec::with_capacity(m * m);
    for u in 0..m {
        for v in 0..m {
            let img = Image2D::from_fn(lf.rows(), lf.cols(), lf.channels(), |j, h, ch| {
                lf.get(j, h, u, v, ch)
            })
            .expect("valid light field shape");
            views.push(img);
        }
    }
    ViewStack { pitch: m, views }
}

/// Exact inverse of [`lf_to_views`].
pub fn views_to_lf(vs: &ViewStack) -> Result<LightField4D> {
    let m = vs.pitch();
    let mut lf = LightField4D::new(vs.rows(), vs.cols(), m, vs.channels())?;
    for u in 0..m {
        for v in 0..m {
            let view = &vs.views[u * m + v];
            for ch in 0..vs.channels() {
                for j in 0..vs.rows() {
                    for h in 0..vs.cols() {
                        lf.set(j, h, u, v, ch, view.get(j, h, ch));
                    }
                }
            }
        }
    }
    Ok(lf)
}
