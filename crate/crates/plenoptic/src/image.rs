//! Planar multi-channel rasters of linear-light samples.

use crate::error::{Error, Result};

/// A `height × width × channels` raster stored channel-planar.
///
/// Sample `(k, l, c)` lives at `data[c * height * width + k * width + l]`, so
/// per-channel scans are contiguous. Values are not clamped during processing.
#[derive(Clone, Debug, PartialEq)]
pub struct Image2D {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

fn check_shape(height: usize, width: usize, channels: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidInput(format!(
            "image dimensions must be positive, got {height}x{width}"
        )));
    }
    if !matches!(channels, 1 | 3 | 4) {
        return Err(Error::InvalidInput(format!(
            "channel count must be 1, 3 or 4, got {channels}"
        )));
    }
    Ok(())
}

impl Image2D {
    /// Zero-filled image.
    pub fn new(height: usize, width: usize, channels: usize) -> Result<Self> {
        Self::filled(height, width, channels, 0.0)
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        check_shape(height, width, channels)?;
        Ok(Self {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        })
    }

    /// Wraps planar data; rejects wrong lengths and non-finite samples.
    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        check_shape(height, width, channels)?;
        if data.len() != height * width * channels {
            return Err(Error::DimensionMismatch(format!(
                "expected {} samples for {height}x{width}x{channels}, got {}",
                height * width * channels,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("image samples".into()));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Builds an image from `f(k, l, c)`.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        f: impl Fn(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        check_shape(height, width, channels)?;
        let mut data = Vec::with_capacity(height * width * channels);
        for c in 0..channels {
            for k in 0..height {
                for l in 0..width {
                    data.push(f(k, l, c));
                }
            }
        }
        Self::from_vec(height, width, channels, data)
    }

    /// Stacks single-channel images into one multi-channel image.
    pub fn from_planes(planes: &[Image2D]) -> Result<Self> {
        let first = planes
            .first()
            .ok_or_else(|| Error::InvalidInput("no planes given".into()))?;
        let (h, w) = (first.height, first.width);
        let mut data = Vec::with_capacity(h * w * planes.len());
        for p in planes {
            if p.height != h || p.width != w || p.channels != 1 {
                return Err(Error::DimensionMismatch(
                    "planes must be single-channel and equally sized".into(),
                ));
            }
            data.extend_from_slice(&p.data);
        }
        Self::from_vec(h, w, planes.len(), data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(height, width)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn get(&self, k: usize, l: usize, c: usize) -> f64 {
        self.data[c * self.height * self.width + k * self.width + l]
    }

    #[inline]
    pub fn set(&mut self, k: usize, l: usize, c: usize, v: f64) {
        let idx = c * self.height * self.width + k * self.width + l;
        self.data[idx] = v;
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Copy of channel `c` as a single-channel image.
    pub fn channel(&self, c: usize) -> Image2D {
        Image2D {
            height: self.height,
            width: self.width,
            channels: 1,
            data: self.plane(c).to_vec(),
        }
    }

    /// Same shape, samples mapped by `f`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image2D {
        Image2D {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Single-channel luminance (Rec. 709 weights for RGB, identity for mono).
    pub fn luma(&self) -> Image2D {
        if self.channels == 1 {
            return self.clone();
        }
        let n = self.plane_len();
        let (r, g, b) = (self.plane(0), self.plane(1), self.plane(2));
        let data = (0..n)
            .map(|i| 0.2126 * r[i] + 0.7152 * g[i] + 0.0722 * b[i])
            .collect();
        Image2D {
            height: self.height,
            width: self.width,
            channels: 1,
            data,
        }
    }

    /// `(min, max)` over all samples.
    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Export copy clamped to `[0, 1]`.
    pub fn clamped(&self) -> Image2D {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    /// Rows `k0..k1`, columns `l0..l1`, all channels.
    pub fn crop(&self, k0: usize, k1: usize, l0: usize, l1: usize) -> Result<Image2D> {
        if k1 <= k0 || l1 <= l0 || k1 > self.height || l1 > self.width {
            return Err(Error::InvalidInput(format!(
                "crop [{k0},{k1})x[{l0},{l1}) outside {}x{}",
                self.height, self.width
            )));
        }
        Image2D::from_fn(k1 - k0, l1 - l0, self.channels, |k, l, c| {
            self.get(k0 + k, l0 + l, c)
        })
    }
}
