//! Frames, circular region-of-interest masking, normalization and augmentation.

pub mod augment;
pub mod pgm;

pub use augment::{augment_mirror, augment_rotations, augment_translations, translate, AugmentPlan, AugmentStep};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImageError {
    #[error("frame must be non-empty with {expected} pixels, got {got}")]
    BadDimensions { expected: usize, got: usize },
    #[error("mask (center ({cx}, {cy}), radius {radius}) does not fit a {width}x{height} frame")]
    MaskOutOfFrame {
        cx: f64,
        cy: f64,
        radius: f64,
        width: usize,
        height: usize,
    },
    #[error("zero variance over {0} scoped pixels, cannot normalize")]
    ZeroVariance(usize),
    #[error("invalid augmentation plan `{0}`")]
    BadPlan(String),
}

/// Grayscale image on a square-ish pixel grid, intensities in 8-bit units.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
    um_per_px: f64,
}

impl Frame {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>, um_per_px: f64) -> Result<Self, ImageError> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(ImageError::BadDimensions {
                expected: width * height,
                got: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
            um_per_px,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64, um_per_px: f64) -> Self {
        assert!(width > 0 && height > 0, "frame must be non-empty");
        Self {
            width,
            height,
            pixels: vec![value; width * height],
            um_per_px,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn um_per_px(&self) -> f64 {
        self.um_per_px
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.pixels[y * self.width + x] = v;
    }

    /// Pixel-wise `a * p + b`.
    pub fn affine(&self, a: f64, b: f64) -> Frame {
        Frame {
            pixels: self.pixels.iter().map(|&p| a * p + b).collect(),
            ..self.clone()
        }
    }

    /// Pixels rounded and clamped to `0..=255`.
    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels.iter().map(|&p| p.round().clamp(0.0, 255.0) as u8).collect()
    }

    pub fn from_u8(width: usize, height: usize, data: &[u8], um_per_px: f64) -> Result<Self, ImageError> {
        Self::new(width, height, data.iter().map(|&b| b as f64).collect(), um_per_px)
    }

    /// Bilinear resampling onto a `side x side` grid; physical field of view is preserved.
    pub fn resample(&self, side: usize) -> Frame {
        assert!(side > 0);
        let sx = self.width as f64 / side as f64;
        let sy = self.height as f64 / side as f64;
        let mut out = Vec::with_capacity(side * side);
        for y in 0..side {
            let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            for x in 0..side {
                let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
                out.push(bilinear(self, fx, fy));
            }
        }
        Frame {
            width: side,
            height: side,
            pixels: out,
            um_per_px: self.um_per_px * sx,
        }
    }
}

/// Bilinear sample at a point inside `[0, w-1] x [0, h-1]`.
pub(crate) fn bilinear(f: &Frame, x: f64, y: f64) -> f64 {
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(f.width - 1);
    let y1 = (y0 + 1).min(f.height - 1);
    let tx = x - x0 as f64;
    let ty = y - y0 as f64;
    let top = f.get(x0, y0) * (1.0 - tx) + f.get(x1, y0) * tx;
    let bottom = f.get(x0, y1) * (1.0 - tx) + f.get(x1, y1) * tx;
    top * (1.0 - ty) + bottom * ty
}

/// Circular region of interest. Pixel `(x, y)` is inside when the distance from
/// its center to `(cx, cy)` is at most `radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskSpec {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
    pub fill: f64,
}

impl MaskSpec {
    /// Mask centered on the frame's middle pixel.
    pub fn centered(width: usize, height: usize, radius: f64, fill: f64) -> Self {
        Self {
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
            radius,
            fill,
        }
    }

    /// Center must lie on the frame and the radius must be positive. A radius
    /// reaching past the frame edge is allowed and simply keeps every pixel.
    pub fn validate(&self, width: usize, height: usize) -> Result<(), ImageError> {
        let ok = self.radius.is_finite()
            && self.radius > 0.0
            && self.cx >= 0.0
            && self.cy >= 0.0
            && self.cx <= (width - 1) as f64
            && self.cy <= (height - 1) as f64;
        if ok {
            Ok(())
        } else {
            Err(ImageError::MaskOutOfFrame {
                cx: self.cx,
                cy: self.cy,
                radius: self.radius,
                width,
                height,
            })
        }
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        let dx = x as f64 - self.cx;
        let dy = y as f64 - self.cy;
        dx * dx + dy * dy <= self.radius * self.radius
    }

    pub fn membership(&self, width: usize, height: usize) -> Vec<bool> {
        let mut m = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                m.push(self.contains(x, y));
            }
        }
        m
    }
}

pub fn circular_crop(f: &Frame, m: &MaskSpec) -> Result<Frame, ImageError> {
    m.validate(f.width, f.height)?;
    let mut out = f.clone();
    for y in 0..f.height {
        for x in 0..f.width {
            if !m.contains(x, y) {
                out.set(x, y, m.fill);
            }
        }
    }
    Ok(out)
}

/// Zero-mean, unit-variance frame ready for the classifier. Pixels outside the
/// normalization scope are 0.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedFrame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f32>,
}

impl NormalizedFrame {
    /// Mean and population standard deviation of the given pixel subset.
    pub fn moments(&self, scope: Option<&[bool]>) -> (f64, f64) {
        let vals: Vec<f64> = match scope {
            Some(s) => self
                .pixels
                .iter()
                .zip(s)
                .filter(|(_, &m)| m)
                .map(|(&p, _)| p as f64)
                .collect(),
            None => self.pixels.iter().map(|&p| p as f64).collect(),
        };
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        (mean, var.sqrt())
    }
}

/// Mean subtraction and division by the population standard deviation. With a
/// mask, statistics come from in-mask pixels only and out-of-mask pixels become 0.
pub fn normalize(f: &Frame, mask: Option<&MaskSpec>) -> Result<NormalizedFrame, ImageError> {
    let scope = match mask {
        Some(m) => {
            m.validate(f.width, f.height)?;
            Some(m.membership(f.width, f.height))
        }
        None => None,
    };
    let in_scope = |i: usize| scope.as_ref().is_none_or(|s| s[i]);

    let mut n = 0usize;
    let mut sum = 0.0;
    for (i, &p) in f.pixels.iter().enumerate() {
        if in_scope(i) {
            n += 1;
            sum += p;
        }
    }
    if n == 0 {
        return Err(ImageError::ZeroVariance(0));
    }
    let mean = sum / n as f64;
    let mut ss = 0.0;
    for (i, &p) in f.pixels.iter().enumerate() {
        if in_scope(i) {
            ss += (p - mean) * (p - mean);
        }
    }
    let std = (ss / n as f64).sqrt();
    if !(std > 0.0) {
        return Err(ImageError::ZeroVariance(n));
    }
    let pixels = f
        .pixels
        .iter()
        .enumerate()
        .map(|(i, &p)| if in_scope(i) { ((p - mean) / std) as f32 } else { 0.0 })
        .collect();
    Ok(NormalizedFrame {
        width: f.width,
        height: f.height,
        pixels,
    })
}

/// Classifier input preparation: resample to `side x side`, then normalize over
/// the droplet disk (diameter in micrometres, centered in the frame).
pub fn preprocess(f: &Frame, side: usize, droplet_diameter_um: f64) -> Result<NormalizedFrame, ImageError> {
    let g = if f.width == side && f.height == side {
        f.clone()
    } else {
        f.resample(side)
    };
    let mask = MaskSpec::centered(side, side, droplet_diameter_um / 2.0 / g.um_per_px, 0.0);
    normalize(&g, Some(&mask))
}
