//! Label-preserving geometric augmentations.
//!
//! Bookkeeping convention: an augmented set holds every original plus the
//! transforms generated from it, so `rot10` on 300 images gives 3,300 and
//! `mirror` gives 4x.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{bilinear, Frame, ImageError, MaskSpec};
use crate::seed::derive_seed;

/// Rotations by `360 * i / n` degrees, `i = 1..=n`, about the mask center.
///
/// Positive angles turn `+x` toward `+y` (clockwise on screen, since rows grow
/// downward). Source samples falling off the frame take `mask.fill`.
pub fn augment_rotations(f: &Frame, n: usize, mask: &MaskSpec) -> Vec<Frame> {
    (1..=n)
        .map(|i| rotate(f, 2.0 * std::f64::consts::PI * i as f64 / n as f64, mask))
        .collect()
}

fn rotate(f: &Frame, angle: f64, mask: &MaskSpec) -> Frame {
    let (sin, cos) = angle.sin_cos();
    let (w, h) = (f.width(), f.height());
    let max_x = (w - 1) as f64;
    let max_y = (h - 1) as f64;
    let mut out = f.clone();
    for y in 0..h {
        for x in 0..w {
            let dx = x as f64 - mask.cx;
            let dy = y as f64 - mask.cy;
            // inverse map: rotate the destination offset by -angle
            let sx = cos * dx + sin * dy + mask.cx;
            let sy = -sin * dx + cos * dy + mask.cy;
            // snap sub-ulp overshoot from sin/cos of multiples of pi/2
            let sx = snap(sx);
            let sy = snap(sy);
            let v = if sx >= 0.0 && sy >= 0.0 && sx <= max_x && sy <= max_y {
                bilinear(f, sx, sy)
            } else {
                mask.fill
            };
            out.set(x, y, v);
        }
    }
    out
}

#[inline]
fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r
    } else {
        v
    }
}

/// Integer shift; vacated pixels take `fill`.
pub fn translate(f: &Frame, dx: i64, dy: i64, fill: f64) -> Frame {
    let (w, h) = (f.width() as i64, f.height() as i64);
    let mut out = Frame::filled(f.width(), f.height(), fill, f.um_per_px());
    for y in 0..h {
        let sy = y - dy;
        if sy < 0 || sy >= h {
            continue;
        }
        for x in 0..w {
            let sx = x - dx;
            if sx >= 0 && sx < w {
                out.set(x as usize, y as usize, f.get(sx as usize, sy as usize));
            }
        }
    }
    out
}

/// `n` random integer shifts drawn uniformly from `[-max_px, max_px]^2`.
/// Returns each shifted frame with its `(dx, dy)`.
pub fn augment_translations(f: &Frame, n: usize, max_px: u32, fill: f64, seed: u64) -> Vec<(Frame, (i64, i64))> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = max_px as i64;
    (0..n)
        .map(|_| {
            let dx = rng.gen_range(-m..=m);
            let dy = rng.gen_range(-m..=m);
            (translate(f, dx, dy, fill), (dx, dy))
        })
        .collect()
}

fn flip(f: &Frame, horizontal: bool, vertical: bool) -> Frame {
    let (w, h) = (f.width(), f.height());
    let mut out = f.clone();
    for y in 0..h {
        let sy = if vertical { h - 1 - y } else { y };
        for x in 0..w {
            let sx = if horizontal { w - 1 - x } else { x };
            out.set(x, y, f.get(sx, sy));
        }
    }
    out
}

/// Horizontal, vertical and both-axes mirror images, in that order.
pub fn augment_mirror(f: &Frame) -> [Frame; 3] {
    [flip(f, true, false), flip(f, false, true), flip(f, true, true)]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugmentStep {
    Rotations(usize),
    Translations { n: usize, max_px: u32 },
    Mirror,
}

/// Ordered augmentation stages. Each stage keeps the current set and appends
/// the transforms of every member, e.g. `mirror+rot2` multiplies the set by 12.
///
/// Textual form: `none`, or `+`-joined `rotN`, `transN` / `transN@MAX`, `mirror`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AugmentPlan {
    pub steps: Vec<AugmentStep>,
}

impl AugmentPlan {
    pub fn multiplier(&self) -> usize {
        self.steps
            .iter()
            .map(|s| match s {
                AugmentStep::Rotations(n) => 1 + n,
                AugmentStep::Translations { n, .. } => 1 + n,
                AugmentStep::Mirror => 4,
            })
            .product()
    }

    /// Originals first, then generated frames. Deterministic per `seed`.
    pub fn apply(&self, f: &Frame, mask: &MaskSpec, seed: u64) -> Vec<Frame> {
        let mut set = vec![f.clone()];
        for (stage, step) in self.steps.iter().enumerate() {
            let mut grown = set.clone();
            for (i, item) in set.iter().enumerate() {
                match *step {
                    AugmentStep::Rotations(n) => grown.extend(augment_rotations(item, n, mask)),
                    AugmentStep::Translations { n, max_px } => {
                        let s = derive_seed(seed, ((stage as u64) << 32) | i as u64);
                        grown.extend(
                            augment_translations(item, n, max_px, mask.fill, s)
                                .into_iter()
                                .map(|(fr, _)| fr),
                        );
                    }
                    AugmentStep::Mirror => grown.extend(augment_mirror(item)),
                }
            }
            set = grown;
        }
        set
    }
}

impl FromStr for AugmentPlan {
    type Err = ImageError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() || s == "none" {
            return Ok(Self::default());
        }
        let bad = || ImageError::BadPlan(s.to_string());
        let mut steps = Vec::new();
        for part in s.split('+') {
            let part = part.trim();
            let step = if part == "mirror" {
                AugmentStep::Mirror
            } else if let Some(n) = part.strip_prefix("rot") {
                AugmentStep::Rotations(n.parse().map_err(|_| bad())?)
            } else if let Some(rest) = part.strip_prefix("trans") {
                let (n, max_px) = match rest.split_once('@') {
                    Some((n, m)) => (n, m.parse().map_err(|_| bad())?),
                    None => (rest, 20),
                };
                AugmentStep::Translations {
                    n: n.parse().map_err(|_| bad())?,
                    max_px,
                }
            } else {
                return Err(bad());
            };
            if matches!(step, AugmentStep::Rotations(0) | AugmentStep::Translations { n: 0, .. }) {
                return Err(bad());
            }
            steps.push(step);
        }
        Ok(Self { steps })
    }
}

impl fmt::Display for AugmentPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.steps.is_empty() {
            return write!(f, "none");
        }
        for (i, s) in self.steps.iter().enumerate() {
            if i > 0 {
                write!(f, "+")?;
            }
            match s {
                AugmentStep::Rotations(n) => write!(f, "rot{n}")?,
                AugmentStep::Translations { n, max_px } => write!(f, "trans{n}@{max_px}")?,
                AugmentStep::Mirror => write!(f, "mirror")?,
            }
        }
        Ok(())
    }
}
