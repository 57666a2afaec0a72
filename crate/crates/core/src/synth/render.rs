use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{DropletScene, GroundTruth, ObjectKind, ObjectSpec, SynthError};
use crate::imgproc::Frame;
use crate::seed::derive_seed;

/// Camera geometry for rendered frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderConfig {
    pub image_px: usize,
    pub um_per_px: f64,
    pub bit_depth: u8,
    /// Disk-blur radius per micrometre of focus offset.
    pub defocus_px_per_um: f64,
    pub max_motion_blur_um: f64,
    /// Half-width of the dark band drawn at the oil/water interface.
    pub interface_half_width_um: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            image_px: 478,
            um_per_px: 0.335,
            bit_depth: 8,
            defocus_px_per_um: 0.05,
            max_motion_blur_um: 2.0,
            interface_half_width_um: 3.0,
        }
    }
}

impl RenderConfig {
    /// Same 160 um field of view sampled on a different grid.
    pub fn with_image_px(image_px: usize) -> Self {
        Self {
            image_px,
            um_per_px: 160.0 / image_px as f64,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.image_px < 64 || !(self.um_per_px > 0.0) || self.bit_depth != 8 {
            return Err(SynthError::InvalidScene(format!(
                "render config needs image_px >= 64, um_per_px > 0, bit_depth 8 (got {}, {}, {})",
                self.image_px, self.um_per_px, self.bit_depth
            )));
        }
        Ok(())
    }

    pub fn center_px(&self) -> f64 {
        (self.image_px as f64 - 1.0) / 2.0
    }

    pub fn field_um(&self) -> f64 {
        self.image_px as f64 * self.um_per_px
    }
}

/// Triangular bump: 1 at `d = 0`, 0 for `|d| >= half_width`.
fn bump(d: f64, half_width: f64) -> f64 {
    (1.0 - d.abs() / half_width).max(0.0)
}

/// Band-limited random texture in roughly `[-1, 1]`.
struct Texture {
    waves: Vec<(f64, f64, f64)>,
}

impl Texture {
    fn new(rng: &mut ChaCha8Rng, n: usize, wavelength_um: (f64, f64)) -> Self {
        let waves = (0..n)
            .map(|_| {
                let lambda = rng.gen_range(wavelength_um.0..wavelength_um.1);
                let theta = rng.gen_range(0.0..PI);
                let k = 2.0 * PI / lambda;
                (k * theta.cos(), k * theta.sin(), rng.gen_range(0.0..2.0 * PI))
            })
            .collect();
        Self { waves }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        let s: f64 = self
            .waves
            .iter()
            .map(|&(kx, ky, ph)| (kx * x + ky * y + ph).cos())
            .sum();
        (s / (self.waves.len() as f64).sqrt()).clamp(-1.0, 1.0)
    }
}

/// Intensity change produced by one object, as a function of the offset from
/// its center. Zero outside the nominal radius.
struct Profile {
    kind: ObjectKind,
    radius: f64,
    texture: Option<Texture>,
    wobble: (f64, f64, f64),
}

impl Profile {
    fn new(o: &ObjectSpec, rng: &mut ChaCha8Rng) -> Self {
        let (texture, wobble) = match o.kind {
            ObjectKind::Mcf7Cell => (
                Some(Texture::new(rng, 6, (3.0, 7.0))),
                (0.08, rng.gen_range(2..5) as f64, rng.gen_range(0.0..2.0 * PI)),
            ),
            ObjectKind::Spheroid => (
                Some(Texture::new(rng, 10, (4.0, 12.0))),
                (0.12, rng.gen_range(3..7) as f64, rng.gen_range(0.0..2.0 * PI)),
            ),
            _ => (None, (0.0, 0.0, 0.0)),
        };
        Self {
            kind: o.kind,
            radius: o.diameter_um / 2.0,
            texture,
            wobble,
        }
    }

    fn at(&self, dx: f64, dy: f64) -> f64 {
        let rho = dx.hypot(dy);
        if rho > self.radius {
            return 0.0;
        }
        let (amp, lobes, phase) = self.wobble;
        let r_eff = if amp > 0.0 {
            let phi = dy.atan2(dx);
            self.radius * (1.0 - amp * 0.5 * (1.0 + (lobes * phi + phase).sin()))
        } else {
            self.radius
        };
        if rho > r_eff {
            return 0.0;
        }
        let edge = r_eff - rho;
        let tex = |x: f64, y: f64| self.texture.as_ref().map_or(0.0, |t| t.at(x, y));
        match self.kind {
            // faint refractive ring with a slight inner halo
            ObjectKind::PaBead => -30.0 * bump(edge - 1.5, 1.5) + 10.0 * bump(edge - 4.0, 1.5) + 3.0,
            // bright core, dark rim
            ObjectKind::PsSphere => {
                let t = rho / r_eff;
                if t < 0.45 {
                    90.0 * (1.0 - (t / 0.45).powi(2))
                } else {
                    -110.0 * (PI * (t - 0.45) / 0.55).sin()
                }
            }
            ObjectKind::Mcf7Cell => -45.0 * bump(edge - 1.0, 1.2) - 12.0 + 16.0 * tex(dx, dy),
            ObjectKind::Spheroid => -35.0 * bump(edge - 1.5, 2.0) - 30.0 + 28.0 * tex(dx, dy),
        }
    }
}

fn disk_kernel(radius_px: f64) -> Vec<(i64, i64)> {
    let r = radius_px.ceil() as i64;
    let mut k = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if ((dx * dx + dy * dy) as f64) <= radius_px * radius_px {
                k.push((dx, dy));
            }
        }
    }
    k
}

fn blur(layer: &[f64], w: usize, h: usize, offsets: &[(i64, i64)]) -> Vec<f64> {
    let norm = 1.0 / offsets.len() as f64;
    let mut out = vec![0.0; layer.len()];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let mut s = 0.0;
            for &(dx, dy) in offsets {
                let (sx, sy) = (x + dx, y + dy);
                if sx >= 0 && sy >= 0 && (sx as usize) < w && (sy as usize) < h {
                    s += layer[sy as usize * w + sx as usize];
                }
            }
            out[y as usize * w + x as usize] = s * norm;
        }
    }
    out
}

/// Render one droplet frame. Deterministic in `(scene, cfg, seed)`.
pub fn render_scene(scene: &DropletScene, cfg: &RenderConfig, seed: u64) -> Result<(Frame, GroundTruth), SynthError> {
    cfg.validate()?;
    scene.validate(cfg.max_motion_blur_um)?;
    let n = cfg.image_px;
    let c = cfg.center_px();
    let um = cfg.um_per_px;
    let illum = scene.illumination;
    let mut px = vec![illum; n * n];

    // oil/water interface
    let r_drop = scene.droplet_diameter_um / 2.0;
    let hw = cfg.interface_half_width_um;
    for y in 0..n {
        for x in 0..n {
            let rho = ((x as f64 - c) * um).hypot((y as f64 - c) * um);
            let b = bump(rho - r_drop, hw);
            if b > 0.0 {
                px[y * n + x] -= 0.45 * illum * b;
            }
        }
    }

    let motion_px = scene.motion_blur_um / um;
    for (i, o) in scene.objects.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1 + i as u64));
        let profile = Profile::new(o, &mut rng);
        let defocus_px = cfg.defocus_px_per_um * o.focus_offset_um.abs();
        let margin = (defocus_px + motion_px / 2.0).ceil() as i64 + 2;
        let ox = c + o.center_um.0 / um;
        let oy = c + o.center_um.1 / um;
        let r_px = profile.radius / um;
        let x0 = (ox - r_px).floor() as i64 - margin;
        let y0 = (oy - r_px).floor() as i64 - margin;
        let x1 = (ox + r_px).ceil() as i64 + margin;
        let y1 = (oy + r_px).ceil() as i64 + margin;
        let (w, h) = ((x1 - x0 + 1) as usize, (y1 - y0 + 1) as usize);
        let mut layer = vec![0.0; w * h];
        for ly in 0..h {
            let dy = ((y0 + ly as i64) as f64 - oy) * um;
            for lx in 0..w {
                let dx = ((x0 + lx as i64) as f64 - ox) * um;
                layer[ly * w + lx] = profile.at(dx, dy);
            }
        }
        if defocus_px >= 0.5 {
            layer = blur(&layer, w, h, &disk_kernel(defocus_px));
        }
        if motion_px >= 1.0 {
            let half = (motion_px / 2.0).round() as i64;
            let line: Vec<(i64, i64)> = (-half..=half).map(|d| (d, 0)).collect();
            layer = blur(&layer, w, h, &line);
        }
        for ly in 0..h {
            let y = y0 + ly as i64;
            if y < 0 || y >= n as i64 {
                continue;
            }
            for lx in 0..w {
                let x = x0 + lx as i64;
                if x >= 0 && x < n as i64 {
                    px[y as usize * n + x as usize] += layer[ly * w + lx];
                }
            }
        }
    }

    if scene.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
        let normal = Normal::new(0.0, scene.noise_sigma).expect("sigma validated");
        for p in px.iter_mut() {
            *p += normal.sample(&mut rng);
        }
    }
    for p in px.iter_mut() {
        *p = p.round().clamp(0.0, 255.0);
    }

    let frame = Frame::new(n, n, px, um).expect("dimensions match by construction");
    Ok((frame, GroundTruth::from_objects(&scene.objects)))
}
