use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::{DropletScene, ObjectKind, ObjectSpec, SynthError};
use crate::stats::OccupancyModel;

/// Per-kind occupancy; kinds without an entry never appear.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OccupancyMap {
    models: [Option<OccupancyModel>; 4],
}

impl OccupancyMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, kind: ObjectKind, lambda: f64) -> Result<Self, SynthError> {
        self.models[kind.index()] = Some(OccupancyModel::new(lambda)?);
        Ok(self)
    }

    pub fn lambda(&self, kind: ObjectKind) -> f64 {
        self.models[kind.index()].map_or(0.0, |m| m.lambda())
    }

    pub fn get(&self, kind: ObjectKind) -> Option<OccupancyModel> {
        self.models[kind.index()]
    }
}

/// Appearance parameters shared by every droplet of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneStyle {
    pub droplet_diameter_um: f64,
    pub noise_sigma: f64,
    pub illumination: f64,
    pub motion_blur_um: f64,
    /// Focus offsets are drawn uniformly from `[-spread, spread]`.
    pub focus_spread_um: f64,
}

impl Default for SceneStyle {
    fn default() -> Self {
        Self {
            droplet_diameter_um: 100.0,
            noise_sigma: 4.0,
            illumination: 160.0,
            motion_blur_um: 0.0,
            focus_spread_um: 20.0,
        }
    }
}

const PLACEMENT_TRIES: usize = 200;
const PLACEMENT_RESTARTS: usize = 50;

/// Place `counts[kind]` objects of each kind inside the droplet. Large objects
/// are rejection-sampled to avoid each other; whole-scene restarts are bounded.
pub fn place_objects<R: Rng>(counts: [u32; 4], style: &SceneStyle, rng: &mut R) -> Result<Vec<ObjectSpec>, SynthError> {
    let order = [
        ObjectKind::Spheroid,
        ObjectKind::PaBead,
        ObjectKind::Mcf7Cell,
        ObjectKind::PsSphere,
    ];
    let r_drop = style.droplet_diameter_um / 2.0;
    let mut failed = None;
    for _ in 0..PLACEMENT_RESTARTS {
        let mut placed: Vec<ObjectSpec> = Vec::new();
        let mut ok = true;
        'kinds: for kind in order {
            let (lo, hi) = kind.diameter_range_um();
            for _ in 0..counts[kind.index()] {
                let d = rng.gen_range(lo..=hi);
                let room = r_drop - d / 2.0;
                if room < 0.0 {
                    ok = false;
                    failed = Some(kind);
                    break 'kinds;
                }
                let focus = if style.focus_spread_um > 0.0 {
                    rng.gen_range(-style.focus_spread_um..=style.focus_spread_um)
                } else {
                    0.0
                };
                let mut spot = None;
                for _ in 0..PLACEMENT_TRIES {
                    let r = room * rng.gen::<f64>().sqrt();
                    let t = 2.0 * PI * rng.gen::<f64>();
                    let c = (r * t.cos(), r * t.sin());
                    let clear = d < super::LARGE_OBJECT_UM
                        || placed
                            .iter()
                            .filter(|p| p.is_large())
                            .all(|p| (c.0 - p.center_um.0).hypot(c.1 - p.center_um.1) >= (d + p.diameter_um) / 2.0);
                    if clear {
                        spot = Some(c);
                        break;
                    }
                }
                match spot {
                    Some(c) => placed.push(ObjectSpec {
                        kind,
                        diameter_um: d,
                        center_um: c,
                        focus_offset_um: focus,
                    }),
                    None => {
                        ok = false;
                        failed = Some(kind);
                        break 'kinds;
                    }
                }
            }
        }
        if ok {
            return Ok(placed);
        }
    }
    let kind = failed.unwrap_or(ObjectKind::PaBead);
    Err(SynthError::Placement {
        kind,
        count: counts[kind.index()],
        attempts: PLACEMENT_RESTARTS,
    })
}

pub(crate) fn scene_from_objects(objects: Vec<ObjectSpec>, style: &SceneStyle) -> DropletScene {
    DropletScene {
        droplet_diameter_um: style.droplet_diameter_um,
        objects,
        noise_sigma: style.noise_sigma,
        illumination: style.illumination,
        motion_blur_um: style.motion_blur_um,
    }
}

pub(crate) fn draw_counts<R: Rng>(models: &OccupancyMap, rng: &mut R) -> [u32; 4] {
    let mut counts = [0u32; 4];
    for kind in ObjectKind::ALL {
        let lambda = models.lambda(kind);
        if lambda > 0.0 {
            let p = Poisson::new(lambda).expect("lambda validated at construction");
            counts[kind.index()] = p.sample(rng) as u32;
        }
    }
    counts
}

/// Draw independent Poisson counts per kind and place them. Deterministic per seed.
pub fn sample_scene(models: &OccupancyMap, style: &SceneStyle, seed: u64) -> Result<DropletScene, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts = draw_counts(models, &mut rng);
    let objects = place_objects(counts, style, &mut rng)?;
    Ok(scene_from_objects(objects, style))
}
