//! Procedural droplet scenes: object kinds, Poisson scene sampling, rendering
//! and labeled dataset generation.

mod dataset;
mod render;
mod scene;

pub use dataset::{generate_dataset, load_dataset, read_manifest, ClassRecipe, CountRule, ManifestRow, MANIFEST_FILE};
pub use render::{render_scene, RenderConfig};
pub(crate) use scene::scene_from_objects;
pub use scene::{place_objects, sample_scene, OccupancyMap, SceneStyle};

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("could not place {count} x {kind} without overlap after {attempts} attempts")]
    Placement {
        kind: ObjectKind,
        count: u32,
        attempts: usize,
    },
    #[error("unknown object kind `{0}`")]
    UnknownKind(String),
    #[error("bad dataset request: {0}")]
    BadRequest(String),
    #[error("bad manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },
    #[error(transparent)]
    Stats(#[from] crate::stats::StatsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObjectKind {
    PaBead,
    PsSphere,
    Mcf7Cell,
    Spheroid,
}

impl ObjectKind {
    pub const ALL: [ObjectKind; 4] = [Self::PaBead, Self::PsSphere, Self::Mcf7Cell, Self::Spheroid];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::PaBead => "PA",
            Self::PsSphere => "PS",
            Self::Mcf7Cell => "MCF7",
            Self::Spheroid => "SPHEROID",
        }
    }

    /// Admissible diameter range in micrometres.
    pub fn diameter_range_um(self) -> (f64, f64) {
        match self {
            Self::PaBead => (65.0 * 0.9, 65.0 * 1.1),
            Self::PsSphere => (10.0 * 0.9, 10.0 * 1.1),
            Self::Mcf7Cell => (15.0, 20.0),
            Self::Spheroid => (20.0, 80.0),
        }
    }

    /// Most objects of this kind a `multiple` class will ask for.
    pub fn max_multiple(self) -> u32 {
        match self {
            Self::PaBead => 2,
            Self::PsSphere => 6,
            Self::Mcf7Cell => 5,
            Self::Spheroid => 2,
        }
    }
}

impl fmt::Display for ObjectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObjectKind {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "PA" | "PA_BEAD" => Ok(Self::PaBead),
            "PS" | "PS_SPHERE" => Ok(Self::PsSphere),
            "MCF7" | "MCF7_CELL" => Ok(Self::Mcf7Cell),
            "SPHEROID" => Ok(Self::Spheroid),
            _ => Err(SynthError::UnknownKind(s.to_string())),
        }
    }
}

/// Objects at least this large may not overlap each other.
pub const LARGE_OBJECT_UM: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectSpec {
    pub kind: ObjectKind,
    pub diameter_um: f64,
    /// Offset of the object center from the droplet center.
    pub center_um: (f64, f64),
    pub focus_offset_um: f64,
}

impl ObjectSpec {
    pub fn is_large(&self) -> bool {
        self.diameter_um >= LARGE_OBJECT_UM
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropletScene {
    pub droplet_diameter_um: f64,
    pub objects: Vec<ObjectSpec>,
    pub noise_sigma: f64,
    pub illumination: f64,
    pub motion_blur_um: f64,
}

impl DropletScene {
    pub fn empty(droplet_diameter_um: f64) -> Self {
        Self {
            droplet_diameter_um,
            objects: Vec::new(),
            noise_sigma: 0.0,
            illumination: 160.0,
            motion_blur_um: 0.0,
        }
    }

    pub fn validate(&self, max_motion_blur_um: f64) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidScene(m));
        if !(self.droplet_diameter_um > 0.0) {
            return bad(format!("droplet diameter {}", self.droplet_diameter_um));
        }
        if !(self.noise_sigma >= 0.0) {
            return bad(format!("noise sigma {}", self.noise_sigma));
        }
        if !(self.motion_blur_um >= 0.0 && self.motion_blur_um <= max_motion_blur_um) {
            return bad(format!(
                "motion blur {} um outside [0, {max_motion_blur_um}]",
                self.motion_blur_um
            ));
        }
        let r_drop = self.droplet_diameter_um / 2.0;
        for (i, o) in self.objects.iter().enumerate() {
            let (lo, hi) = o.kind.diameter_range_um();
            if !(o.diameter_um >= lo - 1e-9 && o.diameter_um <= hi + 1e-9) {
                return bad(format!("{} diameter {} outside [{lo}, {hi}]", o.kind, o.diameter_um));
            }
            let dist = o.center_um.0.hypot(o.center_um.1);
            if dist + o.diameter_um / 2.0 > r_drop + 1e-9 {
                return bad(format!("object {i} ({}) extends outside the droplet", o.kind));
            }
            if o.is_large() {
                for (j, p) in self.objects[..i].iter().enumerate() {
                    if p.is_large() {
                        let d = (o.center_um.0 - p.center_um.0).hypot(o.center_um.1 - p.center_um.1);
                        if d < (o.diameter_um + p.diameter_um) / 2.0 - 1e-9 {
                            return bad(format!("large objects {j} and {i} overlap"));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    counts: [u32; 4],
    pub objects: Vec<ObjectSpec>,
}

impl GroundTruth {
    pub fn from_objects(objects: &[ObjectSpec]) -> Self {
        let mut counts = [0u32; 4];
        for o in objects {
            counts[o.kind.index()] += 1;
        }
        Self {
            counts,
            objects: objects.to_vec(),
        }
    }

    pub fn count(&self, kind: ObjectKind) -> u32 {
        self.counts[kind.index()]
    }

    pub fn counts(&self) -> [u32; 4] {
        self.counts
    }
}

/// Class index: 0 = empty, 1 = single, 2 = multiple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CountClass {
    Empty = 0,
    Single = 1,
    Multiple = 2,
}

impl CountClass {
    pub fn index(self) -> usize {
        self as usize
    }
}

/// Class by the number of `target` objects alone; other kinds are ignored.
pub fn label_of(gt: &GroundTruth, target: ObjectKind) -> CountClass {
    match gt.count(target) {
        0 => CountClass::Empty,
        1 => CountClass::Single,
        _ => CountClass::Multiple,
    }
}

/// How a droplet's ground truth maps to a class index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Labeling {
    /// empty / single / multiple by the count of one kind.
    TargetCount(ObjectKind),
    /// empty / single cell / spheroid.
    Spheroid,
}

impl Labeling {
    pub fn label(&self, gt: &GroundTruth) -> usize {
        match *self {
            Labeling::TargetCount(kind) => label_of(gt, kind).index(),
            Labeling::Spheroid => {
                if gt.count(ObjectKind::Spheroid) > 0 {
                    2
                } else if gt.count(ObjectKind::Mcf7Cell) > 0 {
                    1
                } else {
                    0
                }
            }
        }
    }
}
