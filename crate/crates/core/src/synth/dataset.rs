use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::render::{render_scene, RenderConfig};
use super::scene::{place_objects, scene_from_objects, SceneStyle};
use super::{ObjectKind, SynthError};
use crate::imgproc::pgm::{load_pgm, save_pgm};
use crate::imgproc::Frame;
use crate::seed::derive_seed;
use crate::stats::poisson_pmf;

pub const MANIFEST_FILE: &str = "manifest.tsv";
const HEADER: &str = "path\tclass\ttarget_kind\tseed\tn_PA\tn_PS\tn_MCF7\tn_SPHEROID";

/// How many objects of one kind a class recipe asks for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CountRule {
    Exactly(u32),
    Poisson(f64),
    /// Poisson conditioned on `min <= k <= max`, sampled by inverting the
    /// truncated distribution (no rejection loop).
    Truncated {
        lambda: f64,
        min: u32,
        max: u32,
    },
}

impl CountRule {
    fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::BadRequest(m));
        match *self {
            CountRule::Exactly(_) => Ok(()),
            CountRule::Poisson(l) if l >= 0.0 && l.is_finite() => Ok(()),
            CountRule::Poisson(l) => bad(format!("lambda {l}")),
            CountRule::Truncated { lambda, min, max } => {
                if !(lambda > 0.0 && lambda.is_finite()) || min > max {
                    bad(format!("truncated poisson lambda={lambda} min={min} max={max}"))
                } else {
                    Ok(())
                }
            }
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> u32 {
        match *self {
            CountRule::Exactly(n) => n,
            CountRule::Poisson(0.0) => 0,
            CountRule::Poisson(l) => Poisson::new(l).expect("validated").sample(rng) as u32,
            CountRule::Truncated { lambda, min, max } => {
                let weights: Vec<f64> = (min..=max)
                    .map(|k| poisson_pmf(k as u64, lambda).expect("validated"))
                    .collect();
                let total: f64 = weights.iter().sum();
                let mut u = rng.gen::<f64>() * total;
                for (k, w) in (min..=max).zip(&weights) {
                    if u < *w {
                        return k;
                    }
                    u -= w;
                }
                max
            }
        }
    }
}

/// Object composition of one class; its position in the recipe list is the class index.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassRecipe {
    pub name: String,
    pub components: Vec<(ObjectKind, CountRule)>,
}

impl ClassRecipe {
    pub fn new(name: &str, components: Vec<(ObjectKind, CountRule)>) -> Self {
        Self {
            name: name.to_string(),
            components,
        }
    }

    pub fn draw_counts<R: Rng>(&self, rng: &mut R) -> [u32; 4] {
        let mut counts = [0u32; 4];
        for (kind, rule) in &self.components {
            counts[kind.index()] += rule.sample(rng);
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    /// Relative to the manifest's directory.
    pub path: String,
    pub class: usize,
    pub target_kind: ObjectKind,
    pub seed: u64,
    pub counts: [u32; 4],
}

impl ManifestRow {
    fn to_line(&self) -> String {
        let c = self.counts;
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.path, self.class, self.target_kind, self.seed, c[0], c[1], c[2], c[3]
        )
    }

    fn parse(line: &str, lineno: usize) -> Result<Self, SynthError> {
        let err = |reason: &str| SynthError::Manifest {
            line: lineno,
            reason: reason.to_string(),
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 8 {
            return Err(err("expected 8 tab-separated columns"));
        }
        let num = |s: &str| s.parse::<u64>().map_err(|_| err("bad integer"));
        let mut counts = [0u32; 4];
        for (i, c) in counts.iter_mut().enumerate() {
            *c = num(cols[4 + i])? as u32;
        }
        Ok(Self {
            path: cols[0].to_string(),
            class: num(cols[1])? as usize,
            target_kind: cols[2].parse().map_err(|_| err("bad target kind"))?,
            seed: num(cols[3])?,
            counts,
        })
    }
}

/// Render `n_per_class` droplets for every recipe into `out_dir` as PGM files
/// plus a tab-separated manifest. Deterministic per `seed`.
#[allow(clippy::too_many_arguments)]
pub fn generate_dataset(
    recipes: &[ClassRecipe],
    n_per_class: usize,
    style: &SceneStyle,
    cfg: &RenderConfig,
    target: ObjectKind,
    seed: u64,
    out_dir: &Path,
) -> Result<Vec<ManifestRow>, SynthError> {
    if n_per_class == 0 || recipes.is_empty() {
        return Err(SynthError::BadRequest(
            "need at least one class and one image per class".into(),
        ));
    }
    for r in recipes {
        for (_, rule) in &r.components {
            rule.validate()?;
        }
    }
    let img_dir = out_dir.join("images");
    fs::create_dir_all(&img_dir)?;
    let mut rows = Vec::with_capacity(recipes.len() * n_per_class);
    for (class, recipe) in recipes.iter().enumerate() {
        for i in 0..n_per_class {
            let image_seed = derive_seed(seed, ((class as u64) << 32) | i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(image_seed);
            let counts = recipe.draw_counts(&mut rng);
            let objects = place_objects(counts, style, &mut rng)?;
            let scene = scene_from_objects(objects, style);
            let (frame, gt) = render_scene(&scene, cfg, derive_seed(image_seed, 1))?;
            let rel = format!("images/c{class}_{i:05}.pgm");
            save_pgm(&out_dir.join(&rel), &frame)?;
            rows.push(ManifestRow {
                path: rel,
                class,
                target_kind: target,
                seed: image_seed,
                counts: gt.counts(),
            });
        }
    }
    let mut w = BufWriter::new(fs::File::create(out_dir.join(MANIFEST_FILE))?);
    writeln!(w, "{HEADER}")?;
    for r in &rows {
        writeln!(w, "{}", r.to_line())?;
    }
    w.flush()?;
    Ok(rows)
}

pub fn read_manifest(dir: &Path) -> Result<Vec<ManifestRow>, SynthError> {
    let f = fs::File::open(dir.join(MANIFEST_FILE))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim_end() != HEADER {
                return Err(SynthError::Manifest {
                    line: 1,
                    reason: "unexpected header".into(),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        rows.push(ManifestRow::parse(line.trim_end_matches(['\r', '\n']), i + 1)?);
    }
    Ok(rows)
}

/// Every manifest image with its class index, in manifest order.
pub fn load_dataset(dir: &Path) -> Result<Vec<(Frame, usize)>, SynthError> {
    read_manifest(dir)?
        .into_iter()
        .map(|r| Ok((load_pgm(&dir.join(&r.path))?, r.class)))
        .collect()
}
