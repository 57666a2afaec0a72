use std::path::Path;
use std::time::Instant;

use super::SorterError;
use crate::cnn::Network;
use crate::imgproc::pgm::save_pgm;
use crate::imgproc::{preprocess, Frame};
use crate::synth::{render_scene, sample_scene, ObjectKind, OccupancyMap, RenderConfig, SceneStyle};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Grab,
    Preprocess,
    Inference,
    Save,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Grab, Stage::Preprocess, Stage::Inference, Stage::Save];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Grab => "grab",
            Stage::Preprocess => "preprocess",
            Stage::Inference => "inference",
            Stage::Save => "save",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyStats {
    pub n: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p99_ms: f64,
}

impl LatencyStats {
    pub fn from_samples(mut ms: Vec<f64>) -> Self {
        ms.sort_by(f64::total_cmp);
        let n = ms.len();
        if n == 0 {
            return Self {
                n,
                mean_ms: 0.0,
                p50_ms: 0.0,
                p99_ms: 0.0,
            };
        }
        let rank = |q: f64| ms[((q * n as f64).ceil() as usize).clamp(1, n) - 1];
        Self {
            n,
            mean_ms: ms.iter().sum::<f64>() / n as f64,
            p50_ms: rank(0.5),
            p99_ms: rank(0.99),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageLatency {
    pub image_px: usize,
    pub stage: Stage,
    pub stats: LatencyStats,
}

/// Wall-clock timing of each pipeline stage for frames of each size. Frames are
/// rendered once at full resolution and resampled, so every size shows the same
/// droplet; inference always runs at the network's input size.
pub fn measure_stage_latencies(
    net: &Network<f32>,
    sizes: &[usize],
    repetitions: usize,
    scratch_dir: &Path,
    seed: u64,
) -> Result<Vec<StageLatency>, SorterError> {
    if repetitions == 0 || sizes.is_empty() {
        return Ok(Vec::new());
    }
    if let Some(s) = sizes.iter().find(|&&s| s == 0) {
        return Err(SorterError::Config(format!("image size {s}")));
    }
    std::fs::create_dir_all(scratch_dir)?;
    let style = SceneStyle::default();
    let models = OccupancyMap::new()
        .with(ObjectKind::Mcf7Cell, 1.0)
        .map_err(|e| SorterError::Config(e.to_string()))?;
    let scene = sample_scene(&models, &style, seed).map_err(|e| SorterError::Config(e.to_string()))?;
    let (full, _) =
        render_scene(&scene, &RenderConfig::default(), seed).map_err(|e| SorterError::Config(e.to_string()))?;

    let mut out = Vec::new();
    for &size in sizes {
        let frame = full.resample(size);
        let camera = frame.to_u8();
        let path = scratch_dir.join(format!("latency_{size}.pgm"));
        let mut samples: [Vec<f64>; 4] = Default::default();
        for _ in 0..repetitions {
            let t = Instant::now();
            let grabbed = Frame::from_u8(size, size, &camera, frame.um_per_px())?;
            samples[0].push(ms(t));

            let t = Instant::now();
            let img = preprocess(&grabbed, net.config().input_px, style.droplet_diameter_um)?;
            samples[1].push(ms(t));

            let t = Instant::now();
            std::hint::black_box(net.predict(&img)?);
            samples[2].push(ms(t));

            let t = Instant::now();
            save_pgm(&path, &grabbed)?;
            samples[3].push(ms(t));
        }
        let _ = std::fs::remove_file(&path);
        for (stage, s) in Stage::ALL.into_iter().zip(samples) {
            out.push(StageLatency {
                image_px: size,
                stage,
                stats: LatencyStats::from_samples(s),
            });
        }
    }
    Ok(out)
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1000.0
}
