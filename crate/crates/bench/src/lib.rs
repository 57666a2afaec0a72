//! Fixtures shared by the criterion benches.

use dropsort::cnn::{Network, NetworkConfig, Params};
use dropsort::imgproc::preprocess;
use dropsort::runner::{build_stream, RunConfig, Scenario, ScenarioSpec};
use dropsort::sorter::DropletEvent;
use dropsort::synth::{render_scene, sample_scene, OccupancyMap, RenderConfig, SceneStyle};
use dropsort::{Frame, NormalizedFrame, ObjectKind};

/// Default network with freshly initialised weights.
pub fn default_network() -> Network<f32> {
    let cfg = NetworkConfig::default();
    let params = Params::init(&cfg, 7).expect("default config is valid");
    Network::new(cfg, params).expect("params match config")
}

/// One MCF7 droplet rendered at `image_px`.
pub fn cell_frame(image_px: usize) -> Frame {
    let style = SceneStyle::default();
    let occ = OccupancyMap::new().with(ObjectKind::Mcf7Cell, 1.0).expect("lambda 1");
    let scene = sample_scene(&occ, &style, 11).expect("scene fits");
    render_scene(&scene, &RenderConfig::with_image_px(image_px), 12)
        .expect("renders")
        .0
}

pub fn cell_input(image_px: usize) -> NormalizedFrame {
    preprocess(
        &cell_frame(image_px),
        image_px,
        SceneStyle::default().droplet_diameter_um,
    )
    .expect("preprocess")
}

/// Trigger-timed PA stream without frames.
pub fn pa_stream(n: usize) -> (RunConfig, ScenarioSpec, Vec<DropletEvent>) {
    let mut cfg = RunConfig::for_scenario(Scenario::PaSingle);
    cfg.stream_length = n;
    let spec = ScenarioSpec::preset(Scenario::PaSingle);
    let events = build_stream(&cfg, &spec, false).expect("stream builds");
    (cfg, spec, events)
}
