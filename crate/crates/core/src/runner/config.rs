use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::scenario::{Scenario, ScenarioSpec};
use super::RunnerError;
use crate::cnn::{NetworkConfig, Optimizer, PoolSpec, TrainConfig};
use crate::imgproc::AugmentPlan;
use crate::sorter::{LatencyModel, TimingModel, TriggerConfig};
use crate::synth::{RenderConfig, SceneStyle};

/// Which classifier the sort and eval commands use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierKind {
    Cnn,
    Oracle,
    Stub,
}

impl FromStr for ClassifierKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cnn" => Ok(Self::Cnn),
            "oracle" => Ok(Self::Oracle),
            "stub" => Ok(Self::Stub),
            _ => Err("expected cnn, oracle or stub".into()),
        }
    }
}

impl std::fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Cnn => "cnn",
            Self::Oracle => "oracle",
            Self::Stub => "stub",
        })
    }
}

/// Every setting of a run. Serialized as flat `key=value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub scenario: Scenario,
    pub out_dir: PathBuf,
    pub data_dir: Option<PathBuf>,
    pub model_path: Option<PathBuf>,
    pub model_path_b: Option<PathBuf>,
    pub report_dir: Option<PathBuf>,

    pub image_px: usize,
    pub droplet_diameter_um: f64,
    pub noise_sigma: f64,
    pub illumination: f64,
    pub motion_blur_um: f64,
    pub focus_spread_um: f64,
    pub n_train: usize,
    pub n_val: usize,
    /// Train on the first `n_classes` classes of the scenario.
    pub n_classes: usize,
    pub augment: AugmentPlan,

    pub input_px: usize,
    pub kernel_px: usize,
    pub filters: Vec<usize>,
    pub pool: PoolSpec,
    pub dense_units: usize,
    pub dropout_rate: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub shuffle: bool,

    pub classifier: ClassifierKind,
    pub stub_sensitivity: f64,
    pub stub_false_accept: f64,
    pub theta: f64,
    pub target_class: usize,
    pub stream_length: usize,
    pub rate_hz: f64,
    pub trigger_threshold: f64,
    pub refractory_ms: f64,
    pub grab_ms: f64,
    pub infer_ms: LatencyModel,
    pub deadline_ms: f64,
    pub pulse_ms: f64,
    pub pulse_freq_hz: f64,
    pub offset_um: f64,
    pub droplet_speed_um_per_ms: Option<f64>,
    pub save_ms: f64,
    pub save_in_loop: bool,
    pub storage_capacity: usize,

    pub thetas: Vec<f64>,
    pub bench_sizes: Vec<usize>,
    pub bench_reps: usize,
    pub activation_stage: usize,
    pub strict: bool,
}

fn list<T: Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| t.trim().parse::<T>().map_err(|_| format!("bad list element `{t}`")))
        .collect()
}

fn opt_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or("auto".into(), |p| p.display().to_string())
}

fn parse_opt_path(s: &str) -> Result<Option<PathBuf>, String> {
    Ok((s != "auto").then(|| PathBuf::from(s)))
}

fn parse<T: FromStr>(s: &str) -> Result<T, String>
where
    T::Err: Display,
{
    s.parse::<T>().map_err(|e| e.to_string())
}

impl RunConfig {
    pub fn for_scenario(scenario: Scenario) -> Self {
        let spec = ScenarioSpec::preset(scenario);
        let style = SceneStyle::default();
        let net = NetworkConfig::default();
        let train = TrainConfig::default();
        let timing = TimingModel::default();
        Self {
            seed: 0,
            scenario,
            out_dir: PathBuf::from("out"),
            data_dir: None,
            model_path: None,
            model_path_b: None,
            report_dir: None,
            image_px: 128,
            droplet_diameter_um: spec.droplet_diameter_um,
            noise_sigma: style.noise_sigma,
            illumination: style.illumination,
            motion_blur_um: style.motion_blur_um,
            focus_spread_um: style.focus_spread_um,
            n_train: spec.n_train,
            n_val: spec.n_val,
            n_classes: 3,
            augment: spec.augment,
            input_px: net.input_px,
            kernel_px: net.conv_layers[0].kernel_px,
            filters: net.conv_layers.iter().map(|c| c.filters).collect(),
            pool: net.pool,
            dense_units: net.dense_units,
            dropout_rate: net.dropout_rate,
            epochs: train.epochs,
            learning_rate: train.learning_rate,
            batch_size: train.batch_size,
            optimizer: train.optimizer,
            shuffle: train.shuffle,
            classifier: ClassifierKind::Cnn,
            stub_sensitivity: 0.97,
            stub_false_accept: 0.0331,
            theta: spec.theta,
            target_class: spec.target_class,
            stream_length: spec.stream_length,
            rate_hz: 40.0,
            trigger_threshold: TriggerConfig::default().threshold,
            refractory_ms: TriggerConfig::default().refractory_ms,
            grab_ms: timing.grab_ms,
            infer_ms: timing.infer,
            deadline_ms: timing.deadline_ms,
            pulse_ms: timing.pulse_ms,
            pulse_freq_hz: timing.pulse_freq_hz,
            offset_um: timing.imaging_to_junction_um,
            droplet_speed_um_per_ms: timing.droplet_speed_um_per_ms,
            save_ms: timing.save_ms,
            save_in_loop: timing.save_in_loop,
            storage_capacity: 30,
            thetas: vec![0.0, 0.5, 0.9, 0.99],
            bench_sizes: vec![50, 128, 256, 478],
            bench_reps: 20,
            activation_stage: 0,
            strict: false,
        }
    }

    /// Scenario defaults overlaid with `overrides` in order. A `scenario` key
    /// anywhere in the list picks the preset first.
    pub fn resolve<'a, I>(overrides: I) -> Result<Self, RunnerError>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let pairs: Vec<(&str, &str)> = overrides.into_iter().collect();
        let scenario = match pairs.iter().rev().find(|(k, _)| *k == "scenario") {
            Some((_, v)) => v.parse()?,
            None => Scenario::PaSingle,
        };
        let mut cfg = Self::for_scenario(scenario);
        for (k, v) in pairs {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse_file_text(text: &str) -> Result<Vec<(String, String)>, RunnerError> {
        let mut out = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| RunnerError::Usage(format!("config line {}: expected key = value", n + 1)))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(out)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), RunnerError> {
        let v = value.trim();
        let r: Result<(), String> = (|| {
            match key {
                "seed" => self.seed = parse(v)?,
                "scenario" => self.scenario = v.parse().map_err(|e: RunnerError| e.to_string())?,
                "out_dir" => self.out_dir = PathBuf::from(v),
                "data_dir" => self.data_dir = parse_opt_path(v)?,
                "model_path" => self.model_path = parse_opt_path(v)?,
                "model_path_b" => self.model_path_b = parse_opt_path(v)?,
                "report_dir" => self.report_dir = parse_opt_path(v)?,
                "image_px" => self.image_px = parse(v)?,
                "droplet_diameter_um" => self.droplet_diameter_um = parse(v)?,
                "noise_sigma" => self.noise_sigma = parse(v)?,
                "illumination" => self.illumination = parse(v)?,
                "motion_blur_um" => self.motion_blur_um = parse(v)?,
                "focus_spread_um" => self.focus_spread_um = parse(v)?,
                "n_train" => self.n_train = parse(v)?,
                "n_val" => self.n_val = parse(v)?,
                "n_classes" => self.n_classes = parse(v)?,
                "augment" => self.augment = parse(v)?,
                "input_px" => self.input_px = parse(v)?,
                "kernel_px" => self.kernel_px = parse(v)?,
                "filters" => self.filters = parse_list(v)?,
                "pool" => {
                    let (w, s) = v.split_once('/').ok_or("expected WINDOW/STRIDE")?;
                    self.pool = PoolSpec {
                        window: parse(w)?,
                        stride: parse(s)?,
                    };
                }
                "dense_units" => self.dense_units = parse(v)?,
                "dropout_rate" => self.dropout_rate = parse(v)?,
                "epochs" => self.epochs = parse(v)?,
                "learning_rate" => self.learning_rate = parse(v)?,
                "batch_size" => self.batch_size = parse(v)?,
                "optimizer" => self.optimizer = parse(v)?,
                "shuffle" => self.shuffle = parse(v)?,
                "classifier" => self.classifier = v.parse()?,
                "stub_sensitivity" => self.stub_sensitivity = parse(v)?,
                "stub_false_accept" => self.stub_false_accept = parse(v)?,
                "theta" => self.theta = parse(v)?,
                "target_class" => self.target_class = parse(v)?,
                "stream_length" => self.stream_length = parse(v)?,
                "rate_hz" => self.rate_hz = parse(v)?,
                "trigger_threshold" => self.trigger_threshold = parse(v)?,
                "refractory_ms" => self.refractory_ms = parse(v)?,
                "grab_ms" => self.grab_ms = parse(v)?,
                "infer_ms" => self.infer_ms = parse(v)?,
                "deadline_ms" => self.deadline_ms = parse(v)?,
                "pulse_ms" => self.pulse_ms = parse(v)?,
                "pulse_freq_hz" => self.pulse_freq_hz = parse(v)?,
                "offset_um" => self.offset_um = parse(v)?,
                "droplet_speed_um_per_ms" => {
                    self.droplet_speed_um_per_ms = if v == "auto" { None } else { Some(parse(v)?) }
                }
                "save_ms" => self.save_ms = parse(v)?,
                "save_in_loop" => self.save_in_loop = parse(v)?,
                "storage_capacity" => self.storage_capacity = parse(v)?,
                "thetas" => self.thetas = parse_list(v)?,
                "bench_sizes" => self.bench_sizes = parse_list(v)?,
                "bench_reps" => self.bench_reps = parse(v)?,
                "activation_stage" => self.activation_stage = parse(v)?,
                "strict" => self.strict = parse(v)?,
                _ => return Err("unknown key".into()),
            }
            Ok(())
        })();
        r.map_err(|e| RunnerError::Usage(format!("config key `{key}` = `{value}`: {e}")))
    }

    /// All keys in a fixed order.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("seed", self.seed.to_string()),
            ("scenario", self.scenario.to_string()),
            ("out_dir", self.out_dir.display().to_string()),
            ("data_dir", opt_path(&self.data_dir)),
            ("model_path", opt_path(&self.model_path)),
            ("model_path_b", opt_path(&self.model_path_b)),
            ("report_dir", opt_path(&self.report_dir)),
            ("image_px", self.image_px.to_string()),
            ("droplet_diameter_um", self.droplet_diameter_um.to_string()),
            ("noise_sigma", self.noise_sigma.to_string()),
            ("illumination", self.illumination.to_string()),
            ("motion_blur_um", self.motion_blur_um.to_string()),
            ("focus_spread_um", self.focus_spread_um.to_string()),
            ("n_train", self.n_train.to_string()),
            ("n_val", self.n_val.to_string()),
            ("n_classes", self.n_classes.to_string()),
            ("augment", self.augment.to_string()),
            ("input_px", self.input_px.to_string()),
            ("kernel_px", self.kernel_px.to_string()),
            ("filters", list(&self.filters)),
            ("pool", format!("{}/{}", self.pool.window, self.pool.stride)),
            ("dense_units", self.dense_units.to_string()),
            ("dropout_rate", self.dropout_rate.to_string()),
            ("epochs", self.epochs.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("optimizer", self.optimizer.to_string()),
            ("shuffle", self.shuffle.to_string()),
            ("classifier", self.classifier.to_string()),
            ("stub_sensitivity", self.stub_sensitivity.to_string()),
            ("stub_false_accept", self.stub_false_accept.to_string()),
            ("theta", self.theta.to_string()),
            ("target_class", self.target_class.to_string()),
            ("stream_length", self.stream_length.to_string()),
            ("rate_hz", self.rate_hz.to_string()),
            ("trigger_threshold", self.trigger_threshold.to_string()),
            ("refractory_ms", self.refractory_ms.to_string()),
            ("grab_ms", self.grab_ms.to_string()),
            ("infer_ms", self.infer_ms.to_string()),
            ("deadline_ms", self.deadline_ms.to_string()),
            ("pulse_ms", self.pulse_ms.to_string()),
            ("pulse_freq_hz", self.pulse_freq_hz.to_string()),
            ("offset_um", self.offset_um.to_string()),
            (
                "droplet_speed_um_per_ms",
                self.droplet_speed_um_per_ms.map_or("auto".into(), |v| v.to_string()),
            ),
            ("save_ms", self.save_ms.to_string()),
            ("save_in_loop", self.save_in_loop.to_string()),
            ("storage_capacity", self.storage_capacity.to_string()),
            ("thetas", list(&self.thetas)),
            ("bench_sizes", list(&self.bench_sizes)),
            ("bench_reps", self.bench_reps.to_string()),
            ("activation_stage", self.activation_stage.to_string()),
            ("strict", self.strict.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        self.to_pairs().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn data_dir(&self) -> PathBuf {
        self.data_dir.clone().unwrap_or_else(|| self.out_dir.join("data"))
    }

    pub fn report_dir(&self) -> PathBuf {
        self.report_dir.clone().unwrap_or_else(|| self.out_dir.join("reports"))
    }

    /// Checkpoint of the `k`-th model of the scenario.
    pub fn model_path(&self, k: usize) -> PathBuf {
        match k {
            0 => self
                .model_path
                .clone()
                .unwrap_or_else(|| self.out_dir.join("model.ckpt")),
            _ => self
                .model_path_b
                .clone()
                .unwrap_or_else(|| self.out_dir.join("model_b.ckpt")),
        }
    }

    pub fn dataset_dir(&self, model_name: &str, split: &str) -> PathBuf {
        self.data_dir().join(model_name).join(split)
    }

    pub fn style(&self) -> SceneStyle {
        SceneStyle {
            droplet_diameter_um: self.droplet_diameter_um,
            noise_sigma: self.noise_sigma,
            illumination: self.illumination,
            motion_blur_um: self.motion_blur_um,
            focus_spread_um: self.focus_spread_um,
        }
    }

    pub fn render(&self) -> RenderConfig {
        RenderConfig::with_image_px(self.image_px)
    }

    pub fn network(&self) -> NetworkConfig {
        let mut n = NetworkConfig::with_filters(self.input_px, self.kernel_px, &self.filters);
        n.pool = self.pool;
        n.dense_units = self.dense_units;
        n.dropout_rate = self.dropout_rate;
        n.n_classes = self.n_classes;
        n
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            seed,
            shuffle: self.shuffle,
            optimizer: self.optimizer,
        }
    }

    pub fn timing(&self, latency_seed: u64) -> TimingModel {
        TimingModel {
            grab_ms: self.grab_ms,
            infer: self.infer_ms,
            latency_seed,
            deadline_ms: self.deadline_ms,
            pulse_ms: self.pulse_ms,
            pulse_freq_hz: self.pulse_freq_hz,
            imaging_to_junction_um: self.offset_um,
            droplet_speed_um_per_ms: self.droplet_speed_um_per_ms,
            save_ms: self.save_ms,
            save_in_loop: self.save_in_loop,
        }
    }

    pub fn trigger(&self) -> TriggerConfig {
        TriggerConfig {
            threshold: self.trigger_threshold,
            refractory_ms: self.refractory_ms,
        }
    }

    /// Writes the resolved configuration; feeding it back reproduces the run.
    pub fn write_snapshot(&self, path: &Path) -> Result<(), RunnerError> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, format!("# resolved configuration\n{}", self.to_text()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_key_roundtrips() {
        for sc in Scenario::ALL {
            let mut cfg = RunConfig::for_scenario(sc);
            cfg.seed = 17;
            cfg.model_path = Some("m/x.ckpt".into());
            cfg.droplet_speed_um_per_ms = Some(50.0);
            cfg.infer_ms = LatencyModel::Uniform { min: 1.0, max: 9.5 };
            let text = cfg.to_text();
            let pairs = RunConfig::parse_file_text(&text).unwrap();
            assert_eq!(pairs.len(), cfg.to_pairs().len());
            let back = RunConfig::resolve(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str()))).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn unknown_keys_and_bad_values_are_usage_errors() {
        assert!(matches!(
            RunConfig::resolve([("colour", "red")]),
            Err(RunnerError::Usage(_))
        ));
        assert!(matches!(
            RunConfig::resolve([("epochs", "ten")]),
            Err(RunnerError::Usage(_))
        ));
        assert!(matches!(
            RunConfig::resolve([("scenario", "nope")]),
            Err(RunnerError::Usage(_))
        ));
        assert!(RunConfig::parse_file_text("just words").is_err());
    }

    #[test]
    fn comments_and_scenario_presets() {
        let text = "# header\nscenario = spheroid   # trailing\n\nseed=3\n";
        let pairs = RunConfig::parse_file_text(text).unwrap();
        let cfg = RunConfig::resolve(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str()))).unwrap();
        assert_eq!(cfg.scenario, Scenario::Spheroid);
        assert_eq!(
            (cfg.seed, cfg.theta, cfg.stream_length, cfg.target_class),
            (3, 0.9, 5500, 2)
        );
        assert_eq!(cfg.model_path(1), PathBuf::from("out/model_b.ckpt"));
    }
}
