use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ClassifierKind, RunConfig};
use super::scenario::{ModelSpec, ScenarioSpec};
use super::RunnerError;
use crate::cnn::{
    evaluate, evaluate_with, export_activations, load_checkpoint, save_checkpoint, train, write_activation_maps,
    Evaluation, Network, Prediction, Sample,
};
use crate::imgproc::{preprocess, AugmentPlan, MaskSpec};
use crate::seed::derive_seed;
use crate::sorter::csv::{write_decision_log, write_latencies, write_pulses, write_report, write_storage, write_sweep};
use crate::sorter::{
    detect_triggers, measure_stage_latencies, run_sort, synthesize_trace, threshold_sweep, AndDecider, Classifier,
    CnnClassifier, Decider, DropletEvent, ErrorStub, OracleClassifier, Stage, StorageLine, TargetRule,
    ThresholdDecider, TraceShape,
};
use crate::synth::{
    generate_dataset, load_dataset, place_objects, render_scene, scene_from_objects, GroundTruth, SynthError,
};

const GEN_TRAIN: u64 = 1;
const GEN_VAL: u64 = 2;
const AUGMENT: u64 = 3;
const TRAIN: u64 = 4;
const STREAM: u64 = 5;
const TRACE: u64 = 6;
const STUB: u64 = 7;
const LATENCY: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Gen,
    Train,
    Eval,
    Sort,
    Sweep,
    Bench,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Gen => "gen",
            Command::Train => "train",
            Command::Eval => "eval",
            Command::Sort => "sort",
            Command::Sweep => "sweep",
            Command::Bench => "bench",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = RunnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            Command::Gen,
            Command::Train,
            Command::Eval,
            Command::Sort,
            Command::Sweep,
            Command::Bench,
        ]
        .into_iter()
        .find(|c| c.name() == s)
        .ok_or_else(|| RunnerError::Usage(format!("unknown command `{s}`")))
    }
}

/// Human-readable summary plus every file written.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Outcome {
    pub lines: Vec<String>,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    fn say(&mut self, line: String) {
        info!("{line}");
        self.lines.push(line);
    }
}

fn seed_for(cfg: &RunConfig, purpose: u64, k: usize) -> u64 {
    derive_seed(derive_seed(cfg.seed, purpose), k as u64)
}

fn suffix(k: usize) -> &'static str {
    if k == 0 {
        ""
    } else {
        "_b"
    }
}

fn spec_of(cfg: &RunConfig) -> Result<ScenarioSpec, RunnerError> {
    let spec = ScenarioSpec::preset(cfg.scenario);
    if !(2..=spec.models[0].recipes.len()).contains(&cfg.n_classes) {
        return Err(RunnerError::Usage(format!(
            "n_classes {} (scenario {} has {} classes)",
            cfg.n_classes,
            cfg.scenario,
            spec.models[0].recipes.len()
        )));
    }
    if cfg.target_class >= cfg.n_classes {
        return Err(RunnerError::Usage(format!(
            "target_class {} with {} classes",
            cfg.target_class, cfg.n_classes
        )));
    }
    Ok(spec)
}

/// Runs one command. The resolved configuration is written next to the reports first.
pub fn execute(cmd: Command, cfg: &RunConfig) -> Result<Outcome, RunnerError> {
    let spec = spec_of(cfg)?;
    let mut out = Outcome::default();
    let snapshot = cfg.report_dir().join(format!("{cmd}_config.txt"));
    cfg.write_snapshot(&snapshot)?;
    info!("resolved configuration for `{cmd}`:\n{}", cfg.to_text());
    out.files.push(snapshot);
    match cmd {
        Command::Gen => gen(cfg, &spec, &mut out)?,
        Command::Train => train_models(cfg, &spec, &mut out)?,
        Command::Eval => eval(cfg, &spec, &mut out)?,
        Command::Sort => sort(cfg, &spec, &mut out)?,
        Command::Sweep => sweep(cfg, &spec, &mut out)?,
        Command::Bench => bench(cfg, &mut out)?,
    }
    Ok(out)
}

fn gen(cfg: &RunConfig, spec: &ScenarioSpec, out: &mut Outcome) -> Result<(), RunnerError> {
    let style = cfg.style();
    let render = cfg.render();
    for (k, m) in spec.models.iter().enumerate() {
        let recipes = &m.recipes[..cfg.n_classes];
        for (split, n, purpose) in [("train", cfg.n_train, GEN_TRAIN), ("val", cfg.n_val, GEN_VAL)] {
            let dir = cfg.dataset_dir(m.name, split);
            let rows = generate_dataset(recipes, n, &style, &render, m.target, seed_for(cfg, purpose, k), &dir)?;
            let per_class: Vec<String> = recipes
                .iter()
                .enumerate()
                .map(|(c, r)| format!("{}={}", r.name, rows.iter().filter(|row| row.class == c).count()))
                .collect();
            out.say(format!(
                "{}/{split}: {} images ({}) in {}",
                m.name,
                rows.len(),
                per_class.join(", "),
                dir.display()
            ));
            out.files.push(dir);
        }
    }
    Ok(())
}

fn data_error(dir: &Path, e: SynthError) -> RunnerError {
    match e {
        SynthError::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
            RunnerError::Data(format!("no dataset manifest in {} (run `gen` first)", dir.display()))
        }
        other => other.into(),
    }
}

/// Loads a dataset, applies the augmentation plan and prepares classifier inputs.
pub fn load_samples(cfg: &RunConfig, dir: &Path, plan: &AugmentPlan, seed: u64) -> Result<Vec<Sample>, RunnerError> {
    let data = load_dataset(dir).map_err(|e| data_error(dir, e))?;
    let mut samples = Vec::with_capacity(data.len() * plan.multiplier());
    for (i, (frame, label)) in data.into_iter().enumerate() {
        let mask = MaskSpec::centered(
            frame.width(),
            frame.height(),
            cfg.droplet_diameter_um / 2.0 / frame.um_per_px(),
            cfg.illumination,
        );
        for f in plan.apply(&frame, &mask, derive_seed(seed, i as u64)) {
            samples.push((preprocess(&f, cfg.input_px, cfg.droplet_diameter_um)?, label));
        }
    }
    Ok(samples)
}

fn train_models(cfg: &RunConfig, spec: &ScenarioSpec, out: &mut Outcome) -> Result<(), RunnerError> {
    let net_cfg = cfg.network();
    for (k, m) in spec.models.iter().enumerate() {
        let train_dir = cfg.dataset_dir(m.name, "train");
        let train_set = load_samples(cfg, &train_dir, &cfg.augment, seed_for(cfg, AUGMENT, k))?;
        let val_dir = cfg.dataset_dir(m.name, "val");
        let val_set = if val_dir.exists() {
            load_samples(cfg, &val_dir, &AugmentPlan::default(), 0)?
        } else {
            Vec::new()
        };
        out.say(format!(
            "{}: training size {} (plan `{}`), validation size {}",
            m.name,
            train_set.len(),
            cfg.augment,
            val_set.len()
        ));
        let started = Instant::now();
        let result = train::<f32>(
            &net_cfg,
            &cfg.train_config(seed_for(cfg, TRAIN, k)),
            &train_set,
            &val_set,
        )?;
        let secs = started.elapsed().as_secs_f64();

        let ckpt = cfg.model_path(k);
        save_checkpoint(&ckpt, &net_cfg, &result.params)?;
        let hist_path = cfg.report_dir().join(format!("history{}.csv", suffix(k)));
        let mut w = fs::File::create(&hist_path)?;
        writeln!(w, "epoch,train_loss,train_accuracy,val_loss,val_accuracy")?;
        for r in &result.history {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.epoch, r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy
            )?;
        }
        let best = &result.history[result.best_epoch - 1];
        out.say(format!(
            "{}: kept epoch {} (val accuracy {:.3}, val loss {:.4}); {:.1} s; checkpoint {}",
            m.name,
            result.best_epoch,
            best.val_accuracy,
            best.val_loss,
            secs,
            ckpt.display()
        ));
        out.files.push(ckpt);
        out.files.push(hist_path);
    }
    Ok(())
}

fn load_network(cfg: &RunConfig, k: usize) -> Result<Network<f32>, RunnerError> {
    let path = cfg.model_path(k);
    if !path.exists() {
        return Err(RunnerError::Data(format!(
            "no checkpoint at {} (run `train` first)",
            path.display()
        )));
    }
    let (net_cfg, params) = load_checkpoint(&path)?;
    Ok(Network::new(net_cfg, params)?)
}

fn eval(cfg: &RunConfig, spec: &ScenarioSpec, out: &mut Outcome) -> Result<(), RunnerError> {
    for (k, m) in spec.models.iter().enumerate() {
        let val = load_samples(cfg, &cfg.dataset_dir(m.name, "val"), &AugmentPlan::default(), 0)?;
        let evaluation = match cfg.classifier {
            ClassifierKind::Oracle => {
                let mut labels = val.iter().map(|(_, c)| *c);
                evaluate_with(&val, cfg.n_classes, |_| {
                    let c = labels.next().expect("one label per sample");
                    let probs = (0..cfg.n_classes).map(|i| if i == c { 1.0 } else { 0.0 }).collect();
                    Ok(Prediction::from_probs(probs))
                })?
            }
            _ => {
                let net = load_network(cfg, k)?;
                if cfg.activation_stage > 0 {
                    if let Some((img, _)) = val.first() {
                        let maps = export_activations(&net, img, cfg.activation_stage)?;
                        let dir = cfg.report_dir().join(format!("activations{}", suffix(k)));
                        write_activation_maps(&maps, cfg.activation_stage, &dir)?;
                        out.files.push(dir);
                    }
                }
                evaluate(&net, &val)?
            }
        };
        write_evaluation(cfg, k, &evaluation, out)?;
        out.say(format!(
            "{}: accuracy {:.3} over {} images, mean loss {:.4}",
            m.name, evaluation.accuracy, evaluation.n, evaluation.mean_loss
        ));
    }
    Ok(())
}

fn write_evaluation(cfg: &RunConfig, k: usize, e: &Evaluation, out: &mut Outcome) -> Result<(), RunnerError> {
    let metrics = cfg.report_dir().join(format!("metrics{}.csv", suffix(k)));
    let mut w = fs::File::create(&metrics)?;
    writeln!(
        w,
        "key,value\nn,{}\naccuracy,{}\nmean_loss,{}",
        e.n, e.accuracy, e.mean_loss
    )?;
    for c in 0..e.confusion.len() {
        writeln!(w, "recall_{c},{}", e.recall(c))?;
    }
    let confusion = cfg.report_dir().join(format!("confusion{}.csv", suffix(k)));
    let mut w = fs::File::create(&confusion)?;
    let header: Vec<String> = (0..e.confusion.len()).map(|c| format!("pred_{c}")).collect();
    writeln!(w, "true,{}", header.join(","))?;
    for (t, row) in e.confusion.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{t},{}", cells.join(","))?;
    }
    out.files.push(metrics);
    out.files.push(confusion);
    Ok(())
}

/// Droplet stream for sorting: regular arrivals at `rate_hz`, detected through
/// a synthetic photodetector trace. Frames are rendered only when `render`.
pub fn build_stream(cfg: &RunConfig, spec: &ScenarioSpec, render: bool) -> Result<Vec<DropletEvent>, RunnerError> {
    let n = cfg.stream_length;
    if n == 0 {
        return Ok(Vec::new());
    }
    if !(cfg.rate_hz > 0.0) {
        return Err(RunnerError::Usage(format!("rate_hz {}", cfg.rate_hz)));
    }
    let period = 1000.0 / cfg.rate_hz;
    let schedule: Vec<f64> = (0..n).map(|i| 5.0 + period * i as f64).collect();
    let (trace, warnings) = synthesize_trace(
        &schedule,
        &TraceShape::default(),
        schedule[n - 1] + period.max(10.0),
        seed_for(cfg, TRACE, 0),
    )?;
    for w in &warnings {
        log::warn!("{w}");
    }
    let triggers = detect_triggers(&trace, &cfg.trigger())?;
    if triggers.len() != n {
        return Err(RunnerError::Data(format!(
            "{} droplets passed but {} triggers fired; check trigger_threshold, refractory_ms and rate_hz",
            n,
            triggers.len()
        )));
    }
    let style = cfg.style();
    let render_cfg = cfg.render();
    let labeling = spec.models[0].labeling;
    let stream_seed = seed_for(cfg, STREAM, 0);
    triggers
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            let seed = derive_seed(stream_seed, i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let counts = spec.stream.draw_counts(&spec.models, &mut rng);
            let objects = place_objects(counts, &style, &mut rng)?;
            let ground_truth = GroundTruth::from_objects(&objects);
            let frame = if render {
                Some(render_scene(&scene_from_objects(objects, &style), &render_cfg, derive_seed(seed, 1))?.0)
            } else {
                None
            };
            Ok(DropletEvent {
                id: i as u64,
                t_trigger_ms: t,
                label: labeling.label(&ground_truth),
                ground_truth,
                frame,
            })
        })
        .collect()
}

fn classifier_for(cfg: &RunConfig, spec: &ScenarioSpec, k: usize) -> Result<Box<dyn Classifier>, RunnerError> {
    let m: &ModelSpec = &spec.models[k];
    Ok(match cfg.classifier {
        ClassifierKind::Cnn => Box::new(CnnClassifier {
            net: load_network(cfg, k)?,
            droplet_diameter_um: cfg.droplet_diameter_um,
        }),
        ClassifierKind::Oracle => Box::new(OracleClassifier {
            labeling: m.labeling,
            n_classes: cfg.n_classes,
        }),
        ClassifierKind::Stub => Box::new(ErrorStub::new(
            spec.rule.clone(),
            cfg.target_class,
            cfg.n_classes,
            cfg.stub_sensitivity,
            cfg.stub_false_accept,
            seed_for(cfg, STUB, k),
        )?),
    })
}

fn decider_for(cfg: &RunConfig, spec: &ScenarioSpec) -> Result<Box<dyn Decider>, RunnerError> {
    let single = |k| -> Result<Box<dyn Decider>, RunnerError> {
        Ok(Box::new(ThresholdDecider::new(
            classifier_for(cfg, spec, k)?,
            cfg.target_class,
            cfg.theta,
        )?))
    };
    if spec.models.len() == 2 && cfg.classifier != ClassifierKind::Stub {
        Ok(Box::new(AndDecider {
            first: single(0)?,
            second: single(1)?,
        }))
    } else {
        single(0)
    }
}

fn sort(cfg: &RunConfig, spec: &ScenarioSpec, out: &mut Outcome) -> Result<(), RunnerError> {
    let mut decider = decider_for(cfg, spec)?;
    let events = build_stream(cfg, spec, cfg.classifier == ClassifierKind::Cnn)?;
    let timing = cfg.timing(seed_for(cfg, LATENCY, 0));
    let mut storage = StorageLine::new(cfg.storage_capacity);
    let run = run_sort(&events, decider.as_mut(), &timing, &mut storage, &spec.rule)?;

    let dir = cfg.report_dir();
    let files = [
        dir.join("decisions.csv"),
        dir.join("report.csv"),
        dir.join("pulses.csv"),
        dir.join("storage.csv"),
    ];
    write_decision_log(&files[0], &run.decisions)?;
    write_report(&files[1], &run.report)?;
    write_pulses(&files[2], &run.pulses)?;
    write_storage(&files[3], &storage)?;
    out.files.extend(files);

    let r = &run.report;
    out.say(format!(
        "{}: screened {}, sorted {}, rejected {}, timed out {}",
        cfg.scenario, r.rates.n_screened, r.rates.n_sorted, r.n_rejected, r.timeout_count
    ));
    out.say(format!(
        "false positives {:.4} of sorted, false negatives {:.4} of screened, purity {:.3} -> {:.3} (enrichment {:.2}x)",
        r.rates.fp_of_sorted, r.rates.fn_of_screened, r.rates.purity_before, r.rates.purity_after, r.rates.enrichment
    ));
    out.say(format!(
        "achieved rate {:.2} Hz, latency mean {:.2} ms, p99 {:.2} ms (deadline {} ms), pulse overlaps {}",
        r.achieved_rate_hz, r.latency_mean_ms, r.latency_p99_ms, r.effective_deadline_ms, r.pulse_overlaps
    ));
    if cfg.strict && r.latency_p99_ms > r.effective_deadline_ms {
        return Err(RunnerError::Budget(format!(
            "latency p99 {:.2} ms exceeds the {} ms deadline",
            r.latency_p99_ms, r.effective_deadline_ms
        )));
    }
    Ok(())
}

fn sweep(cfg: &RunConfig, spec: &ScenarioSpec, out: &mut Outcome) -> Result<(), RunnerError> {
    if cfg.thetas.is_empty() {
        return Err(RunnerError::Usage("empty threshold list".into()));
    }
    let mut sorted = cfg.thetas.clone();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(RunnerError::Usage(format!("duplicate thresholds in {:?}", cfg.thetas)));
    }
    let mut classifier = classifier_for(cfg, spec, 0)?;
    let events = build_stream(cfg, spec, cfg.classifier == ClassifierKind::Cnn)?;
    let rule = TargetRule::Class {
        labeling: spec.models[0].labeling,
        class: cfg.target_class,
    };
    let rows = threshold_sweep(&events, classifier.as_mut(), cfg.target_class, &rule, &sorted)?;
    let path = cfg.report_dir().join("sweep.csv");
    write_sweep(&path, &rows)?;
    out.files.push(path);
    for r in &rows {
        out.say(format!(
            "theta {:<5} sorted {:>5}  fp {:>4} ({:.3} of sorted)  fn {:>4} ({:.3} of screened)  recall {:.3}{}",
            r.theta,
            r.sorted_count,
            r.fp_count,
            r.fp_of_sorted,
            r.fn_count,
            r.fn_of_screened,
            r.recall,
            if r.theta >= 0.9 { "  <- recall cost" } else { "" }
        ));
    }
    Ok(())
}

fn bench(cfg: &RunConfig, out: &mut Outcome) -> Result<(), RunnerError> {
    let net = load_network(cfg, 0)?;
    let scratch = cfg.report_dir().join("bench_scratch");
    let rows = measure_stage_latencies(&net, &cfg.bench_sizes, cfg.bench_reps, &scratch, cfg.seed)?;
    let _ = fs::remove_dir_all(&scratch);
    let path = cfg.report_dir().join("latency.csv");
    write_latencies(&path, &rows)?;
    out.files.push(path);
    let mut over = Vec::new();
    for r in rows.iter().filter(|r| r.stage == Stage::Inference) {
        out.say(format!(
            "{} px: inference mean {:.2} ms, p99 {:.2} ms (budget {} ms)",
            r.image_px, r.stats.mean_ms, r.stats.p99_ms, cfg.deadline_ms
        ));
        if r.stats.p99_ms > cfg.deadline_ms {
            over.push(r.image_px);
        }
    }
    for r in rows.iter().filter(|r| r.stage == Stage::Save) {
        out.say(format!("{} px: save mean {:.2} ms", r.image_px, r.stats.mean_ms));
    }
    if cfg.strict && !over.is_empty() {
        return Err(RunnerError::Budget(format!(
            "inference p99 above {} ms at sizes {:?}",
            cfg.deadline_ms, over
        )));
    }
    Ok(())
}
