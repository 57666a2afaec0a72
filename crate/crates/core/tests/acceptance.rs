//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use dropsort::cnn::{evaluate, export_activations, load_checkpoint, Network, NetworkConfig, Params, PoolSpec};
use dropsort::imgproc::{preprocess, AugmentPlan, MaskSpec};
use dropsort::runner::{build_stream, execute, load_samples, Command, RunConfig, Scenario, ScenarioSpec};
use dropsort::sorter::{
    run_sort, Decider, DropletEvent, ErrorStub, LatencyModel, OracleClassifier, SortRun, StorageLine, ThresholdDecider,
    TimingModel,
};
use dropsort::stats::{
    binomial_se, expected_post_sort, joint_single_probability, poisson_pmf, JointOccupancy, SortOutcomeModel,
};
use dropsort::{Frame, GroundTruth, Labeling, ObjectKind, ObjectSpec, TargetRule};
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn poisson_fidelity() -> Outcome {
    let single = poisson_pmf(1, 1.0).map_err(|e| e.to_string())?;
    let joint = joint_single_probability(&JointOccupancy::new(1.0, 1.0).map_err(|e| e.to_string())?);
    let e1 = (-1.0f64).exp();
    let (d1, d2) = ((single - e1).abs(), (joint - e1 * e1).abs());
    ensure(
        d1 < 1e-9 && d2 < 1e-9,
        format!("P(1;1) = {single:.9} (err {d1:.1e}), P(1,1;1,1) = {joint:.9} (err {d2:.1e})"),
    )
}

fn gradient_oracle() -> Outcome {
    let mut cfg = NetworkConfig::with_filters(8, 3, &[2, 2, 2]);
    cfg.pool = PoolSpec { window: 1, stride: 1 };
    cfg.dense_units = 8;
    cfg.n_classes = 3;
    let r = common::gradient_check(cfg, 7, None);
    let (idx, a, fd, e) = r.worst;
    ensure(
        r.passed(),
        format!(
            "{} params ({} non-zero), worst rel err {e:.2e} at #{idx} ({a:.6e} vs {fd:.6e}), h = {}",
            r.n_params,
            r.n_live,
            common::FD_STEP
        ),
    )
}

/// Spatial sizes observed in an actual forward pass: conv sizes from the
/// exported activation maps, pooled sizes from the stage that consumes them.
fn observed_trace(px: usize) -> Result<Vec<usize>, String> {
    let cfg = NetworkConfig::with_filters(px, 15, &[8, 16, 32]);
    let net = Network::<f32>::new(cfg.clone(), Params::init(&cfg, 1).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(px as u64);
    let frame = Frame::new(
        px,
        px,
        (0..px * px).map(|_| rng.gen_range(0.0..255.0)).collect(),
        160.0 / px as f64,
    )
    .map_err(|e| e.to_string())?;
    let input = preprocess(&frame, px, 150.0).map_err(|e| e.to_string())?;
    let mut trace = Vec::new();
    for stage in 1..=3 {
        let maps = export_activations(&net, &input, stage).map_err(|e| e.to_string())?;
        let s = net.shapes()[stage - 1];
        if maps.len() != s.filters || maps.iter().any(|m| m.values.len() != m.side * m.side) {
            return Err(format!("stage {stage}: {} maps", maps.len()));
        }
        trace.push(maps[0].side);
        trace.push(s.pool_px);
    }
    net.predict(&input).map_err(|e| e.to_string())?;
    Ok(trace)
}

fn shape_trace() -> Outcome {
    let big = observed_trace(478)?;
    let small = observed_trace(128)?;
    ensure(
        big == [464, 232, 218, 109, 95, 47] && small == [114, 57, 43, 21, 7, 3],
        format!("478 px: {big:?}; 128 px: {small:?}"),
    )
}

fn pa_config(dir: &Path, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::for_scenario(Scenario::PaSingle);
    cfg.seed = seed;
    cfg.out_dir = dir.to_path_buf();
    cfg
}

/// (seed, val accuracy, output dir)
type TrainedRun = (u64, f64, PathBuf);

/// Trains the PA counter for each seed.
fn training_runs(root: &Path) -> Result<(Vec<TrainedRun>, f64), String> {
    let started = Instant::now();
    let mut runs = Vec::new();
    for seed in [1, 2, 3] {
        let dir = root.join(format!("seed{seed}"));
        let cfg = pa_config(&dir, seed);
        execute(Command::Gen, &cfg).map_err(|e| e.to_string())?;
        execute(Command::Train, &cfg).map_err(|e| e.to_string())?;
        let (net_cfg, params) = load_checkpoint(&cfg.model_path(0)).map_err(|e| e.to_string())?;
        let net = Network::new(net_cfg, params).map_err(|e| e.to_string())?;
        let val =
            load_samples(&cfg, &cfg.dataset_dir("pa", "val"), &AugmentPlan::default(), 0).map_err(|e| e.to_string())?;
        let acc = evaluate(&net, &val).map_err(|e| e.to_string())?.accuracy;
        runs.push((seed, acc, dir));
    }
    Ok((runs, started.elapsed().as_secs_f64()))
}

fn training_budget(runs: &[TrainedRun], secs: f64) -> Outcome {
    let cfg = RunConfig::for_scenario(Scenario::PaSingle);
    let passing = runs.iter().filter(|r| r.1 >= 0.90).count();
    let accs: Vec<String> = runs.iter().map(|(s, a, _)| format!("seed {s}: {a:.3}")).collect();
    ensure(
        passing >= 2
            && cfg.n_train == 125
            && cfg.image_px == 128
            && cfg.epochs == 10
            && cfg.learning_rate == 1e-3
            && secs < 600.0,
        format!(
            "{}/3 seeds reach 0.90 ({}); {} per class, {} px, {} epochs, {} lr {}; gen + train {secs:.0} s",
            passing,
            accs.join(", "),
            cfg.n_train,
            cfg.image_px,
            cfg.epochs,
            cfg.optimizer,
            cfg.learning_rate
        ),
    )
}

fn normalization_robustness(runs: &[TrainedRun]) -> Outcome {
    let (seed, _, dir) = runs
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or("no trained model")?;
    let cfg = pa_config(dir, *seed);
    let (net_cfg, params) = load_checkpoint(&cfg.model_path(0)).map_err(|e| e.to_string())?;
    let net = Network::new(net_cfg, params).map_err(|e| e.to_string())?;
    let mut stream_cfg = cfg.clone();
    stream_cfg.stream_length = 100;
    stream_cfg.seed = 500;
    let events =
        build_stream(&stream_cfg, &ScenarioSpec::preset(Scenario::PaSingle), true).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut agree = 0;
    for e in &events {
        let frame = e.frame.as_ref().ok_or("stream without frames")?;
        let (a, b) = (rng.gen_range(0.2..=5.0), rng.gen_range(-50.0..=50.0));
        let plain = preprocess(frame, cfg.input_px, cfg.droplet_diameter_um).map_err(|e| e.to_string())?;
        let shifted =
            preprocess(&frame.affine(a, b), cfg.input_px, cfg.droplet_diameter_um).map_err(|e| e.to_string())?;
        let p = net.predict(&plain).map_err(|e| e.to_string())?;
        let q = net.predict(&shifted).map_err(|e| e.to_string())?;
        agree += usize::from(p.class == q.class);
    }
    ensure(
        agree == 100 && events.len() == 100,
        format!(
            "{agree}/{} argmax classes unchanged (model from seed {seed})",
            events.len()
        ),
    )
}

fn augmentation_bookkeeping() -> Outcome {
    let rot: AugmentPlan = "rot10".parse().map_err(|e: dropsort::ImageError| e.to_string())?;
    let mirror: AugmentPlan = "mirror".parse().map_err(|e: dropsort::ImageError| e.to_string())?;
    let mask = MaskSpec::centered(64, 64, 30.0, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut n_rot, mut n_mirror) = (0, 0);
    for i in 0..300u64 {
        let f = Frame::new(64, 64, (0..64 * 64).map(|_| rng.gen_range(0.0..255.0)).collect(), 1.0)
            .map_err(|e| e.to_string())?;
        n_rot += rot.apply(&f, &mask, i).len();
        n_mirror += mirror.apply(&f, &mask, i).len();
    }
    ensure(
        n_rot == 3300 && n_mirror == 1200,
        format!("300 base images: rot10 -> {n_rot}, mirror -> {n_mirror}"),
    )
}

fn stream(
    scenario: Scenario,
    n: usize,
    tweak: impl FnOnce(&mut RunConfig),
) -> Result<(RunConfig, ScenarioSpec, Vec<DropletEvent>), String> {
    let mut cfg = RunConfig::for_scenario(scenario);
    cfg.stream_length = n;
    tweak(&mut cfg);
    let spec = ScenarioSpec::preset(scenario);
    let events = build_stream(&cfg, &spec, false).map_err(|e| e.to_string())?;
    Ok((cfg, spec, events))
}

fn oracle(labeling: Labeling, target: usize, theta: f64) -> ThresholdDecider {
    ThresholdDecider::new(Box::new(OracleClassifier { labeling, n_classes: 3 }), target, theta).expect("valid decider")
}

fn sort(
    events: &[DropletEvent],
    decider: &mut dyn Decider,
    timing: &TimingModel,
    rule: &TargetRule,
) -> Result<SortRun, String> {
    run_sort(events, decider, timing, &mut StorageLine::default(), rule).map_err(|e| e.to_string())
}

fn deadline_enforcement() -> Outcome {
    let (cfg, spec, events) = stream(Scenario::PaSingle, 400, |c| c.rate_hz = 40.0)?;
    let labeling = Labeling::TargetCount(ObjectKind::PaBead);
    let mut slow = cfg.timing(1);
    slow.infer = LatencyModel::Constant(20.0);
    let late = sort(&events, &mut oracle(labeling, 1, 0.0), &slow, &spec.rule)?;
    let all_late = late.decisions.iter().all(|d| d.timed_out && !d.accepted) && late.report.rates.n_sorted == 0;

    let mut fast = cfg.timing(1);
    fast.infer = LatencyModel::Constant(5.0);
    let run = sort(&events, &mut oracle(labeling, 1, 0.0), &fast, &spec.rule)?;
    let span_s = (events[events.len() - 1].t_trigger_ms - events[0].t_trigger_ms) / 1000.0;
    let r = &run.report;
    ensure(
        all_late
            && late.report.timeout_count == 400
            && r.timeout_count == 0
            && (r.achieved_rate_hz - 40.0).abs() < 1e-6,
        format!(
            "20 ms: {}/400 timed out, {} sorted; 5 ms over {span_s:.3} s: {} timeouts, {:.6} Hz",
            late.report.timeout_count, late.report.rates.n_sorted, r.timeout_count, r.achieved_rate_hz
        ),
    )
}

fn fifo_storage() -> Outcome {
    let mut runner = TestRunner::new(PropConfig {
        cases: 512,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let strategy = proptest::collection::vec(any::<bool>(), 0..200);
    runner
        .run(&strategy, |accepts| {
            let mut line = StorageLine::new(30);
            let mut stored = Vec::new();
            for (id, accept) in accepts.iter().enumerate() {
                if !accept {
                    continue;
                }
                let evicted = line.store(id as u64);
                stored.push(id as u64);
                let expect = (stored.len() > 30).then(|| stored[stored.len() - 31]);
                prop_assert_eq!(evicted, expect);
                prop_assert!(line.len() <= 30);
            }
            let tail: Vec<u64> = stored.iter().rev().take(30).rev().copied().collect();
            prop_assert_eq!(line.contents().collect::<Vec<_>>(), tail);
            prop_assert_eq!(line.evicted_count() as usize, stored.len().saturating_sub(30));
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("512 random accept sequences: order kept, oldest evicted, never above 30".into())
}

fn spheroid_enrichment() -> Outcome {
    let (cfg, spec, events) = stream(Scenario::Spheroid, 5500, |_| {})?;
    let stub = ErrorStub::new(spec.rule.clone(), 2, 3, 0.97, 0.0331, 9).map_err(|e| e.to_string())?;
    let mut decider = ThresholdDecider::new(Box::new(stub), 2, 0.9).map_err(|e| e.to_string())?;
    let run = sort(&events, &mut decider, &cfg.timing(1), &spec.rule)?;
    let r = &run.report.rates;
    let want = expected_post_sort(&SortOutcomeModel::new(0.2, 0.97, 0.0331).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    ensure(
        events.len() == 5500
            && (r.fp_of_sorted - 0.12).abs() <= 0.03
            && r.fn_of_screened <= 0.01
            && r.enrichment >= 3.5
            && (r.purity_after - want.purity_after).abs() <= 0.05,
        format!(
            "prevalence {:.3}, fp/sorted {:.4}, fn/screened {:.4}, enrichment {:.2}x, purity {:.4} vs expected {:.4}",
            r.purity_before, r.fp_of_sorted, r.fn_of_screened, r.enrichment, r.purity_after, want.purity_after
        ),
    )
}

fn accepted(run: &SortRun) -> BTreeSet<u64> {
    run.decisions.iter().filter(|d| d.accepted).map(|d| d.id).collect()
}

fn two_model_and() -> Outcome {
    let (cfg, spec, events) = stream(Scenario::DoublePoisson, 2000, |_| {})?;
    let timing = cfg.timing(1);
    let cells = Labeling::TargetCount(ObjectKind::Mcf7Cell);
    let beads = Labeling::TargetCount(ObjectKind::PaBead);
    let truth: BTreeSet<u64> = events
        .iter()
        .filter(|e| spec.rule.is_target(&e.ground_truth))
        .map(|e| e.id)
        .collect();

    let a = accepted(&sort(&events, &mut oracle(cells, 1, 0.5), &timing, &spec.rule)?);
    let b = accepted(&sort(&events, &mut oracle(beads, 1, 0.5), &timing, &spec.rule)?);
    let mut both = dropsort::sorter::AndDecider {
        first: Box::new(oracle(cells, 1, 0.5)),
        second: Box::new(oracle(beads, 1, 0.5)),
    };
    let and = accepted(&sort(&events, &mut both, &timing, &spec.rule)?);
    let oracle_ok = and == a.intersection(&b).copied().collect() && and == truth;

    // Imperfect models: the combined set must still be the exact intersection.
    let noisy = |labeling, seed| -> Result<ThresholdDecider, String> {
        let rule = TargetRule::Class { labeling, class: 1 };
        let stub = ErrorStub::new(rule, 1, 3, 0.8, 0.2, seed).map_err(|e| e.to_string())?;
        ThresholdDecider::new(Box::new(stub), 1, 0.5).map_err(|e| e.to_string())
    };
    let na = accepted(&sort(&events, &mut noisy(cells, 1)?, &timing, &spec.rule)?);
    let nb = accepted(&sort(&events, &mut noisy(beads, 2)?, &timing, &spec.rule)?);
    let mut noisy_both = dropsort::sorter::AndDecider {
        first: Box::new(noisy(cells, 1)?),
        second: Box::new(noisy(beads, 2)?),
    };
    let nand = accepted(&sort(&events, &mut noisy_both, &timing, &spec.rule)?);
    let noisy_ok = nand == na.intersection(&nb).copied().collect();
    ensure(
        oracle_ok && noisy_ok && !truth.is_empty(),
        format!(
            "oracle: {} accepted = A({}) & B({}) = {} true singles; noisy: {} = {} & {}",
            and.len(),
            a.len(),
            b.len(),
            truth.len(),
            nand.len(),
            na.len(),
            nb.len()
        ),
    )
}

fn mc_vs_analytic() -> Outcome {
    const N: usize = 100_000;
    let (p, s, f) = (0.2, 0.97, 0.0331);
    let labeling = Labeling::Spheroid;
    let rule = TargetRule::Class { labeling, class: 2 };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let events: Vec<DropletEvent> = (0..N)
        .map(|i| {
            let objects: Vec<ObjectSpec> = match rng.gen::<f64>() {
                u if u < p => vec![obj(ObjectKind::Spheroid)],
                u if u < 0.6 => vec![obj(ObjectKind::Mcf7Cell)],
                _ => Vec::new(),
            };
            let ground_truth = GroundTruth::from_objects(&objects);
            DropletEvent {
                id: i as u64,
                t_trigger_ms: 5.0 + 25.0 * i as f64,
                label: labeling.label(&ground_truth),
                ground_truth,
                frame: None,
            }
        })
        .collect();
    let stub = ErrorStub::new(rule.clone(), 2, 3, s, f, 21).map_err(|e| e.to_string())?;
    let mut decider = ThresholdDecider::new(Box::new(stub), 2, 0.9).map_err(|e| e.to_string())?;
    let run = sort(&events, &mut decider, &TimingModel::default(), &rule)?;
    let r = &run.report.rates;
    let want =
        expected_post_sort(&SortOutcomeModel::new(p, s, f).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let accept = r.n_sorted as f64 / r.n_screened as f64;
    let z_accept = (accept - want.accept_fraction) / binomial_se(want.accept_fraction, N);
    let z_purity = (r.purity_after - want.purity_after) / binomial_se(want.purity_after, r.n_sorted);
    ensure(
        run.report.timeout_count == 0 && z_accept.abs() < 3.0 && z_purity.abs() < 3.0,
        format!(
            "n = {N}: accept {accept:.5} vs {:.5} ({z_accept:+.2} SE), purity {:.5} vs {:.5} ({z_purity:+.2} SE)",
            want.accept_fraction, r.purity_after, want.purity_after
        ),
    )
}

fn obj(kind: ObjectKind) -> ObjectSpec {
    ObjectSpec {
        kind,
        diameter_um: 20.0,
        center_um: (0.0, 0.0),
        focus_offset_um: 0.0,
    }
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).into_iter().flatten().flatten() {
            let p = entry.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).expect("under root").to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn determinism(root: &Path) -> Outcome {
    let run = |dir: &Path| -> Result<RunConfig, String> {
        let mut cfg = RunConfig::resolve([
            ("scenario", "pa_single"),
            ("seed", "12"),
            ("image_px", "64"),
            ("input_px", "64"),
            ("kernel_px", "5"),
            ("filters", "2,3,4"),
            ("dense_units", "8"),
            ("n_train", "6"),
            ("n_val", "2"),
            ("epochs", "2"),
            ("stream_length", "40"),
        ])
        .map_err(|e| e.to_string())?;
        cfg.out_dir = dir.to_path_buf();
        for cmd in [Command::Gen, Command::Train, Command::Sort] {
            execute(cmd, &cfg).map_err(|e| format!("{cmd}: {e}"))?;
        }
        Ok(cfg)
    };
    let a = run(&root.join("a"))?;
    let b = run(&root.join("b"))?;
    let mut compared = 0;
    let mut mismatched = Vec::new();
    let data = files_under(&a.data_dir());
    if data != files_under(&b.data_dir()) || data.is_empty() {
        return Err("dataset file lists differ".into());
    }
    let mut pairs: Vec<(PathBuf, PathBuf)> = data
        .iter()
        .map(|p| (a.data_dir().join(p), b.data_dir().join(p)))
        .collect();
    for f in ["model.ckpt", "model.ckpt.shapes.txt"] {
        pairs.push((a.out_dir.join(f), b.out_dir.join(f)));
    }
    pairs.push((
        a.report_dir().join("decisions.csv"),
        b.report_dir().join("decisions.csv"),
    ));
    for (x, y) in pairs {
        compared += 1;
        if fs::read(&x).map_err(|e| format!("{}: {e}", x.display()))? != fs::read(&y).map_err(|e| e.to_string())? {
            mismatched.push(x.display().to_string());
        }
    }
    ensure(
        mismatched.is_empty(),
        format!(
            "{compared} files compared ({} dataset files, checkpoint, decision log); mismatches: {mismatched:?}",
            data.len()
        ),
    )
}

fn main() {
    let root = tempfile::tempdir().expect("temp dir");
    let started = Instant::now();
    let mut failures = 0;
    let mut report = |n: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(&mut *f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {n:>2} {name}: {detail} [{secs:.1} s]"),
            Err(detail) => {
                failures += 1;
                println!("FAIL {n:>2} {name}: {detail} [{secs:.1} s]");
            }
        }
    };

    report(1, "poisson fidelity", &mut poisson_fidelity);
    report(2, "gradient oracle", &mut gradient_oracle);
    report(3, "shape trace", &mut shape_trace);
    let runs = training_runs(&root.path().join("train"));
    report(4, "training at 125 images per class", &mut || {
        let (runs, secs) = runs.as_ref().map_err(|e| e.clone())?;
        training_budget(runs, *secs)
    });
    report(5, "normalization robustness", &mut || {
        normalization_robustness(&runs.as_ref().map_err(|e| e.clone())?.0)
    });
    report(6, "augmentation bookkeeping", &mut augmentation_bookkeeping);
    report(7, "deadline enforcement", &mut deadline_enforcement);
    report(8, "FIFO storage", &mut fifo_storage);
    report(9, "spheroid enrichment", &mut spheroid_enrichment);
    report(10, "two-model AND selection", &mut two_model_and);
    report(11, "Monte Carlo vs analytic", &mut mc_vs_analytic);
    report(12, "determinism", &mut || determinism(&root.path().join("det")));

    println!(
        "acceptance: {} passed, {failures} failed in {:.1} s",
        12 - failures,
        started.elapsed().as_secs_f64()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
