use super::{Classifier, Decider, DropletEvent, SorterError, StorageLine, TargetRule, TimingModel};
use crate::cnn::{decide, Prediction};

#[derive(Debug, Clone, PartialEq)]
pub struct SortDecision {
    pub id: u64,
    pub t_trigger_ms: f64,
    /// When the verdict was final (or the droplet was abandoned).
    pub t_decision_ms: f64,
    /// `None` for timeouts: the classifier result never arrived.
    pub predicted_class: Option<usize>,
    pub confidence: f64,
    pub accepted: bool,
    pub latency_ms: f64,
    pub timed_out: bool,
    pub true_label: usize,
}

/// Deflection pulse sent to the electrodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseEvent {
    pub id: u64,
    pub t_start_ms: f64,
    pub duration_ms: f64,
    pub freq_hz: f64,
}

/// False positives are counted against sorted droplets, false negatives
/// against all screened droplets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSummary {
    pub n_screened: usize,
    pub n_sorted: usize,
    pub n_targets: usize,
    pub fp_count: usize,
    pub fn_count: usize,
    pub fp_of_sorted: f64,
    pub fn_of_screened: f64,
    pub purity_before: f64,
    /// NaN when nothing was sorted.
    pub purity_after: f64,
    /// NaN when undefined.
    pub enrichment: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub rates: RateSummary,
    pub n_rejected: usize,
    pub timeout_count: usize,
    pub achieved_rate_hz: f64,
    pub latency_mean_ms: f64,
    pub latency_p99_ms: f64,
    pub effective_deadline_ms: f64,
    pub pulse_count: usize,
    pub pulse_overlaps: usize,
    pub storage_evicted: u64,
}

impl RunReport {
    pub fn to_key_values(&self) -> Vec<(&'static str, String)> {
        let r = &self.rates;
        vec![
            ("n_screened", r.n_screened.to_string()),
            ("n_sorted", r.n_sorted.to_string()),
            ("n_rejected", self.n_rejected.to_string()),
            ("timeout_count", self.timeout_count.to_string()),
            ("n_targets", r.n_targets.to_string()),
            ("fp_count", r.fp_count.to_string()),
            ("fn_count", r.fn_count.to_string()),
            ("fp_of_sorted", r.fp_of_sorted.to_string()),
            ("fn_of_screened", r.fn_of_screened.to_string()),
            ("purity_before", r.purity_before.to_string()),
            ("purity_after", r.purity_after.to_string()),
            ("enrichment", r.enrichment.to_string()),
            ("achieved_rate_hz", self.achieved_rate_hz.to_string()),
            ("latency_mean_ms", self.latency_mean_ms.to_string()),
            ("latency_p99_ms", self.latency_p99_ms.to_string()),
            ("effective_deadline_ms", self.effective_deadline_ms.to_string()),
            ("pulse_count", self.pulse_count.to_string()),
            ("pulse_overlaps", self.pulse_overlaps.to_string()),
            ("storage_evicted", self.storage_evicted.to_string()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SortRun {
    pub decisions: Vec<SortDecision>,
    pub pulses: Vec<PulseEvent>,
    pub report: RunReport,
}

/// Target flags for a stream, in stream order.
pub fn target_flags(events: &[DropletEvent], rule: &TargetRule) -> Vec<(u64, bool)> {
    events.iter().map(|e| (e.id, rule.is_target(&e.ground_truth))).collect()
}

/// Runs the stream through the sorter on a virtual clock.
///
/// Each droplet waits `grab_ms`, then queues for the single classifier. If the
/// verdict cannot arrive within the effective deadline (counted from the
/// trigger) the droplet is a timeout and goes to waste; the classifier gives up
/// on it at the deadline. Accepted droplets fire a pulse and enter storage.
pub fn run_sort(
    events: &[DropletEvent],
    decider: &mut dyn Decider,
    timing: &TimingModel,
    storage: &mut StorageLine,
    rule: &TargetRule,
) -> Result<SortRun, SorterError> {
    timing.validate()?;
    let deadline = timing.effective_deadline_ms();
    let mut decisions = Vec::with_capacity(events.len());
    let mut pulses = Vec::new();
    let mut free_at = f64::NEG_INFINITY;
    let mut pulse_end = f64::NEG_INFINITY;
    let mut overlaps = 0;
    let mut prev: Option<f64> = None;

    for ev in events {
        if !ev.t_trigger_ms.is_finite() || prev.is_some_and(|p| !(ev.t_trigger_ms > p)) {
            return Err(SorterError::OutOfOrder {
                id: ev.id,
                t_ms: ev.t_trigger_ms,
                prev_ms: prev.unwrap_or(f64::NAN),
            });
        }
        prev = Some(ev.t_trigger_ms);
        let t = ev.t_trigger_ms;
        let start = (t + timing.grab_ms).max(free_at);
        let finish = start + timing.infer.sample(timing.latency_seed, ev.id);
        let latency = finish - t;

        if latency > deadline {
            if start < t + deadline {
                free_at = free_at.max(t + deadline);
            }
            decisions.push(SortDecision {
                id: ev.id,
                t_trigger_ms: t,
                t_decision_ms: t + deadline,
                predicted_class: None,
                confidence: 0.0,
                accepted: false,
                latency_ms: latency,
                timed_out: true,
                true_label: ev.label,
            });
            continue;
        }

        let verdict = decider.decide(ev)?;
        let accepted = verdict.decision.is_accept();
        free_at = finish;
        if timing.save_in_loop {
            let px = ev.frame.as_ref().map_or(TimingModel::SAVE_REFERENCE_PX, |f| f.width());
            free_at += timing.save_ms_for(px);
        }
        if accepted {
            if finish < pulse_end {
                overlaps += 1;
            }
            pulse_end = pulse_end.max(finish + timing.pulse_ms);
            pulses.push(PulseEvent {
                id: ev.id,
                t_start_ms: finish,
                duration_ms: timing.pulse_ms,
                freq_hz: timing.pulse_freq_hz,
            });
            storage.store(ev.id);
        }
        decisions.push(SortDecision {
            id: ev.id,
            t_trigger_ms: t,
            t_decision_ms: finish,
            predicted_class: Some(verdict.prediction.class),
            confidence: verdict.prediction.confidence,
            accepted,
            latency_ms: latency,
            timed_out: false,
            true_label: ev.label,
        });
    }

    let rates = compute_rates(&decisions, &target_flags(events, rule))?;
    let timeout_count = decisions.iter().filter(|d| d.timed_out).count();
    let on_time: Vec<f64> = decisions
        .iter()
        .filter(|d| !d.timed_out)
        .map(|d| d.t_decision_ms)
        .collect();
    let achieved_rate_hz = match (on_time.first(), on_time.last()) {
        (Some(a), Some(b)) if on_time.len() >= 2 && b > a => (on_time.len() - 1) as f64 / ((b - a) / 1000.0),
        _ => 0.0,
    };
    let mut lat: Vec<f64> = decisions.iter().map(|d| d.latency_ms).collect();
    lat.sort_by(f64::total_cmp);
    let (latency_mean_ms, latency_p99_ms) = if lat.is_empty() {
        (0.0, 0.0)
    } else {
        let rank = ((0.99 * lat.len() as f64).ceil() as usize).clamp(1, lat.len());
        (lat.iter().sum::<f64>() / lat.len() as f64, lat[rank - 1])
    };
    let report = RunReport {
        n_rejected: rates.n_screened - rates.n_sorted - timeout_count,
        rates,
        timeout_count,
        achieved_rate_hz,
        latency_mean_ms,
        latency_p99_ms,
        effective_deadline_ms: deadline,
        pulse_count: pulses.len(),
        pulse_overlaps: overlaps,
        storage_evicted: storage.evicted_count(),
    };
    Ok(SortRun {
        decisions,
        pulses,
        report,
    })
}

/// False-positive / false-negative accounting. `truths[i]` is `(id, is_target)`
/// and must line up with `decisions[i]`.
pub fn compute_rates(decisions: &[SortDecision], truths: &[(u64, bool)]) -> Result<RateSummary, SorterError> {
    if decisions.len() != truths.len() {
        return Err(SorterError::LengthMismatch {
            decisions: decisions.len(),
            truths: truths.len(),
        });
    }
    let (mut n_sorted, mut n_targets, mut fp, mut fneg) = (0, 0, 0, 0);
    for (index, (d, &(truth_id, target))) in decisions.iter().zip(truths).enumerate() {
        if d.id != truth_id {
            return Err(SorterError::IdMismatch {
                index,
                decision_id: d.id,
                truth_id,
            });
        }
        n_targets += target as usize;
        n_sorted += d.accepted as usize;
        fp += (d.accepted && !target) as usize;
        fneg += (!d.accepted && target) as usize;
    }
    Ok(summarize(decisions.len(), n_sorted, n_targets, fp, fneg))
}

fn summarize(n: usize, n_sorted: usize, n_targets: usize, fp: usize, fneg: usize) -> RateSummary {
    let frac = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let purity_before = frac(n_targets, n);
    let purity_after = if n_sorted == 0 {
        f64::NAN
    } else {
        (n_sorted - fp) as f64 / n_sorted as f64
    };
    RateSummary {
        n_screened: n,
        n_sorted,
        n_targets,
        fp_count: fp,
        fn_count: fneg,
        fp_of_sorted: frac(fp, n_sorted),
        fn_of_screened: frac(fneg, n),
        purity_before,
        purity_after,
        enrichment: if purity_before > 0.0 {
            purity_after / purity_before
        } else {
            f64::NAN
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub theta: f64,
    pub sorted_count: usize,
    pub fp_count: usize,
    pub fn_count: usize,
    pub fp_of_sorted: f64,
    pub fn_of_screened: f64,
    /// Fraction of true targets that were sorted.
    pub recall: f64,
}

/// Sweeps thresholds over one frozen set of predictions.
pub fn sweep_predictions(
    predictions: &[(Prediction, bool)],
    target_class: usize,
    thetas: &[f64],
) -> Result<Vec<SweepRow>, SorterError> {
    if thetas.is_empty() {
        return Err(SorterError::Config("no thresholds given".into()));
    }
    if thetas.iter().any(|t| !t.is_finite()) || thetas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SorterError::Config(
            "thresholds must be finite, strictly ascending and distinct".into(),
        ));
    }
    let n_targets = predictions.iter().filter(|(_, t)| *t).count();
    Ok(thetas
        .iter()
        .map(|&theta| {
            let (mut sorted, mut fp, mut fneg) = (0, 0, 0);
            for (p, target) in predictions {
                let acc = decide(p, target_class, theta).is_accept();
                sorted += acc as usize;
                fp += (acc && !target) as usize;
                fneg += (!acc && *target) as usize;
            }
            let s = summarize(predictions.len(), sorted, n_targets, fp, fneg);
            SweepRow {
                theta,
                sorted_count: sorted,
                fp_count: fp,
                fn_count: fneg,
                fp_of_sorted: s.fp_of_sorted,
                fn_of_screened: s.fn_of_screened,
                recall: if n_targets == 0 {
                    f64::NAN
                } else {
                    (n_targets - fneg) as f64 / n_targets as f64
                },
            }
        })
        .collect())
}

/// Classifies every droplet once, then sweeps the thresholds.
pub fn threshold_sweep(
    events: &[DropletEvent],
    classifier: &mut dyn Classifier,
    target_class: usize,
    rule: &TargetRule,
    thetas: &[f64],
) -> Result<Vec<SweepRow>, SorterError> {
    let preds = events
        .iter()
        .map(|e| Ok((classifier.classify(e)?, rule.is_target(&e.ground_truth))))
        .collect::<Result<Vec<_>, SorterError>>()?;
    sweep_predictions(&preds, target_class, thetas)
}
