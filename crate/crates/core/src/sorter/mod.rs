//! Virtual-clock simulation of the sort loop: photodetector triggering,
//! deadline-bound classification, deflection pulses and the FIFO storage line,
//! with false-positive / false-negative accounting.

mod classify;
pub mod csv;
mod latency;
mod run;
mod storage;
mod timing;
mod trace;

pub use classify::{
    AndDecider, Classifier, CnnClassifier, Decider, ErrorStub, OracleClassifier, ThresholdDecider, Verdict,
};
pub use latency::{measure_stage_latencies, LatencyStats, Stage, StageLatency};
pub use run::{
    compute_rates, run_sort, sweep_predictions, threshold_sweep, PulseEvent, RateSummary, RunReport, SortDecision,
    SortRun, SweepRow,
};
pub use storage::StorageLine;
pub use timing::{LatencyModel, TimingModel};
pub use trace::{detect_triggers, synthesize_trace, PhotodetectorTrace, TraceShape, TriggerConfig};

use thiserror::Error;

use crate::imgproc::Frame;
use crate::synth::{GroundTruth, Labeling, ObjectKind};

#[derive(Debug, Error)]
pub enum SorterError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("droplet {id} triggered at {t_ms} ms, not after the previous droplet ({prev_ms} ms)")]
    OutOfOrder { id: u64, t_ms: f64, prev_ms: f64 },
    #[error("decision and truth lists disagree at position {index}: decision id {decision_id}, truth id {truth_id}")]
    IdMismatch {
        index: usize,
        decision_id: u64,
        truth_id: u64,
    },
    #[error("decision count {decisions} does not match truth count {truths}")]
    LengthMismatch { decisions: usize, truths: usize },
    #[error("droplet {0} has no frame but the classifier needs one")]
    MissingFrame(u64),
    #[error(transparent)]
    Cnn(#[from] crate::cnn::CnnError),
    #[error(transparent)]
    Image(#[from] crate::imgproc::ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One droplet passing the trigger point.
#[derive(Debug, Clone, PartialEq)]
pub struct DropletEvent {
    pub id: u64,
    pub t_trigger_ms: f64,
    pub ground_truth: GroundTruth,
    /// Not needed by label-only classifiers; long statistical streams skip rendering.
    pub frame: Option<Frame>,
    /// True class under the scenario labeling.
    pub label: usize,
}

/// Which droplets count as correct sorts.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetRule {
    /// The droplet's class under `labeling` equals `class`.
    Class { labeling: Labeling, class: usize },
    /// Exactly one object of every listed kind (double Poisson selection).
    Singles(Vec<ObjectKind>),
}

impl TargetRule {
    pub fn is_target(&self, gt: &GroundTruth) -> bool {
        match self {
            TargetRule::Class { labeling, class } => labeling.label(gt) == *class,
            TargetRule::Singles(kinds) => kinds.iter().all(|&k| gt.count(k) == 1),
        }
    }
}
