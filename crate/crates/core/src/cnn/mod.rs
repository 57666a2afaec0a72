//! From-scratch convolutional classifier: forward/backward passes, training,
//! thresholded decisions, activation export and checkpoints.

mod activations;
pub mod checkpoint;
mod config;
mod decision;
mod network;
mod real;
mod tensor;
mod train;

pub use activations::{export_activations, write_activation_maps, ActivationMap};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::{ConvSpec, NetworkConfig, Optimizer, PoolSpec, StageShape, TrainConfig};
pub use decision::{combine_and, decide, predict_with_threshold, Decision};
pub use network::{loss, BackwardScratch, ForwardCache, Layer, Network, Params, Prediction};
pub use real::Real;
pub use tensor::Tensor;
pub use train::{evaluate, evaluate_with, incremental_retrain, train, EpochRecord, Evaluation, Sample, TrainOutcome};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CnnError {
    #[error("network configuration: {0}")]
    Config(String),
    #[error("input is {width}x{height}, network expects {expected}x{expected}")]
    Shape {
        expected: usize,
        width: usize,
        height: usize,
    },
    #[error("label {label} out of range for {n_classes} classes")]
    Label { label: usize, n_classes: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("stage {stage} does not exist (network has {depth} conv stages, numbered from 1)")]
    Stage { stage: usize, depth: usize },
    #[error("training diverged (non-finite parameters) in epoch {0}")]
    Diverged(usize),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
