#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Droplet image sorting: occupancy statistics, synthetic droplet rendering,
//! image preprocessing, a convolutional classifier and a real-time sort loop.

pub mod cnn;
pub mod imgproc;
pub mod runner;
pub mod seed;
pub mod sorter;
pub mod stats;
pub mod synth;

pub use cnn::{CnnError, Decision, Network, NetworkConfig, Params, Prediction, TrainConfig};
pub use imgproc::{Frame, ImageError, MaskSpec, NormalizedFrame};
pub use sorter::{DropletEvent, RunReport, SortDecision, SorterError, StorageLine, TargetRule, TimingModel};
pub use synth::{CountClass, DropletScene, GroundTruth, Labeling, ObjectKind, ObjectSpec, SynthError};
