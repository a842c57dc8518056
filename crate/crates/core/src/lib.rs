//! Emotion classification from facial Motion-Unit features with small
//! sigmoid networks.
//!
//! - [`net`]: the network, forward pass and model files.
//! - [`training`]: momentum backpropagation.
//! - [`optim`]: Powell's direction set and the downhill simplex, plus training
//!   a network with Powell's method.
//! - [`dataset`]: labeled sequences, their file format and preparation steps.
//! - [`eval`]: output post-processing and confusion matrices.
//! - [`search`]: grid search over training parameters.
//! - [`synth`]: Bezier-curve synthetic sequences.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod eval;
pub mod net;
pub mod optim;
pub mod search;
pub mod synth;
pub mod training;

pub use dataset::{CategoryMap, Dataset, EmotionLabel, FeatureVector, Frame, LabeledSequence, MU_COUNT};
pub use error::{Error, Result};
pub use eval::{evaluate, ConfusionMatrix, EvalOptions, Evaluation};
pub use net::{sigmoid, InitRange, Network, WeightMatrix};
pub use search::{SearchRecord, SearchSpace};
pub use synth::{EmotionTemplate, SynthConfig};
pub use training::{train, HyperParams, Pattern, TrainOutcome};
