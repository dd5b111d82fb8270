//! The 1-D pre-activation bottleneck residual network.
//!
//! Topology: initial conv → for each block layer a stride-2 max pool then
//! `blocks_per_layer` bottleneck blocks → batch norm + ReLU → mean over time →
//! dense layer to the class logits.

mod checkpoint;
mod config;
mod model;
mod params;

pub use checkpoint::{decode_records, encode_records, load_checkpoint, save_checkpoint, Checkpoint, Record, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::ModelConfig;
pub use model::{argmax, ForwardTrace, Prediction};
pub use params::{build_model, Bottleneck, ConvParams, DenseParams, ModelParams, ParamRole};
