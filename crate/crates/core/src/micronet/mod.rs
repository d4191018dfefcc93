//! Desk-scale CNN harness for running the scheduler end to end.

pub mod data;
pub mod net;
pub mod train;

pub use data::{load_idx, parse_idx, Dataset, ImageShape, SyntheticSpec};
pub use net::{conv_output_size, evaluate, Batch, Gradients, LayerSpec, Network, NetworkSpec};
pub use train::{batches_per_epoch, Optimizer, TrainRecord, Trainer, DEFAULT_BATCH_SIZE};
