//! Knowledge-gain driven learning-rate scheduling for convolutional networks.
//!
//! The crate scores convolution weights by the low-rank structure of their
//! mode-3/mode-4 unfoldings ([`metrics`], backed by the empirical VBMF
//! estimate in [`lowrank`]) and turns the epoch-to-epoch change of that
//! score into per-block SGD step sizes ([`adas`], [`optim`]). [`theory`]
//! evaluates the step-size bound under which the score grows monotonically,
//! and [`micronet`] is a small CNN harness for running the scheduler end to
//! end. [`experiment`] holds the file formats and runners behind the `adas`
//! command-line tool.

pub mod adas;
pub mod error;
pub mod experiment;
pub mod lowrank;
pub mod metrics;
pub mod micronet;
pub mod optim;
pub mod rng;
pub mod tensor;
pub mod theory;

pub use adas::{AdasConfig, AdasState};
pub use error::{AdasError, Result};
pub use lowrank::{evbmf, singular_values, EvbmfResult, SingularSpectrum};
pub use metrics::{knowledge_gain, layer_metrics, mapping_condition, GainNorm, LayerMetrics};
pub use optim::{momentum_step, LrSchedule, VelocityBuffer};
pub use tensor::{unfold_mode3, unfold_mode4, Matrix, Tensor4};
pub use theory::{lr_lower_bound, quadratic_d, raw_knowledge_gain, BoundReport};
