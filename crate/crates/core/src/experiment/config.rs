//! Flat `key = value` run configuration.
//!
//! ```text
//! # comments and blank lines are ignored
//! optimizer = adas
//! beta = 0.85
//! epochs = 20
//! dataset = synthetic
//! ```
//!
//! Command-line overrides go through the same [`RunConfig::set`].

use std::fs;
use std::path::{Path, PathBuf};

use crate::adas::{AdasConfig, DEFAULT_ETA_MIN};
use crate::error::{AdasError, Result};
use crate::micronet::data::SyntheticSpec;
use crate::micronet::net::{LayerSpec, NetworkSpec};
use crate::micronet::train::{Optimizer, DEFAULT_BATCH_SIZE};
use crate::optim::LrSchedule;

pub const DEFAULT_NETWORK: &str = "conv8,pool,conv16,pool,conv16";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adas,
    Fixed,
    StepDecay,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
    Synthetic {
        spec: SyntheticSpec,
        test_samples: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub optimizer: OptimizerKind,
    pub beta: f64,
    pub zeta: f64,
    pub eta_init: f64,
    pub eta_min: f64,
    pub momentum: f64,
    pub step_factor: f64,
    pub step_period: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub dataset: DataSource,
    pub network: Vec<LayerSpec>,
    pub out_dir: PathBuf,
    pub snapshots: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let adas = AdasConfig::default();
        Self {
            optimizer: OptimizerKind::Adas,
            beta: adas.beta,
            zeta: adas.zeta,
            eta_init: adas.eta_init,
            eta_min: DEFAULT_ETA_MIN,
            momentum: adas.momentum,
            step_factor: 0.5,
            step_period: 25,
            epochs: 20,
            batch_size: DEFAULT_BATCH_SIZE,
            seed: 0,
            dataset: DataSource::Synthetic {
                spec: SyntheticSpec { samples: 8000, ..SyntheticSpec::default() },
                test_samples: 2000,
            },
            network: NetworkSpec::parse_layers(DEFAULT_NETWORK).expect("default network parses"),
            out_dir: PathBuf::from("run"),
            snapshots: false,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| AdasError::config(key, format!("cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(AdasError::config(key, format!("expected a boolean, got `{value}`"))),
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| AdasError::config("config", format!("{}: {e}", path.display())))?;
        Self::parse_str(&text)
    }

    /// Parses config text on top of the defaults, without final validation.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                AdasError::config("config", format!("line {}: expected `key = value`", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    fn synthetic_mut(&mut self, key: &str) -> Result<(&mut SyntheticSpec, &mut usize)> {
        match &mut self.dataset {
            DataSource::Synthetic { spec, test_samples } => Ok((spec, test_samples)),
            DataSource::Idx { .. } => Err(AdasError::config(key, "only applies to dataset = synthetic")),
        }
    }

    fn idx_mut(&mut self, key: &str) -> Result<&mut PathBuf> {
        if !matches!(self.dataset, DataSource::Idx { .. }) {
            self.dataset = DataSource::Idx {
                train_images: PathBuf::new(),
                train_labels: PathBuf::new(),
                test_images: PathBuf::new(),
                test_labels: PathBuf::new(),
            };
        }
        let DataSource::Idx { train_images, train_labels, test_images, test_labels } = &mut self.dataset
        else {
            unreachable!()
        };
        Ok(match key {
            "train_images" => train_images,
            "train_labels" => train_labels,
            "test_images" => test_images,
            _ => test_labels,
        })
    }

    /// Applies one setting. Keys accept `-` in place of `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.replace('-', "_");
        let key = key.as_str();
        match key {
            "optimizer" => {
                self.optimizer = match value {
                    "adas" => OptimizerKind::Adas,
                    "fixed" | "sgd" => OptimizerKind::Fixed,
                    "step" | "step_decay" | "step-decay" | "steplr" => OptimizerKind::StepDecay,
                    _ => return Err(AdasError::config(key, format!("unknown optimizer `{value}`"))),
                }
            }
            "beta" => self.beta = parse(key, value)?,
            "zeta" => self.zeta = parse(key, value)?,
            "eta_init" | "lr" => self.eta_init = parse(key, value)?,
            "eta_min" => self.eta_min = parse(key, value)?,
            "momentum" => self.momentum = parse(key, value)?,
            "step_factor" => self.step_factor = parse(key, value)?,
            "step_period" => self.step_period = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "network" => self.network = NetworkSpec::parse_layers(value)?,
            "out_dir" | "out" => self.out_dir = PathBuf::from(value),
            "snapshots" => self.snapshots = parse_bool(key, value)?,
            "dataset" => match value {
                "synthetic" => {
                    if !matches!(self.dataset, DataSource::Synthetic { .. }) {
                        self.dataset = RunConfig::default().dataset;
                    }
                }
                "idx" => {
                    self.idx_mut("train_images")?;
                }
                _ => return Err(AdasError::config(key, format!("unknown dataset `{value}`"))),
            },
            "train_images" | "train_labels" | "test_images" | "test_labels" => {
                *self.idx_mut(key)? = PathBuf::from(value);
            }
            "train_samples" => self.synthetic_mut(key)?.0.samples = parse(key, value)?,
            "test_samples" => *self.synthetic_mut(key)?.1 = parse(key, value)?,
            "image_size" => self.synthetic_mut(key)?.0.image_size = parse(key, value)?,
            "classes" => self.synthetic_mut(key)?.0.classes = parse(key, value)?,
            "blobs" => self.synthetic_mut(key)?.0.blobs = parse(key, value)?,
            "blob_width" => self.synthetic_mut(key)?.0.blob_width = parse(key, value)?,
            "jitter" => self.synthetic_mut(key)?.0.jitter = parse(key, value)?,
            "noise" => self.synthetic_mut(key)?.0.noise = parse(key, value)?,
            "label_noise" => self.synthetic_mut(key)?.0.label_noise = parse(key, value)?,
            _ => return Err(AdasError::config(key, "unknown key")),
        }
        Ok(())
    }

    pub fn adas_config(&self) -> AdasConfig {
        AdasConfig {
            beta: self.beta,
            zeta: self.zeta,
            eta_init: self.eta_init,
            eta_min: self.eta_min,
            momentum: self.momentum,
        }
    }

    pub fn optimizer(&self) -> Optimizer {
        match self.optimizer {
            OptimizerKind::Adas => Optimizer::Adas(self.adas_config()),
            OptimizerKind::Fixed => Optimizer::Sgd {
                schedule: LrSchedule::Fixed(self.eta_init),
                momentum: self.momentum,
            },
            OptimizerKind::StepDecay => Optimizer::Sgd {
                schedule: LrSchedule::StepDecay {
                    initial: self.eta_init,
                    factor: self.step_factor,
                    period: self.step_period,
                },
                momentum: self.momentum,
            },
        }
    }

    /// Checks value ranges and that referenced files exist.
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(AdasError::config("epochs", "must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(AdasError::config("batch_size", "must be >= 1"));
        }
        // rates are positive regardless of which optimizer reads them
        self.adas_config().validate()?;
        if !(self.step_factor > 0.0 && self.step_factor.is_finite()) {
            return Err(AdasError::config("step_factor", "must be positive"));
        }
        if self.step_period == 0 {
            return Err(AdasError::config("step_period", "must be >= 1"));
        }
        if !self.network.iter().any(|l| matches!(l, LayerSpec::Conv { .. })) {
            return Err(AdasError::config("network", "needs at least one conv layer"));
        }
        match &self.dataset {
            DataSource::Synthetic { spec, test_samples } => {
                spec.validate()?;
                if *test_samples == 0 {
                    return Err(AdasError::config("test_samples", "must be >= 1"));
                }
            }
            DataSource::Idx { train_images, train_labels, test_images, test_labels } => {
                for (key, path) in [
                    ("train_images", train_images),
                    ("train_labels", train_labels),
                    ("test_images", test_images),
                    ("test_labels", test_labels),
                ] {
                    if path.as_os_str().is_empty() {
                        return Err(AdasError::config(key, "required when dataset = idx"));
                    }
                    if !path.exists() {
                        return Err(AdasError::config(key, format!("{} does not exist", path.display())));
                    }
                }
            }
        }
        Ok(())
    }
}
