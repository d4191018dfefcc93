use rand::seq::SliceRandom;

use crate::adas::{AdasConfig, AdasState};
use crate::error::{AdasError, Result};
use crate::metrics::{layer_metrics, GainNorm, LayerMetrics};
use crate::micronet::data::Dataset;
use crate::micronet::net::{evaluate, Batch, Network};
use crate::optim::{momentum_step, LrSchedule, VelocityBuffer};
use crate::rng;

/// Mini-batch size used unless configured otherwise.
pub const DEFAULT_BATCH_SIZE: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer {
    Adas(AdasConfig),
    Sgd { schedule: LrSchedule, momentum: f64 },
}

impl Optimizer {
    pub fn momentum(&self) -> f64 {
        match self {
            Optimizer::Adas(cfg) => cfg.momentum,
            Optimizer::Sgd { momentum, .. } => *momentum,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Optimizer::Adas(cfg) => cfg.validate(),
            Optimizer::Sgd { schedule, momentum } => {
                if matches!(schedule, LrSchedule::AdasDriven) {
                    return Err(AdasError::Parameter(
                        "use Optimizer::Adas for the adas-driven schedule".into(),
                    ));
                }
                if !(0.0..1.0).contains(momentum) {
                    return Err(AdasError::config("momentum", format!("must lie in [0, 1), got {momentum}")));
                }
                schedule.validate()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    /// 1-based epoch index.
    pub epoch: usize,
    /// Rate each block trained with during this epoch.
    pub lr: Vec<f64>,
    pub train_loss: f64,
    pub test_accuracy: f64,
    /// Block metrics of the weights at the end of the epoch.
    pub metrics: Vec<LayerMetrics>,
}

/// Owns the network, its velocities and the scheduler state across epochs.
#[derive(Debug, Clone)]
pub struct Trainer {
    net: Network,
    optimizer: Optimizer,
    adas: Option<AdasState>,
    velocity: Vec<VelocityBuffer>,
    batch_size: usize,
    epoch: usize,
    rng: rng::Rng,
    initial_metrics: Vec<LayerMetrics>,
}

impl Trainer {
    pub fn new(net: Network, optimizer: Optimizer, batch_size: usize, seed: u64) -> Result<Self> {
        optimizer.validate()?;
        if batch_size == 0 {
            return Err(AdasError::config("batch_size", "must be >= 1"));
        }
        let blocks = net.conv_weights();
        let (adas, initial_metrics) = match &optimizer {
            Optimizer::Adas(cfg) => {
                let state = AdasState::init(cfg, &blocks)?;
                let m = state.latest_metrics().to_vec();
                (Some(state), m)
            }
            Optimizer::Sgd { .. } => (
                None,
                blocks
                    .iter()
                    .map(|b| layer_metrics(b, GainNorm::L1))
                    .collect::<Result<_>>()?,
            ),
        };
        let velocity = net.param_arrays().iter().map(|a| VelocityBuffer::zeros(a.len())).collect();
        Ok(Self {
            net,
            optimizer,
            adas,
            velocity,
            batch_size,
            epoch: 0,
            rng: rng::derived(seed, 2),
            initial_metrics,
        })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn adas_state(&self) -> Option<&AdasState> {
        self.adas.as_ref()
    }

    /// Completed epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Block metrics of the initial weights.
    pub fn initial_metrics(&self) -> &[LayerMetrics] {
        &self.initial_metrics
    }

    fn block_rates(&self) -> Result<Vec<f64>> {
        let blocks = self.net.num_blocks().max(1);
        (0..blocks)
            .map(|b| match &self.optimizer {
                Optimizer::Adas(_) => LrSchedule::AdasDriven.rate(self.epoch, b, self.adas.as_ref()),
                Optimizer::Sgd { schedule, .. } => schedule.rate(self.epoch, b, None),
            })
            .collect()
    }

    /// One pass over `train` in shuffled mini-batches, then the epoch-boundary
    /// scheduler update and an evaluation on `test`.
    pub fn train_epoch(&mut self, train: &Dataset, test: &Dataset) -> Result<TrainRecord> {
        if train.is_empty() || test.is_empty() {
            return Err(AdasError::Input("train and test sets must be nonempty".into()));
        }
        if self.batch_size > train.len() {
            return Err(AdasError::config(
                "batch_size",
                format!("{} exceeds the {} training examples", self.batch_size, train.len()),
            ));
        }
        let rates = self.block_rates()?;
        let array_blocks = self.net.param_blocks();
        let momentum = self.optimizer.momentum();

        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut self.rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(self.batch_size) {
            let batch = Batch::from_dataset(train, chunk);
            let (loss, grads) = self.net.forward_backward(&batch)?;
            loss_sum += loss * chunk.len() as f64;
            let params = self.net.param_arrays_mut();
            for (((p, g), v), &b) in params
                .into_iter()
                .zip(&grads.arrays)
                .zip(&mut self.velocity)
                .zip(&array_blocks)
            {
                momentum_step(p, g, v, rates[b], momentum)?;
            }
        }
        self.epoch += 1;

        let blocks = self.net.conv_weights();
        let metrics = match (&self.optimizer, self.adas.as_mut()) {
            (Optimizer::Adas(cfg), Some(state)) => {
                state.epoch_update(cfg, &blocks)?;
                state.latest_metrics().to_vec()
            }
            _ => blocks
                .iter()
                .map(|b| layer_metrics(b, GainNorm::L1))
                .collect::<Result<_>>()?,
        };
        Ok(TrainRecord {
            epoch: self.epoch,
            lr: rates,
            train_loss: loss_sum / train.len() as f64,
            test_accuracy: evaluate(&self.net, test),
            metrics,
        })
    }
}

/// Number of mini-batches per epoch, `⌈n / batch⌉`.
pub fn batches_per_epoch(n: usize, batch_size: usize) -> usize {
    n.div_ceil(batch_size)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::micronet::data::SyntheticSpec;
    use crate::micronet::net::NetworkSpec;

    fn small() -> (Network, Dataset) {
        let data = SyntheticSpec { samples: 64, image_size: 6, classes: 3, ..Default::default() }
            .generate(5, 6)
            .unwrap();
        let spec = NetworkSpec::new(data.shape(), NetworkSpec::parse_layers("conv3,pool,conv4").unwrap(), 3)
            .unwrap();
        (Network::init(spec, 9), data)
    }

    #[test]
    fn batch_count() {
        assert_eq!(batches_per_epoch(1000, DEFAULT_BATCH_SIZE), 8);
        assert_eq!(batches_per_epoch(1024, DEFAULT_BATCH_SIZE), 8);
        assert_eq!(batches_per_epoch(1025, DEFAULT_BATCH_SIZE), 9);
    }

    #[test]
    fn zero_rate_freezes_parameters() {
        let (net, data) = small();
        let before = net.clone();
        let eval_loss = net.mean_loss(&data).unwrap();
        let opt = Optimizer::Sgd { schedule: LrSchedule::Fixed(0.0), momentum: 0.0 };
        let mut t = Trainer::new(net, opt, 16, 1).unwrap();
        let rec = t.train_epoch(&data, &data).unwrap();
        assert_eq!(t.network(), &before);
        assert!((rec.train_loss - eval_loss).abs() < 1e-12);
    }

    #[test]
    fn seeded_runs_repeat_exactly() {
        let (net, data) = small();
        let opt = Optimizer::Adas(AdasConfig { eta_init: 0.05, ..AdasConfig::default() });
        let run = |net: Network| {
            let mut t = Trainer::new(net, opt.clone(), 16, 4).unwrap();
            (0..2).map(|_| t.train_epoch(&data, &data).unwrap()).collect::<Vec<_>>()
        };
        let a = run(net.clone());
        let b = run(net);
        assert_eq!(a, b);
        assert_eq!(a[0].lr, vec![0.05, 0.05]);
        assert_eq!(a[1].epoch, 2);
    }

    #[test]
    fn oversized_batch_is_rejected() {
        let (net, data) = small();
        let opt = Optimizer::Sgd { schedule: LrSchedule::Fixed(0.01), momentum: 0.9 };
        let mut t = Trainer::new(net, opt, 65, 1).unwrap();
        let err = t.train_epoch(&data, &data).unwrap_err();
        assert!(err.to_string().contains("batch_size"));
    }
}
