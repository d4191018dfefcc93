//! Per-block learning rates driven by the change in knowledge gain.
//!
//! At every epoch boundary each conv block `ℓ` is re-scored and its rate
//! follows
//!
//! ```text
//! η(t,ℓ) = max(β·η(t−1,ℓ) + ζ·[Ḡ(t,ℓ) − Ḡ(t−1,ℓ)], η_min)
//! ```
//!
//! where `Ḡ` is the mode-3/mode-4 average of the `p = 1` knowledge gain.

use crate::error::{AdasError, Result};
use crate::metrics::{layer_metrics, GainNorm, LayerMetrics};
use crate::tensor::Tensor4;

pub const DEFAULT_ETA_MIN: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct AdasConfig {
    /// Gain factor β in `[0, 1)`.
    pub beta: f64,
    /// Knowledge-gain weight ζ.
    pub zeta: f64,
    /// Rate given to every block before the first update.
    pub eta_init: f64,
    /// Floor on every rate.
    pub eta_min: f64,
    /// Heavy-ball momentum coefficient.
    pub momentum: f64,
}

impl Default for AdasConfig {
    fn default() -> Self {
        Self {
            beta: 0.8,
            zeta: 1.0,
            eta_init: 0.03,
            eta_min: DEFAULT_ETA_MIN,
            momentum: 0.9,
        }
    }
}

impl AdasConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta) {
            return Err(AdasError::config("beta", format!("must lie in [0, 1), got {}", self.beta)));
        }
        if !(self.zeta >= 0.0 && self.zeta.is_finite()) {
            return Err(AdasError::config("zeta", format!("must be >= 0, got {}", self.zeta)));
        }
        if !(self.eta_init > 0.0 && self.eta_init.is_finite()) {
            return Err(AdasError::config(
                "eta_init",
                format!("must be positive, got {}", self.eta_init),
            ));
        }
        if !(self.eta_min > 0.0 && self.eta_min.is_finite()) {
            return Err(AdasError::config(
                "eta_min",
                format!("must be positive, got {}", self.eta_min),
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(AdasError::config(
                "momentum",
                format!("must lie in [0, 1), got {}", self.momentum),
            ));
        }
        Ok(())
    }
}

/// One application of the rate recursion followed by the floor.
#[inline]
pub fn next_rate(cfg: &AdasConfig, prev_rate: f64, prev_gain: f64, gain: f64) -> f64 {
    (cfg.beta * prev_rate + cfg.zeta * (gain - prev_gain)).max(cfg.eta_min)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdasState {
    pub epoch: usize,
    pub lr: Vec<f64>,
    pub prev_gain: Vec<f64>,
    /// `metrics_log[t][ℓ]`; entry 0 scores the initial weights.
    pub metrics_log: Vec<Vec<LayerMetrics>>,
}

fn score_blocks(blocks: &[Tensor4]) -> Result<Vec<LayerMetrics>> {
    if blocks.len() <= 1 {
        return blocks.iter().map(|b| layer_metrics(b, GainNorm::L1)).collect();
    }
    // Blocks are independent; join before the rates move.
    std::thread::scope(|scope| {
        let handles: Vec<_> = blocks
            .iter()
            .map(|b| scope.spawn(move || layer_metrics(b, GainNorm::L1)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("metric worker panicked"))
            .collect()
    })
}

impl AdasState {
    /// Rates start at `eta_init`; `Ḡ(0,ℓ)` is scored on the initial weights.
    pub fn init(cfg: &AdasConfig, blocks: &[Tensor4]) -> Result<Self> {
        cfg.validate()?;
        if blocks.is_empty() {
            return Err(AdasError::Input("AdaS needs at least one conv block".into()));
        }
        let metrics = score_blocks(blocks)?;
        Ok(Self::from_initial_metrics(cfg, metrics))
    }

    pub fn from_initial_metrics(cfg: &AdasConfig, metrics: Vec<LayerMetrics>) -> Self {
        Self {
            epoch: 0,
            lr: vec![cfg.eta_init; metrics.len()],
            prev_gain: metrics.iter().map(|m| m.g_avg).collect(),
            metrics_log: vec![metrics],
        }
    }

    pub fn num_blocks(&self) -> usize {
        self.lr.len()
    }

    /// Scores the current weights and advances every block's rate.
    pub fn epoch_update(&mut self, cfg: &AdasConfig, blocks: &[Tensor4]) -> Result<()> {
        self.check_blocks(blocks.len())?;
        let metrics = score_blocks(blocks)?;
        self.apply_metrics(cfg, metrics)
    }

    /// The rate update given already computed block metrics.
    pub fn apply_metrics(&mut self, cfg: &AdasConfig, metrics: Vec<LayerMetrics>) -> Result<()> {
        self.check_blocks(metrics.len())?;
        for (l, m) in metrics.iter().enumerate() {
            self.lr[l] = next_rate(cfg, self.lr[l], self.prev_gain[l], m.g_avg);
            self.prev_gain[l] = m.g_avg;
        }
        self.epoch += 1;
        self.metrics_log.push(metrics);
        Ok(())
    }

    pub fn get_lr(&self, block: usize) -> Result<f64> {
        self.lr.get(block).copied().ok_or_else(|| {
            AdasError::Input(format!(
                "block index {block} out of range for {} blocks",
                self.lr.len()
            ))
        })
    }

    pub fn latest_metrics(&self) -> &[LayerMetrics] {
        self.metrics_log.last().map(Vec::as_slice).unwrap_or(&[])
    }

    fn check_blocks(&self, n: usize) -> Result<()> {
        if n != self.lr.len() {
            return Err(AdasError::Input(format!(
                "expected {} blocks, got {n}",
                self.lr.len()
            )));
        }
        Ok(())
    }
}
