//! Knowledge gain and mapping condition of convolution weights.
//!
//! Both are read off the EVBMF low-rank spectrum of the mode-3 and mode-4
//! unfoldings. `G_d = Σσᵢᵖ / (N_d σ₁ᵖ)` is the share of the channel capacity
//! `N_d` carrying structure; `κ_d = σ₁ / σ_{N′}` is the condition number of
//! the low-rank map.

use crate::error::{AdasError, Result};
use crate::lowrank::{evbmf, EvbmfResult};
use crate::tensor::{unfold_mode3, unfold_mode4, Tensor4};

/// Exponent of the knowledge gain. The scheduler always uses `L1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GainNorm {
    #[default]
    L1,
    L2,
}

impl GainNorm {
    pub fn from_p(p: u32) -> Result<Self> {
        match p {
            1 => Ok(GainNorm::L1),
            2 => Ok(GainNorm::L2),
            _ => Err(AdasError::Parameter(format!(
                "knowledge gain exponent must be 1 or 2, got {p}"
            ))),
        }
    }

    pub fn p(self) -> u32 {
        match self {
            GainNorm::L1 => 1,
            GainNorm::L2 => 2,
        }
    }

    #[inline]
    fn pow(self, v: f64) -> f64 {
        match self {
            GainNorm::L1 => v,
            GainNorm::L2 => v * v,
        }
    }
}

/// `(1 / (N_d σ₁ᵖ)) Σ σᵢᵖ` over a descending spectrum; 0 when it is empty.
pub fn knowledge_gain(spectrum: &[f64], channel_size: usize, norm: GainNorm) -> Result<f64> {
    if channel_size < spectrum.len() {
        return Err(AdasError::Input(format!(
            "channel size {channel_size} is smaller than spectrum length {}",
            spectrum.len()
        )));
    }
    let Some(&first) = spectrum.first() else {
        return Ok(0.0);
    };
    if !(first > 0.0) {
        return Err(AdasError::Input(format!(
            "leading singular value must be positive, got {first}"
        )));
    }
    let top = norm.pow(first);
    let total: f64 = spectrum.iter().map(|&s| norm.pow(s) / top).sum();
    Ok(total / channel_size as f64)
}

/// `σ₁ / σ_{N′}`; `None` for an empty spectrum.
pub fn mapping_condition(spectrum: &[f64]) -> Option<f64> {
    match (spectrum.first(), spectrum.last()) {
        (Some(&first), Some(&last)) => Some(first / last),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeMetrics {
    pub gain: f64,
    pub condition: Option<f64>,
    pub rank: usize,
    pub channel_size: usize,
}

impl ModeMetrics {
    pub fn from_evbmf(result: &EvbmfResult, channel_size: usize, norm: GainNorm) -> Result<Self> {
        Ok(Self {
            gain: knowledge_gain(&result.shrunk_values, channel_size, norm)?,
            condition: mapping_condition(&result.shrunk_values),
            rank: result.estimated_rank,
            channel_size,
        })
    }

    pub fn rank_ratio(&self) -> f64 {
        self.rank as f64 / self.channel_size as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerMetrics {
    pub g3: f64,
    pub g4: f64,
    pub g_avg: f64,
    pub kappa3: Option<f64>,
    pub kappa4: Option<f64>,
    pub kappa_avg: Option<f64>,
    pub rank3: usize,
    pub rank4: usize,
    pub rank_ratio3: f64,
    pub rank_ratio4: f64,
}

impl LayerMetrics {
    pub fn from_modes(mode3: &ModeMetrics, mode4: &ModeMetrics) -> Self {
        let kappa_avg = match (mode3.condition, mode4.condition) {
            (Some(a), Some(b)) => Some((a + b) / 2.0),
            (Some(a), None) | (None, Some(a)) => Some(a),
            (None, None) => None,
        };
        Self {
            g3: mode3.gain,
            g4: mode4.gain,
            g_avg: (mode3.gain + mode4.gain) / 2.0,
            kappa3: mode3.condition,
            kappa4: mode4.condition,
            kappa_avg,
            rank3: mode3.rank,
            rank4: mode4.rank,
            rank_ratio3: mode3.rank_ratio(),
            rank_ratio4: mode4.rank_ratio(),
        }
    }
}

/// Unfolds, factorises and scores one convolution weight.
pub fn layer_metrics(t: &Tensor4, norm: GainNorm) -> Result<LayerMetrics> {
    let [_, _, n3, n4] = t.dims();
    let mode3 = ModeMetrics::from_evbmf(&evbmf(&unfold_mode3(t))?, n3, norm)?;
    let mode4 = ModeMetrics::from_evbmf(&evbmf(&unfold_mode4(t))?, n4, norm)?;
    Ok(LayerMetrics::from_modes(&mode3, &mode4))
}
