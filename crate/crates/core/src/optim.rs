//! Heavy-ball SGD and the learning-rate schedules that feed it.

use crate::adas::AdasState;
use crate::error::{AdasError, Result};

/// Momentum buffer for one parameter array, zero-initialised.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityBuffer(Vec<f64>);

impl VelocityBuffer {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// `v ← m·v − η·g; θ ← θ + v`, elementwise.
///
/// A zero rate is accepted and leaves `θ` moving only by momentum.
pub fn momentum_step(
    params: &mut [f64],
    grads: &[f64],
    vel: &mut VelocityBuffer,
    eta: f64,
    momentum: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != vel.0.len() {
        return Err(AdasError::Shape(format!(
            "params {}, grads {}, velocity {} must have equal length",
            params.len(),
            grads.len(),
            vel.0.len()
        )));
    }
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(AdasError::Parameter(format!("learning rate must be >= 0, got {eta}")));
    }
    if !(0.0..1.0).contains(&momentum) {
        return Err(AdasError::Parameter(format!("momentum must lie in [0, 1), got {momentum}")));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(AdasError::NonFinite(format!(
            "gradient entry {i} is {} (of {})",
            grads[i],
            grads.len()
        )));
    }
    for ((theta, &g), v) in params.iter_mut().zip(grads).zip(vel.0.iter_mut()) {
        *v = momentum * *v - eta * g;
        *theta += *v;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum LrSchedule {
    Fixed(f64),
    /// `initial · factor^⌊epoch / period⌋`.
    StepDecay { initial: f64, factor: f64, period: usize },
    /// Delegates to the per-block AdaS rates.
    AdasDriven,
}

impl LrSchedule {
    /// The baseline step schedule: halve every 25 epochs.
    pub fn halving_every_25(initial: f64) -> Self {
        LrSchedule::StepDecay { initial, factor: 0.5, period: 25 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LrSchedule::Fixed(rate) if !(rate >= 0.0 && rate.is_finite()) => {
                Err(AdasError::Parameter(format!("fixed rate must be >= 0, got {rate}")))
            }
            LrSchedule::StepDecay { initial, factor, period } => {
                if !(initial > 0.0 && initial.is_finite()) {
                    return Err(AdasError::Parameter(format!(
                        "step-decay initial rate must be positive, got {initial}"
                    )));
                }
                if !(factor > 0.0 && factor.is_finite()) {
                    return Err(AdasError::Parameter(format!(
                        "step-decay factor must be positive, got {factor}"
                    )));
                }
                if period == 0 {
                    return Err(AdasError::Parameter("step-decay period must be >= 1".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Rate for `block` during the epoch that follows `epoch` completed epochs.
    pub fn rate(&self, epoch: usize, block: usize, adas: Option<&AdasState>) -> Result<f64> {
        match (self, adas) {
            (LrSchedule::Fixed(rate), _) => Ok(*rate),
            (LrSchedule::StepDecay { initial, factor, period }, _) => {
                let drops = i32::try_from(epoch / period).unwrap_or(i32::MAX);
                Ok(initial * factor.powi(drops))
            }
            (LrSchedule::AdasDriven, Some(state)) => state.get_lr(block),
            (LrSchedule::AdasDriven, None) => Err(AdasError::Input(
                "adas-driven schedule needs an AdaS state".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adas::AdasConfig;

    #[test]
    fn first_step_from_rest() {
        let mut theta = [0.0];
        let mut v = VelocityBuffer::zeros(1);
        momentum_step(&mut theta, &[1.0], &mut v, 0.1, 0.9).unwrap();
        assert_eq!(v.as_slice(), &[-0.1]);
        assert_eq!(theta, [-0.1]);
    }

    #[test]
    fn coasting_on_momentum() {
        let mut theta = [1.0];
        let mut v = VelocityBuffer::from_vec(vec![-0.1]);
        momentum_step(&mut theta, &[0.0], &mut v, 0.1, 0.9).unwrap();
        assert!((v.as_slice()[0] + 0.09).abs() < 1e-16);
        assert!((theta[0] - 0.91).abs() < 1e-15);
    }

    #[test]
    fn two_constant_steps() {
        let mut theta = [0.0];
        let mut v = VelocityBuffer::zeros(1);
        for _ in 0..2 {
            momentum_step(&mut theta, &[1.0], &mut v, 0.1, 0.9).unwrap();
        }
        assert!((theta[0] + 0.29).abs() < 1e-15);
    }

    #[test]
    fn step_errors() {
        let mut theta = [0.0, 0.0];
        let mut v = VelocityBuffer::zeros(2);
        assert!(matches!(
            momentum_step(&mut theta, &[1.0], &mut v, 0.1, 0.9),
            Err(AdasError::Shape(_))
        ));
        let err = momentum_step(&mut theta, &[1.0, f64::INFINITY], &mut v, 0.1, 0.9).unwrap_err();
        assert!(matches!(err, AdasError::NonFinite(_)));
        assert!(err.to_string().contains("entry 1"));
        assert_eq!(theta, [0.0, 0.0]);
    }

    #[test]
    fn schedules() {
        let step = LrSchedule::halving_every_25(0.1);
        assert!((step.rate(50, 0, None).unwrap() - 0.025).abs() < 1e-17);
        assert_eq!(step.rate(24, 0, None).unwrap(), 0.1);
        assert_eq!(LrSchedule::Fixed(5e-3).rate(999, 3, None).unwrap(), 5e-3);
        assert!(LrSchedule::AdasDriven.rate(0, 0, None).is_err());

        let cfg = AdasConfig { eta_init: 3e-2, ..AdasConfig::default() };
        let state = AdasState::from_initial_metrics(&cfg, vec![]);
        assert!(LrSchedule::AdasDriven.rate(0, 0, Some(&state)).is_err());

        assert!(LrSchedule::StepDecay { initial: 0.1, factor: 0.5, period: 0 }.validate().is_err());
        assert!(LrSchedule::Fixed(-1.0).validate().is_err());
    }
}
