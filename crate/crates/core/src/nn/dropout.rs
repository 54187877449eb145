use rand::Rng;

use super::tensor::TimeSeriesTensor;
use crate::error::{Error, Result};
use crate::rng::EngineRng;

/// Whether stochastic layers are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Per-entry multipliers (`0` or `1/(1-rate)`); `None` means identity.
#[derive(Debug, Clone)]
pub struct DropoutCache {
    pub(crate) mask: Option<Vec<f64>>,
}

pub fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate must be in [0, 1), got {rate}")));
    }
    Ok(())
}

/// Inverted dropout: in training, entries are zeroed with probability `rate`
/// and survivors scaled by `1/(1-rate)`; inference is the identity.
pub fn dropout_apply(
    input: &TimeSeriesTensor,
    rate: f64,
    mode: Mode,
    rng: &mut EngineRng,
) -> Result<TimeSeriesTensor> {
    dropout_forward_cached(input, rate, mode, rng).map(|(out, _)| out)
}

pub(crate) fn dropout_forward_cached(
    input: &TimeSeriesTensor,
    rate: f64,
    mode: Mode,
    rng: &mut EngineRng,
) -> Result<(TimeSeriesTensor, DropoutCache)> {
    check_rate(rate)?;
    if mode == Mode::Infer || rate == 0.0 {
        return Ok((input.clone(), DropoutCache { mask: None }));
    }
    let keep = 1.0 - rate;
    let scale = 1.0 / keep;
    let mask: Vec<f64> = (0..input.as_slice().len())
        .map(|_| if rng.random::<f64>() < keep { scale } else { 0.0 })
        .collect();
    let out = input.as_slice().iter().zip(&mask).map(|(x, m)| x * m).collect();
    Ok((
        TimeSeriesTensor::from_raw(input.steps(), input.channels(), out),
        DropoutCache { mask: Some(mask) },
    ))
}

pub(crate) fn dropout_backward(cache: &DropoutCache, grad_out: &TimeSeriesTensor) -> TimeSeriesTensor {
    match &cache.mask {
        None => grad_out.clone(),
        Some(mask) => TimeSeriesTensor::from_raw(
            grad_out.steps(),
            grad_out.channels(),
            grad_out.as_slice().iter().zip(mask).map(|(g, m)| g * m).collect(),
        ),
    }
}
