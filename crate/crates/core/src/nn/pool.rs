use super::tensor::TimeSeriesTensor;
use crate::error::{Error, Result};

/// Argmax source step for every output cell.
#[derive(Debug, Clone)]
pub struct PoolCache {
    pub(crate) in_steps: usize,
    pub(crate) argmax: Vec<usize>,
}

/// Non-overlapping temporal max-pooling; trailing steps that do not fill a window are dropped.
pub fn maxpool1d_forward(input: &TimeSeriesTensor, pool: usize) -> Result<TimeSeriesTensor> {
    maxpool1d_forward_cached(input, pool).map(|(out, _)| out)
}

pub(crate) fn maxpool1d_forward_cached(
    input: &TimeSeriesTensor,
    pool: usize,
) -> Result<(TimeSeriesTensor, PoolCache)> {
    if pool == 0 {
        return Err(Error::Config("pool size must be at least 1".into()));
    }
    if input.steps() < pool {
        return Err(Error::Shape(format!(
            "cannot pool {} steps with window {pool}",
            input.steps()
        )));
    }
    let channels = input.channels();
    let out_steps = input.steps() / pool;
    let mut out = Vec::with_capacity(out_steps * channels);
    let mut argmax = Vec::with_capacity(out_steps * channels);
    for t in 0..out_steps {
        for c in 0..channels {
            let mut best_t = t * pool;
            let mut best = input.get(best_t, c);
            for s in t * pool + 1..(t + 1) * pool {
                let v = input.get(s, c);
                // first maximum wins on ties
                if v > best {
                    best = v;
                    best_t = s;
                }
            }
            out.push(best);
            argmax.push(best_t);
        }
    }
    Ok((
        TimeSeriesTensor::from_raw(out_steps, channels, out),
        PoolCache {
            in_steps: input.steps(),
            argmax,
        },
    ))
}

pub(crate) fn maxpool1d_backward(cache: &PoolCache, grad_out: &TimeSeriesTensor) -> TimeSeriesTensor {
    let channels = grad_out.channels();
    let mut grad_in = vec![0.0; cache.in_steps * channels];
    for (i, &g) in grad_out.as_slice().iter().enumerate() {
        let c = i % channels;
        grad_in[cache.argmax[i] * channels + c] += g;
    }
    TimeSeriesTensor::from_raw(cache.in_steps, channels, grad_in)
}
