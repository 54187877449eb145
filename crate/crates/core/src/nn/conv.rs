//! Same-padded 1-D convolution over time.

use rand::Rng;

use super::tensor::TimeSeriesTensor;
use super::Activation;
use crate::error::{Error, Result};
use crate::rng::EngineRng;

/// Kernel stored as `[k][c_in][c_out]`, flattened.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1DParams {
    pub kernel: Vec<f64>,
    pub bias: Vec<f64>,
    pub width: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl Conv1DParams {
    pub fn zeros(width: usize, in_channels: usize, out_channels: usize) -> Result<Self> {
        if width % 2 == 0 || width == 0 {
            return Err(Error::Config(format!(
                "kernel width must be odd for same padding, got {width}"
            )));
        }
        if in_channels == 0 || out_channels == 0 {
            return Err(Error::Config("convolution needs at least one channel".into()));
        }
        Ok(Self {
            kernel: vec![0.0; width * in_channels * out_channels],
            bias: vec![0.0; out_channels],
            width,
            in_channels,
            out_channels,
        })
    }

    /// Uniform in `±sqrt(3 / fan_in)` with zero bias.
    pub fn init(
        width: usize,
        in_channels: usize,
        out_channels: usize,
        rng: &mut EngineRng,
    ) -> Result<Self> {
        let mut p = Self::zeros(width, in_channels, out_channels)?;
        let limit = (3.0 / (width * in_channels) as f64).sqrt();
        for w in &mut p.kernel {
            *w = rng.random_range(-limit..limit);
        }
        Ok(p)
    }

    pub fn param_count(&self) -> usize {
        self.kernel.len() + self.bias.len()
    }

    #[inline]
    fn idx(&self, k: usize, ci: usize, co: usize) -> usize {
        (k * self.in_channels + ci) * self.out_channels + co
    }
}

/// Pre-activation values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ConvCache {
    pub(crate) input: TimeSeriesTensor,
    pub(crate) pre: TimeSeriesTensor,
}

/// Convolution without activation: `y[t][o] = b[o] + Σ_k Σ_i x[t+k-pad][i]·w[k][i][o]`.
pub fn conv1d_linear(input: &TimeSeriesTensor, params: &Conv1DParams) -> Result<TimeSeriesTensor> {
    if input.channels() != params.in_channels {
        return Err(Error::Shape(format!(
            "convolution expects {} input channels, got {}",
            params.in_channels,
            input.channels()
        )));
    }
    let steps = input.steps();
    let pad = params.width / 2;
    let cout = params.out_channels;
    let mut out = Vec::with_capacity(steps * cout);
    for t in 0..steps {
        out.extend_from_slice(&params.bias);
        let row_out = &mut out[t * cout..(t + 1) * cout];
        for k in 0..params.width {
            let src = t as isize + k as isize - pad as isize;
            if src < 0 || src >= steps as isize {
                continue;
            }
            let x = input.row(src as usize);
            for (ci, &xv) in x.iter().enumerate() {
                if xv == 0.0 {
                    continue;
                }
                let base = params.idx(k, ci, 0);
                let w = &params.kernel[base..base + cout];
                for (o, &wv) in row_out.iter_mut().zip(w) {
                    *o += xv * wv;
                }
            }
        }
    }
    Ok(TimeSeriesTensor::from_raw(steps, cout, out))
}

/// Convolution followed by `activation`.
pub fn conv1d_forward(
    input: &TimeSeriesTensor,
    params: &Conv1DParams,
    activation: Activation,
) -> Result<TimeSeriesTensor> {
    conv1d_forward_cached(input, params, activation).map(|(out, _)| out)
}

pub(crate) fn conv1d_forward_cached(
    input: &TimeSeriesTensor,
    params: &Conv1DParams,
    activation: Activation,
) -> Result<(TimeSeriesTensor, ConvCache)> {
    let pre = conv1d_linear(input, params)?;
    let mut out = pre.clone();
    activation.apply_in_place(out.as_mut_slice());
    Ok((
        out,
        ConvCache {
            input: input.clone(),
            pre,
        },
    ))
}

/// Returns the input gradient and accumulates kernel/bias gradients.
pub(crate) fn conv1d_backward(
    cache: &ConvCache,
    params: &Conv1DParams,
    activation: Activation,
    grad_out: &TimeSeriesTensor,
    grad_kernel: &mut [f64],
    grad_bias: &mut [f64],
) -> TimeSeriesTensor {
    let steps = cache.input.steps();
    let cin = params.in_channels;
    let cout = params.out_channels;
    let pad = params.width / 2;

    let mut delta = grad_out.as_slice().to_vec();
    activation.backprop_in_place(cache.pre.as_slice(), &mut delta);

    let mut grad_in = vec![0.0; steps * cin];
    for t in 0..steps {
        let d = &delta[t * cout..(t + 1) * cout];
        for (gb, &dv) in grad_bias.iter_mut().zip(d) {
            *gb += dv;
        }
        for k in 0..params.width {
            let src = t as isize + k as isize - pad as isize;
            if src < 0 || src >= steps as isize {
                continue;
            }
            let src = src as usize;
            let x = cache.input.row(src);
            for ci in 0..cin {
                let base = params.idx(k, ci, 0);
                let w = &params.kernel[base..base + cout];
                let gw = &mut grad_kernel[base..base + cout];
                let xv = x[ci];
                let mut acc = 0.0;
                for o in 0..cout {
                    gw[o] += xv * d[o];
                    acc += w[o] * d[o];
                }
                grad_in[src * cin + ci] += acc;
            }
        }
    }
    TimeSeriesTensor::from_raw(steps, cin, grad_in)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones_kernel() -> Conv1DParams {
        let mut p = Conv1DParams::zeros(3, 1, 1).unwrap();
        p.kernel.iter_mut().for_each(|w| *w = 1.0);
        p
    }

    #[test]
    fn hand_convolution_with_zero_padding() {
        let x = TimeSeriesTensor::new(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        let y = conv1d_linear(&x, &ones_kernel()).unwrap();
        assert_eq!(y.as_slice(), &[3.0, 6.0, 5.0]);
    }

    #[test]
    fn relu_clips_negative_outputs() {
        let x = TimeSeriesTensor::new(3, 1, vec![-1.0, -2.0, 3.0]).unwrap();
        let y = conv1d_forward(&x, &ones_kernel(), Activation::Relu).unwrap();
        // pre-activation: [-3, 0, 1]
        assert_eq!(y.as_slice(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn zero_kernel_gives_zero_output() {
        let x = TimeSeriesTensor::new(4, 2, vec![1.0, -2.0, 3.0, 0.5, 7.0, 1.0, 2.0, 2.0]).unwrap();
        let p = Conv1DParams::zeros(3, 2, 5).unwrap();
        let y = conv1d_forward(&x, &p, Activation::Relu).unwrap();
        assert_eq!(y.shape(), (4, 5));
        assert!(y.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn landmark_frames_through_64_filters() {
        let mut rng = crate::rng::seeded(1);
        let p = Conv1DParams::init(3, 63, 64, &mut rng).unwrap();
        assert_eq!(p.param_count(), 12_160);
        let x = TimeSeriesTensor::zeros(20, 63);
        assert_eq!(conv1d_forward(&x, &p, Activation::Relu).unwrap().shape(), (20, 64));
    }

    #[test]
    fn channel_mismatch_is_a_shape_error() {
        let x = TimeSeriesTensor::zeros(5, 2);
        let p = Conv1DParams::zeros(3, 3, 1).unwrap();
        assert!(matches!(conv1d_linear(&x, &p), Err(Error::Shape(_))));
    }

    #[test]
    fn even_width_rejected() {
        assert!(Conv1DParams::zeros(2, 1, 1).is_err());
    }
}
