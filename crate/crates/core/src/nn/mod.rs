//! Minimal neural-network kernel.
//!
//! Forward and backward passes for the fixed layer set used by the gesture
//! network (1-D convolution, max-pooling, dropout, a time-distributed
//! pass-through, LSTM and a softmax dense head), categorical cross-entropy,
//! Adam, and a central-difference gradient checker. Everything runs in `f64`.

mod adam;
mod conv;
mod dense;
mod dropout;
mod gradcheck;
mod lstm;
mod network;
mod pool;
mod tensor;

pub use adam::{adam_step, AdamConfig, OptimizerState};
pub use conv::{conv1d_forward, conv1d_linear, Conv1DParams};
pub use dense::{cross_entropy, dense_logits, dense_softmax_forward, softmax, DenseParams, PROB_FLOOR};
pub use dropout::{dropout_apply, Mode};
pub use gradcheck::{compare_gradients, gradient_check, numeric_gradients, GradCheckReport};
pub use lstm::{lstm_forward, LstmOutput, LstmParams};
pub use network::{ForwardPass, Gradients, Layer, Network};
pub use pool::maxpool1d_forward;
pub use tensor::TimeSeriesTensor;

/// Pointwise activation applied after an affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative at the pre-activation `x`; ReLU uses 0 at the kink.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub(crate) fn apply_in_place(self, xs: &mut [f64]) {
        if self == Activation::Relu {
            xs.iter_mut().for_each(|x| *x = x.max(0.0));
        }
    }

    pub(crate) fn backprop_in_place(self, pre: &[f64], grad: &mut [f64]) {
        if self == Activation::Relu {
            for (g, &p) in grad.iter_mut().zip(pre) {
                if p <= 0.0 {
                    *g = 0.0;
                }
            }
        }
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
