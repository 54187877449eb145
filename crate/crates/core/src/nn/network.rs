//! A fixed-topology sequential network ending in a softmax dense layer.

use super::conv::{conv1d_backward, conv1d_forward_cached, ConvCache, Conv1DParams};
use super::dense::{cross_entropy, dense_backward, dense_logits, softmax, DenseParams};
use super::dropout::{check_rate, dropout_backward, dropout_forward_cached, DropoutCache, Mode};
use super::lstm::{lstm_backward, lstm_forward_cached, LstmCache, LstmParams};
use super::pool::{maxpool1d_backward, maxpool1d_forward_cached, PoolCache};
use super::tensor::TimeSeriesTensor;
use super::Activation;
use crate::error::{Error, Result};
use crate::rng::EngineRng;

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv1D {
        params: Conv1DParams,
        activation: Activation,
    },
    MaxPool1D {
        pool: usize,
    },
    Dropout {
        rate: f64,
    },
    /// Applies the identity to every timestep. Carries no parameters.
    TimeDistributed,
    /// Emits only the final hidden state as a single-step tensor.
    Lstm {
        params: LstmParams,
    },
    /// Must be the last layer; its logits feed the softmax.
    Dense {
        params: DenseParams,
    },
}

impl Layer {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Conv1D { .. } => "conv1d",
            Layer::MaxPool1D { .. } => "maxpool1d",
            Layer::Dropout { .. } => "dropout",
            Layer::TimeDistributed => "time_distributed",
            Layer::Lstm { .. } => "lstm",
            Layer::Dense { .. } => "dense",
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Layer::Conv1D { params, .. } => params.param_count(),
            Layer::Lstm { params } => params.param_count(),
            Layer::Dense { params } => params.param_count(),
            _ => 0,
        }
    }

    fn tensors(&self) -> Vec<&[f64]> {
        match self {
            Layer::Conv1D { params, .. } => vec![&params.kernel, &params.bias],
            Layer::Lstm { params } => vec![&params.weights, &params.bias],
            Layer::Dense { params } => vec![&params.weights, &params.bias],
            _ => Vec::new(),
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Layer::Conv1D { params, .. } => vec![&mut params.kernel, &mut params.bias],
            Layer::Lstm { params } => vec![&mut params.weights, &mut params.bias],
            Layer::Dense { params } => vec![&mut params.weights, &mut params.bias],
            _ => Vec::new(),
        }
    }

    /// Output shape for an input shape, or why the layer cannot accept it.
    fn output_shape(&self, (steps, channels): (usize, usize)) -> Result<(usize, usize)> {
        match self {
            Layer::Conv1D { params, .. } => {
                if channels != params.in_channels {
                    return Err(Error::Shape(format!(
                        "conv1d expects {} channels, receives {channels}",
                        params.in_channels
                    )));
                }
                Ok((steps, params.out_channels))
            }
            Layer::MaxPool1D { pool } => {
                if *pool == 0 || steps < *pool {
                    return Err(Error::Shape(format!("cannot pool {steps} steps by {pool}")));
                }
                Ok((steps / pool, channels))
            }
            Layer::Dropout { rate } => {
                check_rate(*rate)?;
                Ok((steps, channels))
            }
            Layer::TimeDistributed => Ok((steps, channels)),
            Layer::Lstm { params } => {
                if channels != params.input_dim {
                    return Err(Error::Shape(format!(
                        "lstm expects input dim {}, receives {channels}",
                        params.input_dim
                    )));
                }
                Ok((1, params.hidden))
            }
            Layer::Dense { params } => {
                if steps != 1 || channels != params.inputs {
                    return Err(Error::Shape(format!(
                        "dense expects a single {}-vector, receives {steps}x{channels}",
                        params.inputs
                    )));
                }
                Ok((1, params.classes))
            }
        }
    }
}

#[derive(Debug, Clone)]
enum LayerCache {
    Conv(ConvCache),
    Pool(PoolCache),
    Dropout(DropoutCache),
    Identity,
    Lstm(LstmCache),
    Dense { input: Vec<f64> },
}

/// Activations cached by a forward pass, consumed by [`Network::backward`].
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub probs: Vec<f64>,
    pub logits: Vec<f64>,
    caches: Vec<LayerCache>,
}

/// One gradient tensor per parameter tensor, in [`Network::tensors`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            tensors: net.tensors().iter().map(|t| vec![0.0; t.len()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.tensors
            .iter_mut()
            .flat_map(|t| t.iter_mut())
            .for_each(|x| *x *= factor);
    }

    pub fn flat(&self) -> Vec<f64> {
        self.tensors.iter().flatten().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_shape: (usize, usize),
    layers: Vec<Layer>,
}

impl Network {
    /// Validates that the layers chain from `input_shape` and end in a dense layer.
    pub fn new(input_shape: (usize, usize), layers: Vec<Layer>) -> Result<Self> {
        if input_shape.0 == 0 || input_shape.1 == 0 {
            return Err(Error::Shape("input shape must be non-empty".into()));
        }
        match layers.last() {
            Some(Layer::Dense { .. }) => {}
            _ => return Err(Error::Config("network must end with a dense layer".into())),
        }
        if layers[..layers.len() - 1]
            .iter()
            .any(|l| matches!(l, Layer::Dense { .. }))
        {
            return Err(Error::Config("dense layer is only supported as the output".into()));
        }
        let mut shape = input_shape;
        for (i, layer) in layers.iter().enumerate() {
            shape = layer
                .output_shape(shape)
                .map_err(|e| Error::Shape(format!("layer {i} ({}): {e}", layer.name())))?;
        }
        Ok(Self {
            input_shape,
            layers,
        })
    }

    pub fn input_shape(&self) -> (usize, usize) {
        self.input_shape
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn classes(&self) -> usize {
        match self.layers.last() {
            Some(Layer::Dense { params }) => params.classes,
            _ => unreachable!("validated at construction"),
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Output shape after each layer.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shape = self.input_shape;
        self.layers
            .iter()
            .map(|l| {
                shape = l.output_shape(shape).expect("validated at construction");
                shape
            })
            .collect()
    }

    /// Parameter tensors in layer order (kernel/weights before bias).
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(Layer::tensors).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(Layer::tensors_mut).collect()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.tensors().into_iter().flatten().copied().collect()
    }

    pub fn set_flat_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                values.len()
            )));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    fn check_input(&self, input: &TimeSeriesTensor) -> Result<()> {
        if input.shape() != self.input_shape {
            return Err(Error::Shape(format!(
                "network expects {}x{} input, got {}x{}",
                self.input_shape.0,
                self.input_shape.1,
                input.steps(),
                input.channels()
            )));
        }
        Ok(())
    }

    /// Forward pass keeping every cache needed for backpropagation.
    ///
    /// Training mode requires an rng for the dropout masks.
    pub fn forward(
        &self,
        input: &TimeSeriesTensor,
        mode: Mode,
        mut rng: Option<&mut EngineRng>,
    ) -> Result<ForwardPass> {
        self.check_input(input)?;
        if mode == Mode::Train && rng.is_none() {
            return Err(Error::Usage("training-mode forward needs an rng".into()));
        }
        let mut x = input.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut logits = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv1D { params, activation } => {
                    let (y, c) = conv1d_forward_cached(&x, params, *activation)?;
                    caches.push(LayerCache::Conv(c));
                    x = y;
                }
                Layer::MaxPool1D { pool } => {
                    let (y, c) = maxpool1d_forward_cached(&x, *pool)?;
                    caches.push(LayerCache::Pool(c));
                    x = y;
                }
                Layer::Dropout { rate } => {
                    let (y, c) = match rng.as_deref_mut() {
                        Some(r) => dropout_forward_cached(&x, *rate, mode, r)?,
                        None => {
                            // Infer mode never draws from the generator.
                            let mut unused = crate::rng::seeded(0);
                            dropout_forward_cached(&x, *rate, Mode::Infer, &mut unused)?
                        }
                    };
                    caches.push(LayerCache::Dropout(c));
                    x = y;
                }
                Layer::TimeDistributed => caches.push(LayerCache::Identity),
                Layer::Lstm { params } => {
                    let (out, c) = lstm_forward_cached(&x, params)?;
                    caches.push(LayerCache::Lstm(c));
                    x = TimeSeriesTensor::from_raw(1, params.hidden, out.final_hidden);
                }
                Layer::Dense { params } => {
                    let input = x.as_slice().to_vec();
                    logits = dense_logits(&input, params)?;
                    caches.push(LayerCache::Dense { input });
                }
            }
        }
        let probs = softmax(&logits)?;
        Ok(ForwardPass {
            probs,
            logits,
            caches,
        })
    }

    /// Inference-mode class probabilities. Pure in `(self, input)`.
    pub fn predict(&self, input: &TimeSeriesTensor) -> Result<Vec<f64>> {
        self.forward(input, Mode::Infer, None).map(|p| p.probs)
    }

    /// Cross-entropy loss of an inference-mode pass.
    pub fn loss(&self, input: &TimeSeriesTensor, label: usize) -> Result<f64> {
        cross_entropy(&self.predict(input)?, label)
    }

    /// Gradients of the cross-entropy loss of `pass` with respect to every parameter.
    pub fn backward(&self, pass: &ForwardPass, label: usize) -> Result<Gradients> {
        if pass.caches.len() != self.layers.len() {
            return Err(Error::Usage(format!(
                "forward cache has {} layers, network has {}",
                pass.caches.len(),
                self.layers.len()
            )));
        }
        if label >= pass.probs.len() {
            return Err(Error::Index(format!(
                "label {label} out of range for {} classes",
                pass.probs.len()
            )));
        }
        let mut grads = Gradients::zeros_like(self);
        let mut slot = grads.tensors.len();

        // Softmax + cross-entropy: dL/dlogit_c = p_c - 1{c = label}.
        let mut grad_logits = pass.probs.clone();
        grad_logits[label] -= 1.0;
        let mut grad = TimeSeriesTensor::from_raw(1, grad_logits.len(), grad_logits);

        for (layer, cache) in self.layers.iter().zip(&pass.caches).rev() {
            grad = match (layer, cache) {
                (Layer::Dense { params }, LayerCache::Dense { input }) => {
                    slot -= 2;
                    let (gw, gb) = split_pair(&mut grads.tensors, slot);
                    let gh = dense_backward(input, params, grad.as_slice(), gw, gb);
                    TimeSeriesTensor::from_raw(1, params.inputs, gh)
                }
                (Layer::Lstm { params }, LayerCache::Lstm(c)) => {
                    slot -= 2;
                    let (gw, gb) = split_pair(&mut grads.tensors, slot);
                    let steps = c.steps();
                    let mut gh = vec![0.0; steps * params.hidden];
                    gh[(steps - 1) * params.hidden..].copy_from_slice(grad.as_slice());
                    lstm_backward(c, params, &gh, gw, gb)
                }
                (Layer::Conv1D { params, activation }, LayerCache::Conv(c)) => {
                    slot -= 2;
                    let (gk, gb) = split_pair(&mut grads.tensors, slot);
                    conv1d_backward(c, params, *activation, &grad, gk, gb)
                }
                (Layer::MaxPool1D { .. }, LayerCache::Pool(c)) => maxpool1d_backward(c, &grad),
                (Layer::Dropout { .. }, LayerCache::Dropout(c)) => dropout_backward(c, &grad),
                (Layer::TimeDistributed, LayerCache::Identity) => grad,
                (layer, _) => {
                    return Err(Error::Usage(format!(
                        "forward cache does not match layer `{}`",
                        layer.name()
                    )))
                }
            };
        }
        Ok(grads)
    }

    /// Forward in `mode` and backward in one call; returns `(loss, gradients)`.
    pub fn loss_and_gradients(
        &self,
        input: &TimeSeriesTensor,
        label: usize,
        mode: Mode,
        rng: Option<&mut EngineRng>,
    ) -> Result<(f64, Gradients)> {
        let pass = self.forward(input, mode, rng)?;
        let loss = cross_entropy(&pass.probs, label)?;
        let grads = self.backward(&pass, label)?;
        Ok((loss, grads))
    }
}

fn split_pair(tensors: &mut [Vec<f64>], at: usize) -> (&mut [f64], &mut [f64]) {
    let (a, b) = tensors[at..at + 2].split_at_mut(1);
    (&mut a[0], &mut b[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn toy(seed: u64) -> Network {
        let mut rng = seeded(seed);
        Network::new(
            (6, 3),
            vec![
                Layer::Conv1D {
                    params: Conv1DParams::init(3, 3, 2, &mut rng).unwrap(),
                    activation: Activation::Relu,
                },
                Layer::MaxPool1D { pool: 2 },
                Layer::Dropout { rate: 0.25 },
                Layer::TimeDistributed,
                Layer::Lstm {
                    params: LstmParams::init(2, 4, &mut rng).unwrap(),
                },
                Layer::Dense {
                    params: DenseParams::init(4, 3, &mut rng).unwrap(),
                },
            ],
        )
        .unwrap()
    }

    fn input() -> TimeSeriesTensor {
        TimeSeriesTensor::new(6, 3, (0..18).map(|i| ((i * 7 % 11) as f64) / 11.0).collect())
            .unwrap()
    }

    #[test]
    fn dense_bias_gradient_is_probs_minus_onehot() {
        let net = toy(1);
        let pass = net.forward(&input(), Mode::Infer, None).unwrap();
        let grads = net.backward(&pass, 2).unwrap();
        let bias = grads.tensors.last().unwrap();
        for c in 0..3 {
            let expected = pass.probs[c] - if c == 2 { 1.0 } else { 0.0 };
            assert!((bias[c] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn confident_correct_prediction_has_near_zero_gradients() {
        let mut net = toy(2);
        if let Some(Layer::Dense { params }) = net.layers.last_mut() {
            params.weights.iter_mut().for_each(|w| *w = 0.0);
            params.bias = vec![0.0, 40.0, 0.0];
        }
        let (loss, grads) = net
            .loss_and_gradients(&input(), 1, Mode::Infer, None)
            .unwrap();
        assert!(loss < 1e-15);
        assert!(grads.flat().iter().all(|g| g.abs() < 1e-15));
    }

    #[test]
    fn foreign_cache_is_a_usage_error() {
        let net = toy(3);
        let other = Network::new(
            (6, 3),
            vec![Layer::TimeDistributed, Layer::Lstm { params: LstmParams::zeros(3, 4).unwrap() }, Layer::Dense {
                params: DenseParams::zeros(4, 3).unwrap(),
            }],
        )
        .unwrap();
        let pass = other.forward(&input(), Mode::Infer, None).unwrap();
        assert!(matches!(net.backward(&pass, 0), Err(Error::Usage(_))));
    }

    #[test]
    fn train_mode_without_rng_rejected() {
        let net = toy(4);
        assert!(matches!(
            net.forward(&input(), Mode::Train, None),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn predict_is_pure() {
        let net = toy(5);
        let a = net.predict(&input()).unwrap();
        let b = net.predict(&input()).unwrap();
        assert_eq!(a, b);
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_topologies() {
        assert!(matches!(
            Network::new((4, 2), vec![Layer::TimeDistributed]),
            Err(Error::Config(_))
        ));
        let bad = Network::new(
            (4, 2),
            vec![Layer::Dense {
                params: DenseParams::zeros(2, 3).unwrap(),
            }],
        );
        assert!(matches!(bad, Err(Error::Shape(_))));
    }

    #[test]
    fn flat_params_round_trip() {
        let mut net = toy(6);
        let flat = net.flat_params();
        assert_eq!(flat.len(), net.param_count());
        let doubled: Vec<f64> = flat.iter().map(|v| v * 2.0).collect();
        net.set_flat_params(&doubled).unwrap();
        assert_eq!(net.flat_params(), doubled);
        assert!(net.set_flat_params(&flat[1..]).is_err());
    }
}
