use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::EngineRng;

/// Probability floor applied inside the cross-entropy logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// Weights stored as `[input][class]`, flattened.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub inputs: usize,
    pub classes: usize,
}

impl DenseParams {
    pub fn zeros(inputs: usize, classes: usize) -> Result<Self> {
        if inputs == 0 || classes == 0 {
            return Err(Error::Config("dense layer dimensions must be positive".into()));
        }
        Ok(Self {
            weights: vec![0.0; inputs * classes],
            bias: vec![0.0; classes],
            inputs,
            classes,
        })
    }

    pub fn init(inputs: usize, classes: usize, rng: &mut EngineRng) -> Result<Self> {
        let mut p = Self::zeros(inputs, classes)?;
        let limit = (3.0 / inputs as f64).sqrt();
        for w in &mut p.weights {
            *w = rng.random_range(-limit..limit);
        }
        Ok(p)
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

pub fn dense_logits(h: &[f64], params: &DenseParams) -> Result<Vec<f64>> {
    if h.len() != params.inputs {
        return Err(Error::Shape(format!(
            "dense layer expects {} inputs, got {}",
            params.inputs,
            h.len()
        )));
    }
    let mut logits = params.bias.clone();
    for (i, &x) in h.iter().enumerate() {
        let row = &params.weights[i * params.classes..(i + 1) * params.classes];
        for (l, &w) in logits.iter_mut().zip(row) {
            *l += x * w;
        }
    }
    Ok(logits)
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::Shape("softmax of an empty vector".into()));
    }
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(Error::Numeric("non-finite logit".into()));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

pub fn dense_softmax_forward(h: &[f64], params: &DenseParams) -> Result<Vec<f64>> {
    softmax(&dense_logits(h, params)?)
}

/// `-ln(max(probs[label], 1e-12))`.
pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64> {
    let p = probs.get(label).ok_or_else(|| {
        Error::Index(format!("label {label} out of range for {} classes", probs.len()))
    })?;
    Ok(-p.max(PROB_FLOOR).ln())
}

/// Accumulates dense gradients for the upstream gradient on the logits; returns the input gradient.
pub(crate) fn dense_backward(
    h: &[f64],
    params: &DenseParams,
    grad_logits: &[f64],
    grad_weights: &mut [f64],
    grad_bias: &mut [f64],
) -> Vec<f64> {
    let classes = params.classes;
    for (gb, &g) in grad_bias.iter_mut().zip(grad_logits) {
        *gb += g;
    }
    let mut grad_h = vec![0.0; params.inputs];
    for (i, &x) in h.iter().enumerate() {
        let row = &params.weights[i * classes..(i + 1) * classes];
        let grow = &mut grad_weights[i * classes..(i + 1) * classes];
        let mut acc = 0.0;
        for c in 0..classes {
            grow[c] += x * grad_logits[c];
            acc += row[c] * grad_logits[c];
        }
        grad_h[i] = acc;
    }
    grad_h
}
