//! LSTM with sigmoid gates and ReLU candidate/output activations.
//!
//! Gate pre-activations are computed by one stacked matrix `W` of shape
//! `4H × (D+H)` over the concatenation `[x_t; h_{t-1}]`. Row blocks are, in
//! order: input gate, forget gate, candidate, output gate.
//!
//! ```text
//! i = σ(z_i)   f = σ(z_f)   g = relu(z_g)   o = σ(z_o)
//! c_t = f ⊙ c_{t-1} + i ⊙ g
//! h_t = o ⊙ relu(c_t)
//! ```

use rand::Rng;

use super::sigmoid;
use super::tensor::TimeSeriesTensor;
use crate::error::{Error, Result};
use crate::rng::EngineRng;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// Row-major `4H × (D+H)`.
    pub weights: Vec<f64>,
    /// `4H`.
    pub bias: Vec<f64>,
    pub input_dim: usize,
    pub hidden: usize,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Result<Self> {
        if input_dim == 0 || hidden == 0 {
            return Err(Error::Config("LSTM dimensions must be positive".into()));
        }
        Ok(Self {
            weights: vec![0.0; 4 * hidden * (input_dim + hidden)],
            bias: vec![0.0; 4 * hidden],
            input_dim,
            hidden,
        })
    }

    /// Uniform in `±sqrt(3 / (D+H))`, zero biases except a forget-gate bias of 1.
    pub fn init(input_dim: usize, hidden: usize, rng: &mut EngineRng) -> Result<Self> {
        let mut p = Self::zeros(input_dim, hidden)?;
        let limit = (3.0 / (input_dim + hidden) as f64).sqrt();
        for w in &mut p.weights {
            *w = rng.random_range(-limit..limit);
        }
        p.bias[hidden..2 * hidden].iter_mut().for_each(|b| *b = 1.0);
        Ok(p)
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn row_len(&self) -> usize {
        self.input_dim + self.hidden
    }
}

/// Full hidden sequence plus the final hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmOutput {
    pub hidden_seq: TimeSeriesTensor,
    pub final_hidden: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    input: TimeSeriesTensor,
    /// Gate pre-activations per step, `T × 4H`.
    gates_pre: Vec<f64>,
    /// Cell states `c_0..c_T` (index 0 is the zero initial state), `(T+1) × H`.
    cells: Vec<f64>,
    /// Hidden states `h_0..h_T`, `(T+1) × H`.
    hiddens: Vec<f64>,
}

impl LstmCache {
    pub(crate) fn steps(&self) -> usize {
        self.input.steps()
    }
}

pub fn lstm_forward(seq: &TimeSeriesTensor, params: &LstmParams) -> Result<LstmOutput> {
    let (out, _) = lstm_forward_cached(seq, params)?;
    Ok(out)
}

pub(crate) fn lstm_forward_cached(
    seq: &TimeSeriesTensor,
    params: &LstmParams,
) -> Result<(LstmOutput, LstmCache)> {
    if seq.channels() != params.input_dim {
        return Err(Error::Shape(format!(
            "LSTM expects input dim {}, got {}",
            params.input_dim,
            seq.channels()
        )));
    }
    let h = params.hidden;
    let d = params.input_dim;
    let steps = seq.steps();
    let row_len = params.row_len();

    let mut gates_pre = vec![0.0; steps * 4 * h];
    let mut cells = vec![0.0; (steps + 1) * h];
    let mut hiddens = vec![0.0; (steps + 1) * h];
    let mut concat = vec![0.0; row_len];

    for t in 0..steps {
        concat[..d].copy_from_slice(seq.row(t));
        concat[d..].copy_from_slice(&hiddens[t * h..(t + 1) * h]);
        let z = &mut gates_pre[t * 4 * h..(t + 1) * 4 * h];
        for (r, zr) in z.iter_mut().enumerate() {
            let w = &params.weights[r * row_len..(r + 1) * row_len];
            *zr = params.bias[r] + w.iter().zip(&concat).map(|(a, b)| a * b).sum::<f64>();
        }
        for j in 0..h {
            let i_g = sigmoid(z[j]);
            let f_g = sigmoid(z[h + j]);
            let g_g = z[2 * h + j].max(0.0);
            let o_g = sigmoid(z[3 * h + j]);
            let c = f_g * cells[t * h + j] + i_g * g_g;
            cells[(t + 1) * h + j] = c;
            hiddens[(t + 1) * h + j] = o_g * c.max(0.0);
        }
    }

    let hidden_seq = TimeSeriesTensor::from_raw(steps, h, hiddens[h..].to_vec());
    let final_hidden = hiddens[steps * h..].to_vec();
    Ok((
        LstmOutput {
            hidden_seq,
            final_hidden,
        },
        LstmCache {
            input: seq.clone(),
            gates_pre,
            cells,
            hiddens,
        },
    ))
}

/// Backpropagation through time given gradients on every hidden state (`T × H`).
pub(crate) fn lstm_backward(
    cache: &LstmCache,
    params: &LstmParams,
    grad_hidden: &[f64],
    grad_weights: &mut [f64],
    grad_bias: &mut [f64],
) -> TimeSeriesTensor {
    let h = params.hidden;
    let d = params.input_dim;
    let steps = cache.input.steps();
    let row_len = params.row_len();

    let mut grad_in = vec![0.0; steps * d];
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut dz = vec![0.0; 4 * h];
    let mut concat = vec![0.0; row_len];

    for t in (0..steps).rev() {
        let z = &cache.gates_pre[t * 4 * h..(t + 1) * 4 * h];
        let c_prev = &cache.cells[t * h..(t + 1) * h];
        let c_cur = &cache.cells[(t + 1) * h..(t + 2) * h];
        for j in 0..h {
            let i_g = sigmoid(z[j]);
            let f_g = sigmoid(z[h + j]);
            let g_pre = z[2 * h + j];
            let g_g = g_pre.max(0.0);
            let o_g = sigmoid(z[3 * h + j]);
            let c = c_cur[j];
            let relu_c = c.max(0.0);

            let dh = grad_hidden[t * h + j] + dh_next[j];
            let d_o = dh * relu_c;
            let dc = dh * o_g * if c > 0.0 { 1.0 } else { 0.0 } + dc_next[j];

            dz[j] = dc * g_g * i_g * (1.0 - i_g);
            dz[h + j] = dc * c_prev[j] * f_g * (1.0 - f_g);
            dz[2 * h + j] = if g_pre > 0.0 { dc * i_g } else { 0.0 };
            dz[3 * h + j] = d_o * o_g * (1.0 - o_g);
            dc_next[j] = dc * f_g;
        }

        concat[..d].copy_from_slice(cache.input.row(t));
        concat[d..].copy_from_slice(&cache.hiddens[t * h..(t + 1) * h]);
        let mut d_concat = vec![0.0; row_len];
        for (r, &dzr) in dz.iter().enumerate() {
            if dzr == 0.0 {
                continue;
            }
            grad_bias[r] += dzr;
            let w = &params.weights[r * row_len..(r + 1) * row_len];
            let gw = &mut grad_weights[r * row_len..(r + 1) * row_len];
            for k in 0..row_len {
                gw[k] += dzr * concat[k];
                d_concat[k] += dzr * w[k];
            }
        }
        grad_in[t * d..(t + 1) * d].copy_from_slice(&d_concat[..d]);
        dh_next.copy_from_slice(&d_concat[d..]);
    }
    TimeSeriesTensor::from_raw(steps, d, grad_in)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_zero_hidden_states() {
        let p = LstmParams::zeros(3, 4).unwrap();
        let x = TimeSeriesTensor::new(2, 3, vec![1.0, -2.0, 0.5, 3.0, 3.0, 3.0]).unwrap();
        let out = lstm_forward(&x, &p).unwrap();
        assert!(out.hidden_seq.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(out.final_hidden, vec![0.0; 4]);
    }

    #[test]
    fn full_size_layer_parameter_count() {
        let p = LstmParams::zeros(64, 200).unwrap();
        assert_eq!(p.param_count(), 4 * (200 * (64 + 200) + 200));
        assert_eq!(p.param_count(), 212_000);
    }

    #[test]
    fn single_step_matches_hand_evaluation() {
        // D = H = 1; rows [w_x, w_h] per gate.
        let mut p = LstmParams::zeros(1, 1).unwrap();
        p.weights = vec![0.5, 0.0, -1.0, 0.0, 2.0, 0.0, 1.0, 0.0];
        p.bias = vec![0.0, 0.0, -0.5, 0.25];
        let x = TimeSeriesTensor::new(1, 1, vec![2.0]).unwrap();
        let out = lstm_forward(&x, &p).unwrap();

        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let i = sig(1.0);
        let g = (4.0f64 - 0.5).max(0.0);
        let o = sig(2.25);
        let c = i * g; // forget gate multiplies c_0 = 0
        let expected = o * c.max(0.0);
        assert!((out.final_hidden[0] - expected).abs() < 1e-15);
        assert!((expected - 2.3149).abs() < 1e-3);
    }

    #[test]
    fn input_dim_mismatch_rejected() {
        let p = LstmParams::zeros(3, 2).unwrap();
        let x = TimeSeriesTensor::zeros(4, 5);
        assert!(matches!(lstm_forward(&x, &p), Err(Error::Shape(_))));
    }

    #[test]
    fn final_hidden_is_last_row_of_sequence() {
        let mut rng = crate::rng::seeded(9);
        let p = LstmParams::init(2, 3, &mut rng).unwrap();
        let x = TimeSeriesTensor::new(3, 2, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let out = lstm_forward(&x, &p).unwrap();
        assert_eq!(out.hidden_seq.last_row(), out.final_hidden.as_slice());
    }
}
