use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment accumulators, one per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: AdamConfig,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: u64,
}

impl OptimizerState {
    /// Fresh state for tensors of the given lengths.
    pub fn new(tensor_lens: &[usize], config: AdamConfig) -> Self {
        Self {
            config,
            first: tensor_lens.iter().map(|&n| vec![0.0; n]).collect(),
            second: tensor_lens.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(
    params: &mut [&mut [f64]],
    grads: &[Vec<f64>],
    state: &mut OptimizerState,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first.len() {
        return Err(Error::Shape(format!(
            "optimizer tracks {} tensors, got {} parameters and {} gradients",
            state.first.len(),
            params.len(),
            grads.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() || p.len() != state.first[i].len() {
            return Err(Error::Shape(format!(
                "tensor {i}: {} parameters, {} gradients, {} accumulators",
                p.len(),
                g.len(),
                state.first[i].len()
            )));
        }
    }

    state.step += 1;
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    let t = state.step as i32;
    let correction1 = 1.0 - beta1.powi(t);
    let correction2 = 1.0 - beta2.powi(t);

    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = &mut state.first[i];
        let v = &mut state.second[i];
        for j in 0..p.len() {
            let gj = g[j];
            m[j] = beta1 * m[j] + (1.0 - beta1) * gj;
            v[j] = beta2 * v[j] + (1.0 - beta2) * gj * gj;
            let m_hat = m[j] / correction1;
            let v_hat = v[j] / correction2;
            p[j] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = vec![1.0, -2.0, 3.0];
        let mut state = OptimizerState::new(&[3], AdamConfig::default());
        adam_step(&mut [&mut p], &[vec![0.0; 3]], &mut state).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate_times_sign() {
        let mut p = vec![0.0; 4];
        let g = vec![0.3, -5.0, 1e-2, -7e-3];
        let mut state = OptimizerState::new(&[4], AdamConfig::default());
        adam_step(&mut [&mut p], &[g.clone()], &mut state).unwrap();
        for (pj, gj) in p.iter().zip(&g) {
            let expected = -1e-3 * gj.signum();
            // m̂/√v̂ = sign(g); ε shrinks the step by a relative 1e-8/|g|.
            let bound = 1e-3 * 1e-8 / gj.abs() + 1e-15;
            assert!((pj - expected).abs() < bound, "{pj} vs {expected}");
        }
    }

    #[test]
    fn identical_state_gives_identical_update() {
        let g = vec![vec![0.1, -0.2], vec![3.0]];
        let mut a = (vec![1.0, 2.0], vec![3.0]);
        let mut sa = OptimizerState::new(&[2, 1], AdamConfig::default());
        adam_step(&mut [&mut a.0, &mut a.1], &g, &mut sa).unwrap();
        let mut b = a.clone();
        let mut sb = sa.clone();
        adam_step(&mut [&mut a.0, &mut a.1], &g, &mut sa).unwrap();
        adam_step(&mut [&mut b.0, &mut b.1], &g, &mut sb).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = vec![0.0; 2];
        let mut state = OptimizerState::new(&[2], AdamConfig::default());
        assert!(matches!(
            adam_step(&mut [&mut p], &[vec![0.0; 3]], &mut state),
            Err(Error::Shape(_))
        ));
        assert_eq!(state.step_count(), 0);
    }

    #[test]
    fn zero_learning_rate_is_bit_exact_noop() {
        let mut p = vec![0.123_456_789, -9.87];
        let before = p.clone();
        let cfg = AdamConfig {
            learning_rate: 0.0,
            ..AdamConfig::default()
        };
        let mut state = OptimizerState::new(&[2], cfg);
        for _ in 0..5 {
            adam_step(&mut [&mut p], &[vec![0.5, -0.25]], &mut state).unwrap();
        }
        assert_eq!(p, before);
    }
}
