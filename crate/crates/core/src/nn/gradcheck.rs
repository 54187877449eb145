//! Central finite-difference verification of [`Network::backward`].

use super::dropout::Mode;
use super::network::{Gradients, Network};
use super::tensor::TimeSeriesTensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// `(tensor index, entry index)` of the worst entry.
    pub worst: (usize, usize),
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_relative_error < tolerance
    }
}

/// `(L(θ+ε) − L(θ−ε)) / 2ε` for every parameter, with dropout disabled.
pub fn numeric_gradients(
    network: &Network,
    input: &TimeSeriesTensor,
    label: usize,
    eps: f64,
) -> Result<Gradients> {
    let mut probe = network.clone();
    let lens: Vec<usize> = network.tensors().iter().map(|t| t.len()).collect();
    let mut out = Vec::with_capacity(lens.len());
    for (ti, &len) in lens.iter().enumerate() {
        let mut g = vec![0.0; len];
        for (j, gj) in g.iter_mut().enumerate() {
            let original = probe.tensors()[ti][j];
            probe.tensors_mut()[ti][j] = original + eps;
            let plus = probe.loss(input, label)?;
            probe.tensors_mut()[ti][j] = original - eps;
            let minus = probe.loss(input, label)?;
            probe.tensors_mut()[ti][j] = original;
            *gj = (plus - minus) / (2.0 * eps);
        }
        out.push(g);
    }
    Ok(Gradients { tensors: out })
}

/// Max over entries of `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn compare_gradients(analytic: &Gradients, numeric: &Gradients) -> Result<GradCheckReport> {
    if analytic.tensors.len() != numeric.tensors.len() {
        return Err(Error::Shape("gradient sets differ in tensor count".into()));
    }
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: (0, 0),
        checked: 0,
    };
    for (ti, (a, n)) in analytic.tensors.iter().zip(&numeric.tensors).enumerate() {
        if a.len() != n.len() {
            return Err(Error::Shape(format!("tensor {ti} length differs")));
        }
        for (j, (&av, &nv)) in a.iter().zip(n).enumerate() {
            let denom = av.abs().max(nv.abs()).max(1e-8);
            let rel = (av - nv).abs() / denom;
            report.checked += 1;
            if rel > report.max_relative_error {
                report.max_relative_error = rel;
                report.worst = (ti, j);
            }
        }
    }
    Ok(report)
}

/// Compares backpropagated gradients to central differences. Only inference
/// mode is accepted, since dropout masks make the loss non-deterministic.
pub fn gradient_check(
    network: &Network,
    input: &TimeSeriesTensor,
    label: usize,
    eps: f64,
    mode: Mode,
) -> Result<GradCheckReport> {
    if mode == Mode::Train {
        return Err(Error::Usage(
            "gradient check requires dropout in inference mode".into(),
        ));
    }
    let pass = network.forward(input, Mode::Infer, None)?;
    let analytic = network.backward(&pass, label)?;
    let numeric = numeric_gradients(network, input, label, eps)?;
    compare_gradients(&analytic, &numeric)
}
