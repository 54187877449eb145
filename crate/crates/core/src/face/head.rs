//! Linear projection head trained with mined triplets.
//!
//! `e(x) = normalize(W·x + b)` maps upstream feature vectors onto the
//! 128-d hypersphere. Training minimizes the mean hinge loss over triplets
//! re-mined from the current embeddings at every epoch.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{l2_norm, mine_triplets, FaceEmbedding, Triplet, EMBEDDING_DIM};
use crate::error::{Error, Result};
use crate::nn::{adam_step, AdamConfig, OptimizerState};
use crate::rng::seeded;

/// Labeled input to the projection head, e.g. a raw descriptor from an upstream extractor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub identity: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionHead {
    /// Row-major `out_dim × in_dim`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl ProjectionHead {
    pub fn init(in_dim: usize, seed: u64) -> Result<Self> {
        if in_dim == 0 {
            return Err(Error::Config("projection input dimension must be positive".into()));
        }
        let mut rng = seeded(seed);
        let limit = (3.0 / in_dim as f64).sqrt();
        Ok(Self {
            weights: (0..EMBEDDING_DIM * in_dim)
                .map(|_| rng.random_range(-limit..limit))
                .collect(),
            bias: vec![0.0; EMBEDDING_DIM],
            in_dim,
            out_dim: EMBEDDING_DIM,
        })
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn affine(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim {
            return Err(Error::Shape(format!(
                "projection expects {} inputs, got {}",
                self.in_dim,
                x.len()
            )));
        }
        Ok((0..self.out_dim)
            .map(|r| {
                let row = &self.weights[r * self.in_dim..(r + 1) * self.in_dim];
                self.bias[r] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect())
    }

    /// Projects and renormalizes onto the hypersphere.
    pub fn project(&self, x: &[f64]) -> Result<FaceEmbedding> {
        let u = self.affine(x)?;
        let n = l2_norm(&u);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Numeric("projection collapsed to a degenerate vector".into()));
        }
        Ok(FaceEmbedding {
            vector: u.into_iter().map(|v| v / n).collect(),
            identity: None,
        })
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 2] {
        [&mut self.weights, &mut self.bias]
    }
}

/// Mean triplet loss over fixed `triplets` and its gradient `[dW, db]`.
pub fn triplet_objective(
    head: &ProjectionHead,
    features: &[FeatureVector],
    triplets: &[Triplet],
    margin: f64,
) -> Result<(f64, [Vec<f64>; 2])> {
    let mut grad_w = vec![0.0; head.weights.len()];
    let mut grad_b = vec![0.0; head.bias.len()];
    if triplets.is_empty() {
        return Ok((0.0, [grad_w, grad_b]));
    }
    let pre: Vec<Vec<f64>> = features
        .iter()
        .map(|f| head.affine(&f.values))
        .collect::<Result<_>>()?;
    let norms: Vec<f64> = pre.iter().map(|u| l2_norm(u)).collect();
    if norms.iter().any(|&n| n == 0.0) {
        return Err(Error::Numeric("projection collapsed to the zero vector".into()));
    }
    let emb: Vec<Vec<f64>> = pre
        .iter()
        .zip(&norms)
        .map(|(u, n)| u.iter().map(|v| v / n).collect())
        .collect();

    // Gradient with respect to each normalized embedding.
    let mut grad_e = vec![vec![0.0; head.out_dim]; features.len()];
    let mut total = 0.0;
    let scale = 1.0 / triplets.len() as f64;
    for t in triplets {
        let (a, p, n) = (&emb[t.anchor], &emb[t.positive], &emb[t.negative]);
        let d_ap = super::squared_distance(a, p);
        let d_an = super::squared_distance(a, n);
        let loss = d_ap - d_an + margin;
        if loss <= 0.0 {
            continue;
        }
        total += loss;
        for k in 0..head.out_dim {
            grad_e[t.anchor][k] += scale * 2.0 * (n[k] - p[k]);
            grad_e[t.positive][k] += scale * 2.0 * (p[k] - a[k]);
            grad_e[t.negative][k] += scale * 2.0 * (a[k] - n[k]);
        }
    }

    // e = u/‖u‖  ⇒  du = (g − (g·e)e)/‖u‖
    for (i, g) in grad_e.iter().enumerate() {
        if g.iter().all(|&v| v == 0.0) {
            continue;
        }
        let e = &emb[i];
        let dot: f64 = g.iter().zip(e).map(|(a, b)| a * b).sum();
        let x = &features[i].values;
        for r in 0..head.out_dim {
            let du = (g[r] - dot * e[r]) / norms[i];
            grad_b[r] += du;
            let row = &mut grad_w[r * head.in_dim..(r + 1) * head.in_dim];
            for (gw, xv) in row.iter_mut().zip(x) {
                *gw += du * xv;
            }
        }
    }
    Ok((total * scale, [grad_w, grad_b]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadTrainConfig {
    pub epochs: usize,
    pub optimizer: AdamConfig,
    pub seed: u64,
}

impl Default for HeadTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            optimizer: AdamConfig {
                learning_rate: 0.01,
                ..AdamConfig::default()
            },
            seed: 0,
        }
    }
}

/// Mined-triplet loss of `head` on `features`.
pub fn mined_loss(head: &ProjectionHead, features: &[FeatureVector], margin: f64) -> Result<(f64, Vec<Triplet>)> {
    let embedded = features
        .iter()
        .map(|f| Ok(head.project(&f.values)?.with_identity(f.identity.clone())))
        .collect::<Result<Vec<_>>>()?;
    let triplets = mine_triplets(&embedded, margin)?;
    let (loss, _) = triplet_objective(head, features, &triplets, margin)?;
    Ok((loss, triplets))
}

/// Trains a projection head; returns it with the per-epoch mined-triplet loss
/// (entry 0 is the loss before any update).
pub fn train_projection_head(
    features: &[FeatureVector],
    margin: f64,
    config: &HeadTrainConfig,
) -> Result<(ProjectionHead, Vec<f64>)> {
    let in_dim = features
        .first()
        .map(|f| f.values.len())
        .ok_or_else(|| Error::Data("no feature vectors".into()))?;
    if let Some(f) = features.iter().find(|f| f.values.len() != in_dim) {
        return Err(Error::Data(format!(
            "feature for `{}` has {} values, expected {in_dim}",
            f.identity,
            f.values.len()
        )));
    }
    let mut ids: Vec<&str> = features.iter().map(|f| f.identity.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < 2 {
        return Err(Error::Data("projection training needs at least two identities".into()));
    }

    let mut head = ProjectionHead::init(in_dim, config.seed)?;
    let mut state = OptimizerState::new(&[head.weights.len(), head.bias.len()], config.optimizer);
    let mut history = Vec::with_capacity(config.epochs + 1);
    for _ in 0..config.epochs {
        let (loss, triplets) = mined_loss(&head, features, margin)?;
        history.push(loss);
        let (_, grads) = triplet_objective(&head, features, &triplets, margin)?;
        adam_step(&mut head.tensors_mut(), &grads, &mut state)?;
    }
    history.push(mined_loss(&head, features, margin)?.0);
    Ok((head, history))
}
