//! Softmax identity classifier and the authorization gate.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{FaceEmbedding, ProjectionHead, EMBEDDING_DIM};
use crate::error::{Error, Result};
use crate::nn::{adam_step, dense_logits, softmax, AdamConfig, DenseParams, OptimizerState};
use crate::rng::seeded;

/// The designated user must be strictly more likely than this.
pub const DEFAULT_AUTH_THRESHOLD: f64 = 0.90;
/// Enrollment frames required for the designated user.
pub const MIN_USER_EMBEDDINGS: usize = 20;

/// How non-user identities map onto classifier classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrayMode {
    /// One class per stray identity.
    #[default]
    Separate,
    /// All stray identities share a single class.
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifierConfig {
    pub user_identity: String,
    pub stray_mode: StrayMode,
    pub epochs: usize,
    pub optimizer: AdamConfig,
    pub seed: u64,
}

impl VerifierConfig {
    pub fn new(user_identity: impl Into<String>, seed: u64) -> Self {
        Self {
            user_identity: user_identity.into(),
            stray_mode: StrayMode::Separate,
            epochs: 300,
            optimizer: AdamConfig {
                learning_rate: 0.05,
                ..AdamConfig::default()
            },
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifierModel {
    /// Class names; index [`VerifierModel::USER_CLASS`] is the designated user.
    pub classes: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub head: Option<ProjectionHead>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaceClassification {
    pub probabilities: Vec<f64>,
    pub predicted: String,
    pub user_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateDecision {
    pub authorized: bool,
    /// Highest designated-user probability over the faces, 0 when there are none.
    pub best_user_confidence: f64,
    pub faces: Vec<FaceClassification>,
}

impl VerifierModel {
    pub const USER_CLASS: usize = 0;

    fn dense(&self) -> DenseParams {
        DenseParams {
            weights: self.weights.clone(),
            bias: self.bias.clone(),
            inputs: EMBEDDING_DIM,
            classes: self.classes.len(),
        }
    }

    pub fn user_identity(&self) -> &str {
        &self.classes[Self::USER_CLASS]
    }

    fn embed(&self, face: &FaceEmbedding) -> Result<Vec<f64>> {
        match &self.head {
            Some(head) => Ok(head.project(&face.vector)?.vector),
            None => Ok(face.vector.clone()),
        }
    }

    pub fn probabilities(&self, face: &FaceEmbedding) -> Result<Vec<f64>> {
        let x = self.embed(face)?;
        softmax(&dense_logits(&x, &self.dense())?)
    }

    pub fn user_probability(&self, face: &FaceEmbedding) -> Result<f64> {
        Ok(self.probabilities(face)?[Self::USER_CLASS])
    }

    pub fn classify(&self, face: &FaceEmbedding) -> Result<FaceClassification> {
        let probabilities = self.probabilities(face)?;
        let best = probabilities
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap_or(0);
        Ok(FaceClassification {
            user_probability: probabilities[Self::USER_CLASS],
            predicted: self.classes[best].clone(),
            probabilities,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)
            .map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })?;
        let k = model.classes.len();
        if k < 2 || model.weights.len() != EMBEDDING_DIM * k || model.bias.len() != k {
            return Err(Error::Consistency("verifier weights do not match its class table".into()));
        }
        if let Some(h) = &model.head {
            if h.out_dim != EMBEDDING_DIM
                || h.in_dim != EMBEDDING_DIM
                || h.weights.len() != h.in_dim * h.out_dim
                || h.bias.len() != h.out_dim
            {
                return Err(Error::Consistency("projection head has inconsistent shape".into()));
            }
        }
        Ok(model)
    }
}

/// Fits the softmax identity classifier over enrollment embeddings.
///
/// The user's identity becomes class 0; stray identities follow in sorted
/// order (or collapse into one class under [`StrayMode::Binary`]). When a
/// projection head is supplied, embeddings are projected before classification.
pub fn train_verifier(
    enrollment: &[FaceEmbedding],
    config: &VerifierConfig,
    head: Option<ProjectionHead>,
) -> Result<VerifierModel> {
    let mut strays = BTreeSet::new();
    let mut user_count = 0;
    for (i, e) in enrollment.iter().enumerate() {
        let id = e
            .identity
            .as_deref()
            .ok_or_else(|| Error::Data(format!("enrollment embedding {i} has no identity")))?;
        if !e.is_unit() || e.vector.len() != EMBEDDING_DIM {
            return Err(Error::Precondition(format!(
                "enrollment embedding {i} is not a unit {EMBEDDING_DIM}-vector"
            )));
        }
        if id == config.user_identity {
            user_count += 1;
        } else {
            strays.insert(id.to_string());
        }
    }
    if user_count < MIN_USER_EMBEDDINGS {
        return Err(Error::Setup(format!(
            "designated user `{}` has {user_count} enrollment embeddings, need {MIN_USER_EMBEDDINGS}",
            config.user_identity
        )));
    }
    if strays.is_empty() {
        return Err(Error::Config(
            "no stray identities: the gate cannot be calibrated against impostors".into(),
        ));
    }

    let mut classes = vec![config.user_identity.clone()];
    match config.stray_mode {
        StrayMode::Separate => classes.extend(strays.iter().cloned()),
        StrayMode::Binary => classes.push("stray".to_string()),
    }
    let label_of = |id: &str| -> usize {
        if id == config.user_identity {
            0
        } else {
            match config.stray_mode {
                StrayMode::Separate => 1 + strays.iter().position(|s| s == id).unwrap(),
                StrayMode::Binary => 1,
            }
        }
    };

    let mut model = VerifierModel {
        classes,
        weights: Vec::new(),
        bias: Vec::new(),
        head,
    };
    let inputs: Vec<Vec<f64>> = enrollment
        .iter()
        .map(|e| model.embed(e))
        .collect::<Result<_>>()?;
    let labels: Vec<usize> = enrollment
        .iter()
        .map(|e| label_of(e.identity.as_deref().unwrap()))
        .collect();

    let mut rng = seeded(config.seed);
    let mut dense = DenseParams::init(EMBEDDING_DIM, model.classes.len(), &mut rng)?;
    let mut state = OptimizerState::new(&[dense.weights.len(), dense.bias.len()], config.optimizer);
    let k = model.classes.len();
    let scale = 1.0 / inputs.len() as f64;
    for _ in 0..config.epochs {
        let mut gw = vec![0.0; dense.weights.len()];
        let mut gb = vec![0.0; k];
        for (x, &y) in inputs.iter().zip(&labels) {
            let mut g = softmax(&dense_logits(x, &dense)?)?;
            g[y] -= 1.0;
            for c in 0..k {
                gb[c] += scale * g[c];
            }
            for (i, xv) in x.iter().enumerate() {
                for c in 0..k {
                    gw[i * k + c] += scale * xv * g[c];
                }
            }
        }
        adam_step(&mut [&mut dense.weights, &mut dense.bias], &[gw, gb], &mut state)?;
    }
    model.weights = dense.weights;
    model.bias = dense.bias;
    Ok(model)
}

/// Authorizes iff some face's designated-user probability strictly exceeds `threshold`.
///
/// Faces that cannot be classified count as non-user.
pub fn verify_frame(model: &VerifierModel, faces: &[FaceEmbedding], threshold: f64) -> GateDecision {
    let classified: Vec<FaceClassification> = faces
        .iter()
        .map(|f| {
            model.classify(f).unwrap_or_else(|_| FaceClassification {
                probabilities: Vec::new(),
                predicted: String::new(),
                user_probability: 0.0,
            })
        })
        .collect();
    let best = classified
        .iter()
        .map(|c| c.user_probability)
        .fold(0.0, f64::max);
    GateDecision {
        authorized: classified.iter().any(|c| c.user_probability > threshold),
        best_user_confidence: best,
        faces: classified,
    }
}
