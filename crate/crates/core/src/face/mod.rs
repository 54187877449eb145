//! Embedding-space user verification.
//!
//! Face embeddings are 128-d vectors constrained to the unit hypersphere.
//! Distances are squared Euclidean throughout, so for unit vectors
//! `‖a − b‖² = 2 − 2·a·b`.

mod head;
mod io;
mod triplet;
mod verifier;

pub use head::{
    mined_loss, train_projection_head, triplet_objective, FeatureVector, HeadTrainConfig,
    ProjectionHead,
};
pub use io::{load_embeddings_jsonl, parse_embeddings_jsonl, write_embeddings_jsonl};
pub use triplet::{mine_triplets, triplet_loss, Triplet, DEFAULT_MARGIN};
pub use verifier::{
    train_verifier, verify_frame, FaceClassification, GateDecision, StrayMode, VerifierConfig,
    VerifierModel, DEFAULT_AUTH_THRESHOLD, MIN_USER_EMBEDDINGS,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EMBEDDING_DIM: usize = 128;

/// Tolerance on `‖v‖₂ − 1` for inputs that claim to be normalized.
pub(crate) const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceEmbedding {
    pub vector: Vec<f64>,
    /// Known only for enrollment data.
    pub identity: Option<String>,
}

impl FaceEmbedding {
    pub fn with_identity(mut self, identity: impl Into<String>) -> Self {
        self.identity = Some(identity.into());
        self
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.vector)
    }

    pub fn is_unit(&self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_TOLERANCE
    }
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Projects a 128-d vector onto the unit hypersphere.
pub fn normalize_embedding(v: &[f64]) -> Result<FaceEmbedding> {
    if v.len() != EMBEDDING_DIM {
        return Err(Error::Shape(format!(
            "face embedding needs {EMBEDDING_DIM} values, got {}",
            v.len()
        )));
    }
    let vector = normalize_vector(v)?;
    Ok(FaceEmbedding {
        vector,
        identity: None,
    })
}

pub(crate) fn normalize_vector(v: &[f64]) -> Result<Vec<f64>> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("embedding has non-finite entries".into()));
    }
    let n = l2_norm(v);
    if n == 0.0 {
        return Err(Error::Numeric("cannot normalize the zero vector".into()));
    }
    Ok(v.iter().map(|x| x / n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn padded(head: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; EMBEDDING_DIM];
        v[..head.len()].copy_from_slice(head);
        v
    }

    #[test]
    fn pythagorean_normalization() {
        let e = normalize_embedding(&padded(&[3.0, 4.0])).unwrap();
        assert!((e.vector[0] - 0.6).abs() < 1e-15);
        assert!((e.vector[1] - 0.8).abs() < 1e-15);
        assert!(e.vector[2..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn unit_vectors_are_fixed_points() {
        let u = normalize_embedding(&padded(&[0.6, 0.0, -0.8])).unwrap();
        let again = normalize_embedding(&u.vector).unwrap();
        for (a, b) in u.vector.iter().zip(&again.vector) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn scale_invariant() {
        let v: Vec<f64> = (0..EMBEDDING_DIM).map(|i| (i as f64).sin()).collect();
        let scaled: Vec<f64> = v.iter().map(|x| x * 17.5).collect();
        let a = normalize_embedding(&v).unwrap();
        let b = normalize_embedding(&scaled).unwrap();
        for (x, y) in a.vector.iter().zip(&b.vector) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_and_wrong_length_rejected() {
        assert!(matches!(
            normalize_embedding(&[0.0; EMBEDDING_DIM]),
            Err(Error::Numeric(_))
        ));
        assert!(matches!(normalize_embedding(&[1.0; 127]), Err(Error::Shape(_))));
    }
}
