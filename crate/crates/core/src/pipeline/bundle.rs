//! Engine bundle directory: `gesture.gsrm`, `bindings.json` and, once a face
//! enrollment has been trained, `verifier.json`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::BindingTable;
use crate::dataset::GestureDataset;
use crate::error::{Error, Result};
use crate::face::{train_verifier, FaceEmbedding, VerifierConfig, VerifierModel};
use crate::model::{
    decode_model, encode_model, train_gesture_classifier, GestureNet, GestureNetSpec, TrainConfig,
};

pub const GESTURE_FILE: &str = "gesture.gsrm";
pub const VERIFIER_FILE: &str = "verifier.json";
pub const BINDINGS_FILE: &str = "bindings.json";

#[derive(Debug, Clone)]
pub struct EngineBundle {
    pub gesture: GestureNet,
    pub verifier: Option<VerifierModel>,
    pub bindings: BindingTable,
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
}

fn read(dir: &Path, name: &str) -> Result<Vec<u8>> {
    let path = dir.join(name);
    fs::read(&path).map_err(|e| Error::io(&path, e))
}

fn utf8(bytes: Vec<u8>, name: &str) -> Result<String> {
    String::from_utf8(bytes).map_err(|_| Error::Config(format!("{name} is not UTF-8")))
}

impl EngineBundle {
    pub fn new(gesture: GestureNet, verifier: Option<VerifierModel>, bindings: BindingTable) -> Result<Self> {
        bindings.validate()?;
        if bindings.classes() != gesture.spec.classes {
            return Err(Error::Config(format!(
                "bindings cover {} classes, gesture model has {}",
                bindings.classes(),
                gesture.spec.classes
            )));
        }
        Ok(Self {
            gesture,
            verifier,
            bindings,
        })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write(dir, GESTURE_FILE, &encode_model(&self.gesture))?;
        write(dir, BINDINGS_FILE, (self.bindings.to_json() + "\n").as_bytes())?;
        if let Some(v) = &self.verifier {
            write(dir, VERIFIER_FILE, (v.to_json() + "\n").as_bytes())?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let gesture = decode_model(&read(dir, GESTURE_FILE)?)?;
        let bindings = BindingTable::from_json(&utf8(read(dir, BINDINGS_FILE)?, BINDINGS_FILE)?)?;
        let verifier = if dir.join(VERIFIER_FILE).exists() {
            Some(VerifierModel::from_json(&utf8(read(dir, VERIFIER_FILE)?, VERIFIER_FILE)?)?)
        } else {
            None
        };
        Self::new(gesture, verifier, bindings)
    }

    /// The verifier, which the in-use phase cannot run without.
    pub fn require_verifier(&self) -> Result<&VerifierModel> {
        self.verifier.as_ref().ok_or_else(|| {
            Error::Setup("bundle has no face verifier; enroll the user first".into())
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPhaseConfig {
    pub spec: GestureNetSpec,
    pub gesture: TrainConfig,
    pub verifier: VerifierConfig,
}

impl TrainingPhaseConfig {
    pub fn new(user_identity: impl Into<String>, seed: u64) -> Self {
        Self {
            spec: GestureNetSpec::default(),
            gesture: TrainConfig {
                seed,
                ..TrainConfig::default()
            },
            verifier: VerifierConfig::new(user_identity, seed),
        }
    }
}

/// First-run setup: enroll the user's face, train the gesture classifier and
/// attach the binding table.
pub fn run_training_phase(
    enrollment: &[FaceEmbedding],
    gestures: &GestureDataset,
    bindings: BindingTable,
    config: &TrainingPhaseConfig,
) -> Result<EngineBundle> {
    if enrollment.is_empty() {
        return Err(Error::Setup(
            "face enrollment is mandatory on first run".into(),
        ));
    }
    let verifier = train_verifier(enrollment, &config.verifier, None)?;
    let trained = train_gesture_classifier(gestures, &config.spec, &config.gesture)?;
    EngineBundle::new(trained.net, Some(verifier), bindings)
}
