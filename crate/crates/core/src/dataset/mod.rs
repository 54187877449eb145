//! Gesture and embedding datasets: formats, synthetic generators and splitting.

mod jsonl;
mod npy;
mod split;
mod synth;

pub use jsonl::{load_gesture_jsonl, parse_gesture_jsonl, write_gesture_jsonl};
pub use npy::{
    encode_npy_f32, export_npy, import_npy, parse_npy, read_npy_samples, write_npy_samples,
    NpyArray, NpyData,
};
pub use split::split;
pub use synth::{synth_embeddings, synth_gestures, Archetype, SynthGestureSpec};

use crate::error::{Error, Result};
use crate::nn::TimeSeriesTensor;

/// Frames captured per dynamic gesture.
pub const FRAMES: usize = 20;
/// Hand landmarks per frame.
pub const LANDMARKS: usize = 21;
/// Values per frame: x, y, z for each landmark.
pub const FEATURES: usize = LANDMARKS * 3;

/// One recorded gesture: 20 frames of 63 landmark coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GestureSample {
    frames: Vec<f64>,
    pub label: usize,
}

impl GestureSample {
    /// Builds a sample from `FRAMES × FEATURES` values in frame-major order.
    pub fn from_flat(frames: Vec<f64>, label: usize) -> Result<Self> {
        if frames.len() != FRAMES * FEATURES {
            return Err(Error::Shape(format!(
                "gesture needs {FRAMES}x{FEATURES} values, got {}",
                frames.len()
            )));
        }
        if frames.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("gesture contains non-finite coordinates".into()));
        }
        Ok(Self { frames, label })
    }

    pub fn from_frames<F: AsRef<[f64]>>(frames: &[F], label: usize) -> Result<Self> {
        if frames.len() != FRAMES {
            return Err(Error::Shape(format!(
                "gesture needs {FRAMES} frames, got {}",
                frames.len()
            )));
        }
        let mut flat = Vec::with_capacity(FRAMES * FEATURES);
        for (i, f) in frames.iter().enumerate() {
            let f = f.as_ref();
            if f.len() != FEATURES {
                return Err(Error::Shape(format!(
                    "frame {i} has {} values, expected {FEATURES}",
                    f.len()
                )));
            }
            flat.extend_from_slice(f);
        }
        Self::from_flat(flat, label)
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.frames[i * FEATURES..(i + 1) * FEATURES]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.frames.chunks_exact(FEATURES)
    }

    pub fn values(&self) -> &[f64] {
        &self.frames
    }

    pub fn to_tensor(&self) -> TimeSeriesTensor {
        TimeSeriesTensor::new(FRAMES, FEATURES, self.frames.clone())
            .expect("sample invariants hold")
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GestureDataset {
    pub samples: Vec<GestureSample>,
    pub class_names: Vec<String>,
}

impl GestureDataset {
    pub fn new(samples: Vec<GestureSample>, class_names: Vec<String>) -> Result<Self> {
        if let Some(s) = samples.iter().find(|s| s.label >= class_names.len()) {
            return Err(Error::Data(format!(
                "label {} outside the {}-class table",
                s.label,
                class_names.len()
            )));
        }
        Ok(Self {
            samples,
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Samples per class label.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    /// Appends another dataset with a compatible class table.
    pub fn extend(&mut self, other: GestureDataset) -> Result<()> {
        if other.num_classes() > self.num_classes() {
            if !other.class_names.starts_with(&self.class_names) {
                return Err(Error::Data("class tables disagree".into()));
            }
            self.class_names = other.class_names;
        } else if !self.class_names.starts_with(&other.class_names) {
            return Err(Error::Data("class tables disagree".into()));
        }
        self.samples.extend(other.samples);
        Ok(())
    }
}

/// Class names `"0".."n-1"` for datasets without a name table.
pub fn numbered_classes(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}
