//! Synthetic gesture and face-embedding corpora.
//!
//! A gesture is a rigid 21-point hand template whose wrist follows a
//! class-specific trajectory across the 20 frames. Gaussian noise is added per
//! coordinate and x/y are clamped to the unit square.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{GestureDataset, GestureSample, FEATURES, FRAMES, LANDMARKS};
use crate::error::{Error, Result};
use crate::face::{normalize_embedding, FaceEmbedding, EMBEDDING_DIM};
use crate::rng::{seeded, EngineRng};

/// Jitter displacement per frame for the random class, as a multiple of the noise level.
const JITTER_SCALE: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Archetype {
    SwipeLeft,
    SwipeRight,
    SwipeUp,
    SwipeDown,
    Circle,
    /// No coherent trajectory: the hand hovers with independent per-frame jitter.
    RandomJitter,
}

impl Archetype {
    pub const ALL: [Archetype; 6] = [
        Archetype::SwipeLeft,
        Archetype::SwipeRight,
        Archetype::SwipeUp,
        Archetype::SwipeDown,
        Archetype::Circle,
        Archetype::RandomJitter,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Archetype::SwipeLeft => "swipe-left",
            Archetype::SwipeRight => "swipe-right",
            Archetype::SwipeUp => "swipe-up",
            Archetype::SwipeDown => "swipe-down",
            Archetype::Circle => "circle",
            Archetype::RandomJitter => "random-jitter",
        }
    }

    /// Wrist position at progress `s ∈ [0, 1]`, before jitter.
    fn center(self, s: f64) -> (f64, f64) {
        match self {
            Archetype::SwipeLeft => (0.7 - 0.4 * s, 0.6),
            Archetype::SwipeRight => (0.3 + 0.4 * s, 0.6),
            Archetype::SwipeUp => (0.5, 0.8 - 0.4 * s),
            Archetype::SwipeDown => (0.5, 0.4 + 0.4 * s),
            Archetype::Circle => (0.5 + 0.15 * (TAU * s).cos(), 0.6 + 0.15 * (TAU * s).sin()),
            Archetype::RandomJitter => (0.5, 0.6),
        }
    }
}

impl fmt::Display for Archetype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Archetype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Archetype::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown gesture archetype `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthGestureSpec {
    pub classes: Vec<Archetype>,
    pub samples_per_class: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthGestureSpec {
    fn default() -> Self {
        Self {
            classes: Archetype::ALL.to_vec(),
            samples_per_class: 40,
            noise_sigma: 0.01,
            seed: 0,
        }
    }
}

impl SynthGestureSpec {
    /// Builds a spec from archetype names.
    pub fn from_names(names: &[&str], samples_per_class: usize, noise_sigma: f64, seed: u64) -> Result<Self> {
        let classes = names.iter().map(|n| n.parse()).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            classes,
            samples_per_class,
            noise_sigma,
            seed,
        })
    }
}

/// Landmark offsets from the wrist: wrist then four joints per finger, thumb first.
fn hand_template() -> [(f64, f64, f64); LANDMARKS] {
    let mut pts = [(0.0, 0.0, 0.0); LANDMARKS];
    for finger in 0..5 {
        let angle = -0.9 + 0.45 * finger as f64;
        let reach = if finger == 0 { 0.025 } else { 0.032 };
        for joint in 0..4 {
            let d = reach * (joint + 1) as f64 + 0.01;
            pts[1 + finger * 4 + joint] = (
                d * angle.sin(),
                -d * angle.cos(),
                -0.004 * (joint + 1) as f64 - 0.002 * finger as f64,
            );
        }
    }
    pts
}

fn render(
    archetype: Archetype,
    sigma: f64,
    template: &[(f64, f64, f64); LANDMARKS],
    rng: &mut EngineRng,
) -> Vec<f64> {
    let noise = |rng: &mut EngineRng, scale: f64| -> f64 {
        if scale == 0.0 {
            0.0
        } else {
            scale * Distribution::<f64>::sample(&StandardNormal, rng)
        }
    };
    let mut out = Vec::with_capacity(FRAMES * FEATURES);
    for frame in 0..FRAMES {
        let s = frame as f64 / (FRAMES - 1) as f64;
        let (mut cx, mut cy) = archetype.center(s);
        if archetype == Archetype::RandomJitter {
            cx += noise(rng, JITTER_SCALE * sigma);
            cy += noise(rng, JITTER_SCALE * sigma);
        }
        for &(dx, dy, dz) in template {
            let x = (cx + dx + noise(rng, sigma)).clamp(0.0, 1.0);
            let y = (cy + dy + noise(rng, sigma)).clamp(0.0, 1.0);
            let z = dz + noise(rng, sigma);
            out.extend_from_slice(&[x, y, z]);
        }
    }
    out
}

/// Generates `samples_per_class` gestures for each archetype, class-major.
pub fn synth_gestures(spec: &SynthGestureSpec) -> Result<GestureDataset> {
    if spec.classes.len() < 2 {
        return Err(Error::Config("synthetic corpus needs at least two classes".into()));
    }
    if !(spec.noise_sigma >= 0.0 && spec.noise_sigma.is_finite()) {
        return Err(Error::Config(format!("noise sigma must be >= 0, got {}", spec.noise_sigma)));
    }
    let template = hand_template();
    let mut rng = seeded(spec.seed);
    let mut samples = Vec::with_capacity(spec.classes.len() * spec.samples_per_class);
    for (label, &arch) in spec.classes.iter().enumerate() {
        for _ in 0..spec.samples_per_class {
            let values = render(arch, spec.noise_sigma, &template, &mut rng);
            samples.push(GestureSample::from_flat(values, label)?);
        }
    }
    GestureDataset::new(
        samples,
        spec.classes.iter().map(|a| a.name().to_string()).collect(),
    )
}

/// Per identity, a random unit mean plus isotropic noise `σ`, renormalized.
pub fn synth_embeddings(
    identities: &[String],
    per_identity: usize,
    sigma: f64,
    seed: u64,
) -> Result<Vec<FaceEmbedding>> {
    if identities.len() < 2 {
        return Err(Error::Config("need at least two identities".into()));
    }
    if per_identity < 1 {
        return Err(Error::Config("need at least one embedding per identity".into()));
    }
    let noise = Normal::new(0.0, sigma)
        .map_err(|_| Error::Config(format!("invalid cluster sigma {sigma}")))?;
    let mut rng = seeded(seed);
    let mut out = Vec::with_capacity(identities.len() * per_identity);
    for id in identities {
        let mean: Vec<f64> = (0..EMBEDDING_DIM).map(|_| rng.sample(StandardNormal)).collect();
        let mean = normalize_embedding(&mean)?;
        for _ in 0..per_identity {
            let v: Vec<f64> = mean
                .vector
                .iter()
                .map(|m| m + noise.sample(&mut rng))
                .collect();
            out.push(normalize_embedding(&v)?.with_identity(id.clone()));
        }
    }
    Ok(out)
}
