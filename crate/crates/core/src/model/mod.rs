//! The Conv1D-LSTM gesture network: construction, training, inference and evaluation.
//!
//! Default layer stack over a `20 × 63` landmark sequence:
//!
//! ```text
//! Conv1D(64, k=3, ReLU) → MaxPool(2) → Dropout(.25)
//! Conv1D(64, k=3, ReLU) → MaxPool(2) → Dropout(.25) → Dropout(.25)
//! TimeDistributed(identity) → LSTM(200) → Dropout(.25) → Dense(6, softmax)
//! ```
//!
//! which realizes 12,160 + 12,352 + 212,000 + 1,206 = 237,718 parameters.

mod format;
mod metrics;

pub use format::{decode_model, encode_model, load_model, save_model, MAGIC, FORMAT_VERSION};
pub use metrics::{
    metrics_from_confusion, metrics_with_labels, round_half_even, AverageMetrics, ClassMetrics,
    ConfusionMatrix, MetricsReport,
};

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{split, GestureDataset, GestureSample, FEATURES, FRAMES};
use crate::error::{Error, Result};
use crate::nn::{
    adam_step, Activation, AdamConfig, Conv1DParams, DenseParams, Gradients, Layer, LstmParams,
    Mode, Network, OptimizerState,
};
use crate::rng::{derive_seed, seeded};

/// Parameter count of the default architecture.
pub const GESTURE_NET_PARAMS: usize = 237_718;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureNetSpec {
    pub frames: usize,
    pub features: usize,
    pub conv1_filters: usize,
    pub conv2_filters: usize,
    pub kernel: usize,
    pub pool: usize,
    pub dropout: f64,
    pub lstm_units: usize,
    pub classes: usize,
}

impl Default for GestureNetSpec {
    fn default() -> Self {
        Self {
            frames: FRAMES,
            features: FEATURES,
            conv1_filters: 64,
            conv2_filters: 64,
            kernel: 3,
            pool: 2,
            dropout: 0.25,
            lstm_units: 200,
            classes: 6,
        }
    }
}

impl GestureNetSpec {
    /// Small network with the same layer stack, for gradient checks.
    pub fn toy() -> Self {
        Self {
            frames: 8,
            features: 4,
            conv1_filters: 2,
            conv2_filters: 2,
            kernel: 3,
            pool: 2,
            dropout: 0.25,
            lstm_units: 8,
            classes: 3,
        }
    }

    /// Per-layer parameter counts: conv1, conv2, lstm, dense.
    pub fn param_breakdown(&self) -> [usize; 4] {
        let k = self.kernel;
        let h = self.lstm_units;
        [
            (k * self.features + 1) * self.conv1_filters,
            (k * self.conv1_filters + 1) * self.conv2_filters,
            4 * (h * (self.conv2_filters + h) + h),
            (h + 1) * self.classes,
        ]
    }

    pub fn expected_param_count(&self) -> usize {
        self.param_breakdown().iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("frames", self.frames),
            ("features", self.features),
            ("conv1_filters", self.conv1_filters),
            ("conv2_filters", self.conv2_filters),
            ("kernel", self.kernel),
            ("pool", self.pool),
            ("lstm_units", self.lstm_units),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.classes < 2 {
            return Err(Error::Config("need at least two classes".into()));
        }
        if self.kernel % 2 == 0 {
            return Err(Error::Config("kernel width must be odd".into()));
        }
        if self.frames / (self.pool * self.pool) < 1 {
            return Err(Error::Config(format!(
                "{} frames cannot be pooled twice by {}",
                self.frames, self.pool
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// A built gesture network together with the spec it realizes.
#[derive(Debug, Clone, PartialEq)]
pub struct GestureNet {
    pub spec: GestureNetSpec,
    pub network: Network,
}

fn layers_for(spec: &GestureNetSpec, seed: u64) -> Result<Vec<Layer>> {
    let mut rng = seeded(seed);
    let drop = || Layer::Dropout { rate: spec.dropout };
    Ok(vec![
        Layer::Conv1D {
            params: Conv1DParams::init(spec.kernel, spec.features, spec.conv1_filters, &mut rng)?,
            activation: Activation::Relu,
        },
        Layer::MaxPool1D { pool: spec.pool },
        drop(),
        Layer::Conv1D {
            params: Conv1DParams::init(spec.kernel, spec.conv1_filters, spec.conv2_filters, &mut rng)?,
            activation: Activation::Relu,
        },
        Layer::MaxPool1D { pool: spec.pool },
        drop(),
        drop(),
        Layer::TimeDistributed,
        Layer::Lstm {
            params: LstmParams::init(spec.conv2_filters, spec.lstm_units, &mut rng)?,
        },
        drop(),
        Layer::Dense {
            params: DenseParams::init(spec.lstm_units, spec.classes, &mut rng)?,
        },
    ])
}

/// Builds and initializes the network for `spec` from `seed`.
pub fn build_gessure_net(spec: &GestureNetSpec, seed: u64) -> Result<GestureNet> {
    spec.validate()?;
    let network = Network::new((spec.frames, spec.features), layers_for(spec, seed)?)?;
    let realized = network.param_count();
    if realized != spec.expected_param_count() {
        return Err(Error::Consistency(format!(
            "realized {realized} parameters, spec implies {}",
            spec.expected_param_count()
        )));
    }
    if *spec == GestureNetSpec::default() && realized != GESTURE_NET_PARAMS {
        return Err(Error::Consistency(format!(
            "default architecture realized {realized} parameters, expected {GESTURE_NET_PARAMS}"
        )));
    }
    Ok(GestureNet {
        spec: spec.clone(),
        network,
    })
}

impl GestureNet {
    pub fn param_count(&self) -> usize {
        self.network.param_count()
    }

    /// Layer table with output shapes and parameter counts.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<4} {:<18} {:>12} {:>10}", "#", "layer", "output", "params");
        for (i, (layer, (t, c))) in self
            .network
            .layers()
            .iter()
            .zip(self.network.layer_shapes())
            .enumerate()
        {
            let _ = writeln!(
                out,
                "{:<4} {:<18} {:>12} {:>10}",
                i,
                layer.name(),
                format!("{t}x{c}"),
                layer.param_count()
            );
        }
        let _ = writeln!(out, "parameters: {}", self.param_count());
        out
    }

    /// FNV-1a over the little-endian bytes of every weight; a cheap identity check.
    pub fn weight_checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in self.network.flat_params() {
            for b in v.to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamConfig,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 40,
            batch_size: 16,
            optimizer: AdamConfig::default(),
            patience: 8,
            validation_fraction: 0.2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.patience == 0 {
            return Err(Error::Config("epochs, batch size and patience must be positive".into()));
        }
        if !(self.optimizer.learning_rate >= 0.0) {
            return Err(Error::Config("learning rate must be non-negative".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config("validation fraction must be in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Best validation loss seen so far; non-increasing.
    pub best_val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Weights from the epoch with the lowest validation loss.
    pub net: GestureNet,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

fn check_dataset(dataset: &GestureDataset, spec: &GestureNetSpec) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::Data("training dataset is empty".into()));
    }
    if spec.frames != FRAMES || spec.features != FEATURES {
        return Err(Error::Data(format!(
            "samples are {FRAMES}x{FEATURES}, network expects {}x{}",
            spec.frames, spec.features
        )));
    }
    if let Some(s) = dataset.samples.iter().find(|s| s.label >= spec.classes) {
        return Err(Error::Data(format!(
            "label {} outside the network's {} classes",
            s.label, spec.classes
        )));
    }
    let present = dataset.class_counts().iter().filter(|&&n| n > 0).count();
    if present < 2 {
        return Err(Error::Data(format!(
            "dataset has {present} distinct class(es), need at least 2"
        )));
    }
    Ok(())
}

fn mean_loss(net: &Network, data: &GestureDataset) -> Result<f64> {
    let mut total = 0.0;
    for s in &data.samples {
        total += net.loss(&s.to_tensor(), s.label)?;
    }
    Ok(total / data.len() as f64)
}

/// Mini-batch Adam on cross-entropy with early stopping on a stratified validation split.
pub fn train_gesture_classifier(
    dataset: &GestureDataset,
    spec: &GestureNetSpec,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    check_dataset(dataset, spec)?;
    let (train, val) = split(dataset, config.validation_fraction, derive_seed(config.seed, 1), true)?;

    let mut net = build_gessure_net(spec, derive_seed(config.seed, 2))?;
    let lens: Vec<usize> = net.network.tensors().iter().map(|t| t.len()).collect();
    let mut state = OptimizerState::new(&lens, config.optimizer);
    let mut order_rng = seeded(derive_seed(config.seed, 3));
    let mut dropout_rng = seeded(derive_seed(config.seed, 4));
    let inputs: Vec<_> = train.samples.iter().map(|s| (s.to_tensor(), s.label)).collect();
    let mut order: Vec<usize> = (0..inputs.len()).collect();

    let mut best = (f64::INFINITY, net.clone(), 0);
    let mut history = Vec::new();
    let mut stale = 0;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut order_rng);
        let mut train_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grads = Gradients::zeros_like(&net.network);
            for &i in batch {
                let (x, y) = &inputs[i];
                let (loss, g) =
                    net.network
                        .loss_and_gradients(x, *y, Mode::Train, Some(&mut dropout_rng))?;
                train_loss += loss;
                grads.add_assign(&g);
            }
            grads.scale(1.0 / batch.len() as f64);
            adam_step(&mut net.network.tensors_mut(), &grads.tensors, &mut state)?;
        }
        train_loss /= inputs.len() as f64;
        let val_loss = mean_loss(&net.network, &val)?;
        if !val_loss.is_finite() {
            return Err(Error::Numeric(format!("validation loss diverged at epoch {epoch}")));
        }
        if val_loss < best.0 {
            best = (val_loss, net.clone(), epoch);
            stale = 0;
        } else {
            stale += 1;
        }
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            best_val_loss: best.0,
        });
        log::debug!("epoch {epoch}: train {train_loss:.4} val {val_loss:.4}");
        if stale >= config.patience {
            break;
        }
    }
    Ok(TrainOutcome {
        net: best.1,
        history,
        best_epoch: best.2,
    })
}

/// Class probabilities for one sample, dropout disabled.
pub fn classify_gesture(net: &GestureNet, sample: &GestureSample) -> Result<Vec<f64>> {
    net.network.predict(&sample.to_tensor())
}

/// Index of the largest probability; ties resolve to the lowest index.
pub fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > probs[best] {
            best = i;
        }
    }
    best
}

fn confusion_for(net: &GestureNet, samples: &[GestureSample]) -> Result<ConfusionMatrix> {
    let mut m = ConfusionMatrix::new(net.spec.classes);
    for s in samples {
        if s.label >= net.spec.classes {
            return Err(Error::Data(format!("label {} outside the model's classes", s.label)));
        }
        m.record(s.label, argmax(&classify_gesture(net, s)?));
    }
    Ok(m)
}

/// Metrics over a labeled dataset; sharded across threads and merged additively.
pub fn evaluate(net: &GestureNet, dataset: &GestureDataset) -> Result<MetricsReport> {
    if dataset.is_empty() {
        return Err(Error::Data("evaluation dataset is empty".into()));
    }
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(8);
    let chunk = dataset.len().div_ceil(workers);
    let shards: Vec<Result<ConfusionMatrix>> = std::thread::scope(|scope| {
        let handles: Vec<_> = dataset
            .samples
            .chunks(chunk)
            .map(|part| scope.spawn(move || confusion_for(net, part)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("evaluation worker panicked"))
            .collect()
    });
    let mut confusion = ConfusionMatrix::new(net.spec.classes);
    for shard in shards {
        confusion.merge(&shard?);
    }
    let labels = if dataset.num_classes() == net.spec.classes {
        dataset.class_names.clone()
    } else {
        crate::dataset::numbered_classes(net.spec.classes)
    };
    metrics_with_labels(&confusion, &labels)
}
