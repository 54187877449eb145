#![allow(dead_code)]

pub mod dd;

use gessure_core::model::{build_gessure_net, GestureNetSpec};
use gessure_core::nn::{Network, TimeSeriesTensor};
use gessure_core::rng::{derive_seed, seeded};
use rand::Rng;

/// A seeded toy network at a generic point: biases are moved off zero so that
/// no ReLU or pooling window sits exactly on a kink, where central differences
/// average the two one-sided slopes.
pub fn toy_case(seed: u64) -> (Network, TimeSeriesTensor, usize) {
    let spec = GestureNetSpec::toy();
    let mut net = build_gessure_net(&spec, seed).unwrap().network;
    let mut rng = seeded(derive_seed(seed, 0x6772));
    for (k, t) in net.tensors_mut().into_iter().enumerate() {
        if k % 2 == 1 {
            t.iter_mut().for_each(|v| *v += rng.random_range(-0.1..0.1));
        }
    }
    let values = (0..spec.frames * spec.features)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let input = TimeSeriesTensor::new(spec.frames, spec.features, values).unwrap();
    let label = rng.random_range(0..spec.classes);
    (net, input, label)
}
