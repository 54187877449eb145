//! Face-gated dynamic gesture recognition.
//!
//! The crate trains and runs a Conv1D-LSTM classifier over 20-frame hand
//! landmark sequences, verifies the designated user against 128-d face
//! embeddings, and replays recorded sessions through an authorization-gated
//! macro dispatcher.

pub mod config;
pub mod dataset;
pub mod error;
pub mod face;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod rng;

pub use error::{Error, Result};
