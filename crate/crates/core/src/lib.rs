//! Path planning with a generative adversarial network on an indoor occupancy
//! grid.
//!
//! A generator learns to produce binary path frames from crowd-style
//! trajectories; a classifier recognises which (source, destination) class a
//! frame belongs to; the planner rejection-samples the generator until the
//! classifier confirms the requested class. A k-NN RSSI fingerprint
//! localizer provides the user's position.
//!
//! The neural pieces are generic over the scalar type ([`Real`]: `f32` or
//! `f64`). The aliases below fix the 64-bit reference precision.

pub mod classifier;
pub mod gan;
pub mod gridworld;
pub mod localization;
pub mod neuralcore;
pub mod planner;
mod scalar;

pub use scalar::Real;

pub type MlpNetwork = neuralcore::MlpNetwork<f64>;
pub type AdamState = neuralcore::AdamState<f64>;
pub type Checkpoint = neuralcore::Checkpoint<f64>;
pub type GanModel = gan::GanModel<f64>;
pub type GanTrainer = gan::GanTrainer<f64>;
pub type PathClassifier = classifier::PathClassifier<f64>;

pub type MlpNetwork32 = neuralcore::MlpNetwork<f32>;
pub type GanModel32 = gan::GanModel<f32>;
pub type PathClassifier32 = classifier::PathClassifier<f32>;
