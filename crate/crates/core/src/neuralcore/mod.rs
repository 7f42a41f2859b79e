//! Dense feed-forward networks with hand-written backpropagation, crossentropy
//! losses, Adam, a finite-difference gradient checker and a checkpoint format.

mod activation;
mod adam;
mod checkpoint;
mod gradcheck;
mod loss;
mod network;

use thiserror::Error;

pub use activation::{Activation, LEAKY_SLOPE};
pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, CheckpointError};
pub use gradcheck::{compare_gradients, gradient_check, sample_param_indices};
pub use loss::{LossKind, LossSpec};
pub use network::{Backprop, DenseLayer, ForwardPass, Gradients, LayerGradient, MlpNetwork};

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("shape mismatch in {context}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("non-finite value in network input")]
    NonFiniteInput,
    #[error("non-finite gradient; parameters left unchanged")]
    NonFiniteGradient,
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("invalid loss clamp {0}; must lie in (0, 0.5)")]
    InvalidClip(f64),
}

pub(crate) fn check_shape(
    context: &'static str,
    expected: (usize, usize),
    found: (usize, usize),
) -> Result<(), NetError> {
    if expected == found {
        Ok(())
    } else {
        Err(NetError::ShapeMismatch {
            context,
            expected,
            found,
        })
    }
}
