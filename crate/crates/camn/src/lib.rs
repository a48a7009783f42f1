//! Cascaded Motion Network.
//!
//! Text, speaker, emotion, audio and face encoders feed each other in that
//! order; their per-frame features are concatenated with the previous body and
//! hand poses and decoded by two recurrent heads, the hand head reading the
//! body head's state. Training uses an L1 reconstruction loss weighted by the
//! semantic-relevance score plus an adversarial term from a sequence
//! discriminator.

use thiserror::Error;

mod config;
mod data;
mod loss;
mod model;
mod tcn;
mod train;

pub use config::{CamnConfig, Modality};
pub use data::{toy_corpus, Clip, Conditioning, WordTable};
pub use loss::{
    adversarial_loss, adversarial_loss_from_scores, discriminator_loss, reconstruction_loss, total_loss,
    total_loss_value,
};
pub use model::{Discriminator, Encoded, Generator, GestureOutput};
pub use tcn::{dilation_schedule, Tcn, LEAK};
pub use train::{generator_gradcheck, Camn, RunManifest, StepLosses};

#[derive(Debug, Error, PartialEq)]
pub enum CamnError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("input mismatch: {0}")]
    Input(String),
    #[error("seed pose has {got} frames, expected {needed}")]
    SeedLength { needed: usize, got: usize },
    #[error("requested {requested} frames, fewer than the {seed} seed frames")]
    TooShort { requested: usize, seed: usize },
    #[error("word table line {line}: {message}")]
    WordTable { line: usize, message: String },
    #[error("numeric failure: {0}")]
    Numeric(#[from] ndiff::NdError),
}

pub type Result<T> = std::result::Result<T, CamnError>;
