//! ComplEx knowledge-graph embeddings: scoring, training and link-prediction ranking.

mod model;
mod rank;
mod train;

use thiserror::Error;

use crate::kg::Triplet;

pub use model::ComplExModel;
pub use rank::{evaluate, rank_head, rank_tail, RankingReport};
pub use train::{
    loss_and_gradient, negative_sample, score_margin, train, train_seeded, Corrupted,
    SparseGradient, TrainConfig, Training,
};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("triplet {0} outside the model's vocabulary")]
    IdOutOfRange(Triplet),
    #[error("checkpoint line {line}: {msg}")]
    Checkpoint { line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("training diverged at step {step}")]
    Diverged { step: usize },
    #[error("no corrupted triplet of {0} lies outside the graph")]
    NoNegative(Triplet),
    #[error("invalid training config: {0}")]
    Config(String),
}
