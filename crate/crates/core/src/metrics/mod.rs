//! Evaluation quantities: entropies, sentence similarity, BLEU and triplet
//! error rate.

mod entropy;
mod text;

use thiserror::Error;

use crate::kg::Triplet;

pub use entropy::{
    conditional_entropies, entropy_identity_residual, message_entropy, semantic_entropy,
    MessageDistribution,
};
pub use text::{bleu, similarity, tokens, BagOfWords, SentenceEmbedder};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("invalid distribution: {0}")]
    Distribution(String),
    #[error("text is empty")]
    EmptyText,
    #[error("embedding is the zero vector")]
    ZeroEmbedding,
    #[error("embedder returned {got} vectors of mismatched size for {want} texts")]
    EmbeddingShape { want: usize, got: usize },
    #[error("sequence lengths differ: {0} vs {1}")]
    Length(usize, usize),
}

/// Fraction of positions whose triplets differ in any field.
pub fn triplet_error_rate(sent: &[Triplet], received: &[Triplet]) -> Result<f64, MetricsError> {
    if sent.len() != received.len() {
        return Err(MetricsError::Length(sent.len(), received.len()));
    }
    if sent.is_empty() {
        return Ok(0.0);
    }
    let wrong = sent.iter().zip(received).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / sent.len() as f64)
}
