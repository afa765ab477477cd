use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ExperimentConfig, HarnessError, Resources};
use crate::embed::{evaluate, train_seeded, ComplExModel, RankingReport, TrainConfig};
use crate::kg::KnowledgeGraph;
use crate::kg::Triplet;
use crate::metrics::{
    conditional_entropies, message_entropy, semantic_entropy, MessageDistribution, MetricsError,
};

/// Entropy and source-bit summary of a loaded corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusReport {
    pub messages: usize,
    /// Entropy of the empirical line distribution, bits.
    pub message_entropy: f64,
    /// Entropy after mapping each line to its triplet set, bits.
    pub semantic_entropy: f64,
    pub semantic_given_message: f64,
    pub message_given_semantic: f64,
    pub bits_semantic: u64,
    pub bits_fixed7: u64,
    pub bits_huffman: Option<u64>,
    /// Lines whose semantic encoding is shorter than their 7-bit ASCII one.
    pub semantic_shorter: usize,
}

pub fn corpus_report(res: &Resources) -> Result<CorpusReport, MetricsError> {
    let d = MessageDistribution::empirical(res.messages.iter().map(|m| m.text.clone()))?;
    let symbols = |text: &String| -> Vec<Triplet> {
        res.messages
            .iter()
            .find(|m| &m.text == text)
            .map(|m| m.triplets.clone())
            .unwrap_or_default()
    };
    let (h_s_m, h_m_s) = conditional_entropies(&d, symbols);
    let mut bits = (0u64, 0u64, Some(0u64));
    let mut shorter = 0;
    for m in &res.messages {
        let (s, f, h) = res.bits(m);
        bits.0 += s;
        bits.1 += f;
        bits.2 = bits.2.zip(h).map(|(a, b)| a + b);
        shorter += usize::from(s < f);
    }
    Ok(CorpusReport {
        messages: res.messages.len(),
        message_entropy: message_entropy(&d),
        semantic_entropy: semantic_entropy(&d, symbols),
        semantic_given_message: h_s_m,
        message_given_semantic: h_m_s,
        bits_semantic: bits.0,
        bits_fixed7: bits.1,
        bits_huffman: bits.2,
        semantic_shorter: shorter,
    })
}

/// A model trained from a config, with link-prediction scores on held-out triplets.
#[derive(Clone, Debug)]
pub struct EmbeddingRun {
    pub model: ComplExModel,
    pub config: TrainConfig,
    pub train_triplets: usize,
    /// Present when `holdout` is positive.
    pub heldout: Option<RankingReport>,
    pub final_loss: Option<f64>,
}

/// Trains on the config's graph. With `holdout = n`, n triplets are kept out
/// of training and ranked afterwards (filtered against the whole graph); the
/// returned model then covers the whole vocabulary but not those triplets.
pub fn train_embeddings(cfg: &ExperimentConfig) -> Result<EmbeddingRun, HarnessError> {
    let load = |e: &dyn std::fmt::Display| HarnessError::Load {
        what: "knowledge graph".into(),
        msg: e.to_string(),
    };
    let kg = KnowledgeGraph::load(&cfg.kg).map_err(|e| load(&e))?;
    let tc = cfg.train_config();
    let (train_kg, held) = if cfg.holdout > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
        let (a, b) = kg
            .split_holdout(cfg.holdout, &mut rng)
            .map_err(|e| load(&e))?;
        (a, Some(b))
    } else {
        (kg.clone(), None)
    };
    let training = train_seeded(&train_kg, &tc).map_err(|e| HarnessError::Load {
        what: "model".into(),
        msg: e.to_string(),
    })?;
    let heldout = held
        .map(|h| evaluate(&training.model, h.triplets(), &kg))
        .transpose()
        .map_err(|e| HarnessError::Load {
            what: "model".into(),
            msg: e.to_string(),
        })?;
    Ok(EmbeddingRun {
        final_loss: training.losses.last().copied(),
        model: training.model,
        config: tc,
        train_triplets: train_kg.len(),
        heldout,
    })
}
