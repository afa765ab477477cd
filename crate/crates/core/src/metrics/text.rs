use std::collections::{BTreeMap, HashMap};

use super::MetricsError;

/// Lower-cased whitespace tokens with leading and trailing non-alphanumeric
/// characters removed; tokens left empty are dropped.
pub fn tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

/// Maps a batch of sentences to vectors of a common dimension.
pub trait SentenceEmbedder {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, MetricsError>;
}

/// Term-frequency vectors over the union vocabulary of the batch, L2-normalized.
#[derive(Clone, Copy, Debug, Default)]
pub struct BagOfWords;

impl SentenceEmbedder for BagOfWords {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, MetricsError> {
        let toks: Vec<Vec<String>> = texts.iter().map(|t| tokens(t)).collect();
        let mut vocab: BTreeMap<&str, usize> = BTreeMap::new();
        for t in toks.iter().flatten() {
            vocab.insert(t, 0);
        }
        for (i, v) in vocab.values_mut().enumerate() {
            *v = i;
        }
        Ok(toks
            .iter()
            .map(|ts| {
                let mut v = vec![0.0; vocab.len()];
                for t in ts {
                    v[vocab[t.as_str()]] += 1.0;
                }
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    v.iter_mut().for_each(|x| *x /= norm);
                }
                v
            })
            .collect())
    }
}

/// Cosine similarity of the two sentences' embeddings.
pub fn similarity(a: &str, b: &str, embedder: &dyn SentenceEmbedder) -> Result<f64, MetricsError> {
    if a.trim().is_empty() || b.trim().is_empty() {
        return Err(MetricsError::EmptyText);
    }
    let vs = embedder.embed(&[a, b])?;
    let [va, vb] = &vs[..] else {
        return Err(MetricsError::EmbeddingShape {
            want: 2,
            got: vs.len(),
        });
    };
    if va.len() != vb.len() {
        return Err(MetricsError::EmbeddingShape {
            want: 2,
            got: vs.len(),
        });
    }
    if va == vb && va.iter().any(|&x| x != 0.0) {
        return Ok(1.0);
    }
    let dot: f64 = va.iter().zip(vb).map(|(x, y)| x * y).sum();
    let na = va.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = vb.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(MetricsError::ZeroEmbedding);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

fn ngram_counts(toks: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for g in toks.windows(n) {
        *counts.entry(g).or_insert(0) += 1;
    }
    counts
}

/// Sentence BLEU with clipped n-gram precisions for n = 1..=min(max_n,
/// candidate length), uniform weights and the brevity penalty.
pub fn bleu(candidate: &str, reference: &str, max_n: usize) -> Result<f64, MetricsError> {
    let cand = tokens(candidate);
    let refr = tokens(reference);
    if cand.is_empty() || refr.is_empty() {
        return Err(MetricsError::EmptyText);
    }
    let top = max_n.min(cand.len()).max(1);
    let mut log_sum = 0.0;
    for n in 1..=top {
        let c = ngram_counts(&cand, n);
        let r = ngram_counts(&refr, n);
        let matched: usize = c
            .iter()
            .map(|(g, &k)| k.min(r.get(g).copied().unwrap_or(0)))
            .sum();
        if matched == 0 {
            return Ok(0.0);
        }
        log_sum += (matched as f64 / (cand.len() + 1 - n) as f64).ln();
    }
    let bp = if cand.len() >= refr.len() {
        1.0
    } else {
        (1.0 - refr.len() as f64 / cand.len() as f64).exp()
    };
    Ok(bp * (log_sum / top as f64).exp())
}
