use super::{ComplExModel, EmbedError};
use crate::kg::{EntityId, KnowledgeGraph, Triplet};

/// Filtered rank of the true tail among all entities: other candidates whose
/// triplet is in `known` are skipped, and ties count against the true tail.
pub fn rank_tail(
    model: &ComplExModel,
    t: &Triplet,
    known: &KnowledgeGraph,
) -> Result<usize, EmbedError> {
    let target = model.score(t)?;
    let mut rank = 1;
    for e in 0..model.num_entities() as u32 {
        let cand = Triplet {
            tail: EntityId(e),
            ..*t
        };
        if cand.tail == t.tail || known.contains(&cand) {
            continue;
        }
        if model.score(&cand)? >= target {
            rank += 1;
        }
    }
    Ok(rank)
}

/// Head-side counterpart of [`rank_tail`].
pub fn rank_head(
    model: &ComplExModel,
    t: &Triplet,
    known: &KnowledgeGraph,
) -> Result<usize, EmbedError> {
    let target = model.score(t)?;
    let mut rank = 1;
    for e in 0..model.num_entities() as u32 {
        let cand = Triplet {
            head: EntityId(e),
            ..*t
        };
        if cand.head == t.head || known.contains(&cand) {
            continue;
        }
        if model.score(&cand)? >= target {
            rank += 1;
        }
    }
    Ok(rank)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RankingReport {
    pub queries: usize,
    pub mrr: f64,
    pub hits_at_1: f64,
    pub hits_at_3: f64,
    pub hits_at_10: f64,
}

/// MRR and Hits@k over head and tail queries for every triplet in `test`,
/// filtering against `known`.
pub fn evaluate(
    model: &ComplExModel,
    test: &[Triplet],
    known: &KnowledgeGraph,
) -> Result<RankingReport, EmbedError> {
    let mut ranks = Vec::with_capacity(2 * test.len());
    for t in test {
        ranks.push(rank_head(model, t, known)?);
        ranks.push(rank_tail(model, t, known)?);
    }
    if ranks.is_empty() {
        return Ok(RankingReport::default());
    }
    let n = ranks.len() as f64;
    let hits = |k: usize| ranks.iter().filter(|&&r| r <= k).count() as f64 / n;
    Ok(RankingReport {
        queries: ranks.len(),
        mrr: ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n,
        hits_at_1: hits(1),
        hits_at_3: hits(3),
        hits_at_10: hits(10),
    })
}
