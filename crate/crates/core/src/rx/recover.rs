use super::{sim, RxError};
use crate::codebook::Codebook;
use crate::kg::{KnowledgeGraph, Triplet};

/// The symbol picked for a user and its best similarity to the private graph.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Recovered {
    pub index: usize,
    pub triplet: Triplet,
    pub similarity: f64,
}

/// Best similarity of each symbol to any private triplet, comparing whole
/// concatenated codewords.
fn best_similarities(
    symbols: &[Triplet],
    private: &KnowledgeGraph,
    cb: &Codebook,
) -> Result<Vec<f64>, RxError> {
    if symbols.is_empty() {
        return Err(RxError::NoSymbols);
    }
    if private.is_empty() {
        return Err(RxError::EmptyPrivateKg);
    }
    let known = private
        .triplets()
        .iter()
        .map(|t| cb.encode(t))
        .collect::<Result<Vec<_>, _>>()?;
    symbols
        .iter()
        .map(|s| {
            let code = cb.encode(s)?;
            known
                .iter()
                .try_fold(f64::NEG_INFINITY, |best, k| Ok(best.max(sim(&code, k)?)))
        })
        .collect()
}

/// Picks the received symbol closest to the user's private graph. Ties go to
/// the lowest index. `private` must share the codebook's vocabularies.
pub fn recover_for_user(
    symbols: &[Triplet],
    private: &KnowledgeGraph,
    cb: &Codebook,
) -> Result<Recovered, RxError> {
    let sims = best_similarities(symbols, private, cb)?;
    let mut index = 0;
    for (i, &s) in sims.iter().enumerate() {
        if s > sims[index] {
            index = i;
        }
    }
    Ok(Recovered {
        index,
        triplet: symbols[index],
        similarity: sims[index],
    })
}

/// Every symbol whose best similarity reaches `tau`, in received order. With
/// `tau = 1` this is exactly the symbols present in the private graph.
pub fn recover_all(
    symbols: &[Triplet],
    private: &KnowledgeGraph,
    cb: &Codebook,
    tau: f64,
) -> Result<Vec<Recovered>, RxError> {
    let sims = best_similarities(symbols, private, cb)?;
    Ok(sims
        .iter()
        .enumerate()
        .filter(|(_, &s)| s >= tau)
        .map(|(index, &similarity)| Recovered {
            index,
            triplet: symbols[index],
            similarity,
        })
        .collect())
}
