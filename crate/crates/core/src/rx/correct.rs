use super::RxError;
use crate::bits::BitVec;
use crate::codebook::{Codebook, Role};
use crate::embed::ComplExModel;
use crate::kg::{EntityId, KnowledgeGraph, RelationId, Triplet};

/// Cosine similarity of two bit vectors under the `0 -> +1, 1 -> -1` map,
/// which equals `1 - 2 d_H(a, b) / n`.
pub fn sim(a: &BitVec, b: &BitVec) -> Result<f64, RxError> {
    if a.len() != b.len() || a.is_empty() {
        return Err(RxError::Length(a.len(), b.len()));
    }
    Ok(1.0 - 2.0 * a.hamming(b) as f64 / a.len() as f64)
}

fn role_members(role: Role, kg: &KnowledgeGraph) -> Vec<u32> {
    match role {
        Role::Head => kg.heads().iter().map(|e| e.0).collect(),
        Role::Tail => kg.tails().iter().map(|e| e.0).collect(),
        Role::Relation => (0..kg.num_relations() as u32).collect(),
    }
}

/// The three role members whose codewords are most similar to `field`, best
/// first, ties to the lower id. Short role sets repeat their best member.
pub fn top3(
    field: &BitVec,
    role: Role,
    cb: &Codebook,
    kg: &KnowledgeGraph,
) -> Result<[u32; 3], RxError> {
    let width = cb.width(role);
    if field.len() != width {
        return Err(RxError::Length(field.len(), width));
    }
    let mut scored: Vec<(usize, u32)> = role_members(role, kg)
        .into_iter()
        .map(|id| {
            let mut code = BitVec::with_capacity(width);
            code.push_uint(id.into(), width);
            (code.hamming(field), id)
        })
        .collect();
    scored.sort_unstable();
    let best = scored.first().map_or(0, |s| s.1);
    let pick = |i: usize| scored.get(i).map_or(best, |s| s.1);
    Ok([pick(0), pick(1), pick(2)])
}

/// Top-3 candidates for each field of a received symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CandidateSet {
    pub hs: [u32; 3],
    pub rs: [u32; 3],
    pub ts: [u32; 3],
}

impl CandidateSet {
    pub fn build(bits: &BitVec, cb: &Codebook, kg: &KnowledgeGraph) -> Result<Self, RxError> {
        let field = |role| {
            let f = bits.slice(cb.offset(role), cb.width(role));
            top3(&f, role, cb, kg)
        };
        Ok(Self {
            hs: field(Role::Head)?,
            rs: field(Role::Relation)?,
            ts: field(Role::Tail)?,
        })
    }

    /// The 27 candidate triplets, head-major then relation then tail.
    pub fn triplets(&self) -> impl Iterator<Item = Triplet> + '_ {
        self.hs.iter().flat_map(move |&h| {
            self.rs.iter().flat_map(move |&r| {
                self.ts.iter().map(move |&t| Triplet {
                    head: EntityId(h),
                    relation: RelationId(r),
                    tail: EntityId(t),
                })
            })
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorrectionPath {
    /// The received symbol was already a known triplet.
    Accepted,
    /// The best-scoring of the 27 candidates.
    Inferred,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Corrected {
    pub triplet: Triplet,
    pub path: CorrectionPath,
}

/// Repairs a received symbol with the embedding model. A symbol that decodes
/// to a known triplet is returned as is; anything else is replaced by the
/// highest-scoring candidate, ties to the first in enumeration order.
pub fn correct(
    bits: &BitVec,
    cb: &Codebook,
    kg: &KnowledgeGraph,
    model: &ComplExModel,
) -> Result<Corrected, RxError> {
    if let Some(t) = cb.decode(bits)?.triplet() {
        if kg.contains(&t) {
            return Ok(Corrected {
                triplet: t,
                path: CorrectionPath::Accepted,
            });
        }
    }
    let cands = CandidateSet::build(bits, cb, kg)?;
    let mut best: Option<(f64, Triplet)> = None;
    for t in cands.triplets() {
        let s = model.score(&t)?;
        if best.is_none_or(|(b, _)| s > b) {
            best = Some((s, t));
        }
    }
    let (_, triplet) = best.expect("27 candidates");
    Ok(Corrected {
        triplet,
        path: CorrectionPath::Inferred,
    })
}
