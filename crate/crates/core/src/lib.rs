//! Knowledge-graph driven semantic communication.
//!
//! Text is aligned to knowledge graph triplets, the triplets are coded and
//! sent over a noisy channel, and the receiver repairs corrupted symbols with a
//! ComplEx embedding model before turning them back into text.

pub mod align;
pub mod bits;
pub mod codebook;
pub mod embed;
pub mod harness;
pub mod kg;
pub mod metrics;
pub mod phy;
pub mod rx;
pub mod service;
pub mod source;

pub use align::{AlignedMessage, Aligner, SynonymTable};
pub use bits::BitVec;
pub use codebook::{Codebook, DecodedSymbol, Role};
pub use kg::{EntityId, KnowledgeGraph, RelationId, Triplet};
