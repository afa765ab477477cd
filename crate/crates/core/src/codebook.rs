//! Fixed-width semantic symbol coding.
//!
//! A symbol is laid out as `head | relation | tail`, each field big-endian with
//! the codebook's fixed width.

use thiserror::Error;

use crate::bits::{width_for, BitVec};
use crate::kg::{EntityId, KnowledgeGraph, RelationId, Triplet, Vocab};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("{kind} id {id} does not fit the codebook ({size} labels)")]
    IdOutOfRange {
        kind: &'static str,
        id: u32,
        size: usize,
    },
    #[error("symbol must be {expected} bits, got {got}")]
    Length { expected: usize, got: usize },
    #[error("{kind} width {width} cannot address {size} labels")]
    WidthTooSmall {
        kind: &'static str,
        width: usize,
        size: usize,
    },
    #[error("field width {0} exceeds 32 bits")]
    WidthTooLarge(usize),
}

/// Which field of a symbol a bit slice belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Head,
    Relation,
    Tail,
}

/// Bijective label/integer tables plus fixed field widths.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Codebook {
    entity_width: usize,
    relation_width: usize,
    entities: Vocab,
    relations: Vocab,
}

impl Codebook {
    /// Minimal widths for the graph's vocabularies.
    pub fn build(kg: &KnowledgeGraph) -> Self {
        Self {
            entity_width: width_for(kg.num_entities()),
            relation_width: width_for(kg.num_relations()),
            entities: kg.entities().clone(),
            relations: kg.relations().clone(),
        }
    }

    /// Explicit widths, e.g. to account for a larger deployment vocabulary.
    pub fn with_widths(
        kg: &KnowledgeGraph,
        entity_width: usize,
        relation_width: usize,
    ) -> Result<Self, CodecError> {
        for (kind, width, size) in [
            ("entity", entity_width, kg.num_entities()),
            ("relation", relation_width, kg.num_relations()),
        ] {
            if width > 32 {
                return Err(CodecError::WidthTooLarge(width));
            }
            if width < width_for(size) {
                return Err(CodecError::WidthTooSmall { kind, width, size });
            }
        }
        Ok(Self {
            entity_width,
            relation_width,
            ..Self::build(kg)
        })
    }

    pub fn entity_width(&self) -> usize {
        self.entity_width
    }

    pub fn relation_width(&self) -> usize {
        self.relation_width
    }

    pub fn symbol_len(&self) -> usize {
        2 * self.entity_width + self.relation_width
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn width(&self, role: Role) -> usize {
        match role {
            Role::Head | Role::Tail => self.entity_width,
            Role::Relation => self.relation_width,
        }
    }

    /// Bit offset of a field inside a symbol.
    pub fn offset(&self, role: Role) -> usize {
        match role {
            Role::Head => 0,
            Role::Relation => self.entity_width,
            Role::Tail => self.entity_width + self.relation_width,
        }
    }

    pub fn entity_id(&self, label: &str) -> Option<EntityId> {
        self.entities.get(label).map(EntityId)
    }

    pub fn relation_id(&self, label: &str) -> Option<RelationId> {
        self.relations.get(label).map(RelationId)
    }

    pub fn entity_label(&self, id: EntityId) -> Option<&str> {
        self.entities.label(id.0)
    }

    pub fn relation_label(&self, id: RelationId) -> Option<&str> {
        self.relations.label(id.0)
    }

    pub fn encode(&self, t: &Triplet) -> Result<BitVec, CodecError> {
        self.check_entity(t.head.0)?;
        self.check_relation(t.relation.0)?;
        self.check_entity(t.tail.0)?;
        let mut bits = BitVec::with_capacity(self.symbol_len());
        bits.push_uint(t.head.0.into(), self.entity_width);
        bits.push_uint(t.relation.0.into(), self.relation_width);
        bits.push_uint(t.tail.0.into(), self.entity_width);
        Ok(bits)
    }

    /// Encodes a sequence of symbols back to back.
    pub fn encode_all<'a>(
        &self,
        triplets: impl IntoIterator<Item = &'a Triplet>,
    ) -> Result<BitVec, CodecError> {
        let mut out = BitVec::new();
        for t in triplets {
            out.extend_from(&self.encode(t)?);
        }
        Ok(out)
    }

    /// Field-wise decode. Ids beyond the vocabulary are flagged, not clamped.
    pub fn decode(&self, bits: &BitVec) -> Result<DecodedSymbol, CodecError> {
        if bits.len() != self.symbol_len() {
            return Err(CodecError::Length {
                expected: self.symbol_len(),
                got: bits.len(),
            });
        }
        let field = |role| bits.read_uint(self.offset(role), self.width(role)) as u32;
        Ok(DecodedSymbol {
            head: field(Role::Head),
            relation: field(Role::Relation),
            tail: field(Role::Tail),
            num_entities: self.entities.len(),
            num_relations: self.relations.len(),
        })
    }

    /// Splits a concatenation of symbols and decodes each.
    pub fn decode_all(&self, bits: &BitVec) -> Result<Vec<DecodedSymbol>, CodecError> {
        let n = self.symbol_len();
        if !bits.len().is_multiple_of(n) {
            return Err(CodecError::Length {
                expected: (bits.len() / n + 1) * n,
                got: bits.len(),
            });
        }
        (0..bits.len() / n)
            .map(|i| self.decode(&bits.slice(i * n, n)))
            .collect()
    }

    fn check_entity(&self, id: u32) -> Result<(), CodecError> {
        if (id as usize) < self.entities.len() {
            Ok(())
        } else {
            Err(CodecError::IdOutOfRange {
                kind: "entity",
                id,
                size: self.entities.len(),
            })
        }
    }

    fn check_relation(&self, id: u32) -> Result<(), CodecError> {
        if (id as usize) < self.relations.len() {
            Ok(())
        } else {
            Err(CodecError::IdOutOfRange {
                kind: "relation",
                id,
                size: self.relations.len(),
            })
        }
    }
}

/// Raw field values of a received symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecodedSymbol {
    pub head: u32,
    pub relation: u32,
    pub tail: u32,
    num_entities: usize,
    num_relations: usize,
}

impl DecodedSymbol {
    pub fn head_valid(&self) -> bool {
        (self.head as usize) < self.num_entities
    }

    pub fn relation_valid(&self) -> bool {
        (self.relation as usize) < self.num_relations
    }

    pub fn tail_valid(&self) -> bool {
        (self.tail as usize) < self.num_entities
    }

    pub fn is_valid(&self) -> bool {
        self.head_valid() && self.relation_valid() && self.tail_valid()
    }

    /// The triplet, if every field addresses a vocabulary member.
    pub fn triplet(&self) -> Option<Triplet> {
        self.is_valid()
            .then(|| Triplet::new(self.head, self.relation, self.tail))
    }
}
