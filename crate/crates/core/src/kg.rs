//! Knowledge graph storage, TSV loading and role indexes.
//!
//! Entity and relation ids are dense indexes into vocabularies built in
//! first-appearance order, so loading the same file always yields the same ids.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KgError {
    #[error("line {line}: expected 3 tab-separated fields, found {found}")]
    Parse { line: usize, found: usize },
    #[error("knowledge graph is empty")]
    Empty,
    #[error("line {line}: unknown {kind} label {label:?}")]
    UnknownLabel {
        line: usize,
        kind: &'static str,
        label: String,
    },
    #[error("triplet references an id outside the vocabulary: {0}")]
    InvalidTriplet(Triplet),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationId(pub u32);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A semantic symbol: (head, relation, tail).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triplet {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triplet {
    pub fn new(head: u32, relation: u32, tail: u32) -> Self {
        Self {
            head: EntityId(head),
            relation: RelationId(relation),
            tail: EntityId(tail),
        }
    }
}

impl fmt::Display for Triplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.head.0, self.relation.0, self.tail.0)
    }
}

/// Ordered label vocabulary with reverse lookup.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocab {
    labels: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<u32> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: u32) -> Option<&str> {
        self.labels.get(id as usize).map(String::as_str)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    fn intern(&mut self, label: &str) -> u32 {
        if let Some(&id) = self.index.get(label) {
            return id;
        }
        let id = self.labels.len() as u32;
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), id);
        id
    }
}

impl<S: AsRef<str>> FromIterator<S> for Vocab {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut v = Vocab::default();
        for s in iter {
            v.intern(s.as_ref());
        }
        v
    }
}

/// Entities, relations and a deduplicated triplet set with role indexes.
///
/// Immutable once built.
#[derive(Clone, Debug)]
pub struct KnowledgeGraph {
    entities: Vocab,
    relations: Vocab,
    triplets: Vec<Triplet>,
    members: HashSet<Triplet>,
    heads: Vec<EntityId>,
    tails: Vec<EntityId>,
    by_head: Vec<Vec<usize>>,
    tails_of: HashMap<(EntityId, RelationId), Vec<EntityId>>,
    heads_of: HashMap<(RelationId, EntityId), Vec<EntityId>>,
}

impl PartialEq for KnowledgeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.entities == other.entities
            && self.relations == other.relations
            && self.triplets == other.triplets
    }
}

impl KnowledgeGraph {
    /// Builds a graph over fixed vocabularies. Duplicates are collapsed, order kept.
    pub fn from_parts(
        entities: Vocab,
        relations: Vocab,
        triplets: impl IntoIterator<Item = Triplet>,
    ) -> Result<Self, KgError> {
        let mut kg = KnowledgeGraph {
            by_head: vec![Vec::new(); entities.len()],
            entities,
            relations,
            triplets: Vec::new(),
            members: HashSet::new(),
            heads: Vec::new(),
            tails: Vec::new(),
            tails_of: HashMap::new(),
            heads_of: HashMap::new(),
        };
        for t in triplets {
            kg.insert(t)?;
        }
        if kg.triplets.is_empty() {
            return Err(KgError::Empty);
        }
        kg.finish_roles();
        Ok(kg)
    }

    fn insert(&mut self, t: Triplet) -> Result<(), KgError> {
        if t.head.index() >= self.entities.len()
            || t.tail.index() >= self.entities.len()
            || t.relation.index() >= self.relations.len()
        {
            return Err(KgError::InvalidTriplet(t));
        }
        if !self.members.insert(t) {
            return Ok(());
        }
        self.by_head[t.head.index()].push(self.triplets.len());
        self.triplets.push(t);
        self.tails_of
            .entry((t.head, t.relation))
            .or_default()
            .push(t.tail);
        self.heads_of
            .entry((t.relation, t.tail))
            .or_default()
            .push(t.head);
        Ok(())
    }

    fn finish_roles(&mut self) {
        let mut is_head = vec![false; self.entities.len()];
        let mut is_tail = vec![false; self.entities.len()];
        for t in &self.triplets {
            is_head[t.head.index()] = true;
            is_tail[t.tail.index()] = true;
        }
        let collect = |mask: &[bool]| {
            mask.iter()
                .enumerate()
                .filter(|(_, &m)| m)
                .map(|(i, _)| EntityId(i as u32))
                .collect()
        };
        self.heads = collect(&is_head);
        self.tails = collect(&is_tail);
    }

    /// Parses `head<TAB>relation<TAB>tail` lines. Blank and `#` lines are skipped.
    pub fn from_tsv(src: &str) -> Result<Self, KgError> {
        let mut entities = Vocab::default();
        let mut relations = Vocab::default();
        let mut triplets = Vec::new();
        for (line_no, fields) in tsv_records(src) {
            let [h, r, t] = three_fields(line_no, &fields)?;
            let head = EntityId(entities.intern(h));
            let relation = RelationId(relations.intern(r));
            let tail = EntityId(entities.intern(t));
            triplets.push(Triplet {
                head,
                relation,
                tail,
            });
        }
        Self::from_parts(entities, relations, triplets)
    }

    /// Parses a TSV whose labels must already exist in `base`; ids are shared with it.
    pub fn from_tsv_within(src: &str, base: &KnowledgeGraph) -> Result<Self, KgError> {
        let mut triplets = Vec::new();
        for (line_no, fields) in tsv_records(src) {
            let [h, r, t] = three_fields(line_no, &fields)?;
            let lookup = |vocab: &Vocab, kind: &'static str, label: &str| {
                vocab.get(label).ok_or_else(|| KgError::UnknownLabel {
                    line: line_no,
                    kind,
                    label: label.to_owned(),
                })
            };
            triplets.push(Triplet {
                head: EntityId(lookup(&base.entities, "entity", h)?),
                relation: RelationId(lookup(&base.relations, "relation", r)?),
                tail: EntityId(lookup(&base.entities, "entity", t)?),
            });
        }
        Self::from_parts(base.entities.clone(), base.relations.clone(), triplets)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, KgError> {
        Self::from_tsv(&read_file(path.as_ref())?)
    }

    pub fn load_within(path: impl AsRef<Path>, base: &KnowledgeGraph) -> Result<Self, KgError> {
        Self::from_tsv_within(&read_file(path.as_ref())?, base)
    }

    /// Serializes triplets in insertion order; reloading reproduces the graph.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for t in &self.triplets {
            let (h, r, tl) = self.labels(t);
            out.push_str(h);
            out.push('\t');
            out.push_str(r);
            out.push('\t');
            out.push_str(tl);
            out.push('\n');
        }
        out
    }

    /// A graph over the same vocabularies holding only `triplets`.
    pub fn subgraph(&self, triplets: impl IntoIterator<Item = Triplet>) -> Result<Self, KgError> {
        Self::from_parts(self.entities.clone(), self.relations.clone(), triplets)
    }

    /// Randomly holds out `n` triplets, keeping every entity and relation
    /// present in the remaining part whenever the graph allows it.
    pub fn split_holdout<R: Rng + ?Sized>(
        &self,
        n: usize,
        rng: &mut R,
    ) -> Result<(KnowledgeGraph, KnowledgeGraph), KgError> {
        let mut order: Vec<usize> = (0..self.triplets.len()).collect();
        order.shuffle(rng);
        let mut ent_deg = vec![0usize; self.entities.len()];
        let mut rel_deg = vec![0usize; self.relations.len()];
        for t in &self.triplets {
            ent_deg[t.head.index()] += 1;
            ent_deg[t.tail.index()] += 1;
            rel_deg[t.relation.index()] += 1;
        }
        let mut held = vec![false; self.triplets.len()];
        let mut taken = 0;
        for i in order {
            if taken == n {
                break;
            }
            let t = self.triplets[i];
            let head_ok = ent_deg[t.head.index()] > if t.head == t.tail { 2 } else { 1 };
            if head_ok && ent_deg[t.tail.index()] > 1 && rel_deg[t.relation.index()] > 1 {
                ent_deg[t.head.index()] -= 1;
                ent_deg[t.tail.index()] -= 1;
                rel_deg[t.relation.index()] -= 1;
                held[i] = true;
                taken += 1;
            }
        }
        let pick = |want: bool| {
            self.triplets
                .iter()
                .zip(&held)
                .filter(move |(_, &h)| h == want)
                .map(|(t, _)| *t)
        };
        Ok((self.subgraph(pick(false))?, self.subgraph(pick(true))?))
    }

    pub fn entities(&self) -> &Vocab {
        &self.entities
    }

    pub fn relations(&self) -> &Vocab {
        &self.relations
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    pub fn triplets(&self) -> &[Triplet] {
        &self.triplets
    }

    pub fn contains(&self, t: &Triplet) -> bool {
        self.members.contains(t)
    }

    /// Entities appearing as a head, ascending.
    pub fn heads(&self) -> &[EntityId] {
        &self.heads
    }

    /// Entities appearing as a tail, ascending.
    pub fn tails(&self) -> &[EntityId] {
        &self.tails
    }

    /// Indexes into [`triplets`](Self::triplets) of triplets with this head, ascending.
    pub fn triplet_indices_with_head(&self, head: EntityId) -> &[usize] {
        self.by_head
            .get(head.index())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn known_tails(&self, head: EntityId, relation: RelationId) -> &[EntityId] {
        self.tails_of
            .get(&(head, relation))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn known_heads(&self, relation: RelationId, tail: EntityId) -> &[EntityId] {
        self.heads_of
            .get(&(relation, tail))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn entity_label(&self, id: EntityId) -> Option<&str> {
        self.entities.label(id.0)
    }

    pub fn relation_label(&self, id: RelationId) -> Option<&str> {
        self.relations.label(id.0)
    }

    /// Labels of a triplet known to be valid for this graph's vocabularies.
    pub fn labels(&self, t: &Triplet) -> (&str, &str, &str) {
        (
            &self.entities.labels[t.head.index()],
            &self.relations.labels[t.relation.index()],
            &self.entities.labels[t.tail.index()],
        )
    }

    pub fn is_valid(&self, t: &Triplet) -> bool {
        t.head.index() < self.entities.len()
            && t.tail.index() < self.entities.len()
            && t.relation.index() < self.relations.len()
    }
}

fn read_file(path: &Path) -> Result<String, KgError> {
    fs::read_to_string(path).map_err(|source| KgError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Non-blank, non-comment lines split on tabs, with 1-based line numbers.
pub(crate) fn tsv_records(src: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    src.lines().enumerate().filter_map(|(i, line)| {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            None
        } else {
            Some((i + 1, line.split('\t').collect()))
        }
    })
}

fn three_fields<'a>(line: usize, fields: &[&'a str]) -> Result<[&'a str; 3], KgError> {
    match fields {
        [h, r, t] => Ok([h.trim(), r.trim(), t.trim()]),
        _ => Err(KgError::Parse {
            line,
            found: fields.len(),
        }),
    }
}
