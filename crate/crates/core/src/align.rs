//! Text-to-triplet alignment.
//!
//! A sentence aligns to every knowledge graph triplet whose head and tail (or
//! one of their synonyms) both occur in it. Relations are never matched.
//! Occurrence means a case-insensitive, whole-token, contiguous phrase match
//! after punctuation is stripped, so `art` does not match inside `party`.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::kg::{tsv_records, KnowledgeGraph, Triplet};

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("word is empty after normalization")]
    EmptyWord,
    #[error("synonym table line {line}: expected `word<TAB>syn1|syn2|...`")]
    Parse { line: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Lower-cased alphanumeric tokens. Whitespace and `_` separate tokens; any
/// other non-alphanumeric character is dropped.
pub fn normalize_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| c.is_whitespace() || c == '_')
        .map(|tok| {
            tok.chars()
                .filter(|c| c.is_alphanumeric())
                .flat_map(char::to_lowercase)
                .collect::<String>()
        })
        .filter(|tok| !tok.is_empty())
        .collect()
}

fn normalize_key(text: &str) -> String {
    normalize_tokens(text).join(" ")
}

/// Splits text into sentences ending at `.`, `!` or `?` followed by
/// whitespace or the end of input. Trailing unterminated text counts as a
/// sentence. Returned sentences are trimmed.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            let at_boundary = chars.peek().is_none_or(|(_, next)| next.is_whitespace());
            if at_boundary {
                let end = i + c.len_utf8();
                let s = text[start..end].trim();
                if !s.is_empty() {
                    out.push(s);
                }
                start = end;
            }
        }
    }
    let rest = text[start..].trim();
    if !rest.is_empty() {
        out.push(rest);
    }
    out
}

/// Word/phrase to synonym-set lookup, keyed case-insensitively.
#[derive(Clone, Debug, Default)]
pub struct SynonymTable {
    sets: HashMap<String, BTreeSet<String>>,
}

impl SynonymTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers `word` and `synonyms` as one synonym group. Every member can
    /// be looked up and sees all others. Groups sharing a member merge for it.
    pub fn add_group<S: AsRef<str>>(&mut self, word: &str, synonyms: &[S]) {
        let members: Vec<&str> = std::iter::once(word)
            .chain(synonyms.iter().map(AsRef::as_ref))
            .map(str::trim)
            .filter(|s| !normalize_key(s).is_empty())
            .collect();
        for m in &members {
            let key = normalize_key(m);
            let set = self.sets.entry(key).or_default();
            for other in &members {
                if other != m {
                    set.insert((*other).to_owned());
                }
            }
        }
    }

    /// Parses `word<TAB>syn1|syn2|...` lines.
    pub fn from_tsv(src: &str) -> Result<Self, AlignError> {
        let mut table = Self::new();
        for (line, fields) in tsv_records(src) {
            let [word, syns] = fields[..] else {
                return Err(AlignError::Parse { line });
            };
            let syns: Vec<&str> = syns.split('|').filter(|s| !s.trim().is_empty()).collect();
            if normalize_key(word).is_empty() {
                return Err(AlignError::Parse { line });
            }
            table.add_group(word, &syns);
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AlignError> {
        let path = path.as_ref();
        let src = fs::read_to_string(path).map_err(|source| AlignError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_tsv(&src)
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// The synonym set of `word`, always including `word` itself.
    pub fn synonyms(&self, word: &str) -> Result<BTreeSet<String>, AlignError> {
        let key = normalize_key(word);
        if key.is_empty() {
            return Err(AlignError::EmptyWord);
        }
        let mut set = self.sets.get(&key).cloned().unwrap_or_default();
        set.insert(word.to_owned());
        Ok(set)
    }
}

/// A sentence and the triplets aligned to it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlignedMessage {
    pub sentence: String,
    pub triplets: Vec<Triplet>,
}

/// Human-readable form of a label (`Alba_Iulia` becomes `Alba Iulia`).
pub fn display_label(label: &str) -> String {
    label.replace('_', " ")
}

/// Precomputed phrase index over a graph's entities and their synonyms.
pub struct Aligner<'a> {
    kg: &'a KnowledgeGraph,
    // first token -> (phrase tokens, entity index)
    phrases: HashMap<String, Vec<(Vec<String>, usize)>>,
}

impl<'a> Aligner<'a> {
    pub fn new(kg: &'a KnowledgeGraph, table: &SynonymTable) -> Self {
        let mut phrases: HashMap<String, Vec<(Vec<String>, usize)>> = HashMap::new();
        for (idx, label) in kg.entities().labels().iter().enumerate() {
            let label = display_label(label);
            let Ok(words) = table.synonyms(&label) else {
                continue;
            };
            let mut seen = HashSet::new();
            for w in words {
                let toks = normalize_tokens(&w);
                if toks.is_empty() || !seen.insert(toks.clone()) {
                    continue;
                }
                phrases
                    .entry(toks[0].clone())
                    .or_default()
                    .push((toks, idx));
            }
        }
        Self { kg, phrases }
    }

    pub fn kg(&self) -> &KnowledgeGraph {
        self.kg
    }

    fn matched_entities(&self, tokens: &[String]) -> Vec<bool> {
        let mut hit = vec![false; self.kg.num_entities()];
        for i in 0..tokens.len() {
            if let Some(cands) = self.phrases.get(&tokens[i]) {
                for (phrase, entity) in cands {
                    if tokens[i..].starts_with(phrase) {
                        hit[*entity] = true;
                    }
                }
            }
        }
        hit
    }

    /// Triplets aligned to one sentence, in graph order.
    pub fn align_sentence(&self, sentence: &str) -> Vec<Triplet> {
        let hit = self.matched_entities(&normalize_tokens(sentence));
        let mut idx: Vec<usize> = hit
            .iter()
            .enumerate()
            .filter(|(_, &h)| h)
            .flat_map(|(e, _)| {
                self.kg
                    .triplet_indices_with_head(crate::kg::EntityId(e as u32))
                    .iter()
                    .copied()
            })
            .filter(|&i| hit[self.kg.triplets()[i].tail.index()])
            .collect();
        idx.sort_unstable();
        idx.into_iter().map(|i| self.kg.triplets()[i]).collect()
    }

    /// Per-sentence alignment of a text.
    pub fn align(&self, text: &str) -> Vec<AlignedMessage> {
        split_sentences(text)
            .into_iter()
            .map(|s| AlignedMessage {
                sentence: s.to_owned(),
                triplets: self.align_sentence(s),
            })
            .collect()
    }

    /// All triplets of a message, first occurrence kept when sentences repeat one.
    pub fn align_message(&self, text: &str) -> Vec<Triplet> {
        let mut seen = HashSet::new();
        self.align(text)
            .into_iter()
            .flat_map(|m| m.triplets)
            .filter(|t| seen.insert(*t))
            .collect()
    }
}

/// One-shot alignment; build an [`Aligner`] when aligning many texts.
pub fn align(text: &str, kg: &KnowledgeGraph, table: &SynonymTable) -> Vec<AlignedMessage> {
    Aligner::new(kg, table).align(text)
}
