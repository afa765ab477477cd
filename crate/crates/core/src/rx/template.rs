use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::RxError;
use crate::align::display_label;
use crate::kg::{tsv_records, KnowledgeGraph, Triplet};

const FALLBACK: &str = "{h} {relation} {t}.";

const DEFAULTS: &[(&str, &str)] = &[
    ("actedIn", "{h} acted in {t}."),
    ("created", "{h} created {t}."),
    ("dealsWith", "{h} deals with {t}."),
    ("diedIn", "{h} died in {t}."),
    ("directed", "{h} directed {t}."),
    ("edited", "{h} edited {t}."),
    ("graduatedFrom", "{h} graduated from {t}."),
    ("happenedIn", "{h} happened in {t}."),
    ("hasCapital", "{t} is the capital of {h}."),
    ("hasChild", "{h} has a child named {t}."),
    ("hasCurrency", "{h} uses the {t}."),
    ("hasGender", "{h} has gender {t}."),
    ("hasMusicalRole", "{h} plays the {t}."),
    ("hasNeighbor", "{h} borders {t}."),
    ("hasOfficialLanguage", "{h} has the official language {t}."),
    ("hasWonPrize", "{h} won the {t}."),
    ("influences", "{h} influenced {t}."),
    ("isAffiliatedWith", "{h} is affiliated with {t}."),
    ("isCitizenOf", "{h} is a citizen of {t}."),
    ("isConnectedTo", "{h} is connected to {t}."),
    ("isInterestedIn", "{h} is interested in {t}."),
    ("isKnownFor", "{h} is known for {t}."),
    ("isLeaderOf", "{h} is the leader of {t}."),
    ("isLocatedIn", "{h} is located in {t}."),
    ("isMarriedTo", "{h} is married to {t}."),
    ("isPoliticianOf", "{h} is a politician of {t}."),
    ("livesIn", "{h} lives in {t}."),
    ("owns", "{h} owns {t}."),
    ("participatedIn", "{h} participated in {t}."),
    ("playsFor", "{h} plays for {t}."),
    ("wasBornIn", "{h} was born in {t}."),
    ("worksAt", "{h} works at {t}."),
    ("wroteMusicFor", "{h} wrote music for {t}."),
];

fn check_pattern(pattern: &str) -> Result<(), String> {
    for slot in ["{h}", "{t}"] {
        if pattern.matches(slot).count() != 1 {
            return Err(format!(
                "pattern `{pattern}` must contain {slot} exactly once"
            ));
        }
    }
    Ok(())
}

/// Relation label to sentence pattern with `{h}` and `{t}` slots.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemplateTable {
    patterns: BTreeMap<String, String>,
}

impl Default for TemplateTable {
    /// Patterns for common YAGO relations.
    fn default() -> Self {
        Self {
            patterns: DEFAULTS
                .iter()
                .map(|(r, p)| ((*r).to_owned(), (*p).to_owned()))
                .collect(),
        }
    }
}

impl TemplateTable {
    pub fn empty() -> Self {
        Self {
            patterns: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, relation: &str, pattern: &str) -> Result<(), RxError> {
        check_pattern(pattern).map_err(|msg| RxError::Template { line: 0, msg })?;
        self.patterns
            .insert(relation.to_owned(), pattern.to_owned());
        Ok(())
    }

    /// Parses `relation<TAB>pattern` lines on top of the defaults.
    pub fn from_tsv(src: &str) -> Result<Self, RxError> {
        let mut table = Self::default();
        for (line, fields) in tsv_records(src) {
            let [rel, pattern] = fields[..] else {
                return Err(RxError::Template {
                    line,
                    msg: "expected `relation<TAB>pattern`".into(),
                });
            };
            let pattern = pattern.trim();
            check_pattern(pattern).map_err(|msg| RxError::Template { line, msg })?;
            table
                .patterns
                .insert(rel.trim().to_owned(), pattern.to_owned());
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RxError> {
        let path = path.as_ref();
        let src = fs::read_to_string(path).map_err(|source| RxError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_tsv(&src)
    }

    pub fn to_tsv(&self) -> String {
        self.patterns
            .iter()
            .map(|(r, p)| format!("{r}\t{p}\n"))
            .collect()
    }

    pub fn pattern(&self, relation: &str) -> Option<&str> {
        self.patterns.get(relation).map(String::as_str)
    }

    /// Renders labels, `_` shown as spaces.
    pub fn render(&self, head: &str, relation: &str, tail: &str) -> String {
        let (h, t) = (display_label(head), display_label(tail));
        match self.pattern(relation) {
            Some(p) => p.replacen("{h}", &h, 1).replacen("{t}", &t, 1),
            None => FALLBACK
                .replacen("{h}", &h, 1)
                .replacen("{relation}", relation, 1)
                .replacen("{t}", &t, 1),
        }
    }
}

/// Turns triplets into sentences.
pub trait Verbalizer {
    fn verbalize_batch(&self, triplets: &[Triplet], kg: &KnowledgeGraph) -> Vec<String>;
}

impl Verbalizer for TemplateTable {
    fn verbalize_batch(&self, triplets: &[Triplet], kg: &KnowledgeGraph) -> Vec<String> {
        triplets.iter().map(|t| verbalize(t, kg, self)).collect()
    }
}

/// Renders a triplet valid for `kg`.
pub fn verbalize(t: &Triplet, kg: &KnowledgeGraph, templates: &TemplateTable) -> String {
    let (h, r, tl) = kg.labels(t);
    templates.render(h, r, tl)
}

/// Space-joined sentences for a sequence of triplets.
pub fn verbalize_all(triplets: &[Triplet], kg: &KnowledgeGraph, v: &dyn Verbalizer) -> String {
    v.verbalize_batch(triplets, kg).join(" ")
}
