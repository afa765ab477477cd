use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::HarnessError;
use crate::align::{display_label, normalize_tokens, SynonymTable};
use crate::kg::KnowledgeGraph;
use crate::rx::{verbalize, TemplateTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Kind {
    Person,
    Club,
    City,
    Country,
}

struct RelationDef {
    name: String,
    pattern: String,
    head: Kind,
    tail: Kind,
}

fn catalog(n: usize) -> Vec<RelationDef> {
    use Kind::*;
    let fixed = [
        ("playsFor", "{h} plays for {t}.", Person, Club),
        ("isCitizenOf", "{h} is a citizen of {t}.", Person, Country),
        ("livesIn", "{h} lives in {t}.", Person, City),
        ("knows", "{h} knows {t}.", Person, Person),
        ("isLocatedIn", "{h} is located in {t}.", Club, City),
        ("belongsTo", "{h} belongs to {t}.", City, Country),
        (
            "isAffiliatedWith",
            "{h} is affiliated with {t}.",
            Person,
            Club,
        ),
    ];
    (0..n)
        .map(|i| match fixed.get(i) {
            Some(&(name, pattern, head, tail)) => RelationDef {
                name: name.into(),
                pattern: pattern.into(),
                head,
                tail,
            },
            None => RelationDef {
                name: format!("related{i}"),
                pattern: format!("{{h}} shares bond {i} with {{t}}."),
                head: Person,
                tail: Person,
            },
        })
        .collect()
}

/// Sizes of a synthetic graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FixtureSpec {
    pub entities: usize,
    pub relations: usize,
    pub triplets: usize,
    /// Number of disjoint private splits.
    pub users: usize,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            entities: 50,
            relations: 5,
            triplets: 200,
            users: 2,
        }
    }
}

/// A generated graph with its corpus and receiver resources.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub kg: KnowledgeGraph,
    /// One verbalized triplet per line, in graph order.
    pub corpus: Vec<String>,
    pub templates: TemplateTable,
    pub synonyms_tsv: String,
    pub private: Vec<KnowledgeGraph>,
}

/// File locations written by [`Fixture::write`].
#[derive(Clone, Debug)]
pub struct FixturePaths {
    pub kg: PathBuf,
    pub corpus: PathBuf,
    pub templates: PathBuf,
    pub synonyms: PathBuf,
    pub private: Vec<PathBuf>,
    pub config: PathBuf,
}

struct Entity {
    label: String,
    kind: Kind,
    cluster: usize,
}

fn pseudo_word<R: Rng>(rng: &mut R, syllables: usize) -> String {
    const C: &[u8] = b"bdfgklmnprstvz";
    const V: &[u8] = b"aeiou";
    let mut w = String::new();
    for _ in 0..syllables {
        w.push(*C.choose(rng).unwrap() as char);
        w.push(*V.choose(rng).unwrap() as char);
    }
    let mut c = w.chars();
    let first = c.next().unwrap().to_ascii_uppercase();
    std::iter::once(first).chain(c).collect()
}

fn entities<R: Rng>(
    spec: &FixtureSpec,
    rels: &[RelationDef],
    rng: &mut R,
) -> Result<(Vec<Entity>, usize), HarnessError> {
    let used: HashSet<Kind> = rels.iter().flat_map(|r| [r.head, r.tail]).collect();
    let n = spec.entities;
    let share = |k: Kind, frac: f64| {
        if used.contains(&k) {
            ((n as f64 * frac).round() as usize).max(1)
        } else {
            0
        }
    };
    let countries = share(Kind::Country, 0.1);
    let cities = share(Kind::City, 0.15);
    let clubs = share(Kind::Club, 0.15);
    let persons = n.saturating_sub(countries + cities + clubs);
    let person_pairs = rels
        .iter()
        .any(|r| r.head == Kind::Person && r.tail == Kind::Person);
    if persons < if person_pairs { 2 } else { 1 } {
        return Err(HarnessError::Fixture(format!(
            "{n} entities are too few for {} relations",
            rels.len()
        )));
    }
    let clusters = if countries > 0 {
        countries
    } else {
        (n / 10).max(1)
    };

    let mut taken: HashSet<String> = rels
        .iter()
        .flat_map(|r| normalize_tokens(&r.pattern))
        .collect();
    let mut fresh = |rng: &mut R| loop {
        let syl = rng.random_range(2..=3);
        let w = pseudo_word(rng, syl);
        if taken.insert(w.to_lowercase()) {
            return w;
        }
    };
    let mut out = Vec::with_capacity(n);
    for (kind, count) in [
        (Kind::Country, countries),
        (Kind::City, cities),
        (Kind::Club, clubs),
        (Kind::Person, persons),
    ] {
        for i in 0..count {
            let label = if kind == Kind::Person {
                format!("{}_{}", fresh(rng), fresh(rng))
            } else {
                fresh(rng)
            };
            out.push(Entity {
                label,
                kind,
                cluster: i % clusters,
            });
        }
    }
    Ok((out, clusters))
}

type Cand = (usize, usize, usize);

fn candidates(ents: &[Entity], rels: &[RelationDef], clusters: usize) -> Vec<Cand> {
    let mut out = Vec::new();
    for (r, def) in rels.iter().enumerate() {
        for (h, eh) in ents.iter().enumerate() {
            for (t, et) in ents.iter().enumerate() {
                if h != t
                    && eh.kind == def.head
                    && et.kind == def.tail
                    && eh.cluster % clusters == et.cluster % clusters
                {
                    out.push((h, r, t));
                }
            }
        }
    }
    out
}

fn pair(c: &Cand) -> (usize, usize) {
    (c.0.min(c.2), c.0.max(c.2))
}

fn feasible(cands: &[Cand], spec: &FixtureSpec, n_ent: usize) -> bool {
    let pairs: HashSet<_> = cands.iter().map(pair).collect();
    let mut ent = vec![false; n_ent];
    let mut rel = vec![false; spec.relations];
    for c in cands {
        ent[c.0] = true;
        ent[c.2] = true;
        rel[c.1] = true;
    }
    pairs.len() >= spec.triplets && ent.iter().all(|&b| b) && rel.iter().all(|&b| b)
}

/// Builds a clustered graph of people, clubs, cities and countries. Every
/// entity and relation occurs, and no two triplets share an unordered entity
/// pair, so each verbalized triplet aligns back to itself alone.
pub fn generate_toy_fixture(spec: &FixtureSpec, seed: u64) -> Result<Fixture, HarnessError> {
    if spec.entities < 4 || spec.relations < 2 {
        return Err(HarnessError::Fixture(
            "need at least 4 entities and 2 relations".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rels = catalog(spec.relations);
    let (ents, clusters) = entities(spec, &rels, &mut rng)?;

    let mut cands = Vec::new();
    for c in (1..=clusters).rev() {
        cands = candidates(&ents, &rels, c);
        if feasible(&cands, spec, ents.len()) {
            break;
        }
        cands.clear();
    }
    if cands.is_empty() {
        return Err(HarnessError::Fixture(format!(
            "cannot place {} distinct triplets over {} entities and {} relations",
            spec.triplets, spec.entities, spec.relations
        )));
    }
    cands.shuffle(&mut rng);

    let mut used_pairs = HashSet::new();
    let mut chosen: Vec<Cand> = Vec::with_capacity(spec.triplets);
    let mut take = |c: &Cand, chosen: &mut Vec<Cand>| {
        if used_pairs.insert(pair(c)) {
            chosen.push(*c);
            true
        } else {
            false
        }
    };
    for r in 0..rels.len() {
        let c = cands.iter().find(|c| c.1 == r).copied();
        if let Some(c) = c {
            take(&c, &mut chosen);
        }
    }
    for (e, ent) in ents.iter().enumerate() {
        if chosen.iter().any(|c| c.0 == e || c.2 == e) {
            continue;
        }
        let placed = cands
            .iter()
            .filter(|c| c.0 == e || c.2 == e)
            .any(|c| take(c, &mut chosen));
        if !placed {
            return Err(HarnessError::Fixture(format!(
                "entity {} cannot be placed",
                ent.label
            )));
        }
    }
    if chosen.len() > spec.triplets {
        return Err(HarnessError::Fixture(format!(
            "covering every entity and relation takes {} triplets, more than {}",
            chosen.len(),
            spec.triplets
        )));
    }
    for c in &cands {
        if chosen.len() == spec.triplets {
            break;
        }
        take(c, &mut chosen);
    }
    chosen.shuffle(&mut rng);

    let tsv: String = chosen
        .iter()
        .map(|&(h, r, t)| format!("{}\t{}\t{}\n", ents[h].label, rels[r].name, ents[t].label))
        .collect();
    let kg = KnowledgeGraph::from_tsv(&tsv).map_err(|e| HarnessError::Fixture(e.to_string()))?;

    let mut templates = TemplateTable::empty();
    for r in &rels {
        templates
            .insert(&r.name, &r.pattern)
            .map_err(|e| HarnessError::Fixture(e.to_string()))?;
    }
    let corpus = kg
        .triplets()
        .iter()
        .map(|t| verbalize(t, &kg, &templates))
        .collect();

    let synonyms_tsv = ents
        .iter()
        .filter(|e| e.kind == Kind::Person)
        .map(|e| {
            let family = e.label.split('_').nth(1).unwrap_or(&e.label);
            format!("{}\t{}\n", display_label(&e.label), family)
        })
        .collect();

    let mut order: Vec<usize> = (0..kg.len()).collect();
    order.shuffle(&mut rng);
    let private = (0..spec.users)
        .map(|u| {
            let mut idx: Vec<usize> = order.iter().copied().skip(u).step_by(spec.users).collect();
            idx.sort_unstable();
            kg.subgraph(idx.into_iter().map(|i| kg.triplets()[i]))
                .map_err(|e| HarnessError::Fixture(format!("user {u}: {e}")))
        })
        .collect::<Result<_, _>>()?;

    Ok(Fixture {
        kg,
        corpus,
        templates,
        synonyms_tsv,
        private,
    })
}

impl Fixture {
    pub fn synonyms(&self) -> SynonymTable {
        SynonymTable::from_tsv(&self.synonyms_tsv).expect("generated synonyms parse")
    }

    /// Writes the graph, corpus, templates, synonyms, private splits and a
    /// ready-to-run experiment config into `dir`.
    pub fn write(&self, dir: &Path) -> Result<FixturePaths, HarnessError> {
        let io = |path: &Path, e: std::io::Error| HarnessError::Io {
            path: path.display().to_string(),
            source: e,
        };
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let put = |name: &str, body: &str| -> Result<PathBuf, HarnessError> {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| io(&p, e))?;
            Ok(p)
        };
        let kg = put("kg.tsv", &self.kg.to_tsv())?;
        let corpus = put("corpus.txt", &(self.corpus.join("\n") + "\n"))?;
        let templates = put("templates.tsv", &self.templates.to_tsv())?;
        let synonyms = put("synonyms.tsv", &self.synonyms_tsv)?;
        let mut private = Vec::new();
        for (u, g) in self.private.iter().enumerate() {
            private.push(put(&format!("user{u}.tsv"), &g.to_tsv())?);
        }
        let users: Vec<String> = (0..self.private.len())
            .map(|u| format!("\"user{u}.tsv\""))
            .collect();
        let config = put(
            "experiment.toml",
            &format!(
                "pipeline = \"single_user_bsc\"\n\
                 sweep = [0.0, 0.01, 0.02, 0.05, 0.1]\n\
                 trials = 1000\n\
                 seed = 1\n\
                 correction = true\n\
                 kg = \"kg.tsv\"\n\
                 corpus = \"corpus.txt\"\n\
                 templates = \"templates.tsv\"\n\
                 synonyms = \"synonyms.tsv\"\n\
                 private_kgs = [{}]\n\
                 output = \"results.csv\"\n",
                users.join(", ")
            ),
        )?;
        Ok(FixturePaths {
            kg,
            corpus,
            templates,
            synonyms,
            private,
            config,
        })
    }
}
