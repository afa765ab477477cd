use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::EmbedError;
use crate::kg::Triplet;

const CHECKPOINT_MAGIC: &str = "complex-checkpoint v1";

/// Complex-valued entity and relation embeddings.
///
/// Each row holds `dim` real parts followed by `dim` imaginary parts.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplExModel {
    dim: usize,
    num_entities: usize,
    num_relations: usize,
    pub(crate) entities: Vec<f64>,
    pub(crate) relations: Vec<f64>,
}

impl ComplExModel {
    pub fn zeros(num_entities: usize, num_relations: usize, dim: usize) -> Self {
        Self {
            dim,
            num_entities,
            num_relations,
            entities: vec![0.0; num_entities * 2 * dim],
            relations: vec![0.0; num_relations * 2 * dim],
        }
    }

    /// Element-wise Gaussian initialization with standard deviation 1/√d.
    pub fn random<R: Rng + ?Sized>(
        num_entities: usize,
        num_relations: usize,
        dim: usize,
        rng: &mut R,
    ) -> Self {
        let normal = Normal::new(0.0, 1.0 / (dim as f64).sqrt()).expect("finite std");
        let mut m = Self::zeros(num_entities, num_relations, dim);
        for x in m.entities.iter_mut().chain(m.relations.iter_mut()) {
            *x = normal.sample(rng);
        }
        m
    }

    /// Builds a model from explicit rows of `[re.., im..]`.
    pub fn from_rows(
        dim: usize,
        entities: Vec<Vec<f64>>,
        relations: Vec<Vec<f64>>,
    ) -> Result<Self, EmbedError> {
        let flat = |rows: Vec<Vec<f64>>| -> Result<Vec<f64>, EmbedError> {
            let mut out = Vec::with_capacity(rows.len() * 2 * dim);
            for row in rows {
                if row.len() != 2 * dim {
                    return Err(EmbedError::Shape(format!(
                        "row of length {} for dimension {dim}",
                        row.len()
                    )));
                }
                out.extend(row);
            }
            Ok(out)
        };
        let (num_entities, num_relations) = (entities.len(), relations.len());
        let m = Self {
            dim,
            num_entities,
            num_relations,
            entities: flat(entities)?,
            relations: flat(relations)?,
        };
        m.check_finite()?;
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_entities(&self) -> usize {
        self.num_entities
    }

    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    pub fn entity(&self, id: usize) -> &[f64] {
        &self.entities[id * 2 * self.dim..(id + 1) * 2 * self.dim]
    }

    pub fn relation(&self, id: usize) -> &[f64] {
        &self.relations[id * 2 * self.dim..(id + 1) * 2 * self.dim]
    }

    pub(crate) fn entity_mut(&mut self, id: usize) -> &mut [f64] {
        let d2 = 2 * self.dim;
        &mut self.entities[id * d2..(id + 1) * d2]
    }

    pub(crate) fn relation_mut(&mut self, id: usize) -> &mut [f64] {
        let d2 = 2 * self.dim;
        &mut self.relations[id * d2..(id + 1) * d2]
    }

    pub fn check_finite(&self) -> Result<(), EmbedError> {
        if self
            .entities
            .iter()
            .chain(&self.relations)
            .all(|x| x.is_finite())
        {
            Ok(())
        } else {
            Err(EmbedError::Shape("non-finite embedding value".into()))
        }
    }

    fn check(&self, t: &Triplet) -> Result<(), EmbedError> {
        if t.head.index() >= self.num_entities
            || t.tail.index() >= self.num_entities
            || t.relation.index() >= self.num_relations
        {
            Err(EmbedError::IdOutOfRange(*t))
        } else {
            Ok(())
        }
    }

    /// Re(Σ_k h[k]·r[k]·conj(t[k])). Higher means more plausible.
    pub fn score(&self, t: &Triplet) -> Result<f64, EmbedError> {
        self.check(t)?;
        Ok(self.score_unchecked(t.head.index(), t.relation.index(), t.tail.index()))
    }

    pub(crate) fn score_unchecked(&self, h: usize, r: usize, t: usize) -> f64 {
        let d = self.dim;
        let (h, r, t) = (self.entity(h), self.relation(r), self.entity(t));
        let (hr, hi) = h.split_at(d);
        let (rr, ri) = r.split_at(d);
        let (tr, ti) = t.split_at(d);
        let mut s = 0.0;
        for k in 0..d {
            s += hr[k] * rr[k] * tr[k] + hi[k] * rr[k] * ti[k] + hr[k] * ri[k] * ti[k]
                - hi[k] * ri[k] * tr[k];
        }
        s
    }

    /// Writes dimensions and every real/imaginary value; floats use their
    /// shortest round-trip decimal form, so reloading is exact.
    pub fn to_checkpoint(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{CHECKPOINT_MAGIC}");
        let _ = writeln!(out, "entities {}", self.num_entities);
        let _ = writeln!(out, "relations {}", self.num_relations);
        let _ = writeln!(out, "dim {}", self.dim);
        let mut row = |tag: &str, i: usize, vals: &[f64]| {
            let _ = write!(out, "{tag} {i}");
            for v in vals {
                let _ = write!(out, " {v:?}");
            }
            out.push('\n');
        };
        for i in 0..self.num_entities {
            row("e", i, self.entity(i));
        }
        for i in 0..self.num_relations {
            row("r", i, self.relation(i));
        }
        out
    }

    pub fn from_checkpoint(src: &str) -> Result<Self, EmbedError> {
        let bad = |line: usize, msg: &str| EmbedError::Checkpoint {
            line,
            msg: msg.to_owned(),
        };
        let mut lines = src.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, l)) if l.trim() == CHECKPOINT_MAGIC => {}
            _ => return Err(bad(1, "missing checkpoint header")),
        }
        let mut header = |key: &str| -> Result<usize, EmbedError> {
            let (n, l) = lines.next().ok_or_else(|| bad(0, "truncated header"))?;
            l.strip_prefix(key)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| bad(n, &format!("expected `{key} <count>`")))
        };
        let num_entities = header("entities")?;
        let num_relations = header("relations")?;
        let dim = header("dim")?;
        let mut m = Self::zeros(num_entities, num_relations, dim);
        let mut seen_e = vec![false; num_entities];
        let mut seen_r = vec![false; num_relations];
        for (n, l) in lines {
            if l.trim().is_empty() {
                continue;
            }
            let mut parts = l.split_ascii_whitespace();
            let tag = parts.next().unwrap_or_default();
            let idx: usize = parts
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad(n, "missing row index"))?;
            let vals: Vec<f64> = parts
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|_| bad(n, "unparseable value"))?;
            if vals.len() != 2 * dim {
                return Err(bad(n, "row length does not match dimension"));
            }
            let (slot, seen) = match tag {
                "e" if idx < num_entities => (m.entity_mut(idx), &mut seen_e[idx]),
                "r" if idx < num_relations => (m.relation_mut(idx), &mut seen_r[idx]),
                _ => return Err(bad(n, "unknown row tag or index out of range")),
            };
            slot.copy_from_slice(&vals);
            *seen = true;
        }
        if !seen_e.iter().chain(&seen_r).all(|&s| s) {
            return Err(bad(0, "missing rows"));
        }
        m.check_finite()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EmbedError> {
        let path = path.as_ref();
        fs::write(path, self.to_checkpoint()).map_err(|source| EmbedError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EmbedError> {
        let path = path.as_ref();
        let src = fs::read_to_string(path).map_err(|source| EmbedError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_checkpoint(&src)
    }
}
