use std::fs;
use std::io::Write;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{ExperimentConfig, HarnessError, Pipeline};
use crate::align::{Aligner, SynonymTable};
use crate::bits::BitVec;
use crate::codebook::Codebook;
use crate::embed::{train_seeded, ComplExModel};
use crate::kg::{KnowledgeGraph, Triplet};
use crate::metrics::{bleu, similarity, tokens, BagOfWords, SentenceEmbedder};
use crate::phy::{transmit, ChannelModel, ConvCode, Received};
use crate::rx::{correct, recover_for_user, TemplateTable, Verbalizer};
use crate::service::{RemoteEmbedder, RemoteService, RemoteVerbalizer};
use crate::source::HuffmanTable;

pub const CSV_HEADER: &str =
    "pipeline,sweep,trials,sim_mean,bleu_mean,ter,bits_semantic,bits_fixed7,bits_huffman,seed";

/// One CSV line: averages over the trials of a sweep point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub pipeline: String,
    pub sweep: f64,
    pub trials: usize,
    pub sim_mean: f64,
    pub bleu_mean: f64,
    pub ter: f64,
    pub bits_semantic: u64,
    pub bits_fixed7: u64,
    pub bits_huffman: Option<u64>,
    pub seed: u64,
}

/// Per-trial outcomes behind a row, kept for significance tests.
#[derive(Clone, Debug, PartialEq)]
pub struct PointStats {
    pub pipeline: String,
    pub sweep: f64,
    /// Fraction of symbols received correctly, per trial.
    pub recovery: Vec<f64>,
    /// Fraction of users whose recovered symbol is one they sent, per trial.
    /// Empty outside the multi-user pipeline.
    pub assignment: Vec<f64>,
    /// Fraction of received symbols that are wrong before correction, per trial.
    pub corruption: Vec<f64>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

fn std_error(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (var / xs.len() as f64).sqrt()
}

impl PointStats {
    pub fn recovery_rate(&self) -> f64 {
        mean(&self.recovery)
    }

    pub fn assignment_accuracy(&self) -> f64 {
        mean(&self.assignment)
    }

    pub fn corruption_rate(&self) -> f64 {
        mean(&self.corruption)
    }
}

/// Mean and standard error of the per-trial differences `a - b`.
pub fn paired_difference(a: &[f64], b: &[f64]) -> (f64, f64) {
    assert_eq!(a.len(), b.len(), "paired samples differ in length");
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    (mean(&d), std_error(&d))
}

#[derive(Clone, Debug, Default)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub stats: Vec<PointStats>,
}

impl RunOutput {
    pub fn to_csv(&self) -> Result<String, HarnessError> {
        let mut buf = Vec::new();
        write_csv(&self.rows, &mut buf)?;
        Ok(String::from_utf8(buf).expect("csv is utf-8"))
    }
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the RNG stream for one trial of one sweep point.
pub fn trial_seed(seed: u64, sweep: usize, trial: usize) -> u64 {
    mix(mix(mix(seed) ^ sweep as u64) ^ trial as u64)
}

/// A corpus line and the triplets aligned to it.
#[derive(Clone, Debug, PartialEq)]
pub struct Message {
    pub text: String,
    pub triplets: Vec<Triplet>,
}

/// Everything a run needs, loaded once.
pub struct Resources {
    pub kg: KnowledgeGraph,
    pub codebook: Codebook,
    pub messages: Vec<Message>,
    pub huffman: HuffmanTable,
    pub model: Option<ComplExModel>,
    pub private: Vec<KnowledgeGraph>,
    /// Indexes into `messages` whose triplets all belong to each user.
    pub user_messages: Vec<Vec<usize>>,
    pub conv: ConvCode,
    verbalizer: Box<dyn Verbalizer + Send + Sync>,
    embedder: Box<dyn SentenceEmbedder + Send + Sync>,
}

fn load_err(what: impl Into<String>, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Load {
        what: what.into(),
        msg: e.to_string(),
    }
}

impl Resources {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self, HarnessError> {
        let kg = KnowledgeGraph::load(&cfg.kg).map_err(|e| load_err("knowledge graph", e))?;
        let codebook = match (cfg.entity_width, cfg.relation_width) {
            (None, None) => Codebook::build(&kg),
            (ew, rw) => {
                let min = Codebook::build(&kg);
                Codebook::with_widths(
                    &kg,
                    ew.unwrap_or(min.entity_width()),
                    rw.unwrap_or(min.relation_width()),
                )
                .map_err(|e| load_err("codebook", e))?
            }
        };
        let synonyms = match &cfg.synonyms {
            Some(p) => SynonymTable::load(p).map_err(|e| load_err("synonyms", e))?,
            None => SynonymTable::new(),
        };
        let templates = match &cfg.templates {
            Some(p) => TemplateTable::load(p).map_err(|e| load_err("templates", e))?,
            None => TemplateTable::default(),
        };
        let text = fs::read_to_string(&cfg.corpus).map_err(|source| HarnessError::Io {
            path: cfg.corpus.display().to_string(),
            source,
        })?;
        let huffman = HuffmanTable::build(&text).map_err(|e| load_err("corpus", e))?;
        let aligner = Aligner::new(&kg, &synonyms);
        let mut messages = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let triplets = aligner.align_message(line);
            if triplets.is_empty() {
                log::warn!("corpus line {} aligns to no triplet; skipped", i + 1);
                continue;
            }
            messages.push(Message {
                text: line.to_owned(),
                triplets,
            });
        }
        if messages.is_empty() {
            return Err(load_err("corpus", "no line aligns to the knowledge graph"));
        }

        let private = cfg
            .private_kgs
            .iter()
            .map(|p| {
                KnowledgeGraph::load_within(p, &kg)
                    .map_err(|e| load_err(format!("private graph {}", p.display()), e))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let user_messages: Vec<Vec<usize>> = private
            .iter()
            .map(|g| {
                (0..messages.len())
                    .filter(|&i| messages[i].triplets.iter().all(|t| g.contains(t)))
                    .collect()
            })
            .collect();
        if cfg.pipeline == Pipeline::MultiUser {
            if let Some(u) = user_messages.iter().position(Vec::is_empty) {
                return Err(load_err(
                    "corpus",
                    format!("no line belongs entirely to user {u}"),
                ));
            }
        }

        let needs_model = cfg.pipeline == Pipeline::AblationInference
            || (cfg.correction && cfg.pipeline != Pipeline::Compression);
        let model = if !needs_model {
            None
        } else if let Some(p) = &cfg.model {
            let m = ComplExModel::load(p).map_err(|e| load_err("model", e))?;
            if m.num_entities() != kg.num_entities() || m.num_relations() != kg.num_relations() {
                return Err(load_err(
                    "model",
                    format!(
                        "checkpoint covers {} entities and {} relations, graph has {} and {}",
                        m.num_entities(),
                        m.num_relations(),
                        kg.num_entities(),
                        kg.num_relations()
                    ),
                ));
            }
            Some(m)
        } else {
            let tc = cfg.train_config();
            log::info!("no model checkpoint given; training one in-process");
            Some(
                train_seeded(&kg, &tc)
                    .map_err(|e| load_err("model", e))?
                    .model,
            )
        };

        let timeout = Duration::from_millis(cfg.service_timeout_ms);
        let verbalizer: Box<dyn Verbalizer + Send + Sync> = match &cfg.verbalizer_url {
            Some(url) => Box::new(RemoteVerbalizer {
                service: RemoteService::new(url.clone(), timeout),
                fallback: templates,
            }),
            None => Box::new(templates),
        };
        let embedder: Box<dyn SentenceEmbedder + Send + Sync> = match &cfg.embedder_url {
            Some(url) => Box::new(RemoteEmbedder {
                service: RemoteService::new(url.clone(), timeout),
            }),
            None => Box::new(BagOfWords),
        };

        Ok(Self {
            kg,
            codebook,
            messages,
            huffman,
            model,
            private,
            user_messages,
            conv: ConvCode::default(),
            verbalizer,
            embedder,
        })
    }

    /// Sends one message's symbols as a single coded block and returns what
    /// the receiver makes of each symbol, `None` for an unusable one.
    fn send(
        &self,
        triplets: &[Triplet],
        ch: &ChannelModel,
        correction: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Option<Triplet>>, String> {
        let bits = self
            .codebook
            .encode_all(triplets)
            .map_err(|e| e.to_string())?;
        let coded = self.conv.encode(&bits);
        let decoded = match transmit(&coded, ch, rng) {
            Received::Hard(b) => self.conv.decode_hard(&b),
            Received::Soft(s) => self.conv.decode_soft(&s),
        }
        .map_err(|e| e.to_string())?;
        let n = self.codebook.symbol_len();
        (0..triplets.len())
            .map(|i| {
                let sym: BitVec = decoded.slice(i * n, n);
                if correction {
                    let model = self.model.as_ref().ok_or("correction needs a model")?;
                    correct(&sym, &self.codebook, &self.kg, model)
                        .map(|c| Some(c.triplet))
                        .map_err(|e| e.to_string())
                } else {
                    self.codebook
                        .decode(&sym)
                        .map(|d| d.triplet())
                        .map_err(|e| e.to_string())
                }
            })
            .collect()
    }

    /// Similarity and BLEU of the rendering of `received` against `text`.
    fn score(&self, text: &str, received: &[Triplet]) -> Result<(f64, f64), String> {
        let hyp = self
            .verbalizer
            .verbalize_batch(received, &self.kg)
            .join(" ");
        if tokens(&hyp).is_empty() {
            return Ok((0.0, 0.0));
        }
        let s = similarity(text, &hyp, self.embedder.as_ref()).map_err(|e| e.to_string())?;
        let b = bleu(&hyp, text, 4).map_err(|e| e.to_string())?;
        Ok((s, b))
    }

    pub(crate) fn bits(&self, m: &Message) -> (u64, u64, Option<u64>) {
        (
            (m.triplets.len() * self.codebook.symbol_len()) as u64,
            7 * m.text.chars().count() as u64,
            self.huffman.encoded_len(&m.text).ok().map(|b| b as u64),
        )
    }
}

#[derive(Clone, Debug, Default)]
struct Trial {
    sim: f64,
    bleu: f64,
    symbols: usize,
    wrong: usize,
    corrupted: usize,
    assigned: f64,
    bits: (u64, u64, Option<u64>),
}

fn count_wrong(sent: &[Triplet], got: &[Option<Triplet>]) -> usize {
    sent.iter()
        .zip(got)
        .filter(|(s, g)| Some(**s) != **g)
        .count()
}

fn single_user_trial(
    res: &Resources,
    t: usize,
    ch: &ChannelModel,
    correction: bool,
    seed: u64,
) -> Result<Trial, String> {
    let m = &res.messages[t % res.messages.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let got = res.send(&m.triplets, ch, correction, &mut rng)?;
    let corrupted = if correction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        count_wrong(&m.triplets, &res.send(&m.triplets, ch, false, &mut rng)?)
    } else {
        count_wrong(&m.triplets, &got)
    };
    let valid: Vec<Triplet> = got.iter().flatten().copied().collect();
    let (sim, bleu) = res.score(&m.text, &valid)?;
    Ok(Trial {
        sim,
        bleu,
        symbols: m.triplets.len(),
        wrong: count_wrong(&m.triplets, &got),
        corrupted,
        assigned: 0.0,
        bits: res.bits(m),
    })
}

fn multi_user_trial(
    res: &Resources,
    t: usize,
    ch: &ChannelModel,
    correction: bool,
    seed: u64,
) -> Result<Trial, String> {
    let users: Vec<&Message> = res
        .user_messages
        .iter()
        .map(|idx| &res.messages[idx[t % idx.len()]])
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Trial::default();
    let mut stream = Vec::new();
    for m in &users {
        let got = res.send(&m.triplets, ch, correction, &mut rng)?;
        let raw = if correction {
            res.send(&m.triplets, ch, false, &mut raw_rng)?
        } else {
            got.clone()
        };
        out.symbols += m.triplets.len();
        out.wrong += count_wrong(&m.triplets, &got);
        out.corrupted += count_wrong(&m.triplets, &raw);
        let b = res.bits(m);
        out.bits.0 += b.0;
        out.bits.1 += b.1;
        out.bits.2 = out.bits.2.zip(b.2).map(|(x, y)| x + y).or(b.2);
        stream.extend(got.into_iter().flatten());
    }
    // Bits are only comparable when every user's Huffman count exists.
    if users.iter().any(|m| res.bits(m).2.is_none()) {
        out.bits.2 = None;
    }
    let mut hits = 0usize;
    for (k, m) in users.iter().enumerate() {
        let (sim, bleu, ok) = if stream.is_empty() {
            (0.0, 0.0, false)
        } else {
            let rec = recover_for_user(&stream, &res.private[k], &res.codebook)
                .map_err(|e| e.to_string())?;
            let (s, b) = res.score(&m.text, &[rec.triplet])?;
            (s, b, m.triplets.contains(&rec.triplet))
        };
        out.sim += sim;
        out.bleu += bleu;
        hits += usize::from(ok);
    }
    let u = users.len() as f64;
    out.sim /= u;
    out.bleu /= u;
    out.assigned = hits as f64 / u;
    Ok(out)
}

fn compression_rows(res: &Resources, seed: u64) -> Result<RunOutput, HarnessError> {
    let mut out = RunOutput::default();
    for (i, m) in res.messages.iter().enumerate() {
        let (sim, bleu) = res
            .score(&m.text, &m.triplets)
            .map_err(|msg| HarnessError::Trial {
                sweep: i,
                trial: 0,
                msg,
            })?;
        let (s, f, h) = res.bits(m);
        out.rows.push(ResultRow {
            pipeline: Pipeline::Compression.name().into(),
            sweep: i as f64,
            trials: 1,
            sim_mean: sim,
            bleu_mean: bleu,
            ter: 0.0,
            bits_semantic: s,
            bits_fixed7: f,
            bits_huffman: h,
            seed,
        });
        out.stats.push(PointStats {
            pipeline: Pipeline::Compression.name().into(),
            sweep: i as f64,
            recovery: vec![1.0],
            assignment: Vec::new(),
            corruption: vec![0.0],
        });
    }
    Ok(out)
}

fn summarize(
    label: &str,
    sweep: f64,
    seed: u64,
    trials: &[Trial],
    multi: bool,
) -> (ResultRow, PointStats) {
    let n = trials.len() as f64;
    let symbols: usize = trials.iter().map(|t| t.symbols).sum();
    let wrong: usize = trials.iter().map(|t| t.wrong).sum();
    let huff = trials
        .iter()
        .map(|t| t.bits.2)
        .try_fold(0u64, |acc, b| b.map(|b| acc + b));
    let row = ResultRow {
        pipeline: label.to_owned(),
        sweep,
        trials: trials.len(),
        sim_mean: trials.iter().map(|t| t.sim).sum::<f64>() / n,
        bleu_mean: trials.iter().map(|t| t.bleu).sum::<f64>() / n,
        ter: wrong as f64 / symbols.max(1) as f64,
        bits_semantic: trials.iter().map(|t| t.bits.0).sum(),
        bits_fixed7: trials.iter().map(|t| t.bits.1).sum(),
        bits_huffman: huff,
        seed,
    };
    let frac = |k: usize, t: &Trial| k as f64 / t.symbols.max(1) as f64;
    let stats = PointStats {
        pipeline: label.to_owned(),
        sweep,
        recovery: trials.iter().map(|t| 1.0 - frac(t.wrong, t)).collect(),
        assignment: if multi {
            trials.iter().map(|t| t.assigned).collect()
        } else {
            Vec::new()
        },
        corruption: trials.iter().map(|t| frac(t.corrupted, t)).collect(),
    };
    (row, stats)
}

fn run_loaded(cfg: &ExperimentConfig, res: &Resources) -> Result<RunOutput, HarnessError> {
    if cfg.pipeline == Pipeline::Compression {
        return compression_rows(res, cfg.seed);
    }
    let multi = cfg.pipeline == Pipeline::MultiUser;
    let variants: Vec<(String, bool)> = if cfg.pipeline == Pipeline::AblationInference {
        vec![
            ("ablation_inference:on".into(), true),
            ("ablation_inference:off".into(), false),
        ]
    } else {
        vec![(cfg.pipeline.name().into(), cfg.correction)]
    };
    let mut out = RunOutput::default();
    for (si, &x) in cfg.sweep.iter().enumerate() {
        let ch = cfg.channel_kind().at(x)?;
        for (label, correction) in &variants {
            let trials = (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    let seed = trial_seed(cfg.seed, si, t);
                    let r = if multi {
                        multi_user_trial(res, t, &ch, *correction, seed)
                    } else {
                        single_user_trial(res, t, &ch, *correction, seed)
                    };
                    r.map_err(|msg| HarnessError::Trial {
                        sweep: si,
                        trial: t,
                        msg,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let (row, stats) = summarize(label, x, cfg.seed, &trials, multi);
            out.rows.push(row);
            out.stats.push(stats);
        }
    }
    Ok(out)
}

/// Runs every sweep point of `cfg` and writes the CSV to `cfg.output` if set.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    let res = Resources::load(cfg)?;
    run_with(cfg, &res)
}

/// Like [`run`], reusing loaded resources.
pub fn run_with(cfg: &ExperimentConfig, res: &Resources) -> Result<RunOutput, HarnessError> {
    let out = match cfg.parallel {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| HarnessError::Config(e.to_string()))?
            .install(|| run_loaded(cfg, res))?,
        None => run_loaded(cfg, res)?,
    };
    if let Some(path) = &cfg.output {
        let file = fs::File::create(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        write_csv(&out.rows, file)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trial_seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for s in 0..4 {
            for i in 0..10 {
                for t in 0..100 {
                    assert!(seen.insert(trial_seed(s, i, t)));
                }
            }
        }
    }

    #[test]
    fn paired_difference_basics() {
        let (m, se) = paired_difference(&[1.0, 1.0, 1.0], &[0.0, 0.0, 0.0]);
        assert_eq!((m, se), (1.0, 0.0));
        let (m, se) = paired_difference(&[1.0, 0.0], &[0.0, 0.0]);
        assert_eq!(m, 0.5);
        assert!((se - 0.5).abs() < 1e-12);
    }

    #[test]
    fn csv_header_and_optional_column() {
        let row = ResultRow {
            pipeline: "single_user_bsc".into(),
            sweep: 0.05,
            trials: 10,
            sim_mean: 1.0,
            bleu_mean: 0.5,
            ter: 0.0,
            bits_semantic: 150,
            bits_fixed7: 700,
            bits_huffman: None,
            seed: 3,
        };
        let out = RunOutput {
            rows: vec![row],
            stats: Vec::new(),
        };
        assert_eq!(
            out.to_csv().unwrap(),
            format!("{CSV_HEADER}\nsingle_user_bsc,0.05,10,1.0,0.5,0.0,150,700,,3\n")
        );
    }
}
