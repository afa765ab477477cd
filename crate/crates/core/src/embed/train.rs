use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ComplExModel, EmbedError};
use crate::kg::{EntityId, KnowledgeGraph, Triplet};

/// Hyperparameters for [`train`].
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub dimension: usize,
    pub negatives_per_positive: usize,
    pub batch_size: usize,
    pub regularization_weight: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    /// The full-scale YAGO3-10 setting: 1000 steps, learning rate 4e-4, dimension 100.
    fn default() -> Self {
        Self {
            steps: 1000,
            learning_rate: 4e-4,
            dimension: 100,
            negatives_per_positive: 1,
            batch_size: 256,
            regularization_weight: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Settings that converge on the small synthetic graphs used for experiments.
    pub fn toy() -> Self {
        Self {
            steps: 2000,
            learning_rate: 0.5,
            dimension: 16,
            negatives_per_positive: 4,
            batch_size: 32,
            regularization_weight: 1e-3,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), EmbedError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(EmbedError::Config("learning_rate must be positive".into()));
        }
        if self.dimension == 0 {
            return Err(EmbedError::Config("dimension must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(EmbedError::Config("batch_size must be at least 1".into()));
        }
        if !(self.regularization_weight >= 0.0 && self.regularization_weight.is_finite()) {
            return Err(EmbedError::Config(
                "regularization_weight must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Which slot a negative sample corrupted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Corrupted {
    Head,
    Tail,
}

/// Replaces the head or the tail (chosen with probability 1/2) by a uniform
/// random entity, redrawing until the result is not a known triplet. Falls back
/// to the other slot when every replacement of the chosen one is known.
pub fn negative_sample<R: Rng + ?Sized>(
    t: &Triplet,
    kg: &KnowledgeGraph,
    rng: &mut R,
) -> Result<(Triplet, Corrupted), EmbedError> {
    let n = kg.num_entities();
    if n < 2 {
        return Err(EmbedError::NoNegative(*t));
    }
    let head_full = kg.known_heads(t.relation, t.tail).len() >= n;
    let tail_full = kg.known_tails(t.head, t.relation).len() >= n;
    let slot = match (rng.random_bool(0.5), head_full, tail_full) {
        (_, true, true) => return Err(EmbedError::NoNegative(*t)),
        (true, false, _) | (false, false, true) => Corrupted::Head,
        _ => Corrupted::Tail,
    };
    loop {
        let e = EntityId(rng.random_range(0..n as u32));
        let cand = match slot {
            Corrupted::Head => Triplet { head: e, ..*t },
            Corrupted::Tail => Triplet { tail: e, ..*t },
        };
        if !kg.contains(&cand) {
            return Ok((cand, slot));
        }
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Gradient rows keyed by id, for the parameters a batch touches.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseGradient {
    pub entities: BTreeMap<usize, Vec<f64>>,
    pub relations: BTreeMap<usize, Vec<f64>>,
}

fn accumulate(map: &mut BTreeMap<usize, Vec<f64>>, id: usize, g: &[f64]) {
    let row = map.entry(id).or_insert_with(|| vec![0.0; g.len()]);
    row.iter_mut().zip(g).for_each(|(a, b)| *a += b);
}

/// Mean logistic loss over labelled examples (`+1` positive, `-1` negative),
/// each with an L2 penalty on its head, relation and tail rows, together with
/// the exact gradient of that mean.
pub fn loss_and_gradient(
    model: &ComplExModel,
    batch: &[(Triplet, f64)],
    reg: f64,
) -> (f64, SparseGradient) {
    let d = model.dim();
    let d2 = 2 * d;
    let scale = 1.0 / batch.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = SparseGradient::default();
    for &(t, y) in batch {
        let (h, r, tl) = (t.head.index(), t.relation.index(), t.tail.index());
        let f = model.score_unchecked(h, r, tl);
        let (eh, er, et) = (model.entity(h), model.relation(r), model.entity(tl));
        let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        loss += scale * (softplus(-y * f) + reg * (sq(eh) + sq(er) + sq(et)));

        // d softplus(-y f) / df
        let g = -y * sigmoid(-y * f) * scale;
        let (hr, hi) = eh.split_at(d);
        let (rr, ri) = er.split_at(d);
        let (tr, ti) = et.split_at(d);
        let mut gh = vec![0.0; d2];
        let mut gr = vec![0.0; d2];
        let mut gt = vec![0.0; d2];
        for k in 0..d {
            gh[k] = g * (rr[k] * tr[k] + ri[k] * ti[k]) + 2.0 * reg * scale * hr[k];
            gh[d + k] = g * (rr[k] * ti[k] - ri[k] * tr[k]) + 2.0 * reg * scale * hi[k];
            gr[k] = g * (hr[k] * tr[k] + hi[k] * ti[k]) + 2.0 * reg * scale * rr[k];
            gr[d + k] = g * (hr[k] * ti[k] - hi[k] * tr[k]) + 2.0 * reg * scale * ri[k];
            gt[k] = g * (hr[k] * rr[k] - hi[k] * ri[k]) + 2.0 * reg * scale * tr[k];
            gt[d + k] = g * (hi[k] * rr[k] + hr[k] * ri[k]) + 2.0 * reg * scale * ti[k];
        }
        accumulate(&mut grad.entities, h, &gh);
        accumulate(&mut grad.entities, tl, &gt);
        accumulate(&mut grad.relations, r, &gr);
    }
    (loss, grad)
}

/// A trained model and the mean batch loss observed at every step.
#[derive(Clone, Debug)]
pub struct Training {
    pub model: ComplExModel,
    pub losses: Vec<f64>,
}

/// Mini-batch SGD on the logistic loss with filtered negative sampling.
///
/// Positives are visited in reshuffled epochs. Single-threaded, so the result
/// is a pure function of the graph, the config and the RNG state.
pub fn train<R: Rng + ?Sized>(
    kg: &KnowledgeGraph,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<Training, EmbedError> {
    cfg.validate()?;
    if kg.is_empty() {
        return Err(EmbedError::Config("cannot train on an empty graph".into()));
    }
    let mut model = ComplExModel::random(kg.num_entities(), kg.num_relations(), cfg.dimension, rng);
    let mut order: Vec<usize> = (0..kg.len()).collect();
    order.shuffle(rng);
    let mut cursor = 0;
    let mut losses = Vec::with_capacity(cfg.steps);
    let mut batch = Vec::with_capacity(cfg.batch_size * (1 + cfg.negatives_per_positive));

    for step in 0..cfg.steps {
        batch.clear();
        for _ in 0..cfg.batch_size {
            if cursor == order.len() {
                order.shuffle(rng);
                cursor = 0;
            }
            let pos = kg.triplets()[order[cursor]];
            cursor += 1;
            batch.push((pos, 1.0));
            for _ in 0..cfg.negatives_per_positive {
                let (neg, _) = negative_sample(&pos, kg, rng)?;
                batch.push((neg, -1.0));
            }
        }
        let (loss, grad) = loss_and_gradient(&model, &batch, cfg.regularization_weight);
        if !loss.is_finite() {
            return Err(EmbedError::Diverged { step });
        }
        losses.push(loss);
        for (id, g) in &grad.entities {
            for (w, gi) in model.entity_mut(*id).iter_mut().zip(g) {
                *w -= cfg.learning_rate * gi;
            }
        }
        for (id, g) in &grad.relations {
            for (w, gi) in model.relation_mut(*id).iter_mut().zip(g) {
                *w -= cfg.learning_rate * gi;
            }
        }
        if model.check_finite().is_err() {
            return Err(EmbedError::Diverged { step });
        }
    }
    Ok(Training { model, losses })
}

/// [`train`] with a ChaCha8 stream seeded from `cfg.seed`.
pub fn train_seeded(kg: &KnowledgeGraph, cfg: &TrainConfig) -> Result<Training, EmbedError> {
    train(kg, cfg, &mut ChaCha8Rng::seed_from_u64(cfg.seed))
}

/// Mean score over `positives` minus mean score over one fresh negative per positive.
pub fn score_margin<R: Rng + ?Sized>(
    model: &ComplExModel,
    kg: &KnowledgeGraph,
    positives: &[Triplet],
    rng: &mut R,
) -> Result<f64, EmbedError> {
    let mut pos = 0.0;
    let mut neg = 0.0;
    for t in positives {
        pos += model.score(t)?;
        neg += model.score(&negative_sample(t, kg, rng)?.0)?;
    }
    Ok((pos - neg) / positives.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn toy_kg() -> KnowledgeGraph {
        let mut src = String::new();
        for i in 0..5 {
            src.push_str(&format!("e{i}\tr0\te{}\n", (i + 1) % 5));
        }
        KnowledgeGraph::from_tsv(&src).unwrap()
    }

    #[test]
    fn negatives_differ_in_exactly_one_slot_and_are_unknown() {
        let kg = toy_kg();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let t = kg.triplets()[rng.random_range(0..kg.len())];
            let (n, slot) = negative_sample(&t, &kg, &mut rng).unwrap();
            assert!(!kg.contains(&n));
            assert_eq!(n.relation, t.relation);
            let changed = usize::from(n.head != t.head) + usize::from(n.tail != t.tail);
            assert_eq!(changed, 1);
            match slot {
                Corrupted::Head => assert_ne!(n.head, t.head),
                Corrupted::Tail => assert_ne!(n.tail, t.tail),
            }
        }
    }

    #[test]
    fn corruption_slots_are_balanced() {
        let kg = toy_kg();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 10_000;
        let heads = (0..n)
            .filter(|i| {
                let t = kg.triplets()[i % kg.len()];
                negative_sample(&t, &kg, &mut rng).unwrap().1 == Corrupted::Head
            })
            .count();
        let sigma = (n as f64 * 0.25).sqrt();
        assert!(
            (heads as f64 - n as f64 / 2.0).abs() < 3.0 * sigma,
            "heads = {heads}"
        );
    }

    #[test]
    fn saturated_graph_has_no_negative() {
        let kg = KnowledgeGraph::from_tsv("a\tr\ta\na\tr\tb\nb\tr\ta\nb\tr\tb\n").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = kg.triplets()[0];
        assert!(matches!(
            negative_sample(&t, &kg, &mut rng),
            Err(EmbedError::NoNegative(_))
        ));
        let single = KnowledgeGraph::from_tsv("a\tr\ta\n").unwrap();
        assert!(negative_sample(&single.triplets()[0], &single, &mut rng).is_err());
    }

    #[test]
    fn saturated_slot_falls_back_to_the_other() {
        // Every tail of (a, r, ?) is known, heads of (?, r, a) are not.
        let kg = KnowledgeGraph::from_tsv("a\tr\ta\na\tr\tb\n").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let (n, slot) = negative_sample(&kg.triplets()[0], &kg, &mut rng).unwrap();
            assert_eq!(slot, Corrupted::Head);
            assert!(!kg.contains(&n));
        }
    }

    #[test]
    fn zero_steps_returns_the_initialization() {
        let kg = toy_kg();
        let cfg = TrainConfig {
            steps: 0,
            dimension: 3,
            ..TrainConfig::toy()
        };
        let trained = train(&kg, &cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let init = ComplExModel::random(5, 1, 3, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(trained.model, init);
        assert!(trained.losses.is_empty());
    }

    #[test]
    fn training_is_reproducible() {
        let kg = toy_kg();
        let cfg = TrainConfig {
            steps: 50,
            ..TrainConfig::toy()
        };
        let a = train(&kg, &cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = train(&kg, &cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.losses, b.losses);
    }

    #[test]
    fn loss_falls_and_positives_outscore_negatives() {
        let kg = toy_kg();
        let cfg = TrainConfig {
            steps: 400,
            ..TrainConfig::toy()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = train(&kg, &cfg, &mut rng).unwrap();
        let tenth = cfg.steps / 10;
        let head: f64 = out.losses[..tenth].iter().sum::<f64>() / tenth as f64;
        let tail: f64 = out.losses[cfg.steps - tenth..].iter().sum::<f64>() / tenth as f64;
        assert!(tail < 0.5 * head, "first {head} last {tail}");
        let margin = score_margin(&out.model, &kg, kg.triplets(), &mut rng).unwrap();
        assert!(margin > 1.0, "margin {margin}");
    }

    #[test]
    fn divergence_is_reported_with_step() {
        let kg = toy_kg();
        let cfg = TrainConfig {
            steps: 500,
            learning_rate: 1e12,
            regularization_weight: 0.0,
            ..TrainConfig::toy()
        };
        let err = train(&kg, &cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap_err();
        assert!(matches!(err, EmbedError::Diverged { .. }), "{err}");
    }

    #[test]
    fn invalid_config_rejected() {
        let kg = toy_kg();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for cfg in [
            TrainConfig {
                learning_rate: 0.0,
                ..TrainConfig::toy()
            },
            TrainConfig {
                dimension: 0,
                ..TrainConfig::toy()
            },
            TrainConfig {
                batch_size: 0,
                ..TrainConfig::toy()
            },
        ] {
            assert!(matches!(
                train(&kg, &cfg, &mut rng),
                Err(EmbedError::Config(_))
            ));
        }
    }

    /// Central finite differences over every touched parameter.
    pub(crate) fn max_gradient_error(
        model: &ComplExModel,
        batch: &[(Triplet, f64)],
        reg: f64,
    ) -> f64 {
        let eps = 1e-5;
        let (_, grad) = loss_and_gradient(model, batch, reg);
        let mut worst: f64 = 0.0;
        let mut check = |analytic: f64, numeric: f64| {
            let denom = analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic - numeric).abs() / denom);
        };
        for (is_entity, rows) in [(true, &grad.entities), (false, &grad.relations)] {
            for (&id, g) in rows {
                for (j, &gj) in g.iter().enumerate() {
                    let mut plus = model.clone();
                    let mut minus = model.clone();
                    if is_entity {
                        plus.entity_mut(id)[j] += eps;
                        minus.entity_mut(id)[j] -= eps;
                    } else {
                        plus.relation_mut(id)[j] += eps;
                        minus.relation_mut(id)[j] -= eps;
                    }
                    let numeric = (loss_and_gradient(&plus, batch, reg).0
                        - loss_and_gradient(&minus, batch, reg).0)
                        / (2.0 * eps);
                    check(gj, numeric);
                }
            }
        }
        worst
    }

    #[test]
    fn gradient_matches_finite_differences_d3() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let model = ComplExModel::random(4, 2, 3, &mut rng);
        let batch = [
            (Triplet::new(0, 0, 1), 1.0),
            (Triplet::new(2, 1, 2), 1.0),
            (Triplet::new(3, 0, 1), -1.0),
        ];
        let err = max_gradient_error(&model, &batch, 0.01);
        assert!(err < 1e-4, "max relative error {err}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn gradient_check_random_models(seed in any::<u64>(), dim in 1usize..5, reg in 0.0f64..0.1) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let model = ComplExModel::random(5, 3, dim, &mut rng);
            let batch: Vec<(Triplet, f64)> = (0..4)
                .map(|i| {
                    let t = Triplet::new(rng.random_range(0..5), rng.random_range(0..3), rng.random_range(0..5));
                    (t, if i % 2 == 0 { 1.0 } else { -1.0 })
                })
                .collect();
            let err = max_gradient_error(&model, &batch, reg);
            prop_assert!(err < 1e-4, "max relative error {}", err);
        }
    }
}
