//! First-stage selection: score every candidate graph against the question
//! with a single linear head over pair features, trained pointwise on
//! groups of one positive and up to N sampled negatives.

use std::collections::BTreeSet;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kb::{DisplayNames, KnowledgeBase, Node};
use crate::linking::Question;
use crate::matcher::{
    grad_step, linear_score, FeatureVector, Label, LinearHead, PairEncoder, PairInput,
};
use crate::metrics::question_prf;
use crate::query_graph::{execute, serialize, CandidateSet, QueryGraph, QueryGraphSequence};

/// F1 at or above which a candidate is a positive example.
pub const POSITIVE_F1: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "defaults::negatives")]
    pub negatives_per_positive: usize,
    #[serde(default = "defaults::learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "defaults::epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::top_n")]
    pub top_n: usize,
}

mod defaults {
    pub fn negatives() -> usize {
        10
    }
    pub fn learning_rate() -> f64 {
        0.01
    }
    pub fn epochs() -> usize {
        5
    }
    pub fn top_n() -> usize {
        10
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            negatives_per_positive: defaults::negatives(),
            learning_rate: defaults::learning_rate(),
            epochs: defaults::epochs(),
            seed: 0,
            top_n: defaults::top_n(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCandidate {
    pub graph: QueryGraph,
    pub sequence: QueryGraphSequence,
    pub answers: BTreeSet<Node>,
    pub f1: f64,
    pub label: Label,
}

/// A question with its labeled candidates. Candidate order is meaningful:
/// generation order for fresh sets, rank order for top-n lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledQuestion {
    pub id: String,
    pub question: Question,
    pub gold: Vec<String>,
    pub candidates: Vec<LabeledCandidate>,
}

impl LabeledQuestion {
    pub fn has_positive(&self) -> bool {
        self.candidates.iter().any(|c| c.label.is_positive())
    }

    pub fn f1s(&self) -> Vec<f64> {
        self.candidates.iter().map(|c| c.f1).collect()
    }

    pub fn oracle_f1(&self) -> f64 {
        self.candidates.iter().map(|c| c.f1).fold(0.0, f64::max)
    }
}

/// Positivity rule: F1 ≥ 0.5, or failing that the single best candidate
/// with F1 > 0 (the earliest one on ties).
pub fn assign_labels(f1s: &[f64]) -> Vec<Label> {
    let mut labels: Vec<Label> = f1s
        .iter()
        .map(|&f| {
            if f >= POSITIVE_F1 {
                Label::Positive
            } else {
                Label::Negative
            }
        })
        .collect();
    if !labels.iter().any(|l| l.is_positive()) {
        let best = f1s.iter().enumerate().filter(|(_, &f)| f > 0.0).fold(
            None::<(usize, f64)>,
            |acc, (i, &f)| match acc {
                Some((_, bf)) if bf >= f => acc,
                _ => Some((i, f)),
            },
        );
        if let Some((i, _)) = best {
            labels[i] = Label::Positive;
        }
    }
    labels
}

/// Executes every candidate, scores its answers against gold and labels it.
pub fn label_candidates(
    candidates: &CandidateSet,
    gold: &[String],
    kb: &KnowledgeBase,
    names: &DisplayNames,
) -> Vec<LabeledCandidate> {
    let executed: Vec<(BTreeSet<Node>, f64)> = candidates
        .graphs
        .iter()
        .map(|g| {
            let answers = execute(kb, g);
            let rendered: Vec<String> = answers.iter().map(|a| names.render(a)).collect();
            let f1 = question_prf(&rendered, gold).f1;
            (answers, f1)
        })
        .collect();
    let f1s: Vec<f64> = executed.iter().map(|(_, f)| *f).collect();
    let labels = assign_labels(&f1s);
    candidates
        .graphs
        .iter()
        .zip(executed)
        .zip(labels)
        .map(|((g, (answers, f1)), label)| LabeledCandidate {
            graph: g.clone(),
            sequence: serialize(g, names),
            answers,
            f1,
            label,
        })
        .collect()
}

/// One positive and its sampled negatives, as indices into the question's
/// candidate list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingGroup {
    pub positive: usize,
    pub negatives: Vec<usize>,
}

/// For each positive, draws `n` negatives uniformly without replacement
/// (all of them when fewer exist).
pub fn sample_groups_with(
    labeled: &[LabeledCandidate],
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<TrainingGroup> {
    let negatives: Vec<usize> = (0..labeled.len())
        .filter(|&i| !labeled[i].label.is_positive())
        .collect();
    labeled
        .iter()
        .enumerate()
        .filter(|(_, c)| c.label.is_positive())
        .map(|(positive, _)| {
            let drawn = if negatives.len() <= n {
                negatives.clone()
            } else {
                index::sample(rng, negatives.len(), n)
                    .into_iter()
                    .map(|i| negatives[i])
                    .collect()
            };
            TrainingGroup {
                positive,
                negatives: drawn,
            }
        })
        .collect()
}

pub fn sample_groups(labeled: &[LabeledCandidate], n: usize, seed: u64) -> Vec<TrainingGroup> {
    sample_groups_with(labeled, n, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankModel {
    pub head: LinearHead,
}

impl RankModel {
    pub fn zeros(dimension: usize) -> Self {
        RankModel {
            head: LinearHead::zeros(dimension),
        }
    }
}

/// Validation score per epoch (epoch 0 is the untrained model when no
/// epochs run) and the epoch that was kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub validation_f1: Vec<(usize, f64)>,
    pub best_epoch: usize,
}

pub(crate) fn encode_candidates(
    encoder: &dyn PairEncoder,
    q: &LabeledQuestion,
) -> Vec<FeatureVector> {
    q.candidates
        .iter()
        .map(|c| encoder.encode(&PairInput::graph(&q.question.tokens, &c.sequence)))
        .collect()
}

/// Index of the highest score; ties go to the earliest position.
pub(crate) fn argmax(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        match best {
            Some(b) if scores[b] >= *s => {}
            _ => best = Some(i),
        }
    }
    best
}

pub(crate) fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    if n == 0 {
        0.0
    } else {
        values.sum::<f64>() / n as f64
    }
}

fn top1_f1(head: &LinearHead, features: &[FeatureVector], q: &LabeledQuestion) -> Result<f64> {
    let scores = features
        .iter()
        .map(|f| linear_score(f, head))
        .collect::<Result<Vec<_>>>()?;
    // Candidates are in generation order, so position ties match the
    // provenance tie-break of `rank_candidates`.
    Ok(argmax(&scores).map_or(0.0, |i| q.candidates[i].f1))
}

/// Trains the ranking head. Each epoch resamples groups, shuffles them and
/// takes one gradient step per group; the epoch with the best validation
/// top-1 F1 is returned (earlier epoch on ties).
pub fn train_ranker(
    train: &[LabeledQuestion],
    valid: &[LabeledQuestion],
    config: &TrainConfig,
    encoder: &dyn PairEncoder,
) -> Result<(RankModel, TrainReport)> {
    if train.is_empty() {
        return Err(Error::Training("empty training set".into()));
    }
    if !train.iter().any(LabeledQuestion::has_positive) {
        return Err(Error::Training(
            "no training question has a positive candidate".into(),
        ));
    }
    let dim = encoder.dimension();
    let train_features: Vec<Vec<FeatureVector>> = train
        .iter()
        .map(|q| encode_candidates(encoder, q))
        .collect();
    let valid_features: Vec<Vec<FeatureVector>> = valid
        .iter()
        .map(|q| encode_candidates(encoder, q))
        .collect();
    let validate = |head: &LinearHead| -> Result<f64> {
        let scores = valid
            .iter()
            .zip(&valid_features)
            .map(|(q, f)| top1_f1(head, f, q))
            .collect::<Result<Vec<_>>>()?;
        Ok(mean(scores.into_iter()))
    };

    let mut head = LinearHead::zeros(dim);
    if config.epochs == 0 {
        let score = validate(&head)?;
        return Ok((
            RankModel { head },
            TrainReport {
                validation_f1: vec![(0, score)],
                best_epoch: 0,
            },
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<(f64, usize, LinearHead)> = None;
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let mut groups: Vec<(usize, TrainingGroup)> = Vec::new();
        for (qi, q) in train.iter().enumerate() {
            for g in sample_groups_with(&q.candidates, config.negatives_per_positive, &mut rng) {
                groups.push((qi, g));
            }
        }
        groups.shuffle(&mut rng);

        for (qi, group) in &groups {
            let q = &train[*qi];
            let feats = &train_features[*qi];
            let batch: Vec<(FeatureVector, Label)> = std::iter::once(group.positive)
                .chain(group.negatives.iter().copied())
                .map(|i| (feats[i].clone(), q.candidates[i].label))
                .collect();
            head = grad_step(&head, &batch, config.learning_rate)?;
        }

        let score = validate(&head)?;
        history.push((epoch, score));
        if best.as_ref().is_none_or(|(b, _, _)| score > *b) {
            best = Some((score, epoch, head.clone()));
        }
    }

    let (_, best_epoch, head) = best.expect("at least one epoch ran");
    Ok((
        RankModel { head },
        TrainReport {
            validation_f1: history,
            best_epoch,
        },
    ))
}

/// A candidate with its stage scores. `combined` is `rank_score +
/// type_score` and is present exactly when `type_score` is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub graph: QueryGraph,
    pub sequence: QueryGraphSequence,
    pub rank_score: f64,
    pub type_score: Option<f64>,
    pub combined: Option<f64>,
}

/// Sorts by score, highest first; equal scores keep provenance order.
pub fn sort_by_rank_score(scored: &mut [ScoredCandidate]) {
    scored.sort_by(|a, b| {
        b.rank_score
            .total_cmp(&a.rank_score)
            .then(a.graph.provenance.cmp(&b.graph.provenance))
    });
}

/// Ranks candidates with externally computed scores, one per graph.
pub fn rank_with_scores(
    candidates: &CandidateSet,
    scores: &[f64],
    names: &DisplayNames,
) -> Vec<ScoredCandidate> {
    assert_eq!(
        candidates.graphs.len(),
        scores.len(),
        "one score per candidate"
    );
    let mut scored: Vec<ScoredCandidate> = candidates
        .graphs
        .iter()
        .zip(scores)
        .map(|(g, &s)| ScoredCandidate {
            graph: g.clone(),
            sequence: serialize(g, names),
            rank_score: s,
            type_score: None,
            combined: None,
        })
        .collect();
    sort_by_rank_score(&mut scored);
    scored
}

pub fn rank_candidates(
    model: &RankModel,
    encoder: &dyn PairEncoder,
    candidates: &CandidateSet,
    names: &DisplayNames,
) -> Result<Vec<ScoredCandidate>> {
    let mut scored = Vec::with_capacity(candidates.len());
    for g in &candidates.graphs {
        let sequence = serialize(g, names);
        let f = encoder.encode(&PairInput::graph(&candidates.question.tokens, &sequence));
        scored.push(ScoredCandidate {
            graph: g.clone(),
            sequence,
            rank_score: linear_score(&f, &model.head)?,
            type_score: None,
            combined: None,
        });
    }
    sort_by_rank_score(&mut scored);
    Ok(scored)
}

/// Ranks already-labeled candidates, returning the question with its
/// candidates in rank order.
pub fn rank_labeled(
    model: &RankModel,
    encoder: &dyn PairEncoder,
    q: &LabeledQuestion,
) -> Result<LabeledQuestion> {
    let features = encode_candidates(encoder, q);
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(features.len());
    for (i, f) in features.iter().enumerate() {
        order.push((linear_score(f, &model.head)?, i));
    }
    order.sort_by(|a, b| {
        b.0.total_cmp(&a.0).then(
            q.candidates[a.1]
                .graph
                .provenance
                .cmp(&q.candidates[b.1].graph.provenance),
        )
    });
    Ok(LabeledQuestion {
        id: q.id.clone(),
        question: q.question.clone(),
        gold: q.gold.clone(),
        candidates: order
            .into_iter()
            .map(|(_, i)| q.candidates[i].clone())
            .collect(),
    })
}

/// The first `min(n, len)` entries.
pub fn top_n<T: Clone>(ranked: &[T], n: usize) -> Vec<T> {
    ranked[..n.min(ranked.len())].to_vec()
}
