//! Second-stage selection over the ranker's top-n: the sequence score is
//! recomputed with a fresh head and summed with a score comparing the
//! question to the answer-type words of the graph's retrieved answers.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kb::{KnowledgeBase, Node, TypeLabel};
use crate::linking::Question;
use crate::matcher::{
    bce_loss, linear_score, sigmoid, FeatureVector, Label, LinearHead, PairEncoder, PairInput,
};
use crate::query_graph::{execute, QueryGraph};
use crate::ranking::{
    argmax, encode_candidates, mean, rank_labeled, LabeledQuestion, RankModel, ScoredCandidate,
    TrainConfig, TrainReport,
};

/// Notable-type labels of a graph's answers, deduplicated and sorted, with
/// their concatenated tokens.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TypeSequence {
    pub labels: Vec<TypeLabel>,
    pub tokens: Vec<String>,
}

impl TypeSequence {
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Literal answers have no notable types and contribute nothing.
pub fn type_sequence_of<'a>(
    kb: &KnowledgeBase,
    answers: impl IntoIterator<Item = &'a Node>,
) -> TypeSequence {
    let labels: BTreeSet<TypeLabel> = answers
        .into_iter()
        .filter_map(Node::as_entity)
        .flat_map(|e| kb.notable_types(e).iter().cloned())
        .collect();
    let tokens = labels
        .iter()
        .flat_map(|l| l.tokens().map(str::to_string))
        .collect();
    TypeSequence {
        labels: labels.into_iter().collect(),
        tokens,
    }
}

pub fn answer_type_sequence(kb: &KnowledgeBase, g: &QueryGraph) -> TypeSequence {
    type_sequence_of(kb, &execute(kb, g))
}

/// Features of the type channel. An empty type sequence maps to the zero
/// vector, so only the bias scores it.
pub fn type_features(
    encoder: &dyn PairEncoder,
    question: &[String],
    t: &TypeSequence,
) -> FeatureVector {
    if t.is_empty() {
        FeatureVector::zeros(encoder.dimension())
    } else {
        encoder.encode(&PairInput::plain(question, &t.tokens))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankModel {
    pub seq_head: LinearHead,
    pub type_head: LinearHead,
}

impl RerankModel {
    pub fn zeros(dimension: usize) -> Self {
        RerankModel {
            seq_head: LinearHead::zeros(dimension),
            type_head: LinearHead::zeros(dimension),
        }
    }

    /// Sequence head copied from a ranker, type channel switched off.
    pub fn from_ranker(rank: &RankModel) -> Self {
        RerankModel {
            seq_head: rank.head.clone(),
            type_head: LinearHead::zeros(rank.head.dimension()),
        }
    }

    pub fn dimension(&self) -> usize {
        self.seq_head.dimension()
    }

    pub fn is_finite(&self) -> bool {
        self.seq_head.is_finite() && self.type_head.is_finite()
    }
}

pub fn type_score(
    model: &RerankModel,
    encoder: &dyn PairEncoder,
    q: &Question,
    t: &TypeSequence,
) -> Result<f64> {
    linear_score(&type_features(encoder, &q.tokens, t), &model.type_head)
}

pub fn combine_scores(s_prime: f64, s_double_prime: f64) -> f64 {
    s_prime + s_double_prime
}

/// Sequence and type features of one candidate with its label.
#[derive(Debug, Clone, PartialEq)]
pub struct JointExample {
    pub seq: FeatureVector,
    pub types: FeatureVector,
    pub label: Label,
}

fn joint_score(model: &RerankModel, ex: &JointExample) -> Result<f64> {
    Ok(combine_scores(
        linear_score(&ex.seq, &model.seq_head)?,
        linear_score(&ex.types, &model.type_head)?,
    ))
}

/// Mean `bce_loss(sigmoid(s*), y)` over a batch.
pub fn rerank_loss(model: &RerankModel, batch: &[JointExample]) -> Result<f64> {
    let mut total = 0.0;
    for ex in batch {
        total += bce_loss(sigmoid(joint_score(model, ex)?), ex.label);
    }
    Ok(total / batch.len() as f64)
}

/// Gradient of [`rerank_loss`] for both heads.
pub fn rerank_gradient(model: &RerankModel, batch: &[JointExample]) -> Result<RerankModel> {
    let mut grad = RerankModel::zeros(model.dimension());
    let n = batch.len() as f64;
    for ex in batch {
        let residual = sigmoid(joint_score(model, ex)?) - ex.label.value();
        for (g, x) in grad.seq_head.weights.iter_mut().zip(&ex.seq.0) {
            *g += residual * x / n;
        }
        grad.seq_head.bias += residual / n;
        for (g, x) in grad.type_head.weights.iter_mut().zip(&ex.types.0) {
            *g += residual * x / n;
        }
        grad.type_head.bias += residual / n;
    }
    Ok(grad)
}

fn apply(head: &mut LinearHead, grad: &LinearHead, lr: f64) {
    for (w, g) in head.weights.iter_mut().zip(&grad.weights) {
        *w -= lr * g;
    }
    head.bias -= lr * grad.bias;
}

/// One joint step. With `use_type_feature` off the type head is left
/// untouched.
pub fn rerank_step(
    model: &RerankModel,
    batch: &[JointExample],
    lr: f64,
    use_type_feature: bool,
) -> Result<RerankModel> {
    if batch.is_empty() {
        return Err(Error::Training("empty batch".into()));
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::Training(format!(
            "learning rate must be positive, got {lr}"
        )));
    }
    let grad = rerank_gradient(model, batch)?;
    if !grad.is_finite() {
        return Err(Error::Training("non-finite gradient".into()));
    }
    let mut next = model.clone();
    apply(&mut next.seq_head, &grad.seq_head, lr);
    if use_type_feature {
        apply(&mut next.type_head, &grad.type_head, lr);
    }
    Ok(next)
}

/// Ranks each question's candidates and keeps the first `n`, labels
/// unchanged. Lists without a positive are kept.
pub fn build_rerank_training(
    rank_model: &RankModel,
    encoder: &dyn PairEncoder,
    questions: &[LabeledQuestion],
    n: usize,
) -> Result<Vec<LabeledQuestion>> {
    questions
        .iter()
        .map(|q| {
            let mut ranked = rank_labeled(rank_model, encoder, q)?;
            ranked.candidates.truncate(n);
            Ok(ranked)
        })
        .collect()
}

fn joint_examples(
    encoder: &dyn PairEncoder,
    kb: &KnowledgeBase,
    q: &LabeledQuestion,
) -> Vec<JointExample> {
    let seq = encode_candidates(encoder, q);
    seq.into_iter()
        .zip(&q.candidates)
        .map(|(seq, c)| JointExample {
            seq,
            types: type_features(
                encoder,
                &q.question.tokens,
                &type_sequence_of(kb, &c.answers),
            ),
            label: c.label,
        })
        .collect()
}

fn top1_f1(model: &RerankModel, examples: &[JointExample], q: &LabeledQuestion) -> Result<f64> {
    let scores = examples
        .iter()
        .map(|ex| joint_score(model, ex))
        .collect::<Result<Vec<_>>>()?;
    Ok(argmax(&scores).map_or(0.0, |i| q.candidates[i].f1))
}

/// Trains both heads from scratch on top-n lists (in rank order). Each
/// epoch visits the questions in shuffled order and takes one joint step
/// over each non-empty list; the epoch with the best validation top-1 F1
/// after reranking is kept.
pub fn train_reranker(
    train: &[LabeledQuestion],
    valid: &[LabeledQuestion],
    config: &TrainConfig,
    encoder: &dyn PairEncoder,
    kb: &KnowledgeBase,
    use_type_feature: bool,
) -> Result<(RerankModel, TrainReport)> {
    let train: Vec<(&LabeledQuestion, Vec<JointExample>)> = train
        .iter()
        .filter(|q| !q.candidates.is_empty())
        .map(|q| (q, joint_examples(encoder, kb, q)))
        .collect();
    if train.is_empty() {
        return Err(Error::Training("empty rerank training set".into()));
    }
    let valid: Vec<(&LabeledQuestion, Vec<JointExample>)> = valid
        .iter()
        .map(|q| (q, joint_examples(encoder, kb, q)))
        .collect();
    let validate = |m: &RerankModel| -> Result<f64> {
        let scores = valid
            .iter()
            .map(|(q, ex)| top1_f1(m, ex, q))
            .collect::<Result<Vec<_>>>()?;
        Ok(mean(scores.into_iter()))
    };

    let mut model = RerankModel::zeros(encoder.dimension());
    if config.epochs == 0 {
        let score = validate(&model)?;
        return Ok((
            model,
            TrainReport {
                validation_f1: vec![(0, score)],
                best_epoch: 0,
            },
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best: Option<(f64, usize, RerankModel)> = None;
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            model = rerank_step(&model, &train[i].1, config.learning_rate, use_type_feature)?;
        }
        let score = validate(&model)?;
        history.push((epoch, score));
        if best.as_ref().is_none_or(|(b, _, _)| score > *b) {
            best = Some((score, epoch, model.clone()));
        }
    }
    let (_, best_epoch, model) = best.expect("at least one epoch ran");
    Ok((
        model,
        TrainReport {
            validation_f1: history,
            best_epoch,
        },
    ))
}

/// Rescores a top-n list: `rank_score` is recomputed with the sequence
/// head, `type_score` comes from the answers' types, and the list is sorted
/// by their sum with ties kept in incoming order.
pub fn rerank(
    model: &RerankModel,
    topn: &[ScoredCandidate],
    q: &Question,
    kb: &KnowledgeBase,
    encoder: &dyn PairEncoder,
) -> Result<Vec<ScoredCandidate>> {
    let mut out = Vec::with_capacity(topn.len());
    for c in topn {
        let f = encoder.encode(&PairInput::graph(&q.tokens, &c.sequence));
        let s_prime = linear_score(&f, &model.seq_head)?;
        let s_double = type_score(model, encoder, q, &answer_type_sequence(kb, &c.graph))?;
        out.push(ScoredCandidate {
            rank_score: s_prime,
            type_score: Some(s_double),
            combined: Some(combine_scores(s_prime, s_double)),
            ..c.clone()
        });
    }
    // Stable sort keeps incoming order among equal scores.
    out.sort_by(|a, b| {
        let (a, b) = (
            a.combined.expect("set above"),
            b.combined.expect("set above"),
        );
        b.total_cmp(&a)
    });
    Ok(out)
}
