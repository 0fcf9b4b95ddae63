//! Question/sequence matching: a pair encoder producing a fixed-size feature
//! vector, a linear head mapping it to a score, and the sigmoid
//! cross-entropy objective used to train the head.
//!
//! The built-in [`BaselineEncoder`] is a deterministic eight-feature
//! featurizer. Anything implementing [`PairEncoder`] can replace it; a
//! process speaking the [`external`] protocol can replace the whole scorer.

pub mod external;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::embedding::{cosine, WordEmbeddings};
use crate::error::{Error, Result};
use crate::query_graph::QueryGraphSequence;

/// Dimension of the baseline feature vector.
pub const FEATURE_DIM: usize = 8;

/// Clamp applied to probabilities before taking logs.
pub const PROB_EPSILON: f64 = 1e-12;

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "did", "do", "does", "for", "from", "has",
    "have", "how", "in", "is", "it", "its", "of", "on", "or", "that", "the", "this", "to", "was",
    "were", "what", "when", "where", "which", "who", "whom", "whose", "why", "with",
];

/// Structural facts about a verbalized graph that the token list alone
/// does not carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SequenceShape {
    pub two_hop: bool,
    pub constraint_sections: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct PairInput<'a> {
    pub question: &'a [String],
    pub sequence: &'a [String],
    pub shape: Option<SequenceShape>,
}

impl<'a> PairInput<'a> {
    /// A question paired with a plain token sequence (e.g. answer types).
    pub fn plain(question: &'a [String], sequence: &'a [String]) -> Self {
        PairInput {
            question,
            sequence,
            shape: None,
        }
    }

    pub fn graph(question: &'a [String], seq: &'a QueryGraphSequence) -> Self {
        PairInput {
            question,
            sequence: &seq.tokens,
            shape: Some(SequenceShape {
                two_hop: seq.two_hop,
                constraint_sections: seq.constraint_sections(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn zeros(dimension: usize) -> Self {
        FeatureVector(vec![0.0; dimension])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Maps a (question, sequence) pair to a feature vector. Implementations
/// must be pure: equal inputs give bit-identical outputs.
pub trait PairEncoder: Sync {
    fn dimension(&self) -> usize;
    fn encode(&self, input: &PairInput<'_>) -> FeatureVector;
}

/// Features, in order:
/// 1. cosine of mean embeddings of question and sequence
/// 2. Jaccard overlap of token sets
/// 3. share of question content words found in the sequence
/// 4. share of sequence words found in the question
/// 5. |m - n| / (m + n) for token counts m, n
/// 6. 1 if the sequence verbalizes a two-hop main path
/// 7. number of constraint sub-paths / 4
/// 8. constant 1
#[derive(Debug, Clone, Copy)]
pub struct BaselineEncoder<'a> {
    embeddings: &'a WordEmbeddings,
}

impl<'a> BaselineEncoder<'a> {
    pub fn new(embeddings: &'a WordEmbeddings) -> Self {
        BaselineEncoder { embeddings }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl PairEncoder for BaselineEncoder<'_> {
    fn dimension(&self) -> usize {
        FEATURE_DIM
    }

    fn encode(&self, input: &PairInput<'_>) -> FeatureVector {
        let q = input.question;
        let s = input.sequence;
        let q_set: HashSet<&str> = q.iter().map(String::as_str).collect();
        let s_set: HashSet<&str> = s.iter().map(String::as_str).collect();

        let cos = cosine(&self.embeddings.mean(q), &self.embeddings.mean(s));
        let shared = q_set.intersection(&s_set).count();
        let jaccard = ratio(shared, q_set.union(&s_set).count());
        let content: HashSet<&str> = q_set
            .iter()
            .copied()
            .filter(|w| !STOPWORDS.contains(w))
            .collect();
        let content_covered = ratio(
            content.iter().filter(|w| s_set.contains(*w)).count(),
            content.len(),
        );
        let seq_covered = ratio(shared, s_set.len());
        let length_gap = ratio(q.len().abs_diff(s.len()), q.len() + s.len());
        let (two_hop, constraints) = match input.shape {
            Some(shape) => (
                f64::from(u8::from(shape.two_hop)),
                shape.constraint_sections as f64 / 4.0,
            ),
            None => (0.0, 0.0),
        };

        FeatureVector(vec![
            cos,
            jaccard,
            content_covered,
            seq_covered,
            length_gap,
            two_hop,
            constraints,
            1.0,
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearHead {
    pub fn zeros(dimension: usize) -> Self {
        LinearHead {
            weights: vec![0.0; dimension],
            bias: 0.0,
        }
    }

    pub fn dimension(&self) -> usize {
        self.weights.len()
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }
}

/// `f · w + b`.
pub fn linear_score(f: &FeatureVector, head: &LinearHead) -> Result<f64> {
    if f.len() != head.dimension() {
        return Err(Error::Dimension {
            expected: head.dimension(),
            found: f.len(),
        });
    }
    Ok(f.0
        .iter()
        .zip(&head.weights)
        .map(|(x, w)| x * w)
        .sum::<f64>()
        + head.bias)
}

/// Logistic function, split on sign so neither branch overflows.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn value(self) -> f64 {
        match self {
            Label::Negative => 0.0,
            Label::Positive => 1.0,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l.value() as u8
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(Label::Negative),
            1 => Ok(Label::Positive),
            other => Err(format!("label must be 0 or 1, got {other}")),
        }
    }
}

/// Binary cross-entropy of probability `s` against label `y`, with `s`
/// clamped to `[ε, 1 − ε]`.
pub fn bce_loss(s: f64, y: Label) -> f64 {
    let s = s.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON);
    let y = y.value();
    -(y * s.ln() + (1.0 - y) * (1.0 - s).ln())
}

/// Mean `bce_loss(sigmoid(f · w + b), y)` over a batch.
pub fn mean_loss(head: &LinearHead, batch: &[(FeatureVector, Label)]) -> Result<f64> {
    let mut total = 0.0;
    for (f, y) in batch {
        total += bce_loss(sigmoid(linear_score(f, head)?), *y);
    }
    Ok(total / batch.len() as f64)
}

/// Gradient of [`mean_loss`]: per example `(s − y) · f` for the weights and
/// `s − y` for the bias, averaged.
pub fn loss_gradient(head: &LinearHead, batch: &[(FeatureVector, Label)]) -> Result<LinearHead> {
    let mut grad = LinearHead::zeros(head.dimension());
    let n = batch.len() as f64;
    for (f, y) in batch {
        let residual = sigmoid(linear_score(f, head)?) - y.value();
        for (g, x) in grad.weights.iter_mut().zip(&f.0) {
            *g += residual * x / n;
        }
        grad.bias += residual / n;
    }
    Ok(grad)
}

/// One full-batch gradient-descent step on the mean loss.
pub fn grad_step(
    head: &LinearHead,
    batch: &[(FeatureVector, Label)],
    lr: f64,
) -> Result<LinearHead> {
    if batch.is_empty() {
        return Err(Error::Training("empty batch".into()));
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::Training(format!(
            "learning rate must be positive, got {lr}"
        )));
    }
    let grad = loss_gradient(head, batch)?;
    if !grad.is_finite() {
        return Err(Error::Training("non-finite gradient".into()));
    }
    let mut next = head.clone();
    for (w, g) in next.weights.iter_mut().zip(&grad.weights) {
        *w -= lr * g;
    }
    next.bias -= lr * grad.bias;
    Ok(next)
}
