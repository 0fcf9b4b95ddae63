//! Answer-set precision/recall/F1, their averages, and the oracle top-n
//! curve.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// Lowercased with whitespace runs collapsed.
pub fn normalize_answer(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

fn normalized_set<S: AsRef<str>>(items: &[S]) -> BTreeSet<String> {
    items.iter().map(|s| normalize_answer(s.as_ref())).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 of a predicted answer set against gold.
/// Empty predictions score (0, 0, 0); empty gold gives recall 0.
pub fn question_prf<P: AsRef<str>, G: AsRef<str>>(predicted: &[P], gold: &[G]) -> Prf {
    let pred = normalized_set(predicted);
    let gold = normalized_set(gold);
    let hits = pred.intersection(&gold).count() as f64;
    let precision = if pred.is_empty() {
        0.0
    } else {
        hits / pred.len() as f64
    };
    let recall = if gold.is_empty() {
        0.0
    } else {
        hits / gold.len() as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf {
        precision,
        recall,
        f1,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub id: String,
    pub predicted: Vec<String>,
    pub gold: Vec<String>,
    pub prf: Prf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub avg_precision: f64,
    pub avg_recall: f64,
    pub avg_f1: f64,
    pub records: Vec<QuestionRecord>,
}

/// Scores each `(id, predicted, gold)` triple and averages over all of them;
/// unanswered questions count as zeros.
pub fn evaluate(
    outputs: impl IntoIterator<Item = (String, Vec<String>, Vec<String>)>,
) -> EvalResult {
    let records: Vec<QuestionRecord> = outputs
        .into_iter()
        .map(|(id, predicted, gold)| {
            let prf = question_prf(&predicted, &gold);
            QuestionRecord {
                id,
                predicted,
                gold,
                prf,
            }
        })
        .collect();
    let mean = |f: fn(&Prf) -> f64| {
        if records.is_empty() {
            0.0
        } else {
            records.iter().map(|r| f(&r.prf)).sum::<f64>() / records.len() as f64
        }
    };
    EvalResult {
        avg_precision: mean(|p| p.precision),
        avg_recall: mean(|p| p.recall),
        avg_f1: mean(|p| p.f1),
        records,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCurve {
    pub points: Vec<(usize, f64)>,
}

impl OracleCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,oracle_f1\n");
        for (n, f1) in &self.points {
            out.push_str(&format!("{n},{f1}\n"));
        }
        out
    }
}

/// For n = 1..=n_max, the average over questions of the best candidate F1
/// within the first n ranked candidates. `ranked_f1` holds each question's
/// candidate F1 values in ranked order; an empty list scores 0.
pub fn oracle_curve(ranked_f1: &[Vec<f64>], n_max: usize) -> OracleCurve {
    // Running prefix maxima, one per question.
    let mut best = vec![0.0f64; ranked_f1.len()];
    let mut points = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        for (b, list) in best.iter_mut().zip(ranked_f1) {
            if let Some(&f) = list.get(n - 1) {
                *b = b.max(f);
            }
        }
        let avg = if best.is_empty() {
            0.0
        } else {
            best.iter().sum::<f64>() / best.len() as f64
        };
        points.push((n, avg));
    }
    OracleCurve { points }
}

/// Average over questions of the best F1 among all candidates.
pub fn full_oracle(ranked_f1: &[Vec<f64>]) -> f64 {
    if ranked_f1.is_empty() {
        return 0.0;
    }
    ranked_f1
        .iter()
        .map(|l| l.iter().copied().fold(0.0, f64::max))
        .sum::<f64>()
        / ranked_f1.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prf_cases() {
        assert_eq!(
            question_prf(&["a"], &["a"]),
            Prf {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0
            }
        );
        let p = question_prf(&["a"], &["a", "b"]);
        assert_eq!((p.precision, p.recall), (1.0, 0.5));
        assert!((p.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(question_prf(&["c"], &["a", "b"]), Prf::default());
        assert_eq!(question_prf::<&str, &str>(&[], &["a"]), Prf::default());
        assert_eq!(
            question_prf(&["Carrie  Fisher"], &["carrie fisher"]).f1,
            1.0
        );
    }

    #[test]
    fn evaluate_averages() {
        let perfect =
            evaluate((0..4).map(|i| (i.to_string(), vec!["x".to_string()], vec!["x".to_string()])));
        assert_eq!(
            (perfect.avg_precision, perfect.avg_recall, perfect.avg_f1),
            (1.0, 1.0, 1.0)
        );

        let half = evaluate((0..4).map(|i| {
            let pred = if i % 2 == 0 {
                vec!["x".to_string()]
            } else {
                vec![]
            };
            (i.to_string(), pred, vec!["x".to_string()])
        }));
        assert_eq!(half.avg_f1, 0.5);
    }

    #[test]
    fn oracle_curve_prefix_max() {
        let lists = vec![vec![0.0, 1.0, 0.5], vec![0.4], vec![]];
        let curve = oracle_curve(&lists, 4);
        let ys: Vec<f64> = curve.points.iter().map(|p| p.1).collect();
        assert_eq!(ys, vec![0.4 / 3.0, 1.4 / 3.0, 1.4 / 3.0, 1.4 / 3.0]);
        assert_eq!(*ys.last().unwrap(), full_oracle(&lists));
        assert_eq!(curve.to_csv().lines().next(), Some("n,oracle_f1"));
    }
}
