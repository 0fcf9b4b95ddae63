//! Client for an external scoring process.
//!
//! The process reads newline-delimited JSON requests
//! `{"id": .., "question": .., "sequence": ..}` on stdin and writes one
//! `{"id": .., "score": ..}` line per request on stdout. Responses may come
//! back in any order; they are matched to requests by id.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub id: String,
    pub question: String,
    pub sequence: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub id: String,
    pub score: f64,
}

/// Protocol client over any line-oriented reader/writer pair.
pub struct ScorerClient<R, W> {
    reader: R,
    writer: W,
    next_id: u64,
}

impl<R: BufRead, W: Write> ScorerClient<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        ScorerClient {
            reader,
            writer,
            next_id: 0,
        }
    }

    /// Scores every `(question, sequence)` pair, returning scores in input
    /// order.
    pub fn score_all(&mut self, pairs: &[(String, String)]) -> Result<Vec<f64>> {
        let mut slots: HashMap<String, usize> = HashMap::with_capacity(pairs.len());
        for (i, (question, sequence)) in pairs.iter().enumerate() {
            let id = format!("r{}", self.next_id);
            self.next_id += 1;
            let req = ScoreRequest {
                id: id.clone(),
                question: question.clone(),
                sequence: sequence.clone(),
            };
            serde_json::to_writer(&mut self.writer, &req)?;
            self.writer
                .write_all(b"\n")
                .map_err(|e| Error::Scorer(format!("write failed: {e}")))?;
            slots.insert(id, i);
        }
        self.writer
            .flush()
            .map_err(|e| Error::Scorer(format!("flush failed: {e}")))?;

        let mut scores: Vec<Option<f64>> = vec![None; pairs.len()];
        let mut line = String::new();
        for _ in 0..pairs.len() {
            line.clear();
            let n = self
                .reader
                .read_line(&mut line)
                .map_err(|e| Error::Scorer(format!("read failed: {e}")))?;
            if n == 0 {
                return Err(Error::Scorer("scorer closed its output early".into()));
            }
            let resp: ScoreResponse = serde_json::from_str(line.trim_end()).map_err(|e| {
                Error::Scorer(format!("malformed response {:?}: {e}", line.trim_end()))
            })?;
            let Some(&slot) = slots.get(&resp.id) else {
                return Err(Error::Scorer(format!(
                    "response for unknown id {:?}",
                    resp.id
                )));
            };
            if scores[slot].replace(resp.score).is_some() {
                return Err(Error::Scorer(format!(
                    "duplicate response for id {:?}",
                    resp.id
                )));
            }
            if !resp.score.is_finite() {
                return Err(Error::Scorer(format!(
                    "non-finite score for id {:?}",
                    resp.id
                )));
            }
        }
        Ok(scores
            .into_iter()
            .map(|s| s.expect("every slot filled"))
            .collect())
    }
}

/// A spawned scorer process.
pub struct ProcessScorer {
    child: Child,
    client: ScorerClient<BufReader<ChildStdout>, ChildStdin>,
}

impl ProcessScorer {
    /// Runs `command` through `sh -c`.
    pub fn spawn(command: &str) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Scorer(format!("cannot start {command:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        Ok(ProcessScorer {
            child,
            client: ScorerClient::new(BufReader::new(stdout), stdin),
        })
    }

    pub fn score_all(&mut self, pairs: &[(String, String)]) -> Result<Vec<f64>> {
        self.client.score_all(pairs)
    }
}

impl Drop for ProcessScorer {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn pairs() -> Vec<(String, String)> {
        vec![
            ("who is leia".into(), "leia actor a".into()),
            ("who is leia".into(), "star wars award a".into()),
        ]
    }

    #[test]
    fn out_of_order_responses_are_matched_by_id() {
        let responses = "{\"id\":\"r1\",\"score\":-0.5}\n{\"id\":\"r0\",\"score\":2.0}\n";
        let mut sent = Vec::new();
        let mut client = ScorerClient::new(Cursor::new(responses), &mut sent);
        assert_eq!(client.score_all(&pairs()).unwrap(), vec![2.0, -0.5]);
        let sent = String::from_utf8(sent).unwrap();
        let reqs: Vec<ScoreRequest> = sent
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(reqs[0].id, "r0");
        assert_eq!(reqs[1].sequence, "star wars award a");
    }

    #[test]
    fn protocol_errors() {
        let bad = [
            "{\"id\":\"r0\",\"score\":1}\n",
            "{\"id\":\"r0\",\"score\":1}\n{\"id\":\"r0\",\"score\":1}\n",
            "{\"id\":\"zz\",\"score\":1}\n{\"id\":\"r0\",\"score\":1}\n",
            "not json\n",
        ];
        for responses in bad {
            let mut client = ScorerClient::new(Cursor::new(responses), Vec::new());
            assert!(
                matches!(client.score_all(&pairs()), Err(Error::Scorer(_))),
                "{responses}"
            );
        }
    }

    #[test]
    fn spawned_process_round_trip() {
        // Echo back a fixed score per id, reversing the order.
        let script = r#"python3 -c '
import json, sys
reqs = [json.loads(sys.stdin.readline()) for _ in range(2)]
for r in reversed(reqs):
    print(json.dumps({"id": r["id"], "score": len(r["sequence"])}), flush=True)
'"#;
        let Ok(mut scorer) = ProcessScorer::spawn(script) else {
            return;
        };
        let scores = scorer.score_all(&pairs()).unwrap();
        assert_eq!(scores, vec![12.0, 17.0]);
    }
}
