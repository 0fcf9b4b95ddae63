//! Word vectors in the usual text interchange format: a `count dimension`
//! header line followed by `word v1 .. vd` lines.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kb::read_file;

#[derive(Debug, Clone)]
pub struct WordEmbeddings {
    dimension: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl WordEmbeddings {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        WordEmbeddings {
            dimension,
            vectors: HashMap::new(),
        }
    }

    pub fn insert(&mut self, word: &str, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dimension {
            return Err(Error::Dimension {
                expected: self.dimension,
                found: vector.len(),
            });
        }
        self.vectors.insert(word.to_lowercase(), vector);
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = read_file(path)?;
        let mut lines = content.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "missing `count dimension` header"))?;
        let header: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(path, 1, "header must be `count dimension`"))?;
        let &[count, dimension] = header.as_slice() else {
            return Err(Error::parse(path, 1, "header must be `count dimension`"));
        };
        if dimension == 0 {
            return Err(Error::parse(path, 1, "dimension must be positive"));
        }

        let mut emb = WordEmbeddings::new(dimension);
        for (i, line) in lines {
            let line_no = i + 1;
            let mut parts = line.split_whitespace();
            let Some(word) = parts.next() else { continue };
            let vector: Vec<f64> = parts
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(path, line_no, "non-numeric vector component"))?;
            if vector.len() != dimension {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("expected {dimension} components, found {}", vector.len()),
                ));
            }
            if vector.iter().any(|v| !v.is_finite()) {
                return Err(Error::parse(path, line_no, "non-finite vector component"));
            }
            emb.vectors.insert(word.to_lowercase(), vector);
        }
        if emb.vectors.len() != count {
            return Err(Error::parse(
                path,
                1,
                format!(
                    "header announces {count} vectors, file has {}",
                    emb.vectors.len()
                ),
            ));
        }
        Ok(emb)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    /// Mean of the token vectors; unknown tokens contribute zero vectors.
    /// An empty token list gives the zero vector.
    pub fn mean<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<f64> {
        let mut acc = vec![0.0; self.dimension];
        if tokens.is_empty() {
            return acc;
        }
        for t in tokens {
            if let Some(v) = self.get(t.as_ref()) {
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += x;
                }
            }
        }
        let n = tokens.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    /// Writes the text format; words are sorted so output is stable.
    pub fn to_text(&self) -> String {
        let mut words: Vec<&String> = self.vectors.keys().collect();
        words.sort();
        let mut out = format!("{} {}\n", self.vectors.len(), self.dimension);
        for w in words {
            out.push_str(w);
            for v in &self.vectors[w] {
                out.push(' ');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Cosine similarity; 0 when either side has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn load_round_trip() {
        let mut emb = WordEmbeddings::new(2);
        emb.insert("who", vec![1.0, 0.5]).unwrap();
        emb.insert("actor", vec![-0.25, 3.0]).unwrap();
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(emb.to_text().as_bytes()).unwrap();
        let back = WordEmbeddings::load(f.path()).unwrap();
        assert_eq!(back.dimension(), 2);
        assert_eq!(back.get("actor"), Some(&[-0.25, 3.0][..]));
        assert_eq!(back.to_text(), emb.to_text());
    }

    #[test]
    fn load_rejects_bad_rows() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(b"1 2\nwho 1.0\n").unwrap();
        assert!(matches!(
            WordEmbeddings::load(f.path()),
            Err(Error::Parse { line: 2, .. })
        ));
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(b"2 2\nwho 1.0 0.0\n").unwrap();
        assert!(WordEmbeddings::load(f.path()).is_err());
    }

    #[test]
    fn unknown_words_are_zero() {
        let mut emb = WordEmbeddings::new(2);
        emb.insert("a", vec![2.0, 0.0]).unwrap();
        assert_eq!(emb.mean(&["a", "zzz"]), vec![1.0, 0.0]);
        assert_eq!(emb.mean::<&str>(&[]), vec![0.0, 0.0]);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), 0.0);
        assert!((cosine(&[1.0, 1.0], &[2.0, 2.0]) - 1.0).abs() < 1e-15);
    }
}
