//! Focus-node linking: entity mentions, type words, time words and ordinal
//! words found in a question.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::{cosine, WordEmbeddings};
use crate::error::{Error, Result};
use crate::kb::{read_file, split_fields, Date, EntityId, TypeLabel};
use crate::text::tokenize;

/// Longest sub-sequence considered as a type mention.
pub const MAX_TYPE_MENTION_LEN: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub raw: String,
    pub tokens: Vec<String>,
}

impl Question {
    pub fn new(raw: &str) -> Self {
        Question {
            raw: raw.to_string(),
            tokens: tokenize(raw),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mention {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

impl Mention {
    pub fn new(tokens: &[String], start: usize, end: usize) -> Self {
        debug_assert!(start < end && end <= tokens.len());
        Mention {
            start,
            end,
            text: tokens[start..end].join(" "),
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn overlaps(&self, other: &Mention) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityLink {
    pub mention: Mention,
    pub entity: EntityId,
    pub link_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeLink {
    pub mention: Mention,
    pub type_label: TypeLabel,
    pub similarity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparator {
    Equals,
    Before,
    After,
}

impl Comparator {
    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            Comparator::Equals => ord == Ordering::Equal,
            Comparator::Before => ord == Ordering::Less,
            Comparator::After => ord == Ordering::Greater,
        }
    }

    pub fn word(self) -> &'static str {
        match self {
            Comparator::Equals => "in",
            Comparator::Before => "before",
            Comparator::After => "after",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeLink {
    pub mention: Mention,
    pub value: Date,
    pub comparator: Comparator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Max,
    Min,
}

impl Direction {
    pub fn word(self) -> &'static str {
        match self {
            Direction::Max => "max",
            Direction::Min => "min",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrdinalLink {
    pub mention: Mention,
    pub rank: u32,
    pub direction: Direction,
    pub trigger: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FocusLinks {
    pub entities: Vec<EntityLink>,
    pub types: Vec<TypeLink>,
    pub times: Vec<TimeLink>,
    pub ordinals: Vec<OrdinalLink>,
}

/// Alias to entity lexicon; aliases are stored as token sequences.
#[derive(Debug, Clone, Default)]
pub struct AliasLexicon {
    aliases: HashMap<Vec<String>, Vec<EntityId>>,
    max_len: usize,
}

impl AliasLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, alias: &str, entity: EntityId) {
        let tokens = tokenize(alias);
        if tokens.is_empty() {
            return;
        }
        self.max_len = self.max_len.max(tokens.len());
        let entities = self.aliases.entry(tokens).or_default();
        if !entities.contains(&entity) {
            entities.push(entity);
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = read_file(path)?;
        let mut lex = AliasLexicon::new();
        for (i, line) in content.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields = split_fields(path, i + 1, line, 2, 2)?;
            lex.insert(fields[0], EntityId::new(fields[1]));
        }
        Ok(lex)
    }

    pub fn lookup(&self, tokens: &[String]) -> Option<&[EntityId]> {
        self.aliases.get(tokens).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.aliases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aliases.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub struct OrdinalDictionary {
    words: HashMap<String, u32>,
}

impl OrdinalDictionary {
    pub fn new(entries: impl IntoIterator<Item = (String, u32)>) -> Self {
        OrdinalDictionary {
            words: entries
                .into_iter()
                .map(|(w, r)| (w.to_lowercase(), r))
                .collect(),
        }
    }

    /// `first`..`tenth`.
    pub fn english() -> Self {
        const WORDS: [&str; 10] = [
            "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth",
            "tenth",
        ];
        Self::new(WORDS.iter().zip(1..).map(|(w, r)| (w.to_string(), r)))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = read_file(path)?;
        let mut words = HashMap::new();
        for (i, line) in content.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields = split_fields(path, i + 1, line, 2, 2)?;
            let rank: u32 = fields[1]
                .parse()
                .ok()
                .filter(|&r| r >= 1)
                .ok_or_else(|| Error::parse(path, i + 1, "rank must be a positive integer"))?;
            words.insert(fields[0].to_lowercase(), rank);
        }
        Ok(OrdinalDictionary { words })
    }

    pub fn rank(&self, word: &str) -> Option<u32> {
        self.words.get(word).copied()
    }
}

/// Longest-match alias linking. Every alias occurrence is a candidate span;
/// overlapping spans are resolved longest first, then leftmost. Each
/// surviving span yields one link per entity registered for the alias.
pub fn link_entities(q: &Question, lexicon: &AliasLexicon) -> Vec<EntityLink> {
    let tokens = &q.tokens;
    let mut spans = Vec::new();
    for start in 0..tokens.len() {
        let longest = lexicon.max_len.min(tokens.len() - start);
        for len in 1..=longest {
            if lexicon.lookup(&tokens[start..start + len]).is_some() {
                spans.push((start, start + len));
            }
        }
    }
    spans.sort_by(|a, b| (b.1 - b.0).cmp(&(a.1 - a.0)).then(a.0.cmp(&b.0)));

    let mut chosen: Vec<(usize, usize)> = Vec::new();
    for (s, e) in spans {
        if chosen.iter().all(|&(cs, ce)| e <= cs || ce <= s) {
            chosen.push((s, e));
        }
    }
    chosen.sort();

    let mut links = Vec::new();
    for (s, e) in chosen {
        let mention = Mention::new(tokens, s, e);
        let alias_len = e - s;
        for entity in lexicon.lookup(&tokens[s..e]).unwrap_or_default() {
            links.push(EntityLink {
                mention: mention.clone(),
                entity: entity.clone(),
                link_score: mention.len() as f64 / alias_len as f64,
            });
        }
    }
    links
}

/// Top-`k` (mention, type) pairs by cosine between the mean embedding of a
/// 1..=3 token sub-sequence and the mean embedding of the type label.
/// Ties go to the earlier mention start, then the lexicographically
/// smaller label, then the shorter mention.
pub fn link_types(
    q: &Question,
    emb: &WordEmbeddings,
    kb_types: &[TypeLabel],
    k: usize,
) -> Vec<TypeLink> {
    let type_vectors: Vec<Vec<f64>> = kb_types
        .iter()
        .map(|t| emb.mean(&t.tokens().collect::<Vec<_>>()))
        .collect();

    let mut pairs = Vec::new();
    let m = q.tokens.len();
    for start in 0..m {
        for end in start + 1..=(start + MAX_TYPE_MENTION_LEN).min(m) {
            let mention_vec = emb.mean(&q.tokens[start..end]);
            for (label, tv) in kb_types.iter().zip(&type_vectors) {
                pairs.push(TypeLink {
                    mention: Mention::new(&q.tokens, start, end),
                    type_label: label.clone(),
                    similarity: cosine(&mention_vec, tv),
                });
            }
        }
    }
    pairs.sort_by(type_link_order);
    pairs.truncate(k);
    pairs
}

pub(crate) fn type_link_order(a: &TypeLink, b: &TypeLink) -> Ordering {
    b.similarity
        .total_cmp(&a.similarity)
        .then(a.mention.start.cmp(&b.mention.start))
        .then(a.type_label.cmp(&b.type_label))
        .then(a.mention.end.cmp(&b.mention.end))
}

fn year_token(token: &str) -> Option<i32> {
    if token.len() != 4 || !token.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let year: i32 = token.parse().ok()?;
    (1000..=2999).contains(&year).then_some(year)
}

/// Four-digit years in 1000..=2999; the preceding word picks the comparator.
pub fn link_times(q: &Question) -> Vec<TimeLink> {
    let mut links = Vec::new();
    for (i, token) in q.tokens.iter().enumerate() {
        let Some(year) = year_token(token) else {
            continue;
        };
        let comparator = match i.checked_sub(1).map(|p| q.tokens[p].as_str()) {
            Some("after" | "since") => Comparator::After,
            Some("before" | "until") => Comparator::Before,
            _ => Comparator::Equals,
        };
        links.push(TimeLink {
            mention: Mention::new(&q.tokens, i, i + 1),
            value: Date::year(year),
            comparator,
        });
    }
    links
}

const IRREGULAR_SUPERLATIVES: &[&str] = &["most", "least", "best", "worst", "first", "last"];

const MIN_TRIGGERS: &[&str] = &[
    "least", "lowest", "smallest", "earliest", "fewest", "shortest", "first",
];

/// Words ending in `-est` that are not superlatives.
const NOT_SUPERLATIVES: &[&str] = &[
    "interest",
    "forest",
    "honest",
    "modest",
    "harvest",
    "request",
    "protest",
    "contest",
    "suggest",
    "digest",
    "manifest",
    "arrest",
    "invest",
    "guest",
    "quest",
    "chest",
    "crest",
    "priest",
    "attest",
    "detest",
    "behest",
    "inquest",
    "conquest",
    "everest",
    "budapest",
    "bucharest",
    "unrest",
    "midwest",
    "northwest",
    "southwest",
    "tempest",
    "infest",
    "ingest",
    "congest",
];

fn is_superlative(token: &str) -> bool {
    if IRREGULAR_SUPERLATIVES.contains(&token) {
        return true;
    }
    token.len() >= 5 && token.ends_with("est") && !NOT_SUPERLATIVES.contains(&token)
}

/// Superlatives, optionally preceded by an ordinal word ("second tallest").
pub fn link_ordinals(q: &Question, ordinal_dict: &OrdinalDictionary) -> Vec<OrdinalLink> {
    let tokens = &q.tokens;
    let mut links = Vec::new();
    for (i, token) in tokens.iter().enumerate() {
        if !is_superlative(token) {
            continue;
        }
        // "first tallest": the ordinal word modifies the next superlative.
        if ordinal_dict.rank(token).is_some()
            && tokens.get(i + 1).is_some_and(|n| is_superlative(n))
        {
            continue;
        }
        let preceding = i
            .checked_sub(1)
            .and_then(|p| ordinal_dict.rank(&tokens[p]).map(|r| (p, r)));
        let (start, rank) = match preceding {
            Some((p, r)) => (p, r),
            None => (i, 1),
        };
        let direction = if MIN_TRIGGERS.contains(&token.as_str()) {
            Direction::Min
        } else {
            Direction::Max
        };
        links.push(OrdinalLink {
            mention: Mention::new(tokens, start, i + 1),
            rank,
            direction,
            trigger: token.clone(),
        });
    }
    links
}

pub fn link_all(
    q: &Question,
    lexicon: &AliasLexicon,
    emb: &WordEmbeddings,
    kb_types: &[TypeLabel],
    ordinal_dict: &OrdinalDictionary,
    k: usize,
) -> FocusLinks {
    FocusLinks {
        entities: link_entities(q, lexicon),
        types: if kb_types.is_empty() {
            Vec::new()
        } else {
            link_types(q, emb, kb_types, k)
        },
        times: link_times(q),
        ordinals: link_ordinals(q, ordinal_dict),
    }
}
