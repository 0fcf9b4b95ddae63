//! Immutable in-memory triple store.
//!
//! Triples are held in load order with a forward index (subject to
//! `(predicate, object)`) and a backward index (entity object to
//! `(predicate, subject)`). Lookups on unknown ids return empty slices.
//! Notable types are the per-entity category labels used as the answer-type
//! channel by the reranker.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(Arc<str>);

impl EntityId {
    /// Panics on an empty id; ids come from parsed files or fixtures.
    pub fn new(id: &str) -> Self {
        assert!(!id.is_empty(), "entity id must be non-empty");
        EntityId(Arc::from(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A predicate identifier plus its word tokens.
#[derive(Clone, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub struct RelationId {
    id: Arc<str>,
    tokens: Arc<[String]>,
}

impl RelationId {
    pub fn new(id: &str) -> Self {
        assert!(!id.is_empty(), "relation id must be non-empty");
        RelationId {
            id: Arc::from(id),
            tokens: text::id_tokens(id).into(),
        }
    }

    pub fn as_str(&self) -> &str {
        &self.id
    }

    /// All tokens of the id, split on `.` and `_`.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Tokens used when a relation is verbalized: the domain and type
    /// prefixes are dropped, so `government.governmental_jurisdiction.governing_officials`
    /// reads as `governing officials`.
    pub fn surface_tokens(&self) -> Vec<String> {
        text::last_segment_tokens(&self.id)
    }
}

impl From<String> for RelationId {
    fn from(s: String) -> Self {
        RelationId::new(&s)
    }
}

impl From<RelationId> for String {
    fn from(r: RelationId) -> Self {
        r.id.to_string()
    }
}

impl PartialEq for RelationId {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl Eq for RelationId {}

impl std::hash::Hash for RelationId {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.id.hash(state)
    }
}

impl PartialOrd for RelationId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for RelationId {
    fn cmp(&self, other: &Self) -> Ordering {
        self.id.cmp(&other.id)
    }
}

impl fmt::Debug for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id)
    }
}

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)
    }
}

/// A lowercase word-sequence category label such as `tv actor`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TypeLabel(Arc<str>);

impl TypeLabel {
    /// Normalizes to lowercase single-space-separated words. Returns `None`
    /// when nothing remains.
    pub fn new(label: &str) -> Option<Self> {
        let words: Vec<String> = label.split_whitespace().map(str::to_lowercase).collect();
        if words.is_empty() {
            return None;
        }
        Some(TypeLabel(Arc::from(words.join(" "))))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.0.split(' ')
    }
}

impl fmt::Debug for TypeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl fmt::Display for TypeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Calendar date with optional month and day.
///
/// The derived ordering treats a missing field as smaller than any present
/// one; it is the total order used to sort ordinal values. Constraint
/// comparison goes through [`Date::compare_loose`] instead.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Date {
    pub year: i32,
    pub month: Option<u8>,
    pub day: Option<u8>,
}

impl Date {
    pub fn year(year: i32) -> Self {
        Date {
            year,
            month: None,
            day: None,
        }
    }

    /// Lexicographic on (year, month, day); a field missing on either side
    /// matches any value, so `2001` equals `2001-01-20`.
    pub fn compare_loose(&self, other: &Date) -> Ordering {
        match self.year.cmp(&other.year) {
            Ordering::Equal => {}
            ord => return ord,
        }
        match (self.month, other.month) {
            (Some(a), Some(b)) if a != b => return a.cmp(&b),
            (Some(_), Some(_)) => {}
            _ => return Ordering::Equal,
        }
        match (self.day, other.day) {
            (Some(a), Some(b)) => a.cmp(&b),
            _ => Ordering::Equal,
        }
    }
}

impl FromStr for Date {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let mut parts = s.split('-');
        let year_part = parts.next().unwrap_or_default();
        if year_part.is_empty() || !year_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("invalid date {s:?}"));
        }
        let year: i32 = year_part
            .parse()
            .map_err(|_| format!("invalid year in {s:?}"))?;
        let mut field = |lo: u8, hi: u8, name: &str| -> std::result::Result<Option<u8>, String> {
            match parts.next() {
                None => Ok(None),
                Some(p) => {
                    let v: u8 = p.parse().map_err(|_| format!("invalid {name} in {s:?}"))?;
                    if v < lo || v > hi {
                        return Err(format!("{name} out of range in {s:?}"));
                    }
                    Ok(Some(v))
                }
            }
        };
        let month = field(1, 12, "month")?;
        let day = if month.is_some() {
            field(1, 31, "day")?
        } else {
            None
        };
        if parts.next().is_some() {
            return Err(format!("invalid date {s:?}"));
        }
        Ok(Date { year, month, day })
    }
}

impl fmt::Display for Date {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}", self.year)?;
        if let Some(m) = self.month {
            write!(f, "-{m:02}")?;
            if let Some(d) = self.day {
                write!(f, "-{d:02}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Date {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Node {
    Entity(EntityId),
    String(Arc<str>),
    Number(OrderedFloat<f64>),
    Date(Date),
}

impl Node {
    pub fn entity(id: &str) -> Self {
        Node::Entity(EntityId::new(id))
    }

    pub fn as_entity(&self) -> Option<&EntityId> {
        match self {
            Node::Entity(e) => Some(e),
            _ => None,
        }
    }

    pub fn as_date(&self) -> Option<Date> {
        match self {
            Node::Date(d) => Some(*d),
            _ => None,
        }
    }
}

impl fmt::Debug for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Entity(e) => write!(f, "{e}"),
            Node::String(s) => write!(f, "{s:?}"),
            Node::Number(n) => write!(f, "{}", n.0),
            Node::Date(d) => write!(f, "{d}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectKind {
    Entity,
    String,
    Number,
    Date,
}

impl FromStr for ObjectKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "entity" => Ok(ObjectKind::Entity),
            "string" => Ok(ObjectKind::String),
            "number" => Ok(ObjectKind::Number),
            "date" => Ok(ObjectKind::Date),
            other => Err(format!("unknown object kind {other:?}")),
        }
    }
}

impl ObjectKind {
    pub fn parse_object(self, raw: &str) -> std::result::Result<Node, String> {
        Ok(match self {
            ObjectKind::Entity => Node::entity(raw),
            ObjectKind::String => Node::String(Arc::from(raw)),
            ObjectKind::Number => {
                let v: f64 = raw.parse().map_err(|_| format!("invalid number {raw:?}"))?;
                if !v.is_finite() {
                    return Err(format!("non-finite number {raw:?}"));
                }
                Node::Number(OrderedFloat(v))
            }
            ObjectKind::Date => Node::Date(raw.parse()?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Triple {
    pub subject: EntityId,
    pub predicate: RelationId,
    pub object: Node,
}

impl Triple {
    pub fn new(subject: &str, predicate: &str, object: Node) -> Self {
        Triple {
            subject: EntityId::new(subject),
            predicate: RelationId::new(predicate),
            object,
        }
    }
}

#[derive(Debug, Default)]
pub struct KnowledgeBase {
    triples: Vec<Triple>,
    forward: HashMap<EntityId, Vec<(RelationId, Node)>>,
    backward: HashMap<EntityId, Vec<(RelationId, EntityId)>>,
    notable: HashMap<EntityId, Vec<TypeLabel>>,
    type_labels: Vec<TypeLabel>,
    entities: Vec<EntityId>,
}

impl KnowledgeBase {
    pub fn new(
        triples: Vec<Triple>,
        types: impl IntoIterator<Item = (EntityId, TypeLabel)>,
    ) -> Self {
        let mut forward: HashMap<EntityId, Vec<(RelationId, Node)>> = HashMap::new();
        let mut backward: HashMap<EntityId, Vec<(RelationId, EntityId)>> = HashMap::new();
        let mut entities = Vec::new();
        let mut seen_entities = HashSet::new();
        let mut note_entity = |e: &EntityId| {
            if seen_entities.insert(e.clone()) {
                entities.push(e.clone());
            }
        };

        for t in &triples {
            note_entity(&t.subject);
            forward
                .entry(t.subject.clone())
                .or_default()
                .push((t.predicate.clone(), t.object.clone()));
            if let Node::Entity(o) = &t.object {
                note_entity(o);
                backward
                    .entry(o.clone())
                    .or_default()
                    .push((t.predicate.clone(), t.subject.clone()));
            }
        }

        let mut notable: HashMap<EntityId, Vec<TypeLabel>> = HashMap::new();
        let mut type_labels = Vec::new();
        let mut seen_labels = HashSet::new();
        for (entity, label) in types {
            let labels = notable.entry(entity).or_default();
            if !labels.contains(&label) {
                labels.push(label.clone());
            }
            if seen_labels.insert(label.clone()) {
                type_labels.push(label);
            }
        }

        KnowledgeBase {
            triples,
            forward,
            backward,
            notable,
            type_labels,
            entities,
        }
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    /// `(predicate, object)` pairs of triples with subject `e`, in load order.
    pub fn forward_edges(&self, e: &EntityId) -> &[(RelationId, Node)] {
        self.forward.get(e).map(Vec::as_slice).unwrap_or(&[])
    }

    /// `(predicate, subject)` pairs of triples whose object is entity `e`.
    pub fn backward_edges(&self, e: &EntityId) -> &[(RelationId, EntityId)] {
        self.backward.get(e).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn notable_types(&self, e: &EntityId) -> &[TypeLabel] {
        self.notable.get(e).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Every distinct type label, in first-registration order.
    pub fn type_labels(&self) -> &[TypeLabel] {
        &self.type_labels
    }

    /// Every entity appearing as subject or entity object, in first-seen order.
    pub fn entities(&self) -> &[EntityId] {
        &self.entities
    }

    pub fn typed_entity_count(&self) -> usize {
        self.notable.len()
    }

    pub fn relation_count(&self) -> usize {
        self.triples
            .iter()
            .map(|t| &t.predicate)
            .collect::<HashSet<_>>()
            .len()
    }
}

/// Loads a knowledge base from a triples TSV and a notable-types TSV.
pub fn load_kb(
    triples_path: impl AsRef<Path>,
    types_path: impl AsRef<Path>,
) -> Result<KnowledgeBase> {
    let triples = read_triples(triples_path.as_ref())?;
    let types = read_types(types_path.as_ref())?;
    Ok(KnowledgeBase::new(triples, types))
}

fn data_lines(content: &str) -> impl Iterator<Item = (usize, &str)> {
    content
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

pub(crate) fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Splits a TSV line into exactly `min..=max` non-empty fields.
pub(crate) fn split_fields<'a>(
    path: &Path,
    line_no: usize,
    line: &'a str,
    min: usize,
    max: usize,
) -> Result<Vec<&'a str>> {
    let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
    if fields.len() < min || fields.len() > max {
        return Err(Error::parse(
            path,
            line_no,
            format!(
                "expected {min}..={max} tab-separated fields, found {}",
                fields.len()
            ),
        ));
    }
    if fields.iter().any(|f| f.is_empty()) {
        return Err(Error::parse(path, line_no, "empty field"));
    }
    Ok(fields)
}

pub fn read_triples(path: &Path) -> Result<Vec<Triple>> {
    let content = read_file(path)?;
    let mut triples = Vec::new();
    for (line_no, line) in data_lines(&content) {
        let fields = split_fields(path, line_no, line, 3, 4)?;
        let kind = match fields.get(3) {
            Some(k) => k
                .parse::<ObjectKind>()
                .map_err(|m| Error::parse(path, line_no, m))?,
            None => ObjectKind::Entity,
        };
        let object = kind
            .parse_object(fields[2])
            .map_err(|m| Error::parse(path, line_no, m))?;
        triples.push(Triple::new(fields[0], fields[1], object));
    }
    Ok(triples)
}

pub fn read_types(path: &Path) -> Result<Vec<(EntityId, TypeLabel)>> {
    let content = read_file(path)?;
    let mut types = Vec::new();
    for (line_no, line) in data_lines(&content) {
        let fields = split_fields(path, line_no, line, 2, 2)?;
        let label = TypeLabel::new(fields[1])
            .ok_or_else(|| Error::parse(path, line_no, "empty type label"))?;
        types.push((EntityId::new(fields[0]), label));
    }
    Ok(types)
}

/// Entity display names, used to verbalize graphs and to render answers.
#[derive(Debug, Clone, Default)]
pub struct DisplayNames {
    names: HashMap<EntityId, String>,
}

impl DisplayNames {
    pub fn new(names: impl IntoIterator<Item = (EntityId, String)>) -> Self {
        DisplayNames {
            names: names.into_iter().collect(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = read_file(path)?;
        let mut names = HashMap::new();
        for (line_no, line) in data_lines(&content) {
            let fields = split_fields(path, line_no, line, 2, 2)?;
            names
                .entry(EntityId::new(fields[0]))
                .or_insert_with(|| fields[1].to_string());
        }
        Ok(DisplayNames { names })
    }

    pub fn get(&self, e: &EntityId) -> Option<&str> {
        self.names.get(e).map(String::as_str)
    }

    /// Display name, or the id's last segment with `_` read as spaces.
    pub fn name(&self, e: &EntityId) -> String {
        match self.get(e) {
            Some(n) => n.to_string(),
            None => text::last_segment_tokens(e.as_str()).join(" "),
        }
    }

    pub fn name_tokens(&self, e: &EntityId) -> Vec<String> {
        match self.get(e) {
            Some(n) => text::tokenize(n),
            None => text::last_segment_tokens(e.as_str()),
        }
    }

    /// String form of an answer node, as compared against gold answers.
    pub fn render(&self, node: &Node) -> String {
        match node {
            Node::Entity(e) => self.name(e),
            Node::String(s) => s.to_string(),
            Node::Number(n) => n.0.to_string(),
            Node::Date(d) => d.to_string(),
        }
    }
}
