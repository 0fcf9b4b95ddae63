use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::kb::DisplayNames;

use super::QueryGraph;

/// The five sub-paths of a verbalized graph, in sequence order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SubPath {
    MainPath,
    TypePath,
    EntityPath,
    TimePath,
    OrdinalPath,
}

impl SubPath {
    pub const ORDER: [SubPath; 5] = [
        SubPath::MainPath,
        SubPath::TypePath,
        SubPath::EntityPath,
        SubPath::TimePath,
        SubPath::OrdinalPath,
    ];

    fn index(self) -> usize {
        self as usize
    }
}

/// Token form of a query graph with the span of each sub-path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryGraphSequence {
    pub tokens: Vec<String>,
    pub sections: [Range<usize>; 5],
    pub two_hop: bool,
}

impl QueryGraphSequence {
    pub fn section(&self, sub: SubPath) -> &[String] {
        &self.tokens[self.sections[sub.index()].clone()]
    }

    /// Number of non-empty constraint sub-paths (0..=4).
    pub fn constraint_sections(&self) -> usize {
        SubPath::ORDER[1..]
            .iter()
            .filter(|s| !self.sections[s.index()].is_empty())
            .count()
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Verbalizes a graph as MainPath, TypePath, EntityPath, TimePath,
/// OrdinalPath; missing sub-paths contribute no tokens.
pub fn serialize(g: &QueryGraph, names: &DisplayNames) -> QueryGraphSequence {
    let mut tokens = Vec::new();
    let mut sections: [Range<usize>; 5] = Default::default();
    let mut section = |sub: SubPath, tokens: &mut Vec<String>, words: Vec<String>| {
        let start = tokens.len();
        tokens.extend(words);
        sections[sub.index()] = start..tokens.len();
    };

    let mut main = names.name_tokens(&g.main.focus);
    for r in &g.main.relations {
        main.extend(r.surface_tokens());
    }
    main.push("a".to_string());
    section(SubPath::MainPath, &mut tokens, main);

    let type_words = g
        .type_constraint
        .iter()
        .flat_map(|t| t.type_label.tokens().map(str::to_string))
        .collect();
    section(SubPath::TypePath, &mut tokens, type_words);

    let mut entity_words = Vec::new();
    for c in &g.entity_constraints {
        entity_words.extend(c.relation.surface_tokens());
        entity_words.extend(names.name_tokens(&c.entity));
    }
    section(SubPath::EntityPath, &mut tokens, entity_words);

    let mut time_words = Vec::new();
    if let Some(t) = &g.time_constraint {
        time_words.extend(t.relation.surface_tokens());
        time_words.push(t.comparator.word().to_string());
        time_words.push(t.value.year.to_string());
    }
    section(SubPath::TimePath, &mut tokens, time_words);

    let mut ordinal_words = Vec::new();
    if let Some(o) = &g.ordinal_constraint {
        ordinal_words.extend(o.relation.surface_tokens());
        ordinal_words.push(o.direction.word().to_string());
        ordinal_words.push(o.rank.to_string());
    }
    section(SubPath::OrdinalPath, &mut tokens, ordinal_words);

    QueryGraphSequence {
        tokens,
        sections,
        two_hop: g.main.is_two_hop(),
    }
}
