//! Staged candidate generation: link focus nodes, search one- and two-hop
//! main paths, then attach entity, type, time and ordinal constraints in
//! turn. Each stage keeps the unconstrained variant alongside every grounded
//! constrained one.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::embedding::WordEmbeddings;
use crate::kb::{EntityId, KnowledgeBase, Node, RelationId};
use crate::linking::{link_all, AliasLexicon, FocusLinks, Mention, OrdinalDictionary, Question};

use super::execute::{bindings, Binding};
use super::{
    AttachPoint, CandidateSet, EntityConstraint, MainPath, OrdinalConstraint, QueryGraph,
    TimeConstraint, TypeConstraint,
};

/// Per-entity caps on edges examined during path search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchLimits {
    pub one_hop: usize,
    pub two_hop: usize,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits {
            one_hop: 256,
            two_hop: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    pub entity: EntityId,
    pub hops: usize,
    pub limit: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub question: String,
    pub entity_links: usize,
    pub type_links: usize,
    pub time_links: usize,
    pub ordinal_links: usize,
    pub main_paths: usize,
    pub candidates: usize,
    pub truncations: Vec<Truncation>,
}

pub struct GenerationResources {
    pub lexicon: AliasLexicon,
    pub embeddings: WordEmbeddings,
    pub ordinals: OrdinalDictionary,
    /// Number of (mention, type) pairs kept by type linking.
    pub type_top_k: usize,
    pub limits: SearchLimits,
}

fn unique_entities(links: &FocusLinks) -> Vec<&EntityId> {
    let mut seen = HashSet::new();
    links
        .entities
        .iter()
        .map(|l| &l.entity)
        .filter(|e| seen.insert(*e))
        .collect()
}

/// One- and two-hop relation paths out of every linked entity, in link
/// order then relation load order, without duplicates.
pub fn enumerate_main_paths(
    kb: &KnowledgeBase,
    links: &FocusLinks,
    limits: &SearchLimits,
) -> (Vec<MainPath>, Vec<Truncation>) {
    let mut paths = Vec::new();
    let mut seen = HashSet::new();
    let mut truncations = Vec::new();
    let mut push = |p: MainPath, paths: &mut Vec<MainPath>| {
        if seen.insert(p.clone()) {
            paths.push(p);
        }
    };

    for focus in unique_entities(links) {
        let edges = kb.forward_edges(focus);
        if edges.len() > limits.one_hop {
            truncations.push(Truncation {
                entity: focus.clone(),
                hops: 1,
                limit: limits.one_hop,
            });
        }
        let mut two_hop_budget = limits.two_hop;
        let mut two_hop_truncated = false;
        for (r1, o) in edges.iter().take(limits.one_hop) {
            push(MainPath::one_hop(focus.clone(), r1.clone()), &mut paths);
            let Node::Entity(mediator) = o else { continue };
            for (r2, _) in kb.forward_edges(mediator) {
                if two_hop_budget == 0 {
                    two_hop_truncated = true;
                    break;
                }
                two_hop_budget -= 1;
                push(
                    MainPath::two_hop(focus.clone(), r1.clone(), r2.clone()),
                    &mut paths,
                );
            }
        }
        if two_hop_truncated {
            truncations.push(Truncation {
                entity: focus.clone(),
                hops: 2,
                limit: limits.two_hop,
            });
        }
    }
    (paths, truncations)
}

fn nodes_at(bindings: &[Binding], attach: AttachPoint) -> Vec<&EntityId> {
    let mut seen = HashSet::new();
    bindings
        .iter()
        .filter_map(|b| b.node(attach))
        .filter(|n| seen.insert(*n))
        .collect()
}

/// Distinct `(attach, relation)` pairs whose objects satisfy `accept`,
/// across every node bound at each attach point.
fn grounded_relations(
    kb: &KnowledgeBase,
    main: &MainPath,
    bindings: &[Binding],
    accept: impl Fn(&Node) -> bool,
) -> Vec<(AttachPoint, RelationId)> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for &attach in main.attach_points() {
        for node in nodes_at(bindings, attach) {
            for (r, o) in kb.forward_edges(node) {
                if accept(o) && seen.insert((attach, r.clone())) {
                    out.push((attach, r.clone()));
                }
            }
        }
    }
    out
}

/// Constraint options per stage; each list starts with the "no constraint"
/// choice. Entity options are grouped by mention so that alternative
/// entities for one ambiguous mention are never combined.
struct ConstraintOptions {
    entity_groups: Vec<Vec<Option<EntityConstraint>>>,
    types: Vec<Option<TypeConstraint>>,
    times: Vec<Option<TimeConstraint>>,
    ordinals: Vec<Option<OrdinalConstraint>>,
}

fn constraint_options(
    kb: &KnowledgeBase,
    main: &MainPath,
    links: &FocusLinks,
) -> ConstraintOptions {
    let bs = bindings(kb, main);

    let consumed: HashSet<&Mention> = links
        .entities
        .iter()
        .filter(|l| l.entity == main.focus)
        .map(|l| &l.mention)
        .collect();
    let mut groups: Vec<(&Mention, Vec<&EntityId>)> = Vec::new();
    for link in &links.entities {
        if consumed.contains(&link.mention) || link.entity == main.focus {
            continue;
        }
        match groups.iter_mut().find(|(m, _)| *m == &link.mention) {
            Some((_, entities)) => entities.push(&link.entity),
            None => groups.push((&link.mention, vec![&link.entity])),
        }
    }
    let entity_groups = groups
        .into_iter()
        .map(|(_, entities)| {
            let mut options = vec![None];
            for entity in entities {
                let target = Node::Entity(entity.clone());
                for (attach, relation) in grounded_relations(kb, main, &bs, |o| *o == target) {
                    options.push(Some(EntityConstraint {
                        attach,
                        relation,
                        entity: entity.clone(),
                    }));
                }
            }
            options
        })
        .collect();

    let mut types = vec![None];
    let mut seen_labels = HashSet::new();
    for link in &links.types {
        if !seen_labels.insert(&link.type_label) {
            continue;
        }
        let grounded = bs
            .iter()
            .filter_map(|b| b.answer.as_entity())
            .any(|a| kb.notable_types(a).contains(&link.type_label));
        if grounded {
            types.push(Some(TypeConstraint {
                type_label: link.type_label.clone(),
            }));
        }
    }

    let dated = grounded_relations(kb, main, &bs, |o| matches!(o, Node::Date(_)));
    let mut times = vec![None];
    for link in &links.times {
        for (attach, relation) in &dated {
            let c = TimeConstraint {
                attach: *attach,
                relation: relation.clone(),
                value: link.value,
                comparator: link.comparator,
            };
            if !times.contains(&Some(c.clone())) {
                times.push(Some(c));
            }
        }
    }

    let ordered = grounded_relations(kb, main, &bs, |o| {
        matches!(o, Node::Number(_) | Node::Date(_))
    });
    let mut ordinals = vec![None];
    for link in &links.ordinals {
        for (attach, relation) in &ordered {
            let c = OrdinalConstraint {
                attach: *attach,
                relation: relation.clone(),
                rank: link.rank,
                direction: link.direction,
            };
            if !ordinals.contains(&Some(c.clone())) {
                ordinals.push(Some(c));
            }
        }
    }

    ConstraintOptions {
        entity_groups,
        types,
        times,
        ordinals,
    }
}

/// Every combination of grounded constraint options on top of `main`,
/// starting with the bare path. Provenance numbers count from zero.
pub fn attach_constraints(
    kb: &KnowledgeBase,
    main: &MainPath,
    links: &FocusLinks,
) -> Vec<QueryGraph> {
    let options = constraint_options(kb, main, links);

    let mut entity_sets: Vec<Vec<EntityConstraint>> = vec![Vec::new()];
    for group in &options.entity_groups {
        let mut next = Vec::with_capacity(entity_sets.len() * group.len());
        for set in &entity_sets {
            for option in group {
                let mut s = set.clone();
                s.extend(option.iter().cloned());
                next.push(s);
            }
        }
        entity_sets = next;
    }

    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for entity_constraints in &entity_sets {
        for type_constraint in &options.types {
            for time_constraint in &options.times {
                for ordinal_constraint in &options.ordinals {
                    let mut g = QueryGraph {
                        main: main.clone(),
                        entity_constraints: entity_constraints.clone(),
                        type_constraint: type_constraint.clone(),
                        time_constraint: time_constraint.clone(),
                        ordinal_constraint: ordinal_constraint.clone(),
                        provenance: 0,
                    };
                    g.normalize();
                    if seen.insert(g.canonical_key()) {
                        g.provenance = out.len();
                        out.push(g);
                    }
                }
            }
        }
    }
    out
}

/// Output of [`generate_candidates`].
#[derive(Debug, Clone)]
pub struct Generation {
    pub links: FocusLinks,
    pub candidates: CandidateSet,
    pub report: GenerationReport,
}

/// Links, searches main paths and attaches constraints for one question.
/// Questions without an entity link produce an empty candidate set.
pub fn generate_candidates(
    kb: &KnowledgeBase,
    q: &Question,
    res: &GenerationResources,
) -> Generation {
    let links = link_all(
        q,
        &res.lexicon,
        &res.embeddings,
        kb.type_labels(),
        &res.ordinals,
        res.type_top_k,
    );
    let mut report = GenerationReport {
        question: q.raw.clone(),
        entity_links: links.entities.len(),
        type_links: links.types.len(),
        time_links: links.times.len(),
        ordinal_links: links.ordinals.len(),
        ..Default::default()
    };

    let (paths, truncations) = enumerate_main_paths(kb, &links, &res.limits);
    report.main_paths = paths.len();
    report.truncations = truncations;

    let mut graphs = Vec::new();
    let mut seen = HashSet::new();
    for path in &paths {
        for mut g in attach_constraints(kb, path, &links) {
            if seen.insert(g.canonical_key()) {
                g.provenance = graphs.len();
                graphs.push(g);
            }
        }
    }
    report.candidates = graphs.len();

    Generation {
        links,
        candidates: CandidateSet {
            question: q.clone(),
            graphs,
        },
        report,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::Triple;
    use crate::linking::EntityLink;

    fn link(q: &Question, start: usize, end: usize, entity: &str) -> EntityLink {
        EntityLink {
            mention: Mention::new(&q.tokens, start, end),
            entity: EntityId::new(entity),
            link_score: 1.0,
        }
    }

    #[test]
    fn entity_without_edges_has_no_paths() {
        let kb = KnowledgeBase::new(vec![Triple::new("b", "r", Node::entity("a"))], []);
        let q = Question::new("a");
        let links = FocusLinks {
            entities: vec![link(&q, 0, 1, "a")],
            ..Default::default()
        };
        let (paths, truncations) = enumerate_main_paths(&kb, &links, &SearchLimits::default());
        assert!(paths.is_empty());
        assert!(truncations.is_empty());
    }

    #[test]
    fn fanout_limits_truncate_and_report() {
        let mut triples = Vec::new();
        for i in 0..5 {
            triples.push(Triple::new(
                "a",
                &format!("r{i}"),
                Node::entity(&format!("m{i}")),
            ));
            for j in 0..3 {
                triples.push(Triple::new(
                    &format!("m{i}"),
                    &format!("s{j}"),
                    Node::entity("z"),
                ));
            }
        }
        let kb = KnowledgeBase::new(triples, []);
        let q = Question::new("a");
        let links = FocusLinks {
            entities: vec![link(&q, 0, 1, "a")],
            ..Default::default()
        };
        let (paths, truncations) = enumerate_main_paths(&kb, &links, &SearchLimits::default());
        assert_eq!(paths.len(), 5 + 15);
        assert!(truncations.is_empty());

        let limits = SearchLimits {
            one_hop: 2,
            two_hop: 4,
        };
        let (paths, truncations) = enumerate_main_paths(&kb, &links, &limits);
        assert_eq!(paths.iter().filter(|p| !p.is_two_hop()).count(), 2);
        assert_eq!(paths.iter().filter(|p| p.is_two_hop()).count(), 4);
        assert_eq!(truncations.len(), 2);
    }

    #[test]
    fn no_links_gives_bare_graph_only() {
        let kb = KnowledgeBase::new(vec![Triple::new("a", "r", Node::entity("b"))], []);
        let main = MainPath::one_hop(EntityId::new("a"), RelationId::new("r"));
        let graphs = attach_constraints(&kb, &main, &FocusLinks::default());
        assert_eq!(graphs, vec![QueryGraph::bare(main)]);
    }
}
