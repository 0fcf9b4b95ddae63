use std::collections::{BTreeSet, HashSet};
use std::mem::discriminant;

use crate::kb::{EntityId, KnowledgeBase, Node, RelationId};
use crate::linking::Direction;

use super::{AttachPoint, MainPath, QueryGraph};

/// One assignment of the path variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Binding {
    pub mediator: Option<EntityId>,
    pub answer: Node,
}

impl Binding {
    pub fn node(&self, attach: AttachPoint) -> Option<&EntityId> {
        match attach {
            AttachPoint::Answer => self.answer.as_entity(),
            AttachPoint::Mediator => self.mediator.as_ref(),
        }
    }
}

/// All distinct variable bindings of a main path, in traversal order.
pub fn bindings(kb: &KnowledgeBase, main: &MainPath) -> Vec<Binding> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let first = &main.relations[0];
    for (r, o) in kb.forward_edges(&main.focus) {
        if r != first {
            continue;
        }
        match main.relations.get(1) {
            None => {
                let b = Binding {
                    mediator: None,
                    answer: o.clone(),
                };
                if seen.insert(b.clone()) {
                    out.push(b);
                }
            }
            Some(second) => {
                let Node::Entity(m) = o else { continue };
                for (r2, a) in kb.forward_edges(m) {
                    if r2 != second {
                        continue;
                    }
                    let b = Binding {
                        mediator: Some(m.clone()),
                        answer: a.clone(),
                    };
                    if seen.insert(b.clone()) {
                        out.push(b);
                    }
                }
            }
        }
    }
    out
}

fn has_edge(kb: &KnowledgeBase, node: &EntityId, relation: &RelationId, object: &Node) -> bool {
    kb.forward_edges(node)
        .iter()
        .any(|(r, o)| r == relation && o == object)
}

/// First number or date value of `relation` on the node, in load order.
fn ordinal_key(kb: &KnowledgeBase, node: Option<&EntityId>, relation: &RelationId) -> Option<Node> {
    kb.forward_edges(node?)
        .iter()
        .find(|(r, o)| r == relation && matches!(o, Node::Number(_) | Node::Date(_)))
        .map(|(_, o)| o.clone())
}

/// Runs a query graph: binds the main path, filters by entity, type and
/// time constraints, then applies the ordinal constraint to the survivors.
pub fn execute(kb: &KnowledgeBase, g: &QueryGraph) -> BTreeSet<Node> {
    let mut survivors: Vec<Binding> = bindings(kb, &g.main)
        .into_iter()
        .filter(|b| {
            g.entity_constraints.iter().all(|c| {
                b.node(c.attach)
                    .is_some_and(|n| has_edge(kb, n, &c.relation, &Node::Entity(c.entity.clone())))
            })
        })
        .filter(|b| match &g.type_constraint {
            None => true,
            Some(t) => b
                .answer
                .as_entity()
                .is_some_and(|a| kb.notable_types(a).contains(&t.type_label)),
        })
        .filter(|b| match &g.time_constraint {
            None => true,
            Some(t) => b.node(t.attach).is_some_and(|n| {
                kb.forward_edges(n).iter().any(|(r, o)| {
                    r == &t.relation
                        && o.as_date()
                            .is_some_and(|d| t.comparator.holds(d.compare_loose(&t.value)))
                })
            }),
        })
        .collect();

    if let Some(o) = &g.ordinal_constraint {
        let keyed: Vec<(Node, Binding)> = survivors
            .into_iter()
            .filter_map(|b| ordinal_key(kb, b.node(o.attach), &o.relation).map(|k| (k, b)))
            .collect();
        // Numbers and dates do not compare with each other; the first
        // binding's value kind wins and the rest are dropped.
        let keyed: Vec<(Node, Binding)> = match keyed.first().map(|(k, _)| discriminant(k)) {
            None => Vec::new(),
            Some(kind) => keyed
                .into_iter()
                .filter(|(k, _)| discriminant(k) == kind)
                .collect(),
        };
        let mut values: Vec<&Node> = keyed
            .iter()
            .map(|(k, _)| k)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if o.direction == Direction::Max {
            values.reverse();
        }
        survivors = match values.get(o.rank as usize - 1) {
            None => Vec::new(),
            Some(&chosen) => {
                let chosen = chosen.clone();
                keyed
                    .into_iter()
                    .filter(|(k, _)| *k == chosen)
                    .map(|(_, b)| b)
                    .collect()
            }
        };
    }

    survivors.into_iter().map(|b| b.answer).collect()
}
