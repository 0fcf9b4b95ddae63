//! Query graphs: a one- or two-hop main path from a focus entity to the
//! answer variable, optionally narrowed by entity, type, time and ordinal
//! constraints.
//!
//! On a two-hop path the middle node is a variable (the mediator, a CVT node
//! in Freebase terms), so a single graph can bind many mediator/answer pairs
//! and the time and ordinal constraints choose among them.

mod execute;
mod generate;
mod sequence;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::kb::{Date, EntityId, RelationId, TypeLabel};
use crate::linking::{Comparator, Direction, Question};

pub use execute::{bindings, execute, Binding};
pub use generate::{
    attach_constraints, enumerate_main_paths, generate_candidates, Generation, GenerationReport,
    GenerationResources, SearchLimits, Truncation,
};
pub use sequence::{serialize, QueryGraphSequence, SubPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttachPoint {
    Answer,
    Mediator,
}

impl AttachPoint {
    fn tag(self) -> &'static str {
        match self {
            AttachPoint::Answer => "A",
            AttachPoint::Mediator => "M",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MainPath {
    pub focus: EntityId,
    /// One or two relations; with two, the middle node is the mediator variable.
    pub relations: Vec<RelationId>,
}

impl MainPath {
    pub fn one_hop(focus: EntityId, relation: RelationId) -> Self {
        MainPath {
            focus,
            relations: vec![relation],
        }
    }

    pub fn two_hop(focus: EntityId, first: RelationId, second: RelationId) -> Self {
        MainPath {
            focus,
            relations: vec![first, second],
        }
    }

    pub fn is_two_hop(&self) -> bool {
        self.relations.len() == 2
    }

    /// Attach points available on this path, answer first.
    pub fn attach_points(&self) -> &'static [AttachPoint] {
        if self.is_two_hop() {
            &[AttachPoint::Answer, AttachPoint::Mediator]
        } else {
            &[AttachPoint::Answer]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityConstraint {
    pub attach: AttachPoint,
    pub relation: RelationId,
    pub entity: EntityId,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TypeConstraint {
    pub type_label: TypeLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TimeConstraint {
    pub attach: AttachPoint,
    pub relation: RelationId,
    pub value: Date,
    pub comparator: Comparator,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OrdinalConstraint {
    pub attach: AttachPoint,
    pub relation: RelationId,
    pub rank: u32,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryGraph {
    pub main: MainPath,
    /// Kept sorted and free of duplicates.
    pub entity_constraints: Vec<EntityConstraint>,
    pub type_constraint: Option<TypeConstraint>,
    pub time_constraint: Option<TimeConstraint>,
    pub ordinal_constraint: Option<OrdinalConstraint>,
    /// Generation sequence number, unique within a candidate set.
    pub provenance: usize,
}

impl QueryGraph {
    pub fn bare(main: MainPath) -> Self {
        QueryGraph {
            main,
            entity_constraints: Vec::new(),
            type_constraint: None,
            time_constraint: None,
            ordinal_constraint: None,
            provenance: 0,
        }
    }

    pub(crate) fn normalize(&mut self) {
        self.entity_constraints.sort();
        self.entity_constraints.dedup();
    }

    pub fn constraint_count(&self) -> usize {
        self.entity_constraints.len()
            + usize::from(self.type_constraint.is_some())
            + usize::from(self.time_constraint.is_some())
            + usize::from(self.ordinal_constraint.is_some())
    }

    /// Structural identity: focus, relations and sorted constraints.
    /// Provenance is not part of the key.
    pub fn canonical_key(&self) -> String {
        let mut key = String::new();
        let _ = write!(key, "{}|", self.main.focus);
        for (i, r) in self.main.relations.iter().enumerate() {
            if i > 0 {
                key.push('/');
            }
            key.push_str(r.as_str());
        }
        let mut entity_constraints = self.entity_constraints.clone();
        entity_constraints.sort();
        entity_constraints.dedup();
        for c in &entity_constraints {
            let _ = write!(key, "|E:{}:{}:{}", c.attach.tag(), c.relation, c.entity);
        }
        if let Some(t) = &self.type_constraint {
            let _ = write!(key, "|T:{}", t.type_label);
        }
        if let Some(t) = &self.time_constraint {
            let _ = write!(
                key,
                "|D:{}:{}:{:?}:{}",
                t.attach.tag(),
                t.relation,
                t.comparator,
                t.value
            );
        }
        if let Some(o) = &self.ordinal_constraint {
            let _ = write!(
                key,
                "|O:{}:{}:{:?}:{}",
                o.attach.tag(),
                o.relation,
                o.direction,
                o.rank
            );
        }
        key
    }
}

/// The candidate query graphs generated for one question.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateSet {
    pub question: Question,
    pub graphs: Vec<QueryGraph>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }
}
