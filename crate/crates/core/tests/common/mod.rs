#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::PathBuf;

use kbqa_core::kb::{Date, EntityId, KnowledgeBase, Node, RelationId, Triple, TypeLabel};
use kbqa_core::linking::{
    Comparator, Direction, EntityLink, FocusLinks, Mention, OrdinalLink, TimeLink, TypeLink,
};
use kbqa_core::query_graph::{
    AttachPoint, EntityConstraint, MainPath, OrdinalConstraint, QueryGraph, TimeConstraint,
    TypeConstraint,
};
use ordered_float::OrderedFloat;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn fixture_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

/// A random triple store kept alongside its raw lists for the oracles.
pub struct RandomKb {
    pub triples: Vec<Triple>,
    pub types: Vec<(EntityId, TypeLabel)>,
    pub entities: Vec<EntityId>,
    pub relations: Vec<RelationId>,
    pub labels: Vec<TypeLabel>,
    pub kb: KnowledgeBase,
}

pub fn random_date(rng: &mut ChaCha8Rng) -> Date {
    let year = rng.gen_range(1995..2005);
    let month = rng.gen_bool(0.4).then(|| rng.gen_range(1..=12u8));
    let day = month.and_then(|_| rng.gen_bool(0.5).then(|| rng.gen_range(1..=28u8)));
    Date { year, month, day }
}

pub fn random_kb(rng: &mut ChaCha8Rng) -> RandomKb {
    let n_entities = rng.gen_range(2..=50);
    let n_relations = rng.gen_range(1..=8);
    let entities: Vec<EntityId> = (0..n_entities)
        .map(|i| EntityId::new(&format!("e{i}")))
        .collect();
    let relations: Vec<RelationId> = (0..n_relations)
        .map(|i| RelationId::new(&format!("d.t.r{i}")))
        .collect();
    let labels: Vec<TypeLabel> = (0..4)
        .map(|i| TypeLabel::new(&format!("type {i}")).unwrap())
        .collect();

    let n_triples = rng.gen_range(0..=4 * n_entities);
    let mut seen = HashSet::new();
    let mut triples = Vec::new();
    for _ in 0..n_triples {
        let s = entities.choose(rng).unwrap().clone();
        let p = relations.choose(rng).unwrap().clone();
        let o = match rng.gen_range(0..20) {
            0..=12 => Node::Entity(entities.choose(rng).unwrap().clone()),
            13..=15 => Node::Number(OrderedFloat(f64::from(rng.gen_range(0..6)))),
            16..=18 => Node::Date(random_date(rng)),
            _ => Node::String(format!("s{}", rng.gen_range(0..3)).into()),
        };
        let t = Triple {
            subject: s,
            predicate: p,
            object: o,
        };
        if seen.insert(t.clone()) {
            triples.push(t);
        }
    }
    let mut types = Vec::new();
    for e in &entities {
        for l in &labels {
            if rng.gen_bool(0.2) {
                types.push((e.clone(), l.clone()));
            }
        }
    }
    let kb = KnowledgeBase::new(triples.clone(), types.clone());
    RandomKb {
        triples,
        types,
        entities,
        relations,
        labels,
        kb,
    }
}

pub fn oracle_paths(r: &RandomKb, focus: &[EntityId]) -> BTreeSet<MainPath> {
    let mut out = BTreeSet::new();
    for f in focus {
        for t in r.triples.iter().filter(|t| &t.subject == f) {
            out.insert(MainPath::one_hop(f.clone(), t.predicate.clone()));
            if let Node::Entity(m) = &t.object {
                for t2 in r.triples.iter().filter(|t2| &t2.subject == m) {
                    out.insert(MainPath::two_hop(
                        f.clone(),
                        t.predicate.clone(),
                        t2.predicate.clone(),
                    ));
                }
            }
        }
    }
    out
}

pub type OracleBinding = (Option<EntityId>, Node);

pub fn oracle_bindings(r: &RandomKb, main: &MainPath) -> Vec<OracleBinding> {
    let mut out: Vec<OracleBinding> = Vec::new();
    for t in &r.triples {
        if t.subject != main.focus || t.predicate != main.relations[0] {
            continue;
        }
        let found: Vec<OracleBinding> = match main.relations.get(1) {
            None => vec![(None, t.object.clone())],
            Some(r2) => match &t.object {
                Node::Entity(m) => r
                    .triples
                    .iter()
                    .filter(|t2| &t2.subject == m && &t2.predicate == r2)
                    .map(|t2| (Some(m.clone()), t2.object.clone()))
                    .collect(),
                _ => vec![],
            },
        };
        for b in found {
            if !out.contains(&b) {
                out.push(b);
            }
        }
    }
    out
}

pub fn attach_node(b: &OracleBinding, attach: AttachPoint) -> Option<EntityId> {
    match attach {
        AttachPoint::Answer => match &b.1 {
            Node::Entity(e) => Some(e.clone()),
            _ => None,
        },
        AttachPoint::Mediator => b.0.clone(),
    }
}

/// Missing month/day on either side compare equal.
pub fn loose_cmp(a: &Date, b: &Date) -> Ordering {
    let mut ord = a.year.cmp(&b.year);
    if ord == Ordering::Equal {
        if let (Some(x), Some(y)) = (a.month, b.month) {
            ord = x.cmp(&y);
            if ord == Ordering::Equal {
                if let (Some(x), Some(y)) = (a.day, b.day) {
                    ord = x.cmp(&y);
                }
            }
        }
    }
    ord
}

fn comparator_holds(c: Comparator, ord: Ordering) -> bool {
    match c {
        Comparator::Equals => ord == Ordering::Equal,
        Comparator::Before => ord == Ordering::Less,
        Comparator::After => ord == Ordering::Greater,
    }
}

fn is_number(n: &Node) -> bool {
    matches!(n, Node::Number(_))
}

pub fn oracle_execute(r: &RandomKb, g: &QueryGraph) -> BTreeSet<Node> {
    let has = |s: &EntityId, p: &RelationId, o: &Node| {
        r.triples
            .iter()
            .any(|t| &t.subject == s && &t.predicate == p && &t.object == o)
    };
    let mut survivors: Vec<OracleBinding> = oracle_bindings(r, &g.main)
        .into_iter()
        .filter(|b| {
            g.entity_constraints.iter().all(|c| match attach_node(b, c.attach) {
                Some(n) => has(&n, &c.relation, &Node::Entity(c.entity.clone())),
                None => false,
            })
        })
        .filter(|b| match &g.type_constraint {
            None => true,
            Some(t) => match &b.1 {
                Node::Entity(a) => r.types.iter().any(|(e, l)| e == a && l == &t.type_label),
                _ => false,
            },
        })
        .filter(|b| match &g.time_constraint {
            None => true,
            Some(t) => match attach_node(b, t.attach) {
                None => false,
                Some(n) => r.triples.iter().any(|tr| {
                    tr.subject == n
                        && tr.predicate == t.relation
                        && matches!(&tr.object, Node::Date(d) if comparator_holds(t.comparator, loose_cmp(d, &t.value)))
                }),
            },
        })
        .collect();

    if let Some(o) = &g.ordinal_constraint {
        let mut keyed = Vec::new();
        for b in survivors {
            let Some(n) = attach_node(&b, o.attach) else {
                continue;
            };
            let key = r
                .triples
                .iter()
                .find(|t| {
                    t.subject == n
                        && t.predicate == o.relation
                        && matches!(t.object, Node::Number(_) | Node::Date(_))
                })
                .map(|t| t.object.clone());
            if let Some(k) = key {
                keyed.push((k, b));
            }
        }
        if let Some((first, _)) = keyed.first() {
            let numeric = is_number(first);
            keyed.retain(|(k, _)| is_number(k) == numeric);
        }
        let mut values: Vec<Node> = keyed.iter().map(|(k, _)| k.clone()).collect();
        values.sort();
        values.dedup();
        if o.direction == Direction::Max {
            values.reverse();
        }
        survivors = match values.get(o.rank as usize - 1) {
            None => vec![],
            Some(v) => keyed
                .into_iter()
                .filter(|(k, _)| k == v)
                .map(|(_, b)| b)
                .collect(),
        };
    }
    survivors.into_iter().map(|b| b.1).collect()
}

pub fn random_comparator(rng: &mut ChaCha8Rng) -> Comparator {
    *[Comparator::Equals, Comparator::Before, Comparator::After]
        .choose(rng)
        .unwrap()
}

pub fn random_direction(rng: &mut ChaCha8Rng) -> Direction {
    *[Direction::Max, Direction::Min].choose(rng).unwrap()
}

/// A graph over `main` with each constraint kind present at random.
pub fn random_graph(rng: &mut ChaCha8Rng, r: &RandomKb, main: MainPath) -> QueryGraph {
    let attach_points = main.attach_points().to_vec();
    let mut g = QueryGraph::bare(main);
    for _ in 0..rng.gen_range(0..=2) {
        g.entity_constraints.push(EntityConstraint {
            attach: *attach_points.choose(rng).unwrap(),
            relation: r.relations.choose(rng).unwrap().clone(),
            entity: r.entities.choose(rng).unwrap().clone(),
        });
    }
    g.entity_constraints.sort();
    g.entity_constraints.dedup();
    if rng.gen_bool(0.3) {
        g.type_constraint = Some(TypeConstraint {
            type_label: r.labels.choose(rng).unwrap().clone(),
        });
    }
    if rng.gen_bool(0.4) {
        g.time_constraint = Some(TimeConstraint {
            attach: *attach_points.choose(rng).unwrap(),
            relation: r.relations.choose(rng).unwrap().clone(),
            value: random_date(rng),
            comparator: random_comparator(rng),
        });
    }
    if rng.gen_bool(0.5) {
        g.ordinal_constraint = Some(OrdinalConstraint {
            attach: *attach_points.choose(rng).unwrap(),
            relation: r.relations.choose(rng).unwrap().clone(),
            rank: rng.gen_range(1..=3),
            direction: random_direction(rng),
        });
    }
    g
}

fn mention(start: usize) -> Mention {
    let tokens: Vec<String> = (0..12).map(|i| format!("w{i}")).collect();
    Mention::new(&tokens, start, start + 1)
}

/// Random focus links over the KB's entities and labels. Mentions are
/// single tokens; several entity links may share one mention.
pub fn random_links(rng: &mut ChaCha8Rng, r: &RandomKb) -> FocusLinks {
    let mut links = FocusLinks::default();
    for _ in 0..rng.gen_range(1..=4) {
        links.entities.push(EntityLink {
            mention: mention(rng.gen_range(0..3)),
            entity: r.entities.choose(rng).unwrap().clone(),
            link_score: 1.0,
        });
    }
    for _ in 0..rng.gen_range(0..=2) {
        links.types.push(TypeLink {
            mention: mention(rng.gen_range(3..6)),
            type_label: r.labels.choose(rng).unwrap().clone(),
            similarity: 0.5,
        });
    }
    for _ in 0..rng.gen_range(0..=2) {
        links.times.push(TimeLink {
            mention: mention(rng.gen_range(6..9)),
            value: random_date(rng),
            comparator: random_comparator(rng),
        });
    }
    for _ in 0..rng.gen_range(0..=1) {
        links.ordinals.push(OrdinalLink {
            mention: mention(rng.gen_range(9..12)),
            rank: rng.gen_range(1..=2),
            direction: random_direction(rng),
            trigger: "largest".into(),
        });
    }
    links
}

/// Every combination of grounded constraint options, as canonical keys.
pub fn oracle_constraint_keys(
    r: &RandomKb,
    main: &MainPath,
    links: &FocusLinks,
) -> BTreeSet<String> {
    let bs = oracle_bindings(r, main);
    let attach_points = main.attach_points();
    // (attach, relation) pairs whose object at some bound node satisfies `accept`.
    let grounded = |accept: &dyn Fn(&Node) -> bool| -> BTreeSet<(AttachPoint, RelationId)> {
        let mut out = BTreeSet::new();
        for &a in attach_points {
            for b in &bs {
                let Some(n) = attach_node(b, a) else { continue };
                for t in r
                    .triples
                    .iter()
                    .filter(|t| t.subject == n && accept(&t.object))
                {
                    out.insert((a, t.predicate.clone()));
                }
            }
        }
        out
    };

    let consumed: BTreeSet<(usize, usize)> = links
        .entities
        .iter()
        .filter(|l| l.entity == main.focus)
        .map(|l| (l.mention.start, l.mention.end))
        .collect();
    let mut groups: BTreeMap<(usize, usize), BTreeSet<EntityId>> = BTreeMap::new();
    for l in &links.entities {
        if !consumed.contains(&(l.mention.start, l.mention.end)) && l.entity != main.focus {
            groups
                .entry((l.mention.start, l.mention.end))
                .or_default()
                .insert(l.entity.clone());
        }
    }
    let mut entity_sets: Vec<BTreeSet<EntityConstraint>> = vec![BTreeSet::new()];
    for entities in groups.values() {
        let mut options: Vec<Option<EntityConstraint>> = vec![None];
        for e in entities {
            let target = Node::Entity(e.clone());
            for (attach, relation) in grounded(&|o| *o == target) {
                options.push(Some(EntityConstraint {
                    attach,
                    relation,
                    entity: e.clone(),
                }));
            }
        }
        let mut next = Vec::new();
        for set in &entity_sets {
            for o in &options {
                let mut s = set.clone();
                s.extend(o.clone());
                next.push(s);
            }
        }
        entity_sets = next;
    }

    let mut types: Vec<Option<TypeConstraint>> = vec![None];
    for l in &links.types {
        let ok = bs.iter().any(|b| match &b.1 {
            Node::Entity(a) => r.types.iter().any(|(e, t)| e == a && t == &l.type_label),
            _ => false,
        });
        if ok {
            types.push(Some(TypeConstraint {
                type_label: l.type_label.clone(),
            }));
        }
    }
    let dated = grounded(&|o| matches!(o, Node::Date(_)));
    let mut times: Vec<Option<TimeConstraint>> = vec![None];
    for l in &links.times {
        for (attach, relation) in &dated {
            times.push(Some(TimeConstraint {
                attach: *attach,
                relation: relation.clone(),
                value: l.value,
                comparator: l.comparator,
            }));
        }
    }
    let ordered = grounded(&|o| matches!(o, Node::Number(_) | Node::Date(_)));
    let mut ordinals: Vec<Option<OrdinalConstraint>> = vec![None];
    for l in &links.ordinals {
        for (attach, relation) in &ordered {
            ordinals.push(Some(OrdinalConstraint {
                attach: *attach,
                relation: relation.clone(),
                rank: l.rank,
                direction: l.direction,
            }));
        }
    }

    let mut keys = BTreeSet::new();
    for es in &entity_sets {
        for ty in &types {
            for ti in &times {
                for or in &ordinals {
                    let g = QueryGraph {
                        main: main.clone(),
                        entity_constraints: es.iter().cloned().collect(),
                        type_constraint: ty.clone(),
                        time_constraint: ti.clone(),
                        ordinal_constraint: or.clone(),
                        provenance: 0,
                    };
                    keys.insert(g.canonical_key());
                }
            }
        }
    }
    keys
}

use kbqa_core::matcher::{loss_gradient, mean_loss, FeatureVector, Label, LinearHead};
use kbqa_core::reranking::{rerank_gradient, rerank_loss, JointExample, RerankModel};

fn random_head(rng: &mut ChaCha8Rng, dim: usize) -> LinearHead {
    LinearHead {
        weights: (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        bias: rng.gen_range(-1.0..1.0),
    }
}

fn random_features(rng: &mut ChaCha8Rng, dim: usize) -> FeatureVector {
    FeatureVector((0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect())
}

fn random_label(rng: &mut ChaCha8Rng) -> Label {
    if rng.gen_bool(0.5) {
        Label::Positive
    } else {
        Label::Negative
    }
}

const STEP: f64 = 1e-5;

/// Relative error with a floor on the magnitude, so that near-zero
/// components are judged on absolute error.
fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

fn central<F: Fn(f64) -> f64>(f: F, x: f64) -> f64 {
    (f(x + STEP) - f(x - STEP)) / (2.0 * STEP)
}

/// Worst relative error of the rank-loss gradient over `trials` random
/// heads and batches.
pub fn rank_gradient_worst(trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let dim = rng.gen_range(1..=10);
        let head = random_head(&mut rng, dim);
        let batch: Vec<(FeatureVector, Label)> = (0..rng.gen_range(1..=8))
            .map(|_| (random_features(&mut rng, dim), random_label(&mut rng)))
            .collect();
        let grad = loss_gradient(&head, &batch).unwrap();
        for j in 0..=dim {
            let loss_at = |v: f64| {
                let mut h = head.clone();
                if j < dim {
                    h.weights[j] = v;
                } else {
                    h.bias = v;
                }
                mean_loss(&h, &batch).unwrap()
            };
            let (x, a) = if j < dim {
                (head.weights[j], grad.weights[j])
            } else {
                (head.bias, grad.bias)
            };
            worst = worst.max(rel_err(a, central(loss_at, x)));
        }
    }
    worst
}

/// Same check for the joint rerank loss, over both heads.
pub fn rerank_gradient_worst(trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let dim = rng.gen_range(1..=10);
        let model = RerankModel {
            seq_head: random_head(&mut rng, dim),
            type_head: random_head(&mut rng, dim),
        };
        let batch: Vec<JointExample> = (0..rng.gen_range(1..=8))
            .map(|_| JointExample {
                seq: random_features(&mut rng, dim),
                types: random_features(&mut rng, dim),
                label: random_label(&mut rng),
            })
            .collect();
        let grad = rerank_gradient(&model, &batch).unwrap();
        for head in 0..2 {
            for j in 0..=dim {
                let pick = |m: &RerankModel| -> f64 {
                    let h = if head == 0 { &m.seq_head } else { &m.type_head };
                    if j < dim {
                        h.weights[j]
                    } else {
                        h.bias
                    }
                };
                let loss_at = |v: f64| {
                    let mut m = model.clone();
                    let h = if head == 0 {
                        &mut m.seq_head
                    } else {
                        &mut m.type_head
                    };
                    if j < dim {
                        h.weights[j] = v;
                    } else {
                        h.bias = v;
                    }
                    rerank_loss(&m, &batch).unwrap()
                };
                worst = worst.max(rel_err(pick(&grad), central(loss_at, pick(&model))));
            }
        }
    }
    worst
}

use kbqa_core::pipeline::{train_rank_stage, train_rerank_stage, Config, Resources};
use kbqa_core::ranking::{LabeledQuestion, RankModel};

pub struct Trained {
    pub config: Config,
    pub res: Resources,
    pub train: Vec<LabeledQuestion>,
    pub valid: Vec<LabeledQuestion>,
    pub rank: RankModel,
    pub rerank: RerankModel,
}

/// Loads a fixture config and trains both stages with the type channel on
/// or off.
pub fn train_fixture(name: &str, use_type_feature: bool) -> Trained {
    let config = Config::load(fixture_dir(name).join("config.json")).unwrap();
    let res = Resources::load(&config).unwrap();
    let train = res.label_all(&config.split("train").unwrap());
    let valid = res.label_all(&config.split("valid").unwrap());
    let encoder = res.encoder();
    let (rank, _) = train_rank_stage(&train, &valid, &config.training, &encoder).unwrap();
    let (rerank, _) = train_rerank_stage(
        &rank,
        &train,
        &valid,
        &config.rerank_training(),
        &encoder,
        &res.kb,
        use_type_feature,
    )
    .unwrap();
    Trained {
        config,
        res,
        train,
        valid,
        rank,
        rerank,
    }
}
