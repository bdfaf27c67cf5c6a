//! Random trees, random queries and planted-target retrieval instances, for
//! property tests and benchmarks. Everything is driven by a caller-supplied
//! RNG so runs are reproducible from a seed.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde_json::{json, Map, Value};

use crate::query::{AggOp, Axis, BinOp, Positional, Query, Relevance, Selector, Step, Target};
use crate::tree::{load_memory, MemoryTree, NodeId};

pub const TREE_TYPES: [&str; 4] = ["R", "A", "B", "C"];
pub const TREE_ATTRIBUTES: [&str; 2] = ["name", "tag"];
pub const WORDS: [&str; 8] = ["red", "blue", "outdoor", "hike", "museum", "coffee", "talk", "day"];

/// A random tree of `max_nodes / 2` to `max_nodes` nodes, none deeper than
/// `max_depth` (the root has depth 0). Node texts draw from [`WORDS`].
pub fn random_tree<R: Rng + ?Sized>(rng: &mut R, max_nodes: usize, max_depth: usize) -> MemoryTree {
    let max_nodes = max_nodes.max(1);
    let n = rng.random_range(max_nodes.div_ceil(2)..=max_nodes);
    struct Proto {
        ty: &'static str,
        attrs: Map<String, Value>,
        depth: usize,
        children: Vec<usize>,
    }
    let mut nodes = Vec::with_capacity(n);
    nodes.push(Proto {
        ty: "R",
        attrs: random_attributes(rng),
        depth: 0,
        children: Vec::new(),
    });
    while nodes.len() < n {
        let open: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i].depth < max_depth).collect();
        let Some(&parent) = open.choose(rng) else { break };
        nodes.push(Proto {
            ty: TREE_TYPES[1..].choose(rng).expect("non-empty"),
            attrs: random_attributes(rng),
            depth: nodes[parent].depth + 1,
            children: Vec::new(),
        });
        let child = nodes.len() - 1;
        nodes[parent].children.push(child);
    }
    fn build(nodes: &[Proto], i: usize) -> Value {
        let p = &nodes[i];
        json!({
            "id": format!("n{i}"),
            "type": p.ty,
            "attributes": p.attrs,
            "children": p.children.iter().map(|&k| build(nodes, k)).collect::<Vec<_>>(),
        })
    }
    let doc = json!({
        "schema": {
            "nodeTypes": TREE_TYPES,
            "allowedChildren": TREE_TYPES.iter().map(|t| (t.to_string(), json!(&TREE_TYPES[1..]))).collect::<Map<_, _>>(),
            "allowedAttributes": TREE_TYPES.iter().map(|t| (t.to_string(), json!(TREE_ATTRIBUTES))).collect::<Map<_, _>>(),
        },
        "root": build(&nodes, 0),
    });
    load_memory(&doc.to_string()).expect("generated tree is valid")
}

fn random_attributes<R: Rng + ?Sized>(rng: &mut R) -> Map<String, Value> {
    let mut attrs = Map::new();
    for name in TREE_ATTRIBUTES {
        if rng.random_bool(0.6) {
            attrs.insert(name.to_string(), Value::String(random_words(rng, 1, 3)));
        }
    }
    attrs
}

fn random_words<R: Rng + ?Sized>(rng: &mut R, min: usize, max: usize) -> String {
    let k = rng.random_range(min..=max);
    (0..k)
        .map(|_| *WORDS.choose(rng).expect("non-empty"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Shape of generated queries. Type and attribute names should overlap the
/// target trees so that queries select something.
#[derive(Debug, Clone)]
pub struct QueryGen {
    pub types: Vec<String>,
    pub attributes: Vec<String>,
    pub max_steps: usize,
    /// Nesting budget for relevance expressions.
    pub max_depth: usize,
    /// Conditions may contain quotes, backslashes and non-ASCII text.
    pub exotic_strings: bool,
}

impl Default for QueryGen {
    fn default() -> Self {
        QueryGen {
            // no step reaches the root, so "R" is left out; "Z" never occurs
            types: ["A", "B", "C", "Z"].map(String::from).to_vec(),
            attributes: ["name", "tag", "missing"].map(String::from).to_vec(),
            max_steps: 3,
            max_depth: 3,
            exotic_strings: false,
        }
    }
}

impl QueryGen {
    pub fn query<R: Rng + ?Sized>(&self, rng: &mut R) -> Query {
        let n = rng.random_range(1..=self.max_steps.max(1));
        Query {
            steps: (0..n).map(|_| self.step(rng, self.max_depth)).collect(),
        }
    }

    pub fn step<R: Rng + ?Sized>(&self, rng: &mut R, depth: usize) -> Step {
        let axis = if rng.random_bool(0.5) { Axis::Child } else { Axis::Descendant };
        let selector = if rng.random_bool(0.3) {
            Selector::Wildcard
        } else {
            Selector::Type(self.types.choose(rng).expect("types").clone())
        };
        let mut step = Step::new(axis, selector);
        if rng.random_bool(0.3) {
            step.positional = Some(match rng.random_range(0..3) {
                0 => Positional::Index(rng.random_range(1..=4)),
                1 => Positional::FromEnd(rng.random_range(1..=3)),
                _ => {
                    let i = rng.random_range(1..=3);
                    Positional::Range(i, i + rng.random_range(0..=3))
                }
            });
        }
        if rng.random_bool(0.6) {
            step.relevance = Some(self.relevance(rng, depth));
        }
        step
    }

    pub fn relevance<R: Rng + ?Sized>(&self, rng: &mut R, depth: usize) -> Relevance {
        let pick = if depth == 0 { 0 } else { rng.random_range(0..10) };
        match pick {
            0..=3 => {
                let target = if rng.random_bool(0.5) {
                    Target::Node
                } else {
                    Target::Attribute(self.attributes.choose(rng).expect("attributes").clone())
                };
                Relevance::local(target, self.condition(rng))
            }
            4..=5 => {
                let op = *[AggOp::Avg, AggOp::Min, AggOp::Max, AggOp::Gmean].choose(rng).expect("ops");
                Relevance::agg(op, self.step(rng, depth - 1))
            }
            6 => Relevance::negate(self.relevance(rng, depth - 1)),
            _ => {
                let op = *[BinOp::Avg, BinOp::Prod, BinOp::Min, BinOp::Max].choose(rng).expect("ops");
                Relevance::binary(op, self.relevance(rng, depth - 1), self.relevance(rng, depth - 1))
            }
        }
    }

    fn condition<R: Rng + ?Sized>(&self, rng: &mut R) -> String {
        let mut c = random_words(rng, 1, 2);
        if self.exotic_strings && rng.random_bool(0.3) {
            let extra = *["\"", "\\", "é", "日本", " ", "\\\"", "~=", "]", "/"].choose(rng).expect("extras");
            // words are ASCII, so every byte offset is a char boundary
            c.insert_str(rng.random_range(0..=c.len()), extra);
        }
        c
    }
}

/// How the target of a planted instance is singled out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlantKind {
    /// `//Day[t]/POI[...]`
    Index,
    /// `//Day[-1]/POI[...]`
    Last,
    /// `//Day[avg(/POI[node ~= "museum"])]/POI[...]`
    Aggregation,
}

/// A trip whose requested POI can only be told apart from look-alikes by
/// where it sits in the tree.
#[derive(Debug, Clone)]
pub struct PlantedInstance {
    pub tree: MemoryTree,
    pub kind: PlantKind,
    /// Natural-language request, as the flat baseline sees it.
    pub request: String,
    pub query: Query,
    pub target: NodeId,
    /// POIs elsewhere in the trip with the target's exact text.
    pub distractors: usize,
}

pub const PLANTED_TITLE: &str = "outdoor hike";
const MUSEUM_TITLE: &str = "museum visit";
const FILLERS: [&str; 8] = [
    "harbor lunch",
    "night market",
    "coffee tasting",
    "bookstore stop",
    "river cruise",
    "street food",
    "jazz concert",
    "cooking class",
];
const TIMES: [&str; 6] = ["08:30", "10:15", "12:45", "14:20", "16:40", "19:10"];

pub fn planted_instance<R: Rng + ?Sized>(rng: &mut R) -> PlantedInstance {
    let kind = *[PlantKind::Index, PlantKind::Last, PlantKind::Aggregation]
        .choose(rng)
        .expect("kinds");
    let days = rng.random_range(3..=8);
    let target_day = match kind {
        PlantKind::Last => days,
        _ => rng.random_range(1..=days),
    };
    let distractors = rng.random_range(0..=(days - 1).min(4));
    let mut others: Vec<usize> = (1..=days).filter(|&d| d != target_day).collect();
    others.shuffle(rng);
    let distractor_days = &others[..distractors];

    let mut day_values = Vec::new();
    let mut target = None;
    for d in 1..=days {
        let mut titles: Vec<&str> = Vec::new();
        let is_target = d == target_day;
        if is_target || distractor_days.contains(&d) {
            titles.push(PLANTED_TITLE);
        }
        match (kind, is_target) {
            (PlantKind::Aggregation, true) => {
                titles.extend(std::iter::repeat_n(MUSEUM_TITLE, rng.random_range(2..=3)));
            }
            (PlantKind::Aggregation, false) => {
                // at most one museum out of at least two POIs, so this day's
                // museum average stays at or below 1/2
                if rng.random_bool(0.5) {
                    titles.push(MUSEUM_TITLE);
                }
                titles.push(FILLERS.choose(rng).expect("fillers"));
                for _ in 0..rng.random_range(0..=2) {
                    titles.push(FILLERS.choose(rng).expect("fillers"));
                }
            }
            _ => {
                for _ in 0..rng.random_range(1..=3) {
                    titles.push(FILLERS.choose(rng).expect("fillers"));
                }
            }
        }
        titles.shuffle(rng);
        let pois: Vec<Value> = titles
            .iter()
            .enumerate()
            .map(|(j, title)| {
                let id = format!("poi-{d}-{}", j + 1);
                let mut attrs = Map::new();
                attrs.insert("title".into(), json!(title));
                if *title == PLANTED_TITLE {
                    if is_target {
                        target = Some(NodeId::new(id.clone()));
                    }
                } else {
                    attrs.insert("time".into(), json!(TIMES.choose(rng).expect("times")));
                }
                json!({"id": id, "type": "POI", "attributes": attrs, "children": []})
            })
            .collect();
        day_values.push(json!({
            "id": format!("day-{d}"),
            "type": "Day",
            "attributes": {"number": d.to_string()},
            "children": pois,
        }));
    }
    let doc = json!({
        "schema": {
            "nodeTypes": ["Itinerary", "Version", "Day", "POI"],
            "allowedChildren": {"Itinerary": ["Version"], "Version": ["Day"], "Day": ["POI"], "POI": []},
            "allowedAttributes": {
                "Itinerary": ["title"], "Version": ["summary"],
                "Day": ["number"], "POI": ["title", "time"]
            }
        },
        "root": {
            "id": "itinerary", "type": "Itinerary", "attributes": {"title": "trip"},
            "children": [{"id": "v1", "type": "Version", "attributes": {"summary": "plan"}, "children": day_values}]
        }
    });
    let tree = load_memory(&doc.to_string()).expect("planted tree is valid");

    let poi = Step::new(Axis::Child, Selector::Type("POI".into()))
        .with_relevance(Relevance::node(PLANTED_TITLE));
    let day = Step::new(Axis::Descendant, Selector::Type("Day".into()));
    let (request, day) = match kind {
        PlantKind::Index => (
            format!("{PLANTED_TITLE} on day {target_day}"),
            day.with_positional(Positional::Index(target_day)),
        ),
        PlantKind::Last => (
            format!("{PLANTED_TITLE} on the last day"),
            day.with_positional(Positional::FromEnd(1)),
        ),
        PlantKind::Aggregation => (
            format!("{PLANTED_TITLE} on the museum day"),
            day.with_relevance(Relevance::agg(
                AggOp::Avg,
                Step::new(Axis::Child, Selector::Type("POI".into()))
                    .with_relevance(Relevance::node("museum")),
            )),
        ),
    };
    PlantedInstance {
        tree,
        kind,
        request,
        query: Query { steps: vec![day, poi] },
        target: target.expect("target day holds the planted POI"),
        distractors,
    }
}
