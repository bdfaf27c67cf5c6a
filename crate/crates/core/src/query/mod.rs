//! Semantic XPath queries.
//!
//! A query is a sequence of steps. Each step navigates an axis (`/` children,
//! `//` descendants), filters by node type or `*`, optionally selects by
//! position in document order, and optionally scores the survivors with a
//! relevance expression:
//!
//! ```text
//! //Day[ avg(/POI[ node ~= "conference" ]) ]
//! //Day[3]/POI[1 - [node ~= "workshop"]]
//! ```
//!
//! See `docs/grammar.md` for the full surface grammar.

mod lexer;
mod parser;
mod render;

use std::str::FromStr;

pub use parser::{parse, parse_bytes, ParseError};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Query {
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub axis: Axis,
    pub selector: Selector,
    pub positional: Option<Positional>,
    pub relevance: Option<Relevance>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Child,
    Descendant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Selector {
    Type(String),
    Wildcard,
}

/// Position in document order, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Positional {
    /// `[i]`
    Index(usize),
    /// `[-i]`, counted from the end.
    FromEnd(usize),
    /// `[i:j]`, inclusive at both ends.
    Range(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Target {
    Attribute(String),
    /// The whole-node text (`node ~= ...`).
    Node,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggOp {
    Avg,
    Min,
    Max,
    Gmean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    /// `(P + P)/2`
    Avg,
    /// `P * P`
    Prod,
    Min,
    Max,
}

/// Graded relevance condition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Relevance {
    Local { target: Target, condition: String },
    Agg { op: AggOp, step: Box<Step> },
    Not(Box<Relevance>),
    Binary { op: BinOp, left: Box<Relevance>, right: Box<Relevance> },
}

impl Query {
    pub fn empty() -> Self {
        Query::default()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

impl FromStr for Query {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

impl Step {
    pub fn new(axis: Axis, selector: Selector) -> Self {
        Step {
            axis,
            selector,
            positional: None,
            relevance: None,
        }
    }

    pub fn with_positional(mut self, p: Positional) -> Self {
        self.positional = Some(p);
        self
    }

    pub fn with_relevance(mut self, r: Relevance) -> Self {
        self.relevance = Some(r);
        self
    }
}

impl Relevance {
    pub fn local(target: Target, condition: impl Into<String>) -> Self {
        Relevance::Local {
            target,
            condition: condition.into(),
        }
    }

    pub fn node(condition: impl Into<String>) -> Self {
        Relevance::local(Target::Node, condition)
    }

    pub fn attr(name: impl Into<String>, condition: impl Into<String>) -> Self {
        Relevance::local(Target::Attribute(name.into()), condition)
    }

    pub fn negate(inner: Relevance) -> Self {
        Relevance::Not(Box::new(inner))
    }

    pub fn binary(op: BinOp, left: Relevance, right: Relevance) -> Self {
        Relevance::Binary {
            op,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn agg(op: AggOp, step: Step) -> Self {
        Relevance::Agg {
            op,
            step: Box::new(step),
        }
    }
}

impl AggOp {
    pub fn keyword(self) -> &'static str {
        match self {
            AggOp::Avg => "avg",
            AggOp::Min => "min",
            AggOp::Max => "max",
            AggOp::Gmean => "gmean",
        }
    }
}
