//! Canonical text form. `parse(q.to_string()) == q` for every query.

use std::fmt::{self, Display, Formatter, Write};

use super::{Axis, BinOp, Positional, Query, Relevance, Selector, Step, Target};

impl Display for Query {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        self.steps.iter().try_for_each(|s| s.fmt(f))
    }
}

impl Display for Axis {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Child => "/",
            Axis::Descendant => "//",
        })
    }
}

impl Display for Selector {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Selector::Type(t) => f.write_str(t),
            Selector::Wildcard => f.write_char('*'),
        }
    }
}

impl Display for Positional {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Positional::Index(i) => write!(f, "[{i}]"),
            Positional::FromEnd(i) => write!(f, "[-{i}]"),
            Positional::Range(i, j) => write!(f, "[{i}:{j}]"),
        }
    }
}

impl Display for Step {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.axis, self.selector)?;
        if let Some(p) = &self.positional {
            p.fmt(f)?;
        }
        if let Some(r) = &self.relevance {
            f.write_char('[')?;
            match r {
                Relevance::Local { target, condition } => write_local_body(f, target, condition)?,
                other => other.fmt(f)?,
            }
            f.write_char(']')?;
        }
        Ok(())
    }
}

/// Expression form: a `Local` renders bracketed, `[node ~= "x"]`.
impl Display for Relevance {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Relevance::Local { target, condition } => {
                f.write_char('[')?;
                write_local_body(f, target, condition)?;
                f.write_char(']')
            }
            Relevance::Agg { op, step } => write!(f, "{}({step})", op.keyword()),
            Relevance::Not(inner) => {
                f.write_str("1 - ")?;
                write_grouped_if_product(f, inner)
            }
            Relevance::Binary { op, left, right } => match op {
                BinOp::Avg => write!(f, "({left} + {right})/2"),
                BinOp::Min => write!(f, "min({left}, {right})"),
                BinOp::Max => write!(f, "max({left}, {right})"),
                BinOp::Prod => {
                    write!(f, "{left} * ")?;
                    write_grouped_if_product(f, right)
                }
            },
        }
    }
}

/// `*` is left-associative and binds looser than `1 -`, so a product in
/// operand position needs explicit brackets.
fn write_grouped_if_product(f: &mut Formatter<'_>, r: &Relevance) -> fmt::Result {
    match r {
        Relevance::Binary { op: BinOp::Prod, .. } => write!(f, "[{r}]"),
        _ => r.fmt(f),
    }
}

fn write_local_body(f: &mut Formatter<'_>, target: &Target, condition: &str) -> fmt::Result {
    match target {
        Target::Node => f.write_str("node")?,
        Target::Attribute(name) => f.write_str(name)?,
    }
    f.write_str(" ~= ")?;
    write_quoted(f, condition)
}

fn write_quoted(f: &mut Formatter<'_>, s: &str) -> fmt::Result {
    f.write_char('"')?;
    for c in s.chars() {
        if c == '"' || c == '\\' {
            f.write_char('\\')?;
        }
        f.write_char(c)?;
    }
    f.write_char('"')
}
