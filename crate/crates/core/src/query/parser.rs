use std::fmt;

use super::lexer::{tokenize, Tok, Token};
use super::{AggOp, Axis, BinOp, Positional, Query, Relevance, Selector, Step, Target};

/// Bracket/parenthesis nesting limit.
const MAX_DEPTH: usize = 64;

/// Syntax error at a 0-based byte offset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
    pub expected: Vec<String>,
}

impl ParseError {
    pub(super) fn new(offset: usize, message: impl Into<String>, expected: &[&str]) -> Self {
        ParseError {
            offset,
            message: message.into(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "syntax error at byte {}: {}", self.offset, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

/// Parses query text. Empty (or all-whitespace) input is the empty query.
pub fn parse(src: &str) -> Result<Query, ParseError> {
    let tokens = tokenize(src)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        depth: 0,
    };
    let mut steps = Vec::new();
    while p.peek() != &Tok::Eof {
        steps.push(p.step(true)?);
    }
    Ok(Query { steps })
}

/// Like [`parse`] but accepts raw bytes; invalid UTF-8 is a syntax error at
/// the first bad byte.
pub fn parse_bytes(src: &[u8]) -> Result<Query, ParseError> {
    match std::str::from_utf8(src) {
        Ok(s) => parse(s),
        Err(e) => Err(ParseError::new(e.valid_up_to(), "invalid UTF-8", &[])),
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    depth: usize,
}

const STEP_START: &[&str] = &["`/`", "`//`"];
const SELECTOR: &[&str] = &["node type", "`*`"];
const EXPR_START: &[&str] = &["`[`", "`(`", "`1`", "`avg`", "`min`", "`max`", "`gmean`"];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].offset
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        ParseError::new(
            self.offset(),
            format!("unexpected {}", self.peek().describe()),
            expected,
        )
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&[&tok.describe()]))
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(ParseError::new(self.offset(), "expression nested too deeply", &[]));
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    /// `axis selector positional? relevance?`; inside an aggregation the axis
    /// may be omitted and defaults to `/`.
    fn step(&mut self, axis_required: bool) -> Result<Step, ParseError> {
        let axis = match self.peek() {
            Tok::Slash => {
                self.bump();
                Axis::Child
            }
            Tok::DoubleSlash => {
                self.bump();
                Axis::Descendant
            }
            _ if !axis_required => Axis::Child,
            _ => return Err(self.unexpected(STEP_START)),
        };
        let selector = match self.peek().clone() {
            Tok::Ident(name) => Selector::Type(name),
            Tok::Star => Selector::Wildcard,
            _ => return Err(self.unexpected(SELECTOR)),
        };
        self.bump();
        let mut step = Step::new(axis, selector);
        if self.peek() == &Tok::LBracket && self.positional_ahead() {
            step.positional = Some(self.positional()?);
        }
        if self.peek() == &Tok::LBracket {
            step.relevance = Some(self.bracketed()?);
        }
        Ok(step)
    }

    /// After `[`: a bare integer followed by `]` or `:`, or `-`.
    fn positional_ahead(&self) -> bool {
        matches!(
            (self.peek_at(1), self.peek_at(2)),
            (Tok::Number(_), Tok::RBracket | Tok::Colon) | (Tok::Minus, _)
        )
    }

    fn position_number(&mut self) -> Result<usize, ParseError> {
        let at = self.offset();
        let Tok::Number(n) = *self.peek() else {
            return Err(self.unexpected(&["positive integer"]));
        };
        if n == 0 {
            return Err(ParseError::new(at, "positions start at 1", &["positive integer"]));
        }
        self.bump();
        usize::try_from(n).map_err(|_| ParseError::new(at, "position too large", &[]))
    }

    fn positional(&mut self) -> Result<Positional, ParseError> {
        self.expect(Tok::LBracket)?;
        let p = if self.peek() == &Tok::Minus {
            self.bump();
            Positional::FromEnd(self.position_number()?)
        } else {
            let i = self.position_number()?;
            if self.peek() == &Tok::Colon {
                self.bump();
                let at = self.offset();
                let j = self.position_number()?;
                if j < i {
                    return Err(ParseError::new(at, "range end precedes range start", &[]));
                }
                Positional::Range(i, j)
            } else {
                Positional::Index(i)
            }
        };
        self.expect(Tok::RBracket)?;
        Ok(p)
    }

    /// `[ name ~= "..." ]` or `[ expr ]`.
    fn bracketed(&mut self) -> Result<Relevance, ParseError> {
        self.enter()?;
        self.expect(Tok::LBracket)?;
        let r = if matches!(self.peek(), Tok::Ident(_)) && self.peek_at(1) == &Tok::Approx {
            let Tok::Ident(name) = self.bump() else {
                unreachable!()
            };
            self.bump();
            let at = self.offset();
            let condition = match self.peek().clone() {
                Tok::Str(s) if !s.is_empty() => s,
                Tok::Str(_) => {
                    return Err(ParseError::new(at, "relevance condition must not be empty", &[]))
                }
                _ => return Err(self.unexpected(&["string"])),
            };
            self.bump();
            let target = if name == "node" {
                Target::Node
            } else {
                Target::Attribute(name)
            };
            Relevance::Local { target, condition }
        } else {
            self.expr()?
        };
        self.expect(Tok::RBracket)?;
        self.leave();
        Ok(r)
    }

    /// `unary ('*' unary)*`, left-associative.
    fn expr(&mut self) -> Result<Relevance, ParseError> {
        let mut left = self.unary()?;
        while self.peek() == &Tok::Star {
            self.bump();
            let right = self.unary()?;
            left = Relevance::binary(BinOp::Prod, left, right);
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Relevance, ParseError> {
        if let Tok::Number(n) = *self.peek() {
            if n != 1 {
                return Err(self.unexpected(&["`1 -`"]));
            }
            self.bump();
            self.expect(Tok::Minus)?;
            self.enter()?;
            let inner = self.unary()?;
            self.leave();
            return Ok(Relevance::negate(inner));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Relevance, ParseError> {
        match self.peek().clone() {
            Tok::LBracket => self.bracketed(),
            Tok::LParen => {
                self.enter()?;
                self.bump();
                let left = self.expr()?;
                self.expect(Tok::Plus)?;
                let right = self.expr()?;
                self.expect(Tok::RParen)?;
                self.expect(Tok::Slash)?;
                let at = self.offset();
                match self.bump() {
                    Tok::Number(2) => {}
                    _ => return Err(ParseError::new(at, "average divisor must be 2", &["`2`"])),
                }
                self.leave();
                Ok(Relevance::binary(BinOp::Avg, left, right))
            }
            Tok::Ident(kw) if self.peek_at(1) == &Tok::LParen => {
                let op = match kw.as_str() {
                    "avg" => AggOp::Avg,
                    "min" => AggOp::Min,
                    "max" => AggOp::Max,
                    "gmean" => AggOp::Gmean,
                    _ => return Err(self.unexpected(EXPR_START)),
                };
                self.enter()?;
                self.bump();
                self.bump();
                let r = if matches!(op, AggOp::Min | AggOp::Max) && !self.step_ahead() {
                    let left = self.expr()?;
                    self.expect(Tok::Comma)?;
                    let right = self.expr()?;
                    let bin = if op == AggOp::Min { BinOp::Min } else { BinOp::Max };
                    Relevance::binary(bin, left, right)
                } else {
                    Relevance::agg(op, self.step(false)?)
                };
                self.expect(Tok::RParen)?;
                self.leave();
                Ok(r)
            }
            _ => Err(self.unexpected(EXPR_START)),
        }
    }

    /// One token after `min(`/`max(`: a step starts with an axis, `*`, or a
    /// type name that is not itself a function call.
    fn step_ahead(&self) -> bool {
        match self.peek() {
            Tok::Slash | Tok::DoubleSlash | Tok::Star => true,
            Tok::Ident(_) => self.peek_at(1) != &Tok::LParen,
            _ => false,
        }
    }
}
