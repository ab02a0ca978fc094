//! Bounded temporal-logic properties over finite traces.
//!
//! Every operator carries a finite step bound, so each formula has a
//! computable horizon: the minimal trace length that decides it. `G<=k`
//! covers the k+1 positions at offsets 0..=k, `F<=k` symmetrically.

use crate::lex::{tokenize, Spanned, Tok};
use crate::model::{CmpOp, Mdp, State};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PropertyError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: u32, col: u32, msg: String },
    #[error("unknown variable `{0}` in property")]
    UnknownVariable(String),
    #[error("trace of length {len} cannot decide a property needing {needed} states at position {pos}")]
    InsufficientTrace { len: usize, needed: usize, pos: usize },
}

/// A bounded temporal-logic formula. `V` names atom variables: `String`
/// straight out of the parser, `usize` once bound against a model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PropertyAst<V> {
    True,
    False,
    Atom { var: V, op: CmpOp, value: i64 },
    Not(Box<PropertyAst<V>>),
    And(Box<PropertyAst<V>>, Box<PropertyAst<V>>),
    Or(Box<PropertyAst<V>>, Box<PropertyAst<V>>),
    Next(Box<PropertyAst<V>>),
    Finally { bound: usize, inner: Box<PropertyAst<V>> },
    Globally { bound: usize, inner: Box<PropertyAst<V>> },
    Until { bound: usize, lhs: Box<PropertyAst<V>>, rhs: Box<PropertyAst<V>> },
}

pub type ParsedProperty = PropertyAst<String>;
/// A property whose atoms reference variable indices of a specific model.
pub type BoundProperty = PropertyAst<usize>;

/// A finite sequence of states produced by simulation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub states: Vec<State>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

impl<V> PropertyAst<V> {
    /// Minimal L such that satisfaction at a position is determined by the
    /// L+1 states starting there.
    pub fn horizon(&self) -> usize {
        match self {
            PropertyAst::True | PropertyAst::False | PropertyAst::Atom { .. } => 0,
            PropertyAst::Not(a) => a.horizon(),
            PropertyAst::And(a, b) | PropertyAst::Or(a, b) => a.horizon().max(b.horizon()),
            PropertyAst::Next(a) => 1 + a.horizon(),
            PropertyAst::Finally { bound, inner } | PropertyAst::Globally { bound, inner } => {
                bound + inner.horizon()
            }
            PropertyAst::Until { bound, lhs, rhs } => bound + lhs.horizon().max(rhs.horizon()),
        }
    }

    /// The complement formula; exact for bounded properties because every
    /// sufficiently long trace yields a definite verdict.
    pub fn negated(&self) -> Self
    where
        V: Clone,
    {
        PropertyAst::Not(Box::new(self.clone()))
    }
}

impl ParsedProperty {
    /// Resolves atom variable names against a model's declarations.
    pub fn bind(&self, mdp: &Mdp) -> Result<BoundProperty, PropertyError> {
        Ok(match self {
            PropertyAst::True => PropertyAst::True,
            PropertyAst::False => PropertyAst::False,
            PropertyAst::Atom { var, op, value } => {
                let idx = mdp
                    .variable_index(var)
                    .ok_or_else(|| PropertyError::UnknownVariable(var.clone()))?;
                PropertyAst::Atom { var: idx, op: *op, value: *value }
            }
            PropertyAst::Not(a) => PropertyAst::Not(Box::new(a.bind(mdp)?)),
            PropertyAst::And(a, b) => {
                PropertyAst::And(Box::new(a.bind(mdp)?), Box::new(b.bind(mdp)?))
            }
            PropertyAst::Or(a, b) => {
                PropertyAst::Or(Box::new(a.bind(mdp)?), Box::new(b.bind(mdp)?))
            }
            PropertyAst::Next(a) => PropertyAst::Next(Box::new(a.bind(mdp)?)),
            PropertyAst::Finally { bound, inner } => {
                PropertyAst::Finally { bound: *bound, inner: Box::new(inner.bind(mdp)?) }
            }
            PropertyAst::Globally { bound, inner } => {
                PropertyAst::Globally { bound: *bound, inner: Box::new(inner.bind(mdp)?) }
            }
            PropertyAst::Until { bound, lhs, rhs } => PropertyAst::Until {
                bound: *bound,
                lhs: Box::new(lhs.bind(mdp)?),
                rhs: Box::new(rhs.bind(mdp)?),
            },
        })
    }
}

/// Evaluates `prop` on `trace` at `pos` under standard bounded semantics.
///
/// Requires `trace.len() >= pos + prop.horizon() + 1`; never reads beyond
/// that window.
pub fn evaluate(prop: &BoundProperty, trace: &Trace, pos: usize) -> Result<bool, PropertyError> {
    let needed = pos + prop.horizon() + 1;
    if trace.len() < needed {
        return Err(PropertyError::InsufficientTrace { len: trace.len(), needed, pos });
    }
    Ok(eval_at(prop, trace.states.as_slice(), pos))
}

/// Positional access to trace values, so evaluation can run over either
/// materialized states or the simulator's flat scratch rows.
pub(crate) trait StateGrid {
    fn value(&self, pos: usize, var: usize) -> i64;
}

impl StateGrid for &[State] {
    fn value(&self, pos: usize, var: usize) -> i64 {
        self[pos].values[var]
    }
}

/// Row-major flat storage of `width` variables per position.
pub(crate) struct FlatGrid<'a> {
    pub data: &'a [i64],
    pub width: usize,
}

impl StateGrid for FlatGrid<'_> {
    fn value(&self, pos: usize, var: usize) -> i64 {
        self.data[pos * self.width + var]
    }
}

/// Bounds-unchecked evaluation; callers guarantee the grid holds at least
/// `pos + prop.horizon() + 1` positions.
pub(crate) fn eval_at<G: StateGrid>(prop: &BoundProperty, grid: G, pos: usize) -> bool {
    eval_grid(prop, &grid, pos)
}

fn eval_grid<G: StateGrid>(prop: &BoundProperty, grid: &G, pos: usize) -> bool {
    match prop {
        PropertyAst::True => true,
        PropertyAst::False => false,
        PropertyAst::Atom { var, op, value } => op.apply(grid.value(pos, *var), *value),
        PropertyAst::Not(a) => !eval_grid(a, grid, pos),
        PropertyAst::And(a, b) => eval_grid(a, grid, pos) && eval_grid(b, grid, pos),
        PropertyAst::Or(a, b) => eval_grid(a, grid, pos) || eval_grid(b, grid, pos),
        PropertyAst::Next(a) => eval_grid(a, grid, pos + 1),
        PropertyAst::Finally { bound, inner } => {
            (0..=*bound).any(|i| eval_grid(inner, grid, pos + i))
        }
        PropertyAst::Globally { bound, inner } => {
            (0..=*bound).all(|i| eval_grid(inner, grid, pos + i))
        }
        PropertyAst::Until { bound, lhs, rhs } => (0..=*bound).any(|i| {
            eval_grid(rhs, grid, pos + i) && (0..i).all(|j| eval_grid(lhs, grid, pos + j))
        }),
    }
}

/// Parses property source text.
///
/// ```text
/// prop    := or_expr [ "U" "<=" INT prop ]
/// or_expr := and_expr ("|" and_expr)*
/// and_expr:= unary ("&" unary)*
/// unary   := "!" unary | "X" unary | "F" "<=" INT unary | "G" "<=" INT unary | primary
/// primary := "(" prop ")" | "true" | "false" | IDENT cmp INT
/// ```
pub fn parse_property(text: &str) -> Result<ParsedProperty, PropertyError> {
    let toks = tokenize(text)
        .map_err(|e| PropertyError::Syntax { line: e.line, col: e.col, msg: e.msg })?;
    let mut p = PropParser { toks: &toks, pos: 0 };
    let ast = p.until_expr()?;
    if p.pos != p.toks.len() {
        return Err(p.err_here("unexpected trailing input"));
    }
    Ok(ast)
}

/// Convenience: parse and bind in one step.
pub fn parse_and_bind(text: &str, mdp: &Mdp) -> Result<BoundProperty, PropertyError> {
    parse_property(text)?.bind(mdp)
}

struct PropParser<'a> {
    toks: &'a [Spanned],
    pos: usize,
}

impl<'a> PropParser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn err_here(&self, msg: impl Into<String>) -> PropertyError {
        let (line, col) = self
            .toks
            .get(self.pos.min(self.toks.len().saturating_sub(1)))
            .map(|s| (s.line, s.col))
            .unwrap_or((1, 1));
        PropertyError::Syntax { line, col, msg: msg.into() }
    }

    fn bound(&mut self) -> Result<usize, PropertyError> {
        match self.peek() {
            Some(Tok::Le) => self.pos += 1,
            Some(t) => return Err(self.err_here(format!("expected `<=`, found {t}"))),
            None => return Err(self.err_here("expected `<=`")),
        }
        match self.peek() {
            Some(Tok::Int(n)) if *n >= 0 => {
                let n = *n as usize;
                self.pos += 1;
                Ok(n)
            }
            Some(t) => Err(self.err_here(format!("expected step bound, found {t}"))),
            None => Err(self.err_here("expected step bound")),
        }
    }

    fn until_expr(&mut self) -> Result<ParsedProperty, PropertyError> {
        let lhs = self.or_expr()?;
        if let Some(Tok::Ident(kw)) = self.peek() {
            if kw == "U" {
                self.pos += 1;
                let bound = self.bound()?;
                let rhs = self.until_expr()?;
                return Ok(PropertyAst::Until {
                    bound,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                });
            }
        }
        Ok(lhs)
    }

    fn or_expr(&mut self) -> Result<ParsedProperty, PropertyError> {
        let mut lhs = self.and_expr()?;
        while self.peek() == Some(&Tok::Pipe) {
            self.pos += 1;
            let rhs = self.and_expr()?;
            lhs = PropertyAst::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<ParsedProperty, PropertyError> {
        let mut lhs = self.unary()?;
        while self.peek() == Some(&Tok::Amp) {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = PropertyAst::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<ParsedProperty, PropertyError> {
        match self.peek() {
            Some(Tok::Bang) => {
                self.pos += 1;
                Ok(PropertyAst::Not(Box::new(self.unary()?)))
            }
            Some(Tok::Ident(kw)) if kw == "X" => {
                self.pos += 1;
                Ok(PropertyAst::Next(Box::new(self.unary()?)))
            }
            Some(Tok::Ident(kw)) if kw == "F" => {
                self.pos += 1;
                let bound = self.bound()?;
                Ok(PropertyAst::Finally { bound, inner: Box::new(self.unary()?) })
            }
            Some(Tok::Ident(kw)) if kw == "G" => {
                self.pos += 1;
                let bound = self.bound()?;
                Ok(PropertyAst::Globally { bound, inner: Box::new(self.unary()?) })
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<ParsedProperty, PropertyError> {
        match self.peek().cloned() {
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.until_expr()?;
                match self.peek() {
                    Some(Tok::RParen) => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    _ => Err(self.err_here("expected `)`")),
                }
            }
            Some(Tok::Ident(kw)) if kw == "true" => {
                self.pos += 1;
                Ok(PropertyAst::True)
            }
            Some(Tok::Ident(kw)) if kw == "false" => {
                self.pos += 1;
                Ok(PropertyAst::False)
            }
            Some(Tok::Ident(var)) => {
                self.pos += 1;
                let op = match self.peek() {
                    Some(Tok::Eq) => CmpOp::Eq,
                    Some(Tok::Ne) => CmpOp::Ne,
                    Some(Tok::Lt) => CmpOp::Lt,
                    Some(Tok::Le) => CmpOp::Le,
                    Some(Tok::Gt) => CmpOp::Gt,
                    Some(Tok::Ge) => CmpOp::Ge,
                    Some(t) => {
                        return Err(self.err_here(format!("expected comparison, found {t}")))
                    }
                    None => return Err(self.err_here("expected comparison")),
                };
                self.pos += 1;
                let value = match self.peek() {
                    Some(Tok::Int(n)) => {
                        let n = *n;
                        self.pos += 1;
                        n
                    }
                    Some(Tok::Minus) => {
                        self.pos += 1;
                        match self.peek() {
                            Some(Tok::Int(n)) => {
                                let n = -*n;
                                self.pos += 1;
                                n
                            }
                            _ => return Err(self.err_here("expected integer")),
                        }
                    }
                    Some(t) => return Err(self.err_here(format!("expected integer, found {t}"))),
                    None => return Err(self.err_here("expected integer")),
                };
                Ok(PropertyAst::Atom { var, op, value })
            }
            Some(t) => Err(self.err_here(format!("expected formula, found {t}"))),
            None => Err(self.err_here("expected formula, found end of input")),
        }
    }
}

impl<V: fmt::Display> fmt::Display for PropertyAst<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropertyAst::True => write!(f, "true"),
            PropertyAst::False => write!(f, "false"),
            PropertyAst::Atom { var, op, value } => write!(f, "{var}{}{value}", op.symbol()),
            PropertyAst::Not(a) => write!(f, "!({a})"),
            PropertyAst::And(a, b) => write!(f, "({a} & {b})"),
            PropertyAst::Or(a, b) => write!(f, "({a} | {b})"),
            PropertyAst::Next(a) => write!(f, "X ({a})"),
            PropertyAst::Finally { bound, inner } => write!(f, "F<={bound} ({inner})"),
            PropertyAst::Globally { bound, inner } => write!(f, "G<={bound} ({inner})"),
            PropertyAst::Until { bound, lhs, rhs } => write!(f, "(({lhs}) U<={bound} ({rhs}))"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model;

    fn fig3() -> Mdp {
        parse_model(
            "var s : [0..1] init 0;\n\
             [a1] s=0 -> 0.9:(s'=0) + 0.1:(s'=1);\n\
             [a2] s=0 -> 0.5:(s'=0) + 0.5:(s'=1);\n\
             [a0] s=1 -> 1.0:(s'=0);\n",
        )
        .unwrap()
    }

    fn trace_of(values: &[i64]) -> Trace {
        Trace { states: values.iter().map(|&v| State { values: vec![v] }).collect() }
    }

    #[test]
    fn parses_bounded_finally() {
        let p = parse_property("F<=100 col=2").unwrap();
        assert_eq!(
            p,
            PropertyAst::Finally {
                bound: 100,
                inner: Box::new(PropertyAst::Atom { var: "col".into(), op: CmpOp::Eq, value: 2 })
            }
        );
        assert_eq!(p.horizon(), 100);
    }

    #[test]
    fn parses_nested_temporal_tree() {
        let p = parse_property("X((s=1) & X G<=4 !(s=1))").unwrap();
        let atom = |v| PropertyAst::Atom { var: String::from("s"), op: CmpOp::Eq, value: v };
        let expected = PropertyAst::Next(Box::new(PropertyAst::And(
            Box::new(atom(1)),
            Box::new(PropertyAst::Next(Box::new(PropertyAst::Globally {
                bound: 4,
                inner: Box::new(PropertyAst::Not(Box::new(atom(1)))),
            }))),
        )));
        assert_eq!(p, expected);
        assert_eq!(p.horizon(), 6);
    }

    #[test]
    fn malformed_bound_is_syntax_error() {
        assert!(matches!(parse_property("F<= x"), Err(PropertyError::Syntax { .. })));
        assert!(matches!(parse_property("F x=1"), Err(PropertyError::Syntax { .. })));
    }

    #[test]
    fn atom_horizon_is_zero() {
        assert_eq!(parse_property("s=1").unwrap().horizon(), 0);
    }

    #[test]
    fn until_horizon_takes_worst_child() {
        let p = parse_property("(x=0) U<=3 X x=1").unwrap();
        assert_eq!(p.horizon(), 4);
    }

    #[test]
    fn binding_rejects_unknown_variables() {
        let mdp = fig3();
        let err = parse_property("col=2").unwrap().bind(&mdp).unwrap_err();
        assert!(matches!(err, PropertyError::UnknownVariable(v) if v == "col"));
    }

    #[test]
    fn fig3_property_on_accepting_trace() {
        let mdp = fig3();
        let p = parse_and_bind("X((s=1) & X G<=4 !(s=1))", &mdp).unwrap();
        assert!(evaluate(&p, &trace_of(&[0, 1, 0, 0, 0, 0, 0]), 0).unwrap());
        assert!(!evaluate(&p, &trace_of(&[0, 0, 0, 0, 0, 0, 0]), 0).unwrap());
        assert!(!evaluate(&p, &trace_of(&[0, 1, 0, 0, 1, 0, 0]), 0).unwrap());
    }

    #[test]
    fn zero_bound_globally_is_identity() {
        let mdp = fig3();
        let g = parse_and_bind("G<=0 s=1", &mdp).unwrap();
        let a = parse_and_bind("s=1", &mdp).unwrap();
        for values in [vec![0], vec![1]] {
            let t = trace_of(&values);
            assert_eq!(evaluate(&g, &t, 0).unwrap(), evaluate(&a, &t, 0).unwrap());
        }
    }

    #[test]
    fn short_trace_is_rejected() {
        let mdp = fig3();
        let p = parse_and_bind("X((s=1) & X G<=4 !(s=1))", &mdp).unwrap();
        let err = evaluate(&p, &trace_of(&[0, 1, 0, 0, 0, 0]), 0).unwrap_err();
        assert!(matches!(err, PropertyError::InsufficientTrace { needed: 7, .. }));
    }

    #[test]
    fn evaluation_position_shifts_window() {
        let mdp = fig3();
        let p = parse_and_bind("X s=1", &mdp).unwrap();
        let t = trace_of(&[0, 0, 1]);
        assert!(!evaluate(&p, &t, 0).unwrap());
        assert!(evaluate(&p, &t, 1).unwrap());
        assert!(evaluate(&p, &t, 2).is_err());
    }
}
