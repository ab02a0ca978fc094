//! Recursive-descent parser for the guarded-command model language.
//!
//! ```text
//! model    := item*
//! item     := "const" IDENT "=" const_int ";"
//!           | "var" IDENT ":" "[" const_int ".." const_int "]" "init" const_int ["bits" INT] ";"
//!           | "[" [IDENT] "]" bool_expr "->" branch ("+" branch)* ";"
//!           | "property" STRING "=" <raw text> ";"
//! branch   := weight ":" ("true" | assign ("&" assign)*)
//! assign   := "(" IDENT "'" "=" int_expr ")"
//! weight   := DECIMAL | const_int ["/" const_int]
//! ```
//!
//! Constants are folded during resolution; weights become exact rationals.

use super::*;
use crate::lex::{tokenize, Spanned, Tok};
use num_bigint::BigInt;
use num_rational::BigRational;
use std::collections::HashMap;

/// Parses model source text into a validated [`Mdp`].
pub fn parse_model(text: &str) -> Result<Mdp, ModelError> {
    let toks = tokenize(text)
        .map_err(|e| ModelError::Syntax { line: e.line, col: e.col, msg: e.msg })?;
    let mut p = Parser { toks: &toks, pos: 0, src: text, consts: HashMap::new(), vars: Vec::new() };
    p.model()
}

struct Parser<'a> {
    toks: &'a [Spanned],
    pos: usize,
    src: &'a str,
    consts: HashMap<String, i64>,
    vars: Vec<String>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn next(&mut self) -> Option<&'a Spanned> {
        let t = self.toks.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn err_here(&self, msg: impl Into<String>) -> ModelError {
        let (line, col) = self
            .toks
            .get(self.pos.min(self.toks.len().saturating_sub(1)))
            .map(|s| (s.line, s.col))
            .unwrap_or((1, 1));
        ModelError::Syntax { line, col, msg: msg.into() }
    }

    fn expect(&mut self, tok: &Tok, what: &str) -> Result<(), ModelError> {
        match self.peek() {
            Some(t) if t == tok => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(self.err_here(format!("expected {what}, found {t}"))),
            None => Err(self.err_here(format!("expected {what}, found end of input"))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ModelError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            Some(t) => Err(self.err_here(format!("expected {what}, found {t}"))),
            None => Err(self.err_here(format!("expected {what}, found end of input"))),
        }
    }

    fn model(&mut self) -> Result<Mdp, ModelError> {
        let mut variables = Vec::new();
        let mut commands = Vec::new();
        let mut constants = Vec::new();
        let mut properties = Vec::new();
        while let Some(tok) = self.peek() {
            match tok {
                Tok::Ident(kw) if kw == "const" => {
                    self.pos += 1;
                    let name = self.ident("constant name")?;
                    self.expect(&Tok::Eq, "`=`")?;
                    let value = self.const_int()?;
                    self.expect(&Tok::Semi, "`;`")?;
                    if self.consts.insert(name.clone(), value).is_some() {
                        return Err(ModelError::Semantic(format!("duplicate name `{name}`")));
                    }
                    constants.push((name, value));
                }
                Tok::Ident(kw) if kw == "var" => {
                    self.pos += 1;
                    let decl = self.var_decl()?;
                    self.vars.push(decl.name.clone());
                    variables.push(decl);
                }
                Tok::Ident(kw) if kw == "property" => {
                    self.pos += 1;
                    properties.push(self.property_decl()?);
                }
                Tok::LBracket => {
                    commands.push(self.command()?);
                }
                t => {
                    return Err(self.err_here(format!(
                        "expected `const`, `var`, `property` or a command, found {t}"
                    )))
                }
            }
        }
        Mdp::new(variables, commands, constants, properties)
    }

    fn var_decl(&mut self) -> Result<VariableDecl, ModelError> {
        let name = self.ident("variable name")?;
        self.expect(&Tok::Colon, "`:`")?;
        self.expect(&Tok::LBracket, "`[`")?;
        let lower = self.const_int()?;
        self.expect(&Tok::DotDot, "`..`")?;
        let upper = self.const_int()?;
        self.expect(&Tok::RBracket, "`]`")?;
        match self.peek() {
            Some(Tok::Ident(kw)) if kw == "init" => self.pos += 1,
            _ => return Err(self.err_here("expected `init`")),
        }
        let init = self.const_int()?;
        let mut bit_width = if upper >= lower { min_bits((upper - lower) as u64) } else { 1 };
        if let Some(Tok::Ident(kw)) = self.peek() {
            if kw == "bits" {
                self.pos += 1;
                let b = self.const_int()?;
                if !(1..=63).contains(&b) {
                    return Err(self.err_here("bit width must be in 1..=63"));
                }
                bit_width = b as u32;
            }
        }
        self.expect(&Tok::Semi, "`;`")?;
        Ok(VariableDecl { name, lower, upper, init, bit_width })
    }

    fn property_decl(&mut self) -> Result<PropertySource, ModelError> {
        let name = match self.next() {
            Some(Spanned { tok: Tok::Str(s), .. }) => s.clone(),
            _ => return Err(self.err_here("expected property name string")),
        };
        self.expect(&Tok::Eq, "`=`")?;
        // Capture the raw source between `=` and the closing `;` so the
        // property module owns its own grammar.
        let start_tok = self
            .toks
            .get(self.pos)
            .ok_or_else(|| self.err_here("expected property text"))?;
        let start = offset_of(self.src, start_tok.line, start_tok.col);
        let mut depth = 0usize;
        loop {
            match self.peek() {
                Some(Tok::LParen) => depth += 1,
                Some(Tok::RParen) => depth = depth.saturating_sub(1),
                Some(Tok::Semi) if depth == 0 => break,
                None => return Err(self.err_here("unterminated property (missing `;`)")),
                _ => {}
            }
            self.pos += 1;
        }
        let end_tok = &self.toks[self.pos];
        let end = offset_of(self.src, end_tok.line, end_tok.col);
        self.pos += 1; // consume `;`
        Ok(PropertySource { name, text: self.src[start..end].trim().to_string() })
    }

    fn command(&mut self) -> Result<Command, ModelError> {
        self.expect(&Tok::LBracket, "`[`")?;
        let label = match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Some(s)
            }
            _ => None,
        };
        self.expect(&Tok::RBracket, "`]`")?;
        let guard = self.bool_expr()?;
        self.expect(&Tok::Arrow, "`->`")?;
        let mut branches = vec![self.branch()?];
        while self.peek() == Some(&Tok::Plus) {
            self.pos += 1;
            branches.push(self.branch()?);
        }
        self.expect(&Tok::Semi, "`;`")?;
        Ok(Command { label, guard, branches })
    }

    fn branch(&mut self) -> Result<Branch, ModelError> {
        let weight = self.weight()?;
        self.expect(&Tok::Colon, "`:`")?;
        let mut updates = Vec::new();
        match self.peek() {
            Some(Tok::Ident(kw)) if kw == "true" => {
                self.pos += 1; // identity update
            }
            _ => {
                updates.push(self.assign()?);
                while self.peek() == Some(&Tok::Amp) {
                    self.pos += 1;
                    updates.push(self.assign()?);
                }
            }
        }
        Ok(Branch { weight, cumulative: 0.0, updates })
    }

    fn assign(&mut self) -> Result<(usize, IntExpr), ModelError> {
        self.expect(&Tok::LParen, "`(`")?;
        let name = self.ident("variable name")?;
        let var = self
            .vars
            .iter()
            .position(|v| *v == name)
            .ok_or_else(|| ModelError::Semantic(format!("unknown variable `{name}`")))?;
        self.expect(&Tok::Prime, "`'`")?;
        self.expect(&Tok::Eq, "`=`")?;
        let expr = self.int_expr()?;
        self.expect(&Tok::RParen, "`)`")?;
        Ok((var, expr))
    }

    fn weight(&mut self) -> Result<BigRational, ModelError> {
        match self.peek().cloned() {
            Some(Tok::Decimal { int_part, frac_part }) => {
                self.pos += 1;
                let digits: String = format!("{int_part}{frac_part}");
                let numer: BigInt = digits.parse().expect("digits");
                let denom = BigInt::from(10u8).pow(frac_part.len() as u32);
                Ok(BigRational::new(numer, denom))
            }
            Some(Tok::Int(_)) | Some(Tok::Ident(_)) => {
                let numer = self.const_int()?;
                let denom = if self.peek() == Some(&Tok::Slash) {
                    self.pos += 1;
                    self.const_int()?
                } else {
                    1
                };
                if denom == 0 {
                    return Err(self.err_here("zero denominator in weight"));
                }
                Ok(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
            }
            Some(t) => Err(self.err_here(format!("expected branch weight, found {t}"))),
            None => Err(self.err_here("expected branch weight, found end of input")),
        }
    }

    /// Integer usable in declarations: literal, constant name, or negation.
    fn const_int(&mut self) -> Result<i64, ModelError> {
        match self.peek().cloned() {
            Some(Tok::Int(n)) => {
                self.pos += 1;
                Ok(n)
            }
            Some(Tok::Minus) => {
                self.pos += 1;
                Ok(-self.const_int()?)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                self.consts
                    .get(&name)
                    .copied()
                    .ok_or_else(|| ModelError::Semantic(format!("unknown constant `{name}`")))
            }
            Some(t) => Err(self.err_here(format!("expected integer, found {t}"))),
            None => Err(self.err_here("expected integer, found end of input")),
        }
    }

    fn bool_expr(&mut self) -> Result<BoolExpr, ModelError> {
        let mut lhs = self.bool_and()?;
        while self.peek() == Some(&Tok::Pipe) {
            self.pos += 1;
            let rhs = self.bool_and()?;
            lhs = BoolExpr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn bool_and(&mut self) -> Result<BoolExpr, ModelError> {
        let mut lhs = self.bool_atom()?;
        while self.peek() == Some(&Tok::Amp) {
            self.pos += 1;
            let rhs = self.bool_atom()?;
            lhs = BoolExpr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn bool_atom(&mut self) -> Result<BoolExpr, ModelError> {
        match self.peek() {
            Some(Tok::Bang) => {
                self.pos += 1;
                Ok(BoolExpr::Not(Box::new(self.bool_atom()?)))
            }
            Some(Tok::Ident(kw)) if kw == "true" => {
                self.pos += 1;
                Ok(BoolExpr::Lit(true))
            }
            Some(Tok::Ident(kw)) if kw == "false" => {
                self.pos += 1;
                Ok(BoolExpr::Lit(false))
            }
            Some(Tok::LParen) => {
                // Either a parenthesized comparison operand or a nested
                // boolean expression; try the comparison first and backtrack.
                let save = self.pos;
                if let Ok(cmp) = self.comparison() {
                    return Ok(cmp);
                }
                self.pos = save;
                self.expect(&Tok::LParen, "`(`")?;
                let inner = self.bool_expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(inner)
            }
            _ => self.comparison(),
        }
    }

    fn comparison(&mut self) -> Result<BoolExpr, ModelError> {
        let lhs = self.int_expr()?;
        let op = match self.peek() {
            Some(Tok::Eq) => CmpOp::Eq,
            Some(Tok::Ne) => CmpOp::Ne,
            Some(Tok::Lt) => CmpOp::Lt,
            Some(Tok::Le) => CmpOp::Le,
            Some(Tok::Gt) => CmpOp::Gt,
            Some(Tok::Ge) => CmpOp::Ge,
            Some(t) => return Err(self.err_here(format!("expected comparison operator, found {t}"))),
            None => return Err(self.err_here("expected comparison operator")),
        };
        self.pos += 1;
        let rhs = self.int_expr()?;
        Ok(BoolExpr::Cmp(lhs, op, rhs))
    }

    fn int_expr(&mut self) -> Result<IntExpr, ModelError> {
        let mut lhs = self.int_term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    let rhs = self.int_term()?;
                    lhs = IntExpr::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    let rhs = self.int_term()?;
                    lhs = IntExpr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn int_term(&mut self) -> Result<IntExpr, ModelError> {
        let mut lhs = self.int_factor()?;
        while self.peek() == Some(&Tok::Star) {
            self.pos += 1;
            let rhs = self.int_factor()?;
            lhs = IntExpr::Mul(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn int_factor(&mut self) -> Result<IntExpr, ModelError> {
        match self.peek().cloned() {
            Some(Tok::Int(n)) => {
                self.pos += 1;
                Ok(IntExpr::Lit(n))
            }
            Some(Tok::Minus) => {
                self.pos += 1;
                Ok(match self.int_factor()? {
                    IntExpr::Lit(n) => IntExpr::Lit(-n),
                    e => IntExpr::Neg(Box::new(e)),
                })
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    Ok(IntExpr::Var(i))
                } else if let Some(&c) = self.consts.get(&name) {
                    Ok(IntExpr::Lit(c))
                } else {
                    Err(ModelError::Semantic(format!("unknown name `{name}`")))
                }
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.int_expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Some(t) => Err(self.err_here(format!("expected expression, found {t}"))),
            None => Err(self.err_here("expected expression, found end of input")),
        }
    }
}

/// Byte offset of a 1-based line/column position.
fn offset_of(src: &str, line: u32, col: u32) -> usize {
    let mut cur_line = 1u32;
    let mut cur_col = 1u32;
    for (i, c) in src.char_indices() {
        if cur_line == line && cur_col == col {
            return i;
        }
        if c == '\n' {
            cur_line += 1;
            cur_col = 1;
        } else {
            cur_col += 1;
        }
    }
    src.len()
}
