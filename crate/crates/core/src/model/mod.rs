//! Guarded-command representation of Markov decision processes over bounded
//! integer variables.
//!
//! A model is a list of variable declarations plus an ordered list of guarded
//! probabilistic commands. Command declaration order is semantically
//! significant: it defines the index space that schedulers select over.

mod parse;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;
use thiserror::Error;

pub use parse::parse_model;

/// Tolerance on the branch-weight sum before exact renormalization.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: u32, col: u32, msg: String },
    #[error("semantic error: {0}")]
    Semantic(String),
    #[error(
        "range error: update leaves variable `{var}` at {value}, outside [{lower}, {upper}]"
    )]
    Range { var: String, value: i64, lower: i64, upper: i64 },
}

/// Integer comparison operators usable in guards and property atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn apply(self, a: i64, b: i64) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

/// Integer expression over declared variables (constants are folded away
/// during name resolution).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IntExpr {
    Lit(i64),
    Var(usize),
    Neg(Box<IntExpr>),
    Add(Box<IntExpr>, Box<IntExpr>),
    Sub(Box<IntExpr>, Box<IntExpr>),
    Mul(Box<IntExpr>, Box<IntExpr>),
}

impl IntExpr {
    pub fn eval(&self, values: &[i64]) -> i64 {
        match self {
            IntExpr::Lit(n) => *n,
            IntExpr::Var(i) => values[*i],
            IntExpr::Neg(e) => -e.eval(values),
            IntExpr::Add(a, b) => a.eval(values) + b.eval(values),
            IntExpr::Sub(a, b) => a.eval(values) - b.eval(values),
            IntExpr::Mul(a, b) => a.eval(values) * b.eval(values),
        }
    }
}

/// Boolean guard expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoolExpr {
    Lit(bool),
    Cmp(IntExpr, CmpOp, IntExpr),
    Not(Box<BoolExpr>),
    And(Box<BoolExpr>, Box<BoolExpr>),
    Or(Box<BoolExpr>, Box<BoolExpr>),
}

impl BoolExpr {
    pub fn eval(&self, values: &[i64]) -> bool {
        match self {
            BoolExpr::Lit(b) => *b,
            BoolExpr::Cmp(a, op, b) => op.apply(a.eval(values), b.eval(values)),
            BoolExpr::Not(e) => !e.eval(values),
            BoolExpr::And(a, b) => a.eval(values) && b.eval(values),
            BoolExpr::Or(a, b) => a.eval(values) || b.eval(values),
        }
    }
}

/// A declared state variable with a bounded integer domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableDecl {
    pub name: String,
    pub lower: i64,
    pub upper: i64,
    pub init: i64,
    /// Bits this variable contributes to the trace vector. Defaults to the
    /// minimal width for the domain; can be widened per variable.
    pub bit_width: u32,
}

/// Minimal bit width that distinguishes `span + 1` values (at least 1).
pub fn min_bits(span: u64) -> u32 {
    if span == 0 {
        1
    } else {
        64 - span.leading_zeros()
    }
}

/// One probabilistic branch of a command: an exact weight plus a set of
/// simultaneous assignments.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub weight: BigRational,
    /// Cumulative weight of this and all earlier branches, as f64. The last
    /// branch always carries exactly 1.0.
    pub cumulative: f64,
    pub updates: Vec<(usize, IntExpr)>,
}

/// A guarded probabilistic command.
#[derive(Debug, Clone, PartialEq)]
pub struct Command {
    pub label: Option<String>,
    pub guard: BoolExpr,
    pub branches: Vec<Branch>,
}

/// A named property embedded in a model file, kept as raw source text and
/// parsed on demand by the property module.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertySource {
    pub name: String,
    pub text: String,
}

/// A Markov decision process as a flat guarded-command program.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    pub variables: Vec<VariableDecl>,
    pub commands: Vec<Command>,
    pub constants: Vec<(String, i64)>,
    pub properties: Vec<PropertySource>,
}

/// An assignment of values to all variables, in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct State {
    pub values: Vec<i64>,
}

impl Mdp {
    /// Validates and assembles a model from already-resolved parts.
    pub fn new(
        variables: Vec<VariableDecl>,
        commands: Vec<Command>,
        constants: Vec<(String, i64)>,
        properties: Vec<PropertySource>,
    ) -> Result<Self, ModelError> {
        let mut mdp = Mdp { variables, commands, constants, properties };
        mdp.validate()?;
        Ok(mdp)
    }

    fn validate(&mut self) -> Result<(), ModelError> {
        if self.commands.is_empty() {
            return Err(ModelError::Semantic("model declares no commands".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for (name, _) in &self.constants {
            if !seen.insert(name.clone()) {
                return Err(ModelError::Semantic(format!("duplicate name `{name}`")));
            }
        }
        for v in &self.variables {
            if !seen.insert(v.name.clone()) {
                return Err(ModelError::Semantic(format!("duplicate name `{}`", v.name)));
            }
            if v.lower > v.upper {
                return Err(ModelError::Semantic(format!(
                    "variable `{}` has empty domain [{}..{}]",
                    v.name, v.lower, v.upper
                )));
            }
            if v.init < v.lower || v.init > v.upper {
                return Err(ModelError::Semantic(format!(
                    "variable `{}` initial value {} outside [{}..{}]",
                    v.name, v.init, v.lower, v.upper
                )));
            }
            let span = (v.upper - v.lower) as u64;
            if v.bit_width == 0 || v.bit_width < min_bits(span) || v.bit_width > 63 {
                return Err(ModelError::Semantic(format!(
                    "variable `{}` bit width {} cannot encode [{}..{}]",
                    v.name, v.bit_width, v.lower, v.upper
                )));
            }
        }
        for (ci, cmd) in self.commands.iter_mut().enumerate() {
            let mut sum = BigRational::zero();
            for b in &cmd.branches {
                if !b.weight.is_positive() || b.weight > BigRational::one() {
                    return Err(ModelError::Semantic(format!(
                        "command {ci}: branch weight {} outside (0, 1]",
                        b.weight
                    )));
                }
                sum += &b.weight;
            }
            let err = (&sum - BigRational::one()).abs();
            let tol = BigRational::new(BigInt::from(1), BigInt::from(1_000_000_000u64));
            if err > tol {
                return Err(ModelError::Semantic(format!(
                    "command {ci}: branch weights sum to {}, not 1",
                    sum.to_f64().unwrap_or(f64::NAN)
                )));
            }
            // Renormalize exactly, then precompute f64 cumulative bounds from
            // the exact partial sums so the last bound is exactly 1.0.
            let mut acc = BigRational::zero();
            for b in &mut cmd.branches {
                b.weight /= &sum;
                acc += &b.weight;
                b.cumulative = rational_to_f64(&acc);
            }
            if let Some(last) = cmd.branches.last_mut() {
                last.cumulative = 1.0;
            }
        }
        Ok(())
    }

    pub fn initial_state(&self) -> State {
        State { values: self.variables.iter().map(|v| v.init).collect() }
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn property(&self, name: &str) -> Option<&PropertySource> {
        self.properties.iter().find(|p| p.name == name)
    }

    /// Indices of commands whose guards hold in `state`, in declaration
    /// order. An empty result signals deadlock.
    pub fn enabled(&self, state: &State) -> Vec<usize> {
        let mut out = Vec::new();
        self.enabled_into(&state.values, &mut out);
        out
    }

    /// Allocation-free variant of [`Mdp::enabled`] for hot loops.
    pub fn enabled_into(&self, values: &[i64], out: &mut Vec<usize>) {
        out.clear();
        out.extend(
            self.commands
                .iter()
                .enumerate()
                .filter(|(_, c)| c.guard.eval(values))
                .map(|(i, _)| i),
        );
    }

    /// Branch of `cmd` whose cumulative weight interval contains `u`.
    pub fn select_branch(&self, cmd: usize, u: f64) -> usize {
        let branches = &self.commands[cmd].branches;
        branches
            .iter()
            .position(|b| u < b.cumulative)
            .unwrap_or(branches.len() - 1)
    }

    /// Applies one branch's updates atomically, checking variable ranges.
    pub fn apply_branch(
        &self,
        state: &State,
        cmd: usize,
        branch: usize,
    ) -> Result<State, ModelError> {
        let mut next = state.clone();
        self.apply_branch_flat(&state.values, cmd, branch, &mut next.values)?;
        Ok(next)
    }

    /// Branch application over raw value slices; `next` must start as a
    /// copy of `current`.
    pub(crate) fn apply_branch_flat(
        &self,
        current: &[i64],
        cmd: usize,
        branch: usize,
        next: &mut [i64],
    ) -> Result<(), ModelError> {
        for (var, expr) in &self.commands[cmd].branches[branch].updates {
            let value = expr.eval(current);
            let decl = &self.variables[*var];
            if value < decl.lower || value > decl.upper {
                return Err(ModelError::Range {
                    var: decl.name.clone(),
                    value,
                    lower: decl.lower,
                    upper: decl.upper,
                });
            }
            next[*var] = value;
        }
        Ok(())
    }

    /// Successor state for `cmd` under probabilistic draw `u` in [0, 1).
    pub fn successor(&self, state: &State, cmd: usize, u: f64) -> Result<State, ModelError> {
        self.apply_branch(state, cmd, self.select_branch(cmd, u))
    }

    /// Per-variable trace-vector encoding of `state`: `value - lower` in
    /// `bit_width` bits, in declaration order.
    pub fn encode_state<'a>(
        &'a self,
        state: &'a State,
    ) -> impl Iterator<Item = (u64, u32)> + 'a {
        self.encode_values(&state.values)
    }

    /// Slice-based twin of [`Mdp::encode_state`].
    pub fn encode_values<'a>(
        &'a self,
        values: &'a [i64],
    ) -> impl Iterator<Item = (u64, u32)> + 'a {
        self.variables
            .iter()
            .zip(values)
            .map(|(v, &x)| ((x - v.lower) as u64, v.bit_width))
    }

    /// Regenerates model source text. Weights print as exact rationals, so
    /// reparsing the output reproduces the same structure.
    pub fn to_source(&self) -> String {
        self.to_string()
    }
}

pub(crate) fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Ratios of huge integers can overflow the ToPrimitive path.
        let num = r.numer().to_f64().unwrap_or(f64::NAN);
        let den = r.denom().to_f64().unwrap_or(f64::NAN);
        num / den
    })
}

fn fmt_int_expr(e: &IntExpr, vars: &[VariableDecl], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        IntExpr::Lit(n) => write!(f, "{n}"),
        IntExpr::Var(i) => write!(f, "{}", vars[*i].name),
        IntExpr::Neg(a) => {
            write!(f, "-(")?;
            fmt_int_expr(a, vars, f)?;
            write!(f, ")")
        }
        IntExpr::Add(a, b) | IntExpr::Sub(a, b) | IntExpr::Mul(a, b) => {
            let op = match e {
                IntExpr::Add(..) => "+",
                IntExpr::Sub(..) => "-",
                _ => "*",
            };
            write!(f, "(")?;
            fmt_int_expr(a, vars, f)?;
            write!(f, " {op} ")?;
            fmt_int_expr(b, vars, f)?;
            write!(f, ")")
        }
    }
}

fn fmt_bool_expr(e: &BoolExpr, vars: &[VariableDecl], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e {
        BoolExpr::Lit(b) => write!(f, "{b}"),
        BoolExpr::Cmp(a, op, b) => {
            fmt_int_expr(a, vars, f)?;
            write!(f, " {} ", op.symbol())?;
            fmt_int_expr(b, vars, f)
        }
        BoolExpr::Not(a) => {
            write!(f, "!(")?;
            fmt_bool_expr(a, vars, f)?;
            write!(f, ")")
        }
        BoolExpr::And(a, b) | BoolExpr::Or(a, b) => {
            let op = if matches!(e, BoolExpr::And(..)) { "&" } else { "|" };
            write!(f, "(")?;
            fmt_bool_expr(a, vars, f)?;
            write!(f, " {op} ")?;
            fmt_bool_expr(b, vars, f)?;
            write!(f, ")")
        }
    }
}

impl fmt::Display for Mdp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, value) in &self.constants {
            writeln!(f, "const {name} = {value};")?;
        }
        for v in &self.variables {
            let span = (v.upper - v.lower) as u64;
            write!(f, "var {} : [{}..{}] init {}", v.name, v.lower, v.upper, v.init)?;
            if v.bit_width != min_bits(span) {
                write!(f, " bits {}", v.bit_width)?;
            }
            writeln!(f, ";")?;
        }
        for cmd in &self.commands {
            match &cmd.label {
                Some(l) => write!(f, "[{l}] ")?,
                None => write!(f, "[] ")?,
            }
            fmt_bool_expr(&cmd.guard, &self.variables, f)?;
            write!(f, " -> ")?;
            for (bi, b) in cmd.branches.iter().enumerate() {
                if bi > 0 {
                    write!(f, " + ")?;
                }
                if b.weight.denom() == &BigInt::from(1) {
                    write!(f, "{}", b.weight.numer())?;
                } else {
                    write!(f, "{}/{}", b.weight.numer(), b.weight.denom())?;
                }
                write!(f, ":")?;
                if b.updates.is_empty() {
                    write!(f, "true")?;
                }
                for (ui, (var, expr)) in b.updates.iter().enumerate() {
                    if ui > 0 {
                        write!(f, " & ")?;
                    }
                    write!(f, "({}' = ", self.variables[*var].name)?;
                    fmt_int_expr(expr, &self.variables, f)?;
                    write!(f, ")")?;
                }
            }
            writeln!(f, ";")?;
        }
        for p in &self.properties {
            writeln!(f, "property \"{}\" = {};", p.name, p.text)?;
        }
        Ok(())
    }
}
