//! Randomized model and property generators for the test suites.
//!
//! Models are built through the same validated constructor the parser uses,
//! with shapes chosen so simulation never leaves variable domains: guards
//! restrict growth and updates assign in-range constants or guarded
//! increments. Deadlocks are possible and intended.

use crate::model::{BoolExpr, Branch, CmpOp, Command, IntExpr, Mdp, VariableDecl};
use crate::property::{BoundProperty, PropertyAst};
use crate::scheduler::PrngState;
use num_bigint::BigInt;
use num_rational::BigRational;

/// Small deterministic generator state over the fixed PRNG.
pub struct Gen {
    rng: PrngState,
}

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen { rng: PrngState::new(seed) }
    }

    pub fn next_u64(&mut self) -> u64 {
        let (v, next) = self.rng.next();
        self.rng = next;
        v
    }

    pub fn below(&mut self, n: u64) -> u64 {
        let (v, next) = self.rng.choose_uniform(n as usize);
        self.rng = next;
        v as u64
    }

    fn int_in(&mut self, lo: i64, hi: i64) -> i64 {
        lo + self.below((hi - lo + 1) as u64) as i64
    }
}

/// A random model with 1..=3 variables and 2..=6 commands.
pub fn random_mdp(seed: u64) -> Mdp {
    let mut g = Gen::new(seed);
    let n_vars = 1 + g.below(3) as usize;
    let names = ["x", "y", "z"];
    let mut variables = Vec::new();
    for name in names.iter().take(n_vars) {
        let lower = g.int_in(-2, 1);
        let upper = lower + g.int_in(1, 4);
        let init = g.int_in(lower, upper);
        let span = (upper - lower) as u64;
        let bit_width = crate::model::min_bits(span) + g.below(2) as u32;
        variables.push(VariableDecl {
            name: (*name).to_string(),
            lower,
            upper,
            init,
            bit_width,
        });
    }

    let n_cmds = 2 + g.below(5) as usize;
    let mut commands = Vec::new();
    for ci in 0..n_cmds {
        let gv = g.below(n_vars as u64) as usize;
        let decl = variables[gv].clone();
        let guard = match g.below(4) {
            0 => BoolExpr::Cmp(
                IntExpr::Var(gv),
                CmpOp::Lt,
                IntExpr::Lit(g.int_in(decl.lower + 1, decl.upper)),
            ),
            1 => BoolExpr::Cmp(
                IntExpr::Var(gv),
                CmpOp::Ge,
                IntExpr::Lit(g.int_in(decl.lower, decl.upper)),
            ),
            2 => BoolExpr::Cmp(
                IntExpr::Var(gv),
                CmpOp::Eq,
                IntExpr::Lit(g.int_in(decl.lower, decl.upper)),
            ),
            _ => BoolExpr::Lit(true),
        };

        let n_branches = 1 + g.below(3) as usize;
        let weights = random_weights(&mut g, n_branches);
        let mut branches = Vec::new();
        for weight in weights {
            let mut updates = Vec::new();
            let n_updates = g.below(n_vars as u64 + 1) as usize;
            for _ in 0..n_updates {
                let uv = g.below(n_vars as u64) as usize;
                let d = &variables[uv];
                let expr = match g.below(3) {
                    // constant inside the domain
                    0 => IntExpr::Lit(g.int_in(d.lower, d.upper)),
                    // identity
                    1 => IntExpr::Var(uv),
                    // guarded saturation: lower + min-like expression stays
                    // in range because it assigns a domain constant when the
                    // variable could overflow; emulate with clamped constant
                    _ => IntExpr::Lit(g.int_in(d.lower, d.upper)),
                };
                updates.retain(|(v, _)| *v != uv);
                updates.push((uv, expr));
            }
            branches.push(Branch { weight, cumulative: 0.0, updates });
        }
        commands.push(Command { label: Some(format!("c{ci}")), guard, branches });
    }

    Mdp::new(variables, commands, Vec::new(), Vec::new()).expect("generated model is valid")
}

fn random_weights(g: &mut Gen, n: usize) -> Vec<BigRational> {
    // Integer parts over a common denominator sum exactly to 1.
    let denom = 4 + g.below(13) as i64;
    let mut cuts: Vec<i64> = (0..n - 1).map(|_| 1 + g.below(denom as u64 - 1) as i64).collect();
    cuts.push(0);
    cuts.push(denom);
    cuts.sort_unstable();
    cuts.dedup();
    while (cuts.len() - 1) < n {
        // collisions collapsed some parts; fall back to uniform split
        return (0..n)
            .map(|i| {
                BigRational::new(
                    BigInt::from(if i == 0 { denom - (n as i64 - 1) } else { 1 }),
                    BigInt::from(denom),
                )
            })
            .collect();
    }
    cuts.windows(2)
        .map(|w| BigRational::new(BigInt::from(w[1] - w[0]), BigInt::from(denom)))
        .collect()
}

/// A random bounded property over the model's first variable, horizon <= 6.
pub fn random_property(seed: u64, mdp: &Mdp) -> BoundProperty {
    let mut g = Gen::new(seed ^ 0x9E37);
    random_formula(&mut g, mdp, 3)
}

fn random_atom(g: &mut Gen, mdp: &Mdp) -> BoundProperty {
    let vi = g.below(mdp.variables.len() as u64) as usize;
    let d = &mdp.variables[vi];
    let ops = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];
    let op = ops[g.below(6) as usize];
    PropertyAst::Atom { var: vi, op, value: g.int_in(d.lower, d.upper) }
}

fn random_formula(g: &mut Gen, mdp: &Mdp, depth: usize) -> BoundProperty {
    if depth == 0 {
        return random_atom(g, mdp);
    }
    match g.below(8) {
        0 => random_atom(g, mdp),
        1 => PropertyAst::Not(Box::new(random_formula(g, mdp, depth - 1))),
        2 => PropertyAst::And(
            Box::new(random_formula(g, mdp, depth - 1)),
            Box::new(random_formula(g, mdp, depth - 1)),
        ),
        3 => PropertyAst::Or(
            Box::new(random_formula(g, mdp, depth - 1)),
            Box::new(random_formula(g, mdp, depth - 1)),
        ),
        4 => PropertyAst::Next(Box::new(random_formula(g, mdp, depth - 1))),
        5 => PropertyAst::Finally {
            bound: g.below(3) as usize,
            inner: Box::new(random_formula(g, mdp, depth - 1)),
        },
        6 => PropertyAst::Globally {
            bound: g.below(3) as usize,
            inner: Box::new(random_formula(g, mdp, depth - 1)),
        },
        _ => PropertyAst::Until {
            bound: g.below(3) as usize,
            lhs: Box::new(random_formula(g, mdp, depth - 1)),
            rhs: Box::new(random_formula(g, mdp, depth - 1)),
        },
    }
}

/// Random trace of valid states for a model (not required to respect the
/// transition relation; used by pure property-evaluation tests).
pub fn random_trace(seed: u64, mdp: &Mdp, len: usize) -> crate::property::Trace {
    let mut g = Gen::new(seed ^ 0x7AC3);
    let states = (0..len)
        .map(|_| crate::model::State {
            values: mdp.variables.iter().map(|v| g.int_in(v.lower, v.upper)).collect(),
        })
        .collect();
    crate::property::Trace { states }
}
