//! Exact ground truth at desk scale.
//!
//! Bounded properties are decided by the first horizon+1 states, so exact
//! optimal probabilities follow from backward induction over the prefix
//! tree: the value of a full-length prefix is its verdict, and the value of
//! a shorter prefix optimizes (or averages, or replays) over enabled
//! commands of the weighted successor values. This is deliberately
//! exponential; a node cap keeps it honest. All arithmetic is exact
//! rational, since these values anchor the statistical acceptance tests.

use crate::algorithms::Direction;
use crate::model::{rational_to_f64, Mdp, ModelError, State};
use crate::property::{eval_at, BoundProperty};
use crate::scheduler::{action_choice, HashState, SchedulerClass, SchedulerId};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use std::collections::BTreeMap;
use thiserror::Error;

/// Default prefix-node cap.
pub const DEFAULT_NODE_CAP: u64 = 10_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("node cap exceeded: explored {explored} prefixes (cap {cap}); the prefix tree of this model/property blows up")]
    CapExceeded { explored: u64, cap: u64 },
    #[error("memoryless map space of {maps} assignments exceeds cap {cap}")]
    MapSpaceExceeded { maps: u64, cap: u64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A memoryless scheduler witness: the optimal command index per reachable
/// state that offers a choice.
pub type ActionMap = BTreeMap<Vec<i64>, usize>;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Exact satisfaction probability.
    pub value: BigRational,
    /// Optimal memoryless action map, when one was enumerated.
    pub witness: Option<ActionMap>,
    /// Prefix nodes explored.
    pub explored: u64,
}

impl OracleResult {
    pub fn value_f64(&self) -> f64 {
        rational_to_f64(&self.value)
    }
}

enum Policy<'p> {
    Optimize(Direction),
    Uniform,
    Replay { sigma: SchedulerId, class: SchedulerClass },
    Fixed(&'p ActionMap),
}

struct Walker<'a> {
    mdp: &'a Mdp,
    prop: &'a BoundProperty,
    horizon: usize,
    cap: u64,
    explored: u64,
}

impl<'a> Walker<'a> {
    fn new(mdp: &'a Mdp, prop: &'a BoundProperty, cap: u64) -> Self {
        Walker { mdp, prop, horizon: prop.horizon(), cap, explored: 0 }
    }

    fn verdict(&self, states: &[State]) -> BigRational {
        if eval_at(self.prop, states, 0) {
            BigRational::one()
        } else {
            BigRational::zero()
        }
    }

    fn value(
        &mut self,
        prefix: &mut Vec<State>,
        policy: &Policy<'_>,
        hash: HashState,
    ) -> Result<BigRational, OracleError> {
        self.explored += 1;
        if self.explored > self.cap {
            return Err(OracleError::CapExceeded { explored: self.explored, cap: self.cap });
        }
        if prefix.len() == self.horizon + 1 {
            return Ok(self.verdict(prefix));
        }
        let state = prefix.last().expect("prefix starts at the initial state").clone();
        let enabled = self.mdp.enabled(&state);
        if enabled.is_empty() {
            // Deadlock absorption: the state repeats to the horizon.
            let missing = self.horizon + 1 - prefix.len();
            for _ in 0..missing {
                prefix.push(state.clone());
            }
            let v = self.verdict(prefix);
            prefix.truncate(prefix.len() - missing);
            return Ok(v);
        }

        let step_hash = match policy {
            Policy::Replay { sigma, class } => match class {
                SchedulerClass::History => hash.extend_with_state(self.mdp, &state),
                SchedulerClass::Memoryless => {
                    HashState::init(*sigma).extend_with_state(self.mdp, &state)
                }
            },
            _ => hash,
        };

        match policy {
            Policy::Optimize(direction) => {
                let mut best: Option<BigRational> = None;
                for &cmd in &enabled {
                    let v = self.command_value(prefix, policy, step_hash, cmd)?;
                    best = Some(match best {
                        None => v,
                        Some(cur) => match direction {
                            Direction::Max => cur.max(v),
                            Direction::Min => cur.min(v),
                        },
                    });
                }
                Ok(best.expect("enabled set is non-empty"))
            }
            Policy::Uniform => {
                let mut total = BigRational::zero();
                for &cmd in &enabled {
                    total += self.command_value(prefix, policy, step_hash, cmd)?;
                }
                Ok(total / BigRational::from(BigInt::from(enabled.len() as u64)))
            }
            Policy::Replay { .. } => {
                let k = action_choice(step_hash, enabled.len());
                self.command_value(prefix, policy, step_hash, enabled[k])
            }
            Policy::Fixed(map) => {
                let cmd = if enabled.len() == 1 {
                    enabled[0]
                } else {
                    *map.get(&state.values).expect("map covers every reachable choice state")
                };
                self.command_value(prefix, policy, step_hash, cmd)
            }
        }
    }

    /// Weighted sum of successor values over the branches of `cmd`.
    fn command_value(
        &mut self,
        prefix: &mut Vec<State>,
        policy: &Policy<'_>,
        hash: HashState,
        cmd: usize,
    ) -> Result<BigRational, OracleError> {
        let state = prefix.last().expect("non-empty").clone();
        let mut total = BigRational::zero();
        for bi in 0..self.mdp.commands[cmd].branches.len() {
            let next = self.mdp.apply_branch(&state, cmd, bi)?;
            prefix.push(next);
            let v = self.value(prefix, policy, hash)?;
            prefix.pop();
            total += v * &self.mdp.commands[cmd].branches[bi].weight;
        }
        Ok(total)
    }
}

fn run_walker(
    mdp: &Mdp,
    prop: &BoundProperty,
    policy: Policy<'_>,
    cap: u64,
    hash_seed: SchedulerId,
) -> Result<(BigRational, u64), OracleError> {
    let mut walker = Walker::new(mdp, prop, cap);
    let mut prefix = vec![mdp.initial_state()];
    let value = walker.value(&mut prefix, &policy, HashState::init(hash_seed))?;
    Ok((value, walker.explored))
}

/// Exact optimum over history-dependent schedulers by backward induction
/// over path prefixes.
pub fn exact_optimum_history(
    mdp: &Mdp,
    prop: &BoundProperty,
    direction: Direction,
    cap: u64,
) -> Result<OracleResult, OracleError> {
    let (value, explored) =
        run_walker(mdp, prop, Policy::Optimize(direction), cap, SchedulerId(0))?;
    Ok(OracleResult { value, witness: None, explored })
}

/// Exact expectation under the uniform probabilistic scheduler, which picks
/// uniformly among enabled commands at every step.
pub fn uniform_scheduler_probability(
    mdp: &Mdp,
    prop: &BoundProperty,
    cap: u64,
) -> Result<OracleResult, OracleError> {
    let (value, explored) = run_walker(mdp, prop, Policy::Uniform, cap, SchedulerId(0))?;
    Ok(OracleResult { value, witness: None, explored })
}

/// Exact satisfaction probability of the hash-defined scheduler `sigma`,
/// replaying its action choices at every prefix node.
pub fn exact_scheduler_probability(
    mdp: &Mdp,
    prop: &BoundProperty,
    sigma: SchedulerId,
    class: SchedulerClass,
    cap: u64,
) -> Result<OracleResult, OracleError> {
    let (value, explored) = run_walker(mdp, prop, Policy::Replay { sigma, class }, cap, sigma)?;
    Ok(OracleResult { value, witness: None, explored })
}

/// States where an action is ever chosen: those reachable within
/// horizon - 1 steps of the initial state (the last action happens one step
/// before the final trace position), with their enabled-command lists.
fn reachable_states(mdp: &Mdp, horizon: usize) -> Result<Vec<(State, Vec<usize>)>, OracleError> {
    let mut seen = std::collections::HashSet::new();
    let mut frontier = vec![mdp.initial_state()];
    let mut out = Vec::new();
    seen.insert(mdp.initial_state());
    for _ in 0..horizon {
        let mut next_frontier = Vec::new();
        for state in frontier.drain(..) {
            let enabled = mdp.enabled(&state);
            for &cmd in &enabled {
                for bi in 0..mdp.commands[cmd].branches.len() {
                    let next = mdp.apply_branch(&state, cmd, bi)?;
                    if seen.insert(next.clone()) {
                        next_frontier.push(next);
                    }
                }
            }
            out.push((state, enabled));
        }
        frontier = next_frontier;
        if frontier.is_empty() {
            break;
        }
    }
    out.sort_by(|a, b| a.0.values.cmp(&b.0.values));
    Ok(out)
}

/// Exact optimum over memoryless schedulers by enumerating every action
/// map over reachable choice states and evaluating the induced chain.
pub fn exact_optimum_memoryless(
    mdp: &Mdp,
    prop: &BoundProperty,
    direction: Direction,
    cap: u64,
) -> Result<OracleResult, OracleError> {
    let horizon = prop.horizon();
    let reachable = reachable_states(mdp, horizon)?;
    let choice_states: Vec<(State, Vec<usize>)> =
        reachable.into_iter().filter(|(_, en)| en.len() >= 2).collect();

    let mut maps = 1u64;
    for (_, enabled) in &choice_states {
        maps = maps.saturating_mul(enabled.len() as u64);
        if maps > cap {
            return Err(OracleError::MapSpaceExceeded { maps, cap });
        }
    }

    let mut explored = 0u64;
    let mut best: Option<(BigRational, ActionMap)> = None;
    let mut choices = vec![0usize; choice_states.len()];
    loop {
        let map: ActionMap = choice_states
            .iter()
            .zip(&choices)
            .map(|((state, enabled), &k)| (state.values.clone(), enabled[k]))
            .collect();
        let mut walker = Walker::new(mdp, prop, cap.saturating_sub(explored));
        let mut prefix = vec![mdp.initial_state()];
        let value = walker.value(&mut prefix, &Policy::Fixed(&map), HashState::init(SchedulerId(0)));
        let value = match value {
            Ok(v) => v,
            Err(OracleError::CapExceeded { .. }) => {
                return Err(OracleError::CapExceeded { explored: cap + 1, cap })
            }
            Err(e) => return Err(e),
        };
        explored += walker.explored;
        let better = match &best {
            None => true,
            Some((cur, _)) => match direction {
                Direction::Max => value > *cur,
                Direction::Min => value < *cur,
            },
        };
        if better {
            best = Some((value, map));
        }

        // next assignment, odometer style
        let mut i = 0;
        loop {
            if i == choices.len() {
                let (value, witness) = best.expect("at least one assignment");
                return Ok(OracleResult { value, witness: Some(witness), explored });
            }
            choices[i] += 1;
            if choices[i] < choice_states[i].1.len() {
                break;
            }
            choices[i] = 0;
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model;
    use crate::property::{parse_and_bind, Trace};
    use crate::scheduler::simulate;

    const FIG3: &str = "\
var s : [0..1] init 0;
[a1] s=0 -> 0.9:(s'=0) + 0.1:(s'=1);
[a2] s=0 -> 0.5:(s'=0) + 0.5:(s'=1);
[a0] s=1 -> 1.0:(s'=0);
";
    const FIG3_PROP: &str = "X((s=1) & X G<=4 !(s=1))";

    fn ratio(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn fig3_history_optimum_is_exact() {
        let mdp = parse_model(FIG3).unwrap();
        let prop = parse_and_bind(FIG3_PROP, &mdp).unwrap();
        let max = exact_optimum_history(&mdp, &prop, Direction::Max, DEFAULT_NODE_CAP).unwrap();
        // 0.5 * 0.9^4: pick a2 first, then a1 at every s=0 revisit
        assert_eq!(max.value, ratio(6561, 20000));
        assert_eq!(max.value_f64(), 0.32805);
        let min = exact_optimum_history(&mdp, &prop, Direction::Min, DEFAULT_NODE_CAP).unwrap();
        assert_eq!(min.value, ratio(1, 160));
    }

    #[test]
    fn fig3_next_state_probability() {
        let mdp = parse_model(FIG3).unwrap();
        let prop = parse_and_bind("X s=1", &mdp).unwrap();
        let max = exact_optimum_history(&mdp, &prop, Direction::Max, DEFAULT_NODE_CAP).unwrap();
        assert_eq!(max.value, ratio(1, 2));
    }

    #[test]
    fn tautology_has_probability_one() {
        let mdp = parse_model(FIG3).unwrap();
        let prop = parse_and_bind("true", &mdp).unwrap();
        let r = exact_optimum_history(&mdp, &prop, Direction::Max, DEFAULT_NODE_CAP).unwrap();
        assert_eq!(r.value, BigRational::one());
        let contradiction = parse_and_bind("false", &mdp).unwrap();
        let r = uniform_scheduler_probability(&mdp, &contradiction, DEFAULT_NODE_CAP).unwrap();
        assert_eq!(r.value, BigRational::zero());
    }

    #[test]
    fn fig3_memoryless_optimum_and_witness() {
        let mdp = parse_model(FIG3).unwrap();
        let prop = parse_and_bind(FIG3_PROP, &mdp).unwrap();
        let max = exact_optimum_memoryless(&mdp, &prop, Direction::Max, DEFAULT_NODE_CAP).unwrap();
        // a1 at s=0: 0.1 * 0.9^4 = 0.06561 beats a2: 0.5 * 0.5^4 = 0.03125
        assert_eq!(max.value, ratio(6561, 100000));
        let witness = max.witness.unwrap();
        assert_eq!(witness.get(&vec![0]), Some(&0));
        // memoryless optimum is below the history-dependent optimum
        let hist = exact_optimum_history(&mdp, &prop, Direction::Max, DEFAULT_NODE_CAP).unwrap();
        assert!(max.value < hist.value);
    }

    #[test]
    fn single_action_model_collapses_all_notions() {
        let mdp = parse_model(
            "var x : [0..3] init 0;\n[step] x<3 -> 0.5:(x'=x+1) + 0.5:(x'=0);\n",
        )
        .unwrap();
        let prop = parse_and_bind("F<=4 x=2", &mdp).unwrap();
        let h = exact_optimum_history(&mdp, &prop, Direction::Max, DEFAULT_NODE_CAP).unwrap();
        let m = exact_optimum_memoryless(&mdp, &prop, Direction::Max, DEFAULT_NODE_CAP).unwrap();
        let u = uniform_scheduler_probability(&mdp, &prop, DEFAULT_NODE_CAP).unwrap();
        assert_eq!(h.value, m.value);
        assert_eq!(h.value, u.value);
    }

    #[test]
    fn fig3_uniform_expectation() {
        let mdp = parse_model(FIG3).unwrap();
        let prop = parse_and_bind(FIG3_PROP, &mdp).unwrap();
        let u = uniform_scheduler_probability(&mdp, &prop, DEFAULT_NODE_CAP).unwrap();
        assert_eq!(u.value, ratio(7203, 100000));
    }

    #[test]
    fn complementation_identity_is_exact() {
        let mdp = parse_model(FIG3).unwrap();
        for text in [FIG3_PROP, "F<=3 s=1", "X s=1"] {
            let prop = parse_and_bind(text, &mdp).unwrap();
            let min = exact_optimum_history(&mdp, &prop, Direction::Min, DEFAULT_NODE_CAP)
                .unwrap()
                .value;
            let comp_max =
                exact_optimum_history(&mdp, &prop.negated(), Direction::Max, DEFAULT_NODE_CAP)
                    .unwrap()
                    .value;
            assert_eq!(min, BigRational::one() - comp_max);
        }
    }

    #[test]
    fn replayed_scheduler_probabilities_bracket_by_optima() {
        let mdp = parse_model(FIG3).unwrap();
        let prop = parse_and_bind(FIG3_PROP, &mdp).unwrap();
        let lo = exact_optimum_history(&mdp, &prop, Direction::Min, DEFAULT_NODE_CAP).unwrap();
        let hi = exact_optimum_history(&mdp, &prop, Direction::Max, DEFAULT_NODE_CAP).unwrap();
        let uni = uniform_scheduler_probability(&mdp, &prop, DEFAULT_NODE_CAP).unwrap();
        assert!(lo.value <= uni.value && uni.value <= hi.value);
        for sigma in [0u64, 1, 42, 9999, u64::MAX] {
            for class in [SchedulerClass::History, SchedulerClass::Memoryless] {
                let p = exact_scheduler_probability(
                    &mdp,
                    &prop,
                    SchedulerId(sigma),
                    class,
                    DEFAULT_NODE_CAP,
                )
                .unwrap();
                assert!(lo.value <= p.value && p.value <= hi.value, "sigma {sigma}");
            }
        }
    }

    #[test]
    fn replay_agrees_with_simulation_frequency() {
        let mdp = parse_model(FIG3).unwrap();
        let prop = parse_and_bind(FIG3_PROP, &mdp).unwrap();
        let sigma = SchedulerId(271828);
        let exact = exact_scheduler_probability(
            &mdp,
            &prop,
            sigma,
            SchedulerClass::History,
            DEFAULT_NODE_CAP,
        )
        .unwrap()
        .value_f64();
        let runs = 100_000u64;
        let mut hits = 0u64;
        for seed in 0..runs {
            let (_, v) = simulate(&mdp, &prop, sigma, seed, SchedulerClass::History).unwrap();
            hits += u64::from(v.satisfied);
        }
        let freq = hits as f64 / runs as f64;
        assert!((freq - exact).abs() < 0.01, "freq {freq} exact {exact}");
    }

    #[test]
    fn deterministic_model_has_zero_one_value() {
        let mdp = parse_model(
            "var x : [0..4] init 0;\n[up] x<4 -> 1:(x'=x+1);\n[hold] x<4 -> 1:(x'=x);\n",
        )
        .unwrap();
        let prop = parse_and_bind("F<=4 x=3", &mdp).unwrap();
        for sigma in [3u64, 17, 123456789] {
            let p = exact_scheduler_probability(
                &mdp,
                &prop,
                SchedulerId(sigma),
                SchedulerClass::History,
                DEFAULT_NODE_CAP,
            )
            .unwrap();
            assert!(p.value.is_zero() || p.value.is_one(), "sigma {sigma}: {}", p.value);
        }
    }

    #[test]
    fn identical_choices_give_identical_values() {
        // Two sigmas that hash to the same action tree must get the same
        // value; sigma and sigma + m collide by construction.
        let mdp = parse_model(FIG3).unwrap();
        let prop = parse_and_bind(FIG3_PROP, &mdp).unwrap();
        let a = exact_scheduler_probability(
            &mdp,
            &prop,
            SchedulerId(5),
            SchedulerClass::History,
            DEFAULT_NODE_CAP,
        )
        .unwrap();
        let b = exact_scheduler_probability(
            &mdp,
            &prop,
            SchedulerId(5 + crate::scheduler::HASH_MODULUS),
            SchedulerClass::History,
            DEFAULT_NODE_CAP,
        )
        .unwrap();
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn cap_exceeded_is_reported() {
        let mdp = parse_model(FIG3).unwrap();
        let prop = parse_and_bind(FIG3_PROP, &mdp).unwrap();
        let err = exact_optimum_history(&mdp, &prop, Direction::Max, 10).unwrap_err();
        assert!(matches!(err, OracleError::CapExceeded { .. }), "{err}");
    }

    #[test]
    fn verdict_matches_public_evaluator() {
        let mdp = parse_model(FIG3).unwrap();
        let prop = parse_and_bind(FIG3_PROP, &mdp).unwrap();
        let states: Vec<State> =
            [0, 1, 0, 0, 0, 0, 0].iter().map(|&v| State { values: vec![v] }).collect();
        let walker = Walker::new(&mdp, &prop, DEFAULT_NODE_CAP);
        assert!(walker.verdict(&states).is_one());
        let trace = Trace { states };
        assert!(crate::property::evaluate(&prop, &trace, 0).unwrap());
    }
}
