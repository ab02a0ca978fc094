//! Invariants of command selection and the probabilistic successor
//! function over randomized models.

use proptest::prelude::*;
use smc_core::scheduler::PrngState;
use smc_core::testgen::{random_mdp, random_trace};

proptest! {
    /// Branch weights partition [0, 1): every u yields a successor for
    /// every enabled command of every reachable-looking state.
    #[test]
    fn successor_is_total_over_the_unit_interval(seed in any::<u64>(), draw in any::<u64>()) {
        let mdp = random_mdp(seed);
        let (u, _) = PrngState::new(draw).next_unit();
        let trace = random_trace(seed, &mdp, 8);
        for state in &trace.states {
            for cmd in mdp.enabled(state) {
                // updates in generated models always stay in range
                let next = mdp.successor(state, cmd, u).unwrap();
                for (decl, value) in mdp.variables.iter().zip(&next.values) {
                    prop_assert!((decl.lower..=decl.upper).contains(value));
                }
            }
        }
        // boundary draws
        for u in [0.0, 0.5, 1.0 - f64::EPSILON] {
            for cmd in mdp.enabled(&mdp.initial_state()) {
                mdp.successor(&mdp.initial_state(), cmd, u).unwrap();
            }
        }
    }

    /// enabled() is a strictly increasing subsequence of command indices.
    #[test]
    fn enabled_indices_are_strictly_increasing(seed in any::<u64>()) {
        let mdp = random_mdp(seed);
        let trace = random_trace(seed ^ 1, &mdp, 8);
        for state in &trace.states {
            let enabled = mdp.enabled(state);
            for w in enabled.windows(2) {
                prop_assert!(w[0] < w[1]);
            }
            prop_assert!(enabled.iter().all(|&i| i < mdp.commands.len()));
        }
    }

    /// Branch selection respects cumulative intervals: selecting with a u
    /// drawn inside branch i's interval returns branch i.
    #[test]
    fn branch_selection_matches_cumulative_intervals(seed in any::<u64>()) {
        let mdp = random_mdp(seed);
        for (ci, cmd) in mdp.commands.iter().enumerate() {
            let mut lo = 0.0f64;
            for (bi, b) in cmd.branches.iter().enumerate() {
                let mid = (lo + b.cumulative) / 2.0;
                prop_assert_eq!(mdp.select_branch(ci, mid), bi);
                lo = b.cumulative;
            }
            prop_assert_eq!(cmd.branches.last().unwrap().cumulative, 1.0);
        }
    }
}
