//! Statistical behaviour of the smart and simple estimation algorithms on
//! the bundled two-state model, checked against the exact oracle.

use smc_core::algorithms::{
    estimate_multiple, smart_estimate, Direction, EstimateRecord, SimContext, Termination,
};
use smc_core::model::parse_model;
use smc_core::oracle::{
    exact_optimum_history, exact_optimum_memoryless, exact_scheduler_probability,
    DEFAULT_NODE_CAP,
};
use smc_core::property::parse_and_bind;
use smc_core::scheduler::SchedulerClass;
use smc_core::stats::ChernoffSpec;

const FIG3: &str = include_str!("../../../models/fig3.mdp");
const MEET: &str = include_str!("../../../models/meet.mdp");

#[test]
fn smart_estimate_recovers_history_optimum() {
    let mdp = parse_model(FIG3).unwrap();
    let prop = parse_and_bind(mdp.property("reset").unwrap().text.as_str(), &mdp).unwrap();
    let ctx = SimContext { mdp: &mdp, prop: &prop, class: SchedulerClass::History, workers: 4 };
    let spec = ChernoffSpec::new(0.01, 0.01).unwrap();
    let truth = exact_optimum_history(&mdp, &prop, Direction::Max, DEFAULT_NODE_CAP)
        .unwrap()
        .value_f64();
    let r = smart_estimate(&ctx, &spec, 100_000, Direction::Max, 1).unwrap();
    assert_eq!(r.terminated_by, Termination::ConfidenceReached);
    assert!((r.estimate - truth).abs() <= 0.01, "estimate {} truth {truth}", r.estimate);
    // candidate sets shrink by exactly half (rounded up) per refinement
    for w in r.iterations.windows(2) {
        assert_eq!(w[1].candidates, w[0].candidates.div_ceil(2));
        assert!(w[1].candidates < w[0].candidates);
    }
    // the reported totals add up
    let refine: u64 =
        r.iterations.iter().map(|it| it.candidates * it.sims_per_candidate).sum();
    assert_eq!(
        r.total_simulations,
        r.exploration_simulations + r.candidate_simulations + refine
    );
    // last iteration's confidence met the target
    assert!(r.iterations.last().unwrap().confidence <= 0.01);
}

#[test]
fn smart_estimate_recovers_memoryless_optimum() {
    let mdp = parse_model(FIG3).unwrap();
    let prop = parse_and_bind(mdp.property("reset").unwrap().text.as_str(), &mdp).unwrap();
    let ctx =
        SimContext { mdp: &mdp, prop: &prop, class: SchedulerClass::Memoryless, workers: 4 };
    let spec = ChernoffSpec::new(0.01, 0.01).unwrap();
    let truth = exact_optimum_memoryless(&mdp, &prop, Direction::Max, DEFAULT_NODE_CAP)
        .unwrap()
        .value_f64();
    assert_eq!(truth, 0.06561);
    for seed in [2u64, 3, 5] {
        let r = smart_estimate(&ctx, &spec, 100_000, Direction::Max, seed).unwrap();
        assert!((r.estimate - truth).abs() <= 0.01, "seed {seed}: {}", r.estimate);
    }
}

#[test]
fn smart_estimate_minimization_matches_oracle() {
    let mdp = parse_model(MEET).unwrap();
    let prop = parse_and_bind(mdp.property("meet").unwrap().text.as_str(), &mdp).unwrap();
    let ctx = SimContext { mdp: &mdp, prop: &prop, class: SchedulerClass::History, workers: 4 };
    let spec = ChernoffSpec::new(0.01, 0.01).unwrap();
    let truth =
        exact_optimum_history(&mdp, &prop, Direction::Min, DEFAULT_NODE_CAP).unwrap().value_f64();
    assert_eq!(truth, 0.96875); // 1 - 0.5^5, always scheduling mover 1
    for seed in [11u64, 13, 17] {
        let r = smart_estimate(&ctx, &spec, 100_000, Direction::Min, seed).unwrap();
        assert_eq!(r.direction, Direction::Min);
        assert!((r.estimate - truth).abs() <= 0.01, "seed {seed}: {}", r.estimate);
    }
}

#[test]
fn smart_estimate_rejects_insufficient_budget() {
    let mdp = parse_model(FIG3).unwrap();
    let prop = parse_and_bind("X s=1", &mdp).unwrap();
    let ctx = SimContext { mdp: &mdp, prop: &prop, class: SchedulerClass::History, workers: 1 };
    let spec = ChernoffSpec::new(0.01, 0.01).unwrap();
    // floor is 26491.6; a budget at the floor is not enough
    let err = smart_estimate(&ctx, &spec, 26_491, Direction::Max, 1).unwrap_err();
    assert!(err.to_string().contains("budget"), "{err}");
}

#[test]
fn smart_estimate_reports_empty_candidates_on_unsatisfiable_property() {
    let mdp = parse_model(FIG3).unwrap();
    let prop = parse_and_bind("false", &mdp).unwrap();
    let ctx = SimContext { mdp: &mdp, prop: &prop, class: SchedulerClass::History, workers: 1 };
    let spec = ChernoffSpec::new(0.05, 0.05).unwrap();
    let r = smart_estimate(&ctx, &spec, 2_000, Direction::Max, 5).unwrap();
    assert_eq!(r.terminated_by, Termination::EmptyCandidates);
    assert_eq!(r.best_sigma, None);
    assert_eq!(r.estimate, 0.0);
    assert!(r.iterations.is_empty());
}

#[test]
fn smart_estimate_is_reproducible() {
    let mdp = parse_model(FIG3).unwrap();
    let prop = parse_and_bind(mdp.property("reset").unwrap().text.as_str(), &mdp).unwrap();
    let spec = ChernoffSpec::new(0.02, 0.02).unwrap();
    let runs: Vec<_> = [1usize, 3, 8]
        .into_iter()
        .map(|workers| {
            let ctx = SimContext { mdp: &mdp, prop: &prop, class: SchedulerClass::History, workers };
            smart_estimate(&ctx, &spec, 10_000, Direction::Max, 99).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
}

/// Estimates stay conservative: over 100 seeded runs the final estimate
/// exceeds the true optimum by more than epsilon in at most a delta
/// fraction (the Chernoff guarantee applied to the best candidate, whose
/// true probability is at most the optimum).
#[test]
fn smart_estimates_rarely_exceed_truth_by_epsilon() {
    let mdp = parse_model(FIG3).unwrap();
    let prop = parse_and_bind(mdp.property("reset").unwrap().text.as_str(), &mdp).unwrap();
    let ctx = SimContext { mdp: &mdp, prop: &prop, class: SchedulerClass::History, workers: 8 };
    let spec = ChernoffSpec::new(0.01, 0.01).unwrap();
    let truth = 0.32805;
    let mut exceed = 0u32;
    for seed in 0..100u64 {
        let r = smart_estimate(&ctx, &spec, 100_000, Direction::Max, seed).unwrap();
        if r.estimate - truth > spec.epsilon {
            exceed += 1;
        }
    }
    // delta = 0.01 allows one expected exceedance per hundred; two tolerates
    // the binomial wobble of the bound itself.
    assert!(exceed <= 2, "{exceed} of 100 runs exceeded truth + epsilon");
}

/// Every per-scheduler estimate from the simple multi-scheduler algorithm
/// lands within epsilon of that scheduler's exact probability (fixed seed;
/// the Chernoff bound makes failure probability at most delta).
#[test]
fn simple_estimates_match_exact_per_scheduler_probabilities() {
    let mdp = parse_model(FIG3).unwrap();
    let prop = parse_and_bind(mdp.property("reset").unwrap().text.as_str(), &mdp).unwrap();
    let ctx = SimContext { mdp: &mdp, prop: &prop, class: SchedulerClass::History, workers: 8 };
    let spec = ChernoffSpec::new(0.01, 0.01).unwrap();
    let result = estimate_multiple(&ctx, &spec, 300, 424242).unwrap();
    assert_eq!(result.sims_per_scheduler, 54_986);
    let mut distinct = std::collections::BTreeSet::new();
    for record in &result.records {
        let exact = exact_scheduler_probability(
            &mdp,
            &prop,
            record.sigma,
            SchedulerClass::History,
            DEFAULT_NODE_CAP,
        )
        .unwrap()
        .value_f64();
        assert!(
            (record.estimate() - exact).abs() <= spec.epsilon,
            "sigma {:?}: estimate {} exact {exact}",
            record.sigma,
            record.estimate()
        );
        distinct.insert((exact * 1e9) as u64);
    }
    // the hash-defined schedulers cover several distinct action trees
    assert!(distinct.len() >= 5, "only {} distinct exact values", distinct.len());
    let max = result.records.iter().map(EstimateRecord::estimate).fold(0.0, f64::max);
    assert_eq!(max, result.p_hat_max);
}
