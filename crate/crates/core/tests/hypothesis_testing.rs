//! Behaviour of the smart hypothesis-testing algorithm on the bundled
//! two-state model, whose exact optimum (0.32805) anchors every case.

use smc_core::algorithms::{
    hypothesis_multiple, smart_hypothesis, HypothesisKind, HypothesisVerdict, SimContext,
};
use smc_core::model::parse_model;
use smc_core::property::parse_and_bind;
use smc_core::scheduler::SchedulerClass;
use smc_core::stats::SprtSpec;

const FIG3: &str = include_str!("../../../models/fig3.mdp");

#[test]
fn smart_test_accepts_thresholds_below_the_optimum() {
    let mdp = parse_model(FIG3).unwrap();
    let prop = parse_and_bind(mdp.property("reset").unwrap().text.as_str(), &mdp).unwrap();
    let ctx = SimContext { mdp: &mdp, prop: &prop, class: SchedulerClass::History, workers: 2 };
    let sprt = SprtSpec::new(0.2, 0.01, 0.01, 0.01).unwrap();
    for seed in [1u64, 2, 3, 4, 5] {
        let r =
            smart_hypothesis(&ctx, &sprt, HypothesisKind::ExistsAtLeast, 100_000, seed).unwrap();
        assert_eq!(r.verdict, HypothesisVerdict::Accepted, "seed {seed}");
        assert!(r.witness_sigma.is_some());
    }
}

#[test]
fn no_acceptance_when_theta_exceeds_every_scheduler() {
    let mdp = parse_model(FIG3).unwrap();
    let prop = parse_and_bind(mdp.property("reset").unwrap().text.as_str(), &mdp).unwrap();
    let ctx = SimContext { mdp: &mdp, prop: &prop, class: SchedulerClass::History, workers: 2 };
    let sprt = SprtSpec::new(0.5, 0.01, 0.01, 0.01).unwrap();
    for seed in 0..20u64 {
        let r =
            smart_hypothesis(&ctx, &sprt, HypothesisKind::ExistsAtLeast, 100_000, seed).unwrap();
        assert_ne!(r.verdict, HypothesisVerdict::Accepted, "seed {seed}");
        assert!(r.witness_sigma.is_none());
    }
}

#[test]
fn at_most_direction_mirrors_at_least_on_the_complement() {
    let mdp = parse_model(FIG3).unwrap();
    let prop = parse_and_bind(mdp.property("reset").unwrap().text.as_str(), &mdp).unwrap();
    let ctx = SimContext { mdp: &mdp, prop: &prop, class: SchedulerClass::History, workers: 2 };
    // every scheduler satisfies with probability <= 0.32805 < 0.4
    let sprt = SprtSpec::new(0.4, 0.01, 0.01, 0.01).unwrap();
    let r = smart_hypothesis(&ctx, &sprt, HypothesisKind::ExistsAtMost, 100_000, 9).unwrap();
    assert_eq!(r.verdict, HypothesisVerdict::Accepted);
}

#[test]
fn theta_outside_the_indifference_band_is_rejected() {
    let mdp = parse_model(FIG3).unwrap();
    let prop = parse_and_bind("X s=1", &mdp).unwrap();
    let ctx = SimContext { mdp: &mdp, prop: &prop, class: SchedulerClass::History, workers: 1 };
    let sprt = SprtSpec::new(0.015, 0.02, 0.01, 0.01);
    assert!(sprt.is_err()); // p1 would be negative
    let sprt = SprtSpec::new(0.5, 0.01, 0.01, 0.01).unwrap();
    // valid spec but tiny budget still runs
    let r = smart_hypothesis(&ctx, &sprt, HypothesisKind::ExistsAtLeast, 50, 1).unwrap();
    assert!(r.simulations_used > 0);
}

#[test]
fn certain_satisfaction_accepts_high_thresholds_in_one_stage() {
    // satisfaction is certain under every scheduler
    let mdp = parse_model("var x : [0..1] init 0;\n[sure] true -> 1:(x'=1);\n").unwrap();
    let prop = parse_and_bind("X x=1", &mdp).unwrap();
    let ctx = SimContext { mdp: &mdp, prop: &prop, class: SchedulerClass::History, workers: 1 };
    let sprt = SprtSpec::new(0.95, 0.01, 0.01, 0.01).unwrap();
    let r = smart_hypothesis(&ctx, &sprt, HypothesisKind::ExistsAtLeast, 10_000, 3).unwrap();
    assert_eq!(r.verdict, HypothesisVerdict::Accepted);
    // candidate generation uses ceil(1/theta) = 2 sims for each of the
    // ceil(theta * budget) candidates, and the pooled test accepts there
    assert_eq!(r.simulations_used, 2 * 9_500);
}

#[test]
fn simple_test_reports_simulations_used() {
    let mdp = parse_model(FIG3).unwrap();
    let prop = parse_and_bind(mdp.property("reset").unwrap().text.as_str(), &mdp).unwrap();
    let ctx = SimContext { mdp: &mdp, prop: &prop, class: SchedulerClass::History, workers: 2 };
    let sprt = SprtSpec::new(0.2, 0.01, 0.01, 0.01).unwrap();
    let r = hypothesis_multiple(&ctx, &sprt, HypothesisKind::ExistsAtLeast, 50, 7).unwrap();
    assert!(r.simulations_used > 0);
    if r.verdict == HypothesisVerdict::Accepted {
        assert!(r.witness_sigma.is_some());
    }
}
