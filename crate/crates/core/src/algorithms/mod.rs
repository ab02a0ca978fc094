//! The verification algorithms: simple estimation and hypothesis testing
//! over uniformly sampled schedulers, their smart-sampling refinements, and
//! the synthetic-population convergence harness.
//!
//! Every simulation batch is embarrassingly parallel over (scheduler,
//! replicate) pairs. The probabilistic seed of each pair is derived
//! deterministically from (master seed, stage context, scheduler id,
//! replicate index), so results are a pure function of the configuration
//! and worker counts can never change them.

mod smart;
mod synthetic;

pub use smart::{smart_estimate, smart_hypothesis};
pub use synthetic::{
    synthetic_smart_estimate, SchedulerDensity, SyntheticIteration, SyntheticPopulation,
    SyntheticRunResult,
};

use crate::model::Mdp;
use crate::pool::run_jobs_scratch;
use crate::property::BoundProperty;
use crate::scheduler::{
    mix_seed, simulate_verdict, PrngState, SchedulerClass, SchedulerId, SimError, SimScratch,
};
use crate::stats::{
    chernoff_n_multi, multi_test_correction, ChernoffSpec, LikelihoodRatio, SprtSpec, StatsError,
};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(
        "per-iteration budget {budget} not above the Chernoff floor ln(2/delta)/(2 eps^2) = {floor:.1}"
    )]
    BudgetTooSmall { budget: u64, floor: f64 },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Optimization direction for estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    Max,
    Min,
}

/// Which existence hypothesis is being tested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HypothesisKind {
    /// Some scheduler satisfies the property with probability >= theta.
    ExistsAtLeast,
    /// Some scheduler satisfies the property with probability <= theta.
    ExistsAtMost,
}

/// Everything a simulation batch needs besides the scheduler seeds.
#[derive(Clone, Copy)]
pub struct SimContext<'a> {
    pub mdp: &'a Mdp,
    pub prop: &'a BoundProperty,
    pub class: SchedulerClass,
    pub workers: usize,
}

/// Per-scheduler estimation record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EstimateRecord {
    pub sigma: SchedulerId,
    pub successes: u64,
    pub trials: u64,
}

impl EstimateRecord {
    pub fn estimate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }
}

/// Result of estimating over a fixed number of uniformly drawn schedulers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiEstimateResult {
    pub records: Vec<EstimateRecord>,
    pub sims_per_scheduler: u64,
    /// Highest per-scheduler estimate (0 when nothing satisfied the
    /// property).
    pub p_hat_max: f64,
    /// Lowest nonzero per-scheduler estimate; None reports that no
    /// scheduler was found to satisfy the property at all.
    pub p_hat_min: Option<f64>,
    pub total_simulations: u64,
}

impl MultiEstimateResult {
    pub fn found_satisfying(&self) -> bool {
        self.p_hat_max > 0.0
    }
}

/// Verdict of a hypothesis-testing run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HypothesisVerdict {
    Accepted,
    RejectedGivenBudget,
    InconclusiveGivenBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisResult {
    pub verdict: HypothesisVerdict,
    /// Scheduler that witnessed acceptance; present iff accepted.
    pub witness_sigma: Option<SchedulerId>,
    pub simulations_used: u64,
}

/// What ended a smart-estimation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    ConfidenceReached,
    EmptyCandidates,
    SingleCandidateBudget,
}

/// One refinement iteration of smart estimation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub candidates: u64,
    pub sims_per_candidate: u64,
    pub confidence: f64,
    pub best_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmartRunResult {
    pub best_sigma: Option<SchedulerId>,
    /// Final estimate in the requested direction (already complemented for
    /// minimization).
    pub estimate: f64,
    pub direction: Direction,
    pub iterations: Vec<IterationRecord>,
    pub exploration_simulations: u64,
    pub candidate_simulations: u64,
    pub total_simulations: u64,
    pub terminated_by: Termination,
}

/// Stage contexts baked into derived probabilistic seeds. Refinement
/// iteration i uses REFINE_BASE + i.
const CTX_EXPLORE: u64 = 1;
const CTX_CANDIDATES: u64 = 2;
const CTX_REFINE_BASE: u64 = 0x100;

/// Seed-stream tags, one per place an algorithm draws scheduler ids.
const TAG_SEEDS_EXPLORE: u64 = 0xA1;
const TAG_SEEDS_CANDIDATES: u64 = 0xA2;

pub(crate) fn prob_seed(master: u64, ctx: u64, sigma: SchedulerId, replicate: u64) -> u64 {
    mix_seed(&[master, ctx, sigma.0, replicate])
}

/// Draws `m` scheduler seeds from the uniform seed stream. Duplicates are
/// permitted and not deduplicated.
pub(crate) fn draw_seeds(master: u64, tag: u64, m: u64) -> Vec<SchedulerId> {
    let mut rng = PrngState::new(mix_seed(&[master, tag]));
    (0..m)
        .map(|_| {
            let (v, next) = rng.next();
            rng = next;
            SchedulerId(v)
        })
        .collect()
}

/// Simulates `reps` replicates for each scheduler in `sigmas` and returns
/// per-scheduler success counts, in input order.
pub(crate) fn batch_counts(
    ctx: &SimContext<'_>,
    sigmas: &[SchedulerId],
    reps: u64,
    master: u64,
    stage_ctx: u64,
) -> Result<Vec<u64>, SimError> {
    let outcomes = batch_outcomes(ctx, sigmas, reps, master, stage_ctx)?;
    Ok(outcomes
        .chunks(reps as usize)
        .map(|c| c.iter().map(|&b| u64::from(b)).sum())
        .collect())
}

/// Flat per-(scheduler, replicate) outcomes, scheduler-major.
pub(crate) fn batch_outcomes(
    ctx: &SimContext<'_>,
    sigmas: &[SchedulerId],
    reps: u64,
    master: u64,
    stage_ctx: u64,
) -> Result<Vec<bool>, SimError> {
    let reps = reps as usize;
    if reps == 0 || sigmas.is_empty() {
        return Ok(Vec::new());
    }
    let total = sigmas.len() * reps;
    let results = run_jobs_scratch(ctx.workers, total, SimScratch::new, |scratch, i| {
        let sigma = sigmas[i / reps];
        let seed = prob_seed(master, stage_ctx, sigma, (i % reps) as u64);
        simulate_verdict(ctx.mdp, ctx.prop, sigma, seed, ctx.class, scratch)
            .map(|v| v.satisfied)
    });
    results.into_iter().collect()
}

/// Estimation with multiple schedulers: draws `m` seeds uniformly, runs the
/// multi-estimate Chernoff number of simulations for each, and reports the
/// extremal estimates. A run where no scheduler ever satisfied the property
/// is a result (`p_hat_min == None`), not an error.
pub fn estimate_multiple(
    ctx: &SimContext<'_>,
    spec: &ChernoffSpec,
    m: u64,
    master_seed: u64,
) -> Result<MultiEstimateResult, RunError> {
    assert!(m >= 1);
    let n = chernoff_n_multi(spec, m);
    let sigmas = draw_seeds(master_seed, TAG_SEEDS_EXPLORE, m);
    let counts = batch_counts(ctx, &sigmas, n, master_seed, CTX_EXPLORE)?;
    let records: Vec<EstimateRecord> = sigmas
        .into_iter()
        .zip(counts)
        .map(|(sigma, successes)| EstimateRecord { sigma, successes, trials: n })
        .collect();
    let mut p_max = 0.0f64;
    let mut p_min: Option<f64> = None;
    for r in &records {
        let p = r.estimate();
        if p > p_max {
            p_max = p;
        }
        if p > 0.0 && p_min.map_or(true, |cur| p < cur) {
            p_min = Some(p);
        }
    }
    Ok(MultiEstimateResult {
        records,
        sims_per_scheduler: n,
        p_hat_max: p_max,
        p_hat_min: p_min,
        total_simulations: m * n,
    })
}

/// SPRT for multiple schedulers: tests each uniformly drawn scheduler with
/// error levels corrected for `m` tests, and accepts as soon as one
/// scheduler's test accepts the requested hypothesis. Exhausting all `m`
/// schedulers reports not-found-given-budget.
pub fn hypothesis_multiple(
    ctx: &SimContext<'_>,
    sprt: &SprtSpec,
    kind: HypothesisKind,
    m: u64,
    master_seed: u64,
) -> Result<HypothesisResult, RunError> {
    assert!(m >= 1);
    let (p0, p1) = (sprt.p0(), sprt.p1());
    let alpha_m = multi_test_correction(sprt.alpha, m);
    let beta_m = multi_test_correction(sprt.beta, m);
    let ln_accept_h1 = ((1.0 - beta_m) / alpha_m).ln();
    let ln_accept_h0 = (beta_m / (1.0 - alpha_m)).ln();
    let sigmas = draw_seeds(master_seed, TAG_SEEDS_EXPLORE, m);
    let mut sims_used = 0u64;

    // Simulations per parallel batch while one scheduler's test runs.
    const CHUNK: u64 = 512;

    for sigma in sigmas {
        let mut ratio = LikelihoodRatio::new();
        let mut replicate = 0u64;
        let accepted_h0 = 'test: loop {
            let outcomes =
                run_jobs_scratch(ctx.workers, CHUNK as usize, SimScratch::new, |scratch, i| {
                    let seed = prob_seed(master_seed, CTX_EXPLORE, sigma, replicate + i as u64);
                    simulate_verdict(ctx.mdp, ctx.prop, sigma, seed, ctx.class, scratch)
                        .map(|v| v.satisfied)
                });
            for outcome in outcomes {
                let sat = outcome?;
                replicate += 1;
                sims_used += 1;
                ratio.step(sat, p0, p1);
                if ratio.log_value() <= ln_accept_h0 {
                    break 'test true;
                }
                if ratio.log_value() >= ln_accept_h1 {
                    break 'test false;
                }
            }
        };
        let accepted = match kind {
            HypothesisKind::ExistsAtLeast => accepted_h0,
            HypothesisKind::ExistsAtMost => !accepted_h0,
        };
        if accepted {
            return Ok(HypothesisResult {
                verdict: HypothesisVerdict::Accepted,
                witness_sigma: Some(sigma),
                simulations_used: sims_used,
            });
        }
    }
    Ok(HypothesisResult {
        verdict: HypothesisVerdict::RejectedGivenBudget,
        witness_sigma: None,
        simulations_used: sims_used,
    })
}

/// Ranks candidate indices by success count (descending), breaking ties by
/// ascending scheduler id, then by input position.
pub(crate) fn rank_candidates(sigmas: &[SchedulerId], counts: &[u64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..sigmas.len()).collect();
    order.sort_by(|&a, &b| {
        counts[b]
            .cmp(&counts[a])
            .then(sigmas[a].cmp(&sigmas[b]))
            .then(a.cmp(&b))
    });
    order
}
