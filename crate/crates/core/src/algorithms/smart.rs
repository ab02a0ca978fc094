//! Smart sampling: three-stage budget allocation for estimation and
//! hypothesis testing.
//!
//! Stage (i) explores ceil(sqrt(n_max)) schedulers with ceil(sqrt(n_max))
//! simulations each to get a coarse best estimate. Stage (ii) spends one
//! budget on a candidate set sized to maximize the probability of seeing a
//! good scheduler, keeping every candidate with at least one satisfying
//! trace. Stage (iii) repeatedly re-simulates the survivors, discards the
//! worse half, and stops once the multi-estimate confidence reaches delta.
//!
//! SPRT orientation: the likelihood ratio carries the p1 hypothesis on top,
//! so H0 (p >= p0) is accepted when the ratio falls to beta/(1-alpha) and
//! rejected (H1 accepted) when it climbs to (1-beta)/alpha. The smart
//! hypothesis-test pseudocode is mapped onto this convention: its
//! "ratio <= A" acceptance is the fall below beta/(1-alpha), and its
//! "ratio_i >= B_M" rejection is the climb above (1-beta_M)/alpha_M.

use super::*;
use crate::scheduler::{SchedulerId, SimError};
use crate::stats::{budget_split, candidate_confidence, chernoff_floor, sprt_bounds};

/// A source of Bernoulli verdicts per (scheduler, replicate) pair. The
/// real implementation simulates the model; the synthetic harness draws
/// from a virtual scheduler population.
pub(crate) trait VerdictSource: Sync {
    fn verdicts(
        &self,
        sigmas: &[SchedulerId],
        reps: u64,
        master: u64,
        stage_ctx: u64,
    ) -> Result<Vec<bool>, SimError>;
}

pub(crate) struct ModelSource<'a>(pub SimContext<'a>);

impl VerdictSource for ModelSource<'_> {
    fn verdicts(
        &self,
        sigmas: &[SchedulerId],
        reps: u64,
        master: u64,
        stage_ctx: u64,
    ) -> Result<Vec<bool>, SimError> {
        batch_outcomes(&self.0, sigmas, reps, master, stage_ctx)
    }
}

fn counts_of(outcomes: &[bool], reps: u64) -> Vec<u64> {
    outcomes
        .chunks(reps as usize)
        .map(|c| c.iter().map(|&b| u64::from(b)).sum())
        .collect()
}

/// Per-iteration observation passed to the series recorder: the candidate
/// set with per-candidate estimates at that point.
pub(crate) struct StageView<'a> {
    pub sigmas: &'a [SchedulerId],
    pub counts: &'a [u64],
    pub reps: u64,
    pub confidence: f64,
}

pub(crate) fn run_smart_estimate<S: VerdictSource>(
    source: &S,
    spec: &ChernoffSpec,
    n_max: u64,
    master_seed: u64,
    mut observe: impl FnMut(&StageView<'_>),
) -> Result<SmartRunResult, RunError> {
    let floor = chernoff_floor(spec);
    if (n_max as f64) <= floor {
        return Err(RunError::BudgetTooSmall { budget: n_max, floor });
    }

    let empty = |exploration, candidates, total| SmartRunResult {
        best_sigma: None,
        estimate: 0.0,
        direction: Direction::Max,
        iterations: Vec::new(),
        exploration_simulations: exploration,
        candidate_simulations: candidates,
        total_simulations: total,
        terminated_by: Termination::EmptyCandidates,
    };

    // Stage (i): undirected exploration, N = M = ceil(sqrt(n_max)).
    let side = (n_max as f64).sqrt().ceil() as u64;
    let sigmas = draw_seeds(master_seed, TAG_SEEDS_EXPLORE, side);
    let outcomes = source.verdicts(&sigmas, side, master_seed, CTX_EXPLORE)?;
    let counts = counts_of(&outcomes, side);
    let exploration_sims = side * side;
    observe(&StageView { sigmas: &sigmas, counts: &counts, reps: side, confidence: 1.0 });
    let p_hat = counts.iter().max().copied().unwrap_or(0) as f64 / side as f64;

    // Stage (ii): candidate generation at the budget split for p_hat.
    let Some(split) = budget_split(p_hat, n_max) else {
        return Ok(empty(exploration_sims, 0, exploration_sims));
    };
    let (n2, m2) = (split.sims_per_candidate, split.candidates);
    let sigmas = draw_seeds(master_seed, TAG_SEEDS_CANDIDATES, m2);
    let outcomes = source.verdicts(&sigmas, n2, master_seed, CTX_CANDIDATES)?;
    let counts = counts_of(&outcomes, n2);
    let candidate_sims = m2 * n2;
    observe(&StageView { sigmas: &sigmas, counts: &counts, reps: n2, confidence: 1.0 });
    let mut survivors: Vec<SchedulerId> = sigmas
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(&s, _)| s)
        .collect();
    let mut total = exploration_sims + candidate_sims;
    if survivors.is_empty() {
        return Ok(empty(exploration_sims, candidate_sims, total));
    }

    // Stage (iii): iterative refinement.
    let mut iterations = Vec::new();
    let mut iter = 0u64;
    let (best_sigma, estimate, terminated_by) = loop {
        iter += 1;
        let m_i = survivors.len() as u64;
        let cap = n_max.div_ceil(m_i);
        // The inner loop's confidence check depends only on the replicate
        // count, so the early-exit point is computable up front.
        let n_i = (1..=cap)
            .find(|&n| candidate_confidence(n, m_i, spec.epsilon) <= spec.delta)
            .unwrap_or(cap);
        let confidence = candidate_confidence(n_i, m_i, spec.epsilon);

        let outcomes =
            source.verdicts(&survivors, n_i, master_seed, CTX_REFINE_BASE + iter)?;
        let counts = counts_of(&outcomes, n_i);
        total += m_i * n_i;
        observe(&StageView { sigmas: &survivors, counts: &counts, reps: n_i, confidence });

        let order = rank_candidates(&survivors, &counts);
        let best = survivors[order[0]];
        let best_estimate = counts[order[0]] as f64 / n_i as f64;
        iterations.push(IterationRecord {
            candidates: m_i,
            sims_per_candidate: n_i,
            confidence,
            best_estimate,
        });

        if confidence <= spec.delta {
            break (best, best_estimate, Termination::ConfidenceReached);
        }
        if m_i == 1 {
            // Unreachable when n_max is above the Chernoff floor; kept so
            // an exhausted budget cannot loop forever.
            break (best, best_estimate, Termination::SingleCandidateBudget);
        }
        // Keep the top half, rounding up so the set strictly shrinks.
        let keep = (survivors.len() + 1) / 2;
        survivors = order[..keep].iter().map(|&i| survivors[i]).collect();
    };

    Ok(SmartRunResult {
        best_sigma: Some(best_sigma),
        estimate,
        direction: Direction::Max,
        iterations,
        exploration_simulations: exploration_sims,
        candidate_simulations: candidate_sims,
        total_simulations: total,
        terminated_by,
    })
}

/// Smart estimation of the extremal probability over schedulers.
///
/// Minimization runs the same algorithm on the complemented property and
/// reports complemented estimates, which is exact because every bounded
/// property yields a definite verdict on every trace.
pub fn smart_estimate(
    ctx: &SimContext<'_>,
    spec: &ChernoffSpec,
    n_max: u64,
    direction: Direction,
    master_seed: u64,
) -> Result<SmartRunResult, RunError> {
    let result = match direction {
        Direction::Max => run_smart_estimate(&ModelSource(*ctx), spec, n_max, master_seed, |_| {})?,
        Direction::Min => {
            let negated = ctx.prop.negated();
            let flipped = SimContext { prop: &negated, ..*ctx };
            let mut r =
                run_smart_estimate(&ModelSource(flipped), spec, n_max, master_seed, |_| {})?;
            r.direction = Direction::Min;
            r.estimate = 1.0 - r.estimate;
            for it in &mut r.iterations {
                it.best_estimate = 1.0 - it.best_estimate;
            }
            r
        }
    };
    Ok(result)
}

/// Smart hypothesis testing: does some scheduler satisfy the property with
/// probability >= theta (or <= theta for [`HypothesisKind::ExistsAtMost`],
/// which is the same test run on the complemented property at threshold
/// 1 - theta)?
pub fn smart_hypothesis(
    ctx: &SimContext<'_>,
    sprt: &SprtSpec,
    kind: HypothesisKind,
    n_max: u64,
    master_seed: u64,
) -> Result<HypothesisResult, RunError> {
    match kind {
        HypothesisKind::ExistsAtLeast => smart_hypothesis_at_least(ctx, sprt, n_max, master_seed),
        HypothesisKind::ExistsAtMost => {
            let negated = ctx.prop.negated();
            let flipped = SimContext { prop: &negated, ..*ctx };
            smart_hypothesis_at_least(&flipped, &sprt.complement(), n_max, master_seed)
        }
    }
}

fn smart_hypothesis_at_least(
    ctx: &SimContext<'_>,
    sprt: &SprtSpec,
    n_max: u64,
    master_seed: u64,
) -> Result<HypothesisResult, RunError> {
    let theta = sprt.theta;
    if !(theta > sprt.epsilon && theta < 1.0 - sprt.epsilon) {
        return Err(RunError::Stats(StatsError::InvalidParameter(format!(
            "smart hypothesis testing needs theta in (epsilon, 1-epsilon), got theta {theta}"
        ))));
    }
    let (p0, p1) = (sprt.p0(), sprt.p1());
    // Only the acceptance side of the aggregate test exists in the
    // algorithm; rejection is decided per candidate.
    let ln_accept = sprt_bounds(sprt.alpha, sprt.beta).1.ln();
    let source = ModelSource(*ctx);
    let mut sims_used = 0u64;

    // Candidate generation sized directly from the threshold: schedulers
    // above theta have high probability of producing a success within
    // ceil(1/theta) simulations.
    let n = (1.0 / theta).ceil() as u64;
    let m = (theta * n_max as f64).ceil() as u64;
    let sigmas = draw_seeds(master_seed, TAG_SEEDS_CANDIDATES, m);
    let outcomes = source.verdicts(&sigmas, n, master_seed, CTX_CANDIDATES)?;
    let counts = counts_of(&outcomes, n);
    sims_used += m * n;

    // Aggregate test over the whole generation stage: the pooled ratio uses
    // the actual number of simulations performed (m * n).
    let successes: u64 = counts.iter().sum();
    let agg = pooled_log_ratio(successes, m * n, p0, p1);
    if agg <= ln_accept {
        let order = rank_candidates(&sigmas, &counts);
        return Ok(HypothesisResult {
            verdict: HypothesisVerdict::Accepted,
            witness_sigma: Some(sigmas[order[0]]),
            simulations_used: sims_used,
        });
    }

    let mut survivors: Vec<SchedulerId> = sigmas
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(&s, _)| s)
        .collect();

    let mut iter = 0u64;
    while !survivors.is_empty() {
        iter += 1;
        let m_i = survivors.len() as u64;
        let alpha_m = multi_test_correction(sprt.alpha, m_i);
        let beta_m = multi_test_correction(sprt.beta, m_i);
        let (a_m, b_m) = sprt_bounds(alpha_m, beta_m);
        let (ln_reject_m, ln_accept_m) = (a_m.ln(), b_m.ln());

        // All of this iteration's simulations are deterministic in their
        // seeds, so the batch can run ahead; the sequential decision scan
        // below consumes outcomes in order and stops at the first trigger.
        let outcomes =
            source.verdicts(&survivors, n, master_seed, CTX_REFINE_BASE + iter)?;
        let mut counts = vec![0u64; survivors.len()];
        let mut aggregate = 0.0f64;
        for (i, &sigma) in survivors.iter().enumerate() {
            let mut individual = 0.0f64;
            for j in 0..n as usize {
                let sat = outcomes[i * n as usize + j];
                counts[i] += u64::from(sat);
                let d = crate::stats::log_factor(sat, p0, p1);
                aggregate += d;
                individual += d;
                sims_used += 1;
                if aggregate <= ln_accept || individual <= ln_accept_m {
                    return Ok(HypothesisResult {
                        verdict: HypothesisVerdict::Accepted,
                        witness_sigma: Some(sigma),
                        simulations_used: sims_used,
                    });
                }
                if individual >= ln_reject_m {
                    return Ok(HypothesisResult {
                        verdict: HypothesisVerdict::RejectedGivenBudget,
                        witness_sigma: None,
                        simulations_used: sims_used,
                    });
                }
            }
        }
        if survivors.len() == 1 {
            break;
        }
        let order = rank_candidates(&survivors, &counts);
        let keep = (survivors.len() + 1) / 2;
        survivors = order[..keep].iter().map(|&i| survivors[i]).collect();
    }

    Ok(HypothesisResult {
        verdict: HypothesisVerdict::InconclusiveGivenBudget,
        witness_sigma: None,
        simulations_used: sims_used,
    })
}

/// Log likelihood ratio of `successes` out of `trials` pooled outcomes.
fn pooled_log_ratio(successes: u64, trials: u64, p0: f64, p1: f64) -> f64 {
    let k = successes as f64;
    let miss = (trials - successes) as f64;
    k * (p1.ln() - p0.ln()) + miss * ((1.0 - p1).ln() - (1.0 - p0).ln())
}
