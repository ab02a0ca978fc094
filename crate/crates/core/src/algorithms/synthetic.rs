//! Convergence harness over synthetic scheduler populations.
//!
//! Instead of simulating a model, each virtual scheduler is a Bernoulli
//! success probability drawn deterministically from its seed, and one
//! "simulation" is a single Bernoulli trial. Running the smart-estimation
//! stages over such populations exposes the algorithm's convergence
//! behaviour with known ground truth: the per-iteration candidate estimate
//! distributions, the mean estimate, and the exact probability of the best
//! retained candidate.

use super::smart::{run_smart_estimate, StageView, VerdictSource};
use super::*;
use crate::pool::run_jobs;
use crate::scheduler::{mix_seed, PrngState, SchedulerId};
use crate::stats::ChernoffSpec;
use serde::Serialize;

/// Density of success probabilities over the nonzero part of a population.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SchedulerDensity {
    /// f(p) proportional to (p_max - p) on [0, p_max]: linearly decreasing,
    /// zero at p_max.
    Linear { p_max: f64 },
    /// f(p) proportional to (e^(-rate p) - e^(-rate p_max)) on [0, p_max]:
    /// exponentially decreasing, zero at p_max.
    Exponential { p_max: f64, rate: f64 },
    /// A finite population given explicitly; scheduler seeds map uniformly
    /// onto entries.
    Explicit(Vec<f64>),
}

/// A virtual scheduler population. `nonzero_mass` is the fraction of
/// schedulers whose success probability is drawn from the density; the
/// remaining schedulers never satisfy the property. It is ignored for
/// explicit populations, where zeros are listed directly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticPopulation {
    pub density: SchedulerDensity,
    pub nonzero_mass: f64,
}

impl SyntheticPopulation {
    pub fn new(density: SchedulerDensity, nonzero_mass: f64) -> Result<Self, StatsError> {
        if !(0.0..=1.0).contains(&nonzero_mass) {
            return Err(StatsError::InvalidParameter(format!(
                "nonzero mass {nonzero_mass} outside [0,1]"
            )));
        }
        match &density {
            SchedulerDensity::Linear { p_max } => {
                if !(*p_max > 0.0 && *p_max <= 1.0) {
                    return Err(StatsError::InvalidParameter(format!(
                        "p_max {p_max} outside (0,1]"
                    )));
                }
            }
            SchedulerDensity::Exponential { p_max, rate } => {
                if !(*p_max > 0.0 && *p_max <= 1.0) {
                    return Err(StatsError::InvalidParameter(format!(
                        "p_max {p_max} outside (0,1]"
                    )));
                }
                if !(*rate > 0.0) {
                    return Err(StatsError::InvalidParameter(format!("rate {rate} not positive")));
                }
            }
            SchedulerDensity::Explicit(ps) => {
                if ps.is_empty() {
                    return Err(StatsError::InvalidParameter("empty explicit population".into()));
                }
                if ps.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(StatsError::InvalidParameter(
                        "explicit probability outside [0,1]".into(),
                    ));
                }
            }
        }
        Ok(SyntheticPopulation { density, nonzero_mass })
    }

    /// The population of Fig. 9 shape: exponential density with zero density
    /// at 0.2 and roughly 1.44% of schedulers having nonzero probability.
    pub fn fig9_exponential() -> Self {
        SyntheticPopulation::new(
            SchedulerDensity::Exponential { p_max: 0.2, rate: 50.0 },
            0.0144,
        )
        .expect("constants are valid")
    }

    /// Success probability of the virtual scheduler named by `sigma`,
    /// deterministically derived via the fixed PRNG.
    pub fn probability(&self, sigma: SchedulerId) -> f64 {
        match &self.density {
            SchedulerDensity::Explicit(ps) => {
                let (idx, _) = PrngState::new(mix_seed(&[0x707, sigma.0]))
                    .choose_uniform(ps.len());
                ps[idx]
            }
            density => {
                let (u, _) = PrngState::new(mix_seed(&[0x707, sigma.0])).next_unit();
                if u >= self.nonzero_mass {
                    0.0
                } else {
                    density.quantile(u / self.nonzero_mass)
                }
            }
        }
    }

    /// Mean success probability over the whole population.
    pub fn mean(&self) -> f64 {
        match &self.density {
            SchedulerDensity::Explicit(ps) => ps.iter().sum::<f64>() / ps.len() as f64,
            d => self.nonzero_mass * d.density_mean(),
        }
    }

    /// Second moment E[p^2] over the whole population.
    pub fn second_moment(&self) -> f64 {
        match &self.density {
            SchedulerDensity::Explicit(ps) => {
                ps.iter().map(|p| p * p).sum::<f64>() / ps.len() as f64
            }
            d => self.nonzero_mass * d.density_second_moment(),
        }
    }

    /// Standard error of the mean estimate over `m` schedulers with `n`
    /// Bernoulli trials each: sqrt((Var(p) + E[p(1-p)]/n) / m).
    pub fn mean_estimate_std_error(&self, m: u64, n: u64) -> f64 {
        let mu = self.mean();
        let m2 = self.second_moment();
        let var_p = (m2 - mu * mu).max(0.0);
        let sampling = (mu - m2).max(0.0) / n as f64;
        ((var_p + sampling) / m as f64).sqrt()
    }
}

impl SchedulerDensity {
    /// Inverse CDF of the normalized density.
    fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self {
            SchedulerDensity::Linear { p_max } => p_max * (1.0 - (1.0 - u).sqrt()),
            SchedulerDensity::Exponential { p_max, .. } => {
                // CDF has no closed-form inverse; bisect it (monotone).
                let cdf = |p: f64| self.cdf_unnormalized(p) / self.cdf_unnormalized(*p_max);
                let (mut lo, mut hi) = (0.0f64, *p_max);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if cdf(mid) < u {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
            SchedulerDensity::Explicit(_) => unreachable!("explicit populations use indexing"),
        }
    }

    fn cdf_unnormalized(&self, p: f64) -> f64 {
        match self {
            SchedulerDensity::Exponential { p_max, rate } => {
                (-f64::exp_m1(-rate * p)) / rate - p * (-rate * p_max).exp()
            }
            _ => unreachable!(),
        }
    }

    /// Mean of the normalized density.
    fn density_mean(&self) -> f64 {
        match self {
            SchedulerDensity::Linear { p_max } => p_max / 3.0,
            SchedulerDensity::Exponential { p_max, rate } => {
                let e = (-rate * p_max).exp();
                let z = (1.0 - e) / rate - p_max * e;
                ((1.0 - e * (1.0 + rate * p_max)) / (rate * rate) - p_max * p_max * e / 2.0) / z
            }
            SchedulerDensity::Explicit(_) => unreachable!(),
        }
    }

    /// Second moment of the normalized density.
    fn density_second_moment(&self) -> f64 {
        match self {
            SchedulerDensity::Linear { p_max } => p_max * p_max / 6.0,
            SchedulerDensity::Exponential { p_max, rate } => {
                let e = (-rate * p_max).exp();
                let z = (1.0 - e) / rate - p_max * e;
                let rp = rate * p_max;
                ((2.0 - e * (2.0 + 2.0 * rp + rp * rp)) / (rate * rate * rate)
                    - p_max * p_max * p_max * e / 3.0)
                    / z
            }
            SchedulerDensity::Explicit(_) => unreachable!(),
        }
    }
}

/// One recorded stage or refinement iteration of a synthetic run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticIteration {
    /// 0 = undirected exploration, 1 = candidate generation, 2.. =
    /// refinement iterations.
    pub iteration: u64,
    pub candidates: u64,
    pub sims_per_candidate: u64,
    pub confidence: f64,
    pub best_estimate: f64,
    /// Mean estimate over the iteration's candidate set (including zeros).
    pub mean_estimate: f64,
    /// Exact success probability of the best candidate in the set.
    pub best_true_probability: f64,
    /// The empirical candidate estimate distribution.
    pub estimates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticRunResult {
    pub result: SmartRunResult,
    pub series: Vec<SyntheticIteration>,
    /// Analytic population mean, for checking the iteration-0 mean.
    pub population_mean: f64,
    /// Standard error of the iteration-0 mean estimate.
    pub mean_std_error: f64,
}

struct PopulationSource<'a> {
    pop: &'a SyntheticPopulation,
    workers: usize,
}

impl VerdictSource for PopulationSource<'_> {
    fn verdicts(
        &self,
        sigmas: &[SchedulerId],
        reps: u64,
        master: u64,
        stage_ctx: u64,
    ) -> Result<Vec<bool>, SimError> {
        let reps = reps as usize;
        if reps == 0 || sigmas.is_empty() {
            return Ok(Vec::new());
        }
        // One probability lookup per scheduler, then reps Bernoulli draws.
        let probs: Vec<f64> = sigmas.iter().map(|&s| self.pop.probability(s)).collect();
        Ok(run_jobs(self.workers, sigmas.len() * reps, |i| {
            let sigma = sigmas[i / reps];
            let seed = prob_seed(master, stage_ctx, sigma, (i % reps) as u64);
            let (u, _) = PrngState::new(seed).next_unit();
            u < probs[i / reps]
        }))
    }
}

/// Runs the smart-estimation stages over a virtual population and records
/// the per-iteration candidate distributions.
pub fn synthetic_smart_estimate(
    pop: &SyntheticPopulation,
    spec: &ChernoffSpec,
    n_max: u64,
    master_seed: u64,
    workers: usize,
) -> Result<SyntheticRunResult, RunError> {
    let source = PopulationSource { pop, workers };
    let mut series: Vec<SyntheticIteration> = Vec::new();
    let result = run_smart_estimate(&source, spec, n_max, master_seed, |view: &StageView<'_>| {
        let estimates: Vec<f64> =
            view.counts.iter().map(|&c| c as f64 / view.reps as f64).collect();
        let mean_estimate = if estimates.is_empty() {
            0.0
        } else {
            estimates.iter().sum::<f64>() / estimates.len() as f64
        };
        let order = rank_candidates(view.sigmas, view.counts);
        let best = order.first().map(|&i| estimates[i]).unwrap_or(0.0);
        let best_true = view
            .sigmas
            .iter()
            .map(|&s| pop.probability(s))
            .fold(0.0f64, f64::max);
        series.push(SyntheticIteration {
            iteration: series.len() as u64,
            candidates: view.sigmas.len() as u64,
            sims_per_candidate: view.reps,
            confidence: view.confidence,
            best_estimate: best,
            mean_estimate,
            best_true_probability: best_true,
            estimates,
        });
    })?;
    let side = (n_max as f64).sqrt().ceil() as u64;
    Ok(SyntheticRunResult {
        result,
        series,
        population_mean: pop.mean(),
        mean_std_error: pop.mean_estimate_std_error(side, side),
    })
}
