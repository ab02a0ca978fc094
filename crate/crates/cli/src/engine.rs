//! Dispatch from a validated configuration to the algorithms, with the
//! config echo, timing and the per-iteration table assembled into one
//! machine-readable record.

use crate::config::{Mode, OraclePolicy, RunConfig};
use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use smc_core::algorithms::{
    estimate_multiple, hypothesis_multiple, smart_estimate, smart_hypothesis,
    synthetic_smart_estimate, HypothesisResult, HypothesisVerdict, MultiEstimateResult,
    SimContext, SmartRunResult, SyntheticRunResult,
};
use smc_core::model::{parse_model, Mdp};
use smc_core::oracle::{
    exact_optimum_history, exact_optimum_memoryless, exact_scheduler_probability,
    uniform_scheduler_probability, OracleResult, DEFAULT_NODE_CAP,
};
use smc_core::property::{parse_property, BoundProperty};
use smc_core::scheduler::{SchedulerClass, SchedulerId, HASH_MODULUS, PRNG_ID};
use std::time::Instant;

/// Config echo plus the constants that pin reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub hash_modulus: u64,
    pub prng: &'static str,
    #[serde(flatten)]
    pub config: RunConfig,
}

/// Serializable oracle payload: the f64 value plus the exact rational.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OraclePayload {
    pub value: f64,
    pub value_exact: String,
    pub explored: u64,
    /// Optimal memoryless action map as (state values, command label).
    pub witness: Option<Vec<(Vec<i64>, String)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ResultPayload {
    SmartEstimate(SmartRunResult),
    SimpleEstimate(MultiEstimateResult),
    Hypothesis(HypothesisResult),
    Oracle(OraclePayload),
    Synthetic(SyntheticRunResult),
}

/// One row of the per-iteration table (CSV-oriented view of the payload).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRow {
    pub iteration: u64,
    pub candidates: u64,
    pub sims_per_candidate: u64,
    pub confidence: f64,
    pub best_estimate: f64,
    pub mean_estimate: Option<f64>,
    pub best_true_probability: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputRecord {
    pub config: ConfigEcho,
    pub result: ResultPayload,
    pub iterations: Vec<IterationRow>,
    pub total_simulations: u64,
    pub wall_clock_ms: u64,
}

impl OutputRecord {
    /// Process exit code: 0 success/accepted, 1 rejected-or-not-found,
    /// 2 inconclusive.
    pub fn exit_code(&self) -> i32 {
        match &self.result {
            ResultPayload::Hypothesis(h) => match h.verdict {
                HypothesisVerdict::Accepted => 0,
                HypothesisVerdict::RejectedGivenBudget => 1,
                HypothesisVerdict::InconclusiveGivenBudget => 2,
            },
            ResultPayload::SimpleEstimate(e) => {
                if e.found_satisfying() {
                    0
                } else {
                    1
                }
            }
            ResultPayload::SmartEstimate(r) => {
                if r.best_sigma.is_some() {
                    0
                } else {
                    1
                }
            }
            ResultPayload::Synthetic(r) => {
                if r.result.best_sigma.is_some() {
                    0
                } else {
                    1
                }
            }
            ResultPayload::Oracle(_) => 0,
        }
    }
}

fn load_model(config: &RunConfig) -> Result<Mdp> {
    let path = config
        .model
        .as_ref()
        .ok_or_else(|| anyhow!("this mode requires --model"))?;
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading model file {}", path.display()))?;
    Ok(parse_model(&text)?)
}

/// Resolves `--prop` as an embedded property name first, then as property
/// source text.
fn load_property(config: &RunConfig, mdp: &Mdp) -> Result<BoundProperty> {
    let spec = config
        .property
        .as_ref()
        .ok_or_else(|| anyhow!("this mode requires --prop"))?;
    let text = match mdp.property(spec) {
        Some(embedded) => embedded.text.clone(),
        None => spec.clone(),
    };
    Ok(parse_property(&text)?.bind(mdp)?)
}

fn rows_from_smart(result: &SmartRunResult) -> Vec<IterationRow> {
    result
        .iterations
        .iter()
        .enumerate()
        .map(|(i, it)| IterationRow {
            iteration: i as u64 + 1,
            candidates: it.candidates,
            sims_per_candidate: it.sims_per_candidate,
            confidence: it.confidence,
            best_estimate: it.best_estimate,
            mean_estimate: None,
            best_true_probability: None,
        })
        .collect()
}

fn rows_from_synthetic(result: &SyntheticRunResult) -> Vec<IterationRow> {
    result
        .series
        .iter()
        .map(|it| IterationRow {
            iteration: it.iteration,
            candidates: it.candidates,
            sims_per_candidate: it.sims_per_candidate,
            confidence: it.confidence,
            best_estimate: it.best_estimate,
            mean_estimate: Some(it.mean_estimate),
            best_true_probability: Some(it.best_true_probability),
        })
        .collect()
}

/// Executes the configured run. The result payload is a pure function of
/// the configuration minus `workers`.
pub fn run(config: &RunConfig) -> Result<OutputRecord> {
    let started = Instant::now();
    if config.theta.is_some()
        && !matches!(config.mode, Mode::SmartHypothesis | Mode::SimpleHypothesis)
    {
        bail!("--theta only applies to hypothesis modes");
    }
    let (result, iterations, total_simulations) = match config.mode {
        Mode::SmartEstimate => {
            let mdp = load_model(config)?;
            let prop = load_property(config, &mdp)?;
            let ctx = SimContext {
                mdp: &mdp,
                prop: &prop,
                class: config.class,
                workers: config.workers,
            };
            let budget = config.budget.ok_or_else(|| anyhow!("smart estimation requires --budget"))?;
            let r = smart_estimate(&ctx, &config.chernoff()?, budget, config.direction, config.master_seed)?;
            let rows = rows_from_smart(&r);
            let total = r.total_simulations;
            (ResultPayload::SmartEstimate(r), rows, total)
        }
        Mode::SimpleEstimate => {
            let mdp = load_model(config)?;
            let prop = load_property(config, &mdp)?;
            let ctx = SimContext {
                mdp: &mdp,
                prop: &prop,
                class: config.class,
                workers: config.workers,
            };
            let m = config
                .schedulers
                .ok_or_else(|| anyhow!("simple estimation requires --schedulers"))?;
            let r = estimate_multiple(&ctx, &config.chernoff()?, m, config.master_seed)?;
            let rows = vec![IterationRow {
                iteration: 1,
                candidates: m,
                sims_per_candidate: r.sims_per_scheduler,
                confidence: config.delta,
                best_estimate: r.p_hat_max,
                mean_estimate: None,
                best_true_probability: None,
            }];
            let total = r.total_simulations;
            (ResultPayload::SimpleEstimate(r), rows, total)
        }
        Mode::SmartHypothesis => {
            let mdp = load_model(config)?;
            let prop = load_property(config, &mdp)?;
            let ctx = SimContext {
                mdp: &mdp,
                prop: &prop,
                class: config.class,
                workers: config.workers,
            };
            let budget = config
                .budget
                .ok_or_else(|| anyhow!("smart hypothesis testing requires --budget"))?;
            let r = smart_hypothesis(
                &ctx,
                &config.sprt()?,
                config.hypothesis_kind(),
                budget,
                config.master_seed,
            )?;
            let total = r.simulations_used;
            (ResultPayload::Hypothesis(r), Vec::new(), total)
        }
        Mode::SimpleHypothesis => {
            let mdp = load_model(config)?;
            let prop = load_property(config, &mdp)?;
            let ctx = SimContext {
                mdp: &mdp,
                prop: &prop,
                class: config.class,
                workers: config.workers,
            };
            let m = config
                .schedulers
                .ok_or_else(|| anyhow!("simple hypothesis testing requires --schedulers"))?;
            let r = hypothesis_multiple(
                &ctx,
                &config.sprt()?,
                config.hypothesis_kind(),
                m,
                config.master_seed,
            )?;
            let total = r.simulations_used;
            (ResultPayload::Hypothesis(r), Vec::new(), total)
        }
        Mode::Oracle => {
            let mdp = load_model(config)?;
            let prop = load_property(config, &mdp)?;
            let policy = config.oracle_policy.unwrap_or(OraclePolicy::Optimal);
            let r: OracleResult = match policy {
                OraclePolicy::Optimal => match config.class {
                    SchedulerClass::History => {
                        exact_optimum_history(&mdp, &prop, config.direction, DEFAULT_NODE_CAP)?
                    }
                    SchedulerClass::Memoryless => {
                        exact_optimum_memoryless(&mdp, &prop, config.direction, DEFAULT_NODE_CAP)?
                    }
                },
                OraclePolicy::Uniform => {
                    uniform_scheduler_probability(&mdp, &prop, DEFAULT_NODE_CAP)?
                }
                OraclePolicy::Scheduler { sigma } => exact_scheduler_probability(
                    &mdp,
                    &prop,
                    SchedulerId(sigma),
                    config.class,
                    DEFAULT_NODE_CAP,
                )?,
            };
            let witness = r.witness.as_ref().map(|map| {
                map.iter()
                    .map(|(state, &cmd)| {
                        let label = mdp.commands[cmd]
                            .label
                            .clone()
                            .unwrap_or_else(|| format!("#{cmd}"));
                        (state.clone(), label)
                    })
                    .collect()
            });
            let explored = r.explored;
            let payload = OraclePayload {
                value: r.value_f64(),
                value_exact: r.value.to_string(),
                explored,
                witness,
            };
            (ResultPayload::Oracle(payload), Vec::new(), explored)
        }
        Mode::Synthetic => {
            let pop = config
                .population
                .clone()
                .unwrap_or_else(RunConfig::default_population);
            let budget = config
                .budget
                .ok_or_else(|| anyhow!("synthetic mode requires --budget"))?;
            let r = synthetic_smart_estimate(
                &pop,
                &config.chernoff()?,
                budget,
                config.master_seed,
                config.workers,
            )?;
            let rows = rows_from_synthetic(&r);
            let total = r.result.total_simulations;
            (ResultPayload::Synthetic(r), rows, total)
        }
    };

    Ok(OutputRecord {
        config: ConfigEcho {
            hash_modulus: HASH_MODULUS,
            prng: PRNG_ID,
            config: config.clone(),
        },
        result,
        iterations,
        total_simulations,
        wall_clock_ms: started.elapsed().as_millis() as u64,
    })
}
