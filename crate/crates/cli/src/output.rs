//! Serialization of run records.
//!
//! JSON is the full record. CSV is the per-iteration table plus one summary
//! row, with a frozen header:
//!
//! ```text
//! record,iteration,M_i,N_i,confidence,best_estimate,mean_estimate,best_true_probability,total_simulations,verdict,best_sigma
//! ```
//!
//! Iteration rows fill the middle columns; the summary row carries the
//! final estimate (or verdict), the total simulation count and the best
//! scheduler seed. Numbers use the shortest decimal form that round-trips,
//! which is what Rust's float formatting produces.

use crate::config::OutputFormat;
use crate::engine::{OutputRecord, ResultPayload};
use anyhow::Result;
use smc_core::algorithms::HypothesisVerdict;

pub const CSV_HEADER: &str = "record,iteration,M_i,N_i,confidence,best_estimate,mean_estimate,best_true_probability,total_simulations,verdict,best_sigma";

pub fn emit(record: &OutputRecord, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => Ok(serde_json::to_string_pretty(record)?),
        OutputFormat::Csv => Ok(emit_csv(record)),
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn emit_csv(record: &OutputRecord) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in &record.iterations {
        out.push_str(&format!(
            "iteration,{},{},{},{},{},{},{},,,\n",
            row.iteration,
            row.candidates,
            row.sims_per_candidate,
            row.confidence,
            row.best_estimate,
            opt(row.mean_estimate),
            opt(row.best_true_probability),
        ));
    }
    let (estimate, verdict, sigma) = summary_fields(&record.result);
    out.push_str(&format!(
        "summary,,,,,{},,,{},{},{}\n",
        estimate, record.total_simulations, verdict, sigma
    ));
    out
}

fn summary_fields(payload: &ResultPayload) -> (String, &'static str, String) {
    match payload {
        ResultPayload::SmartEstimate(r) => (
            r.estimate.to_string(),
            if r.best_sigma.is_some() { "estimated" } else { "no-candidates" },
            r.best_sigma.map(|s| s.0.to_string()).unwrap_or_default(),
        ),
        ResultPayload::Synthetic(r) => (
            r.result.estimate.to_string(),
            if r.result.best_sigma.is_some() { "estimated" } else { "no-candidates" },
            r.result.best_sigma.map(|s| s.0.to_string()).unwrap_or_default(),
        ),
        ResultPayload::SimpleEstimate(r) => (
            r.p_hat_max.to_string(),
            if r.found_satisfying() { "estimated" } else { "no-satisfying-scheduler" },
            String::new(),
        ),
        ResultPayload::Hypothesis(r) => (
            String::new(),
            match r.verdict {
                HypothesisVerdict::Accepted => "accepted",
                HypothesisVerdict::RejectedGivenBudget => "rejected-given-budget",
                HypothesisVerdict::InconclusiveGivenBudget => "inconclusive-given-budget",
            },
            r.witness_sigma.map(|s| s.0.to_string()).unwrap_or_default(),
        ),
        ResultPayload::Oracle(r) => (r.value.to_string(), "exact", String::new()),
    }
}
