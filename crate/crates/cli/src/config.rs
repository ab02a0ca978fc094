//! Run configuration: everything a run depends on, echoed verbatim in the
//! output so results are attributable and reproducible.

use serde::Serialize;
use smc_core::algorithms::{Direction, HypothesisKind, SchedulerDensity, SyntheticPopulation};
use smc_core::scheduler::SchedulerClass;
use smc_core::stats::{ChernoffSpec, SprtSpec, StatsError};
use std::path::PathBuf;

/// Fixed default master seed; runs are reproducible unless the user opts
/// into entropy with --random-seed.
pub const DEFAULT_MASTER_SEED: u64 = 3_141_592_653_589_793_238;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SmartEstimate,
    SimpleEstimate,
    SmartHypothesis,
    SimpleHypothesis,
    Oracle,
    Synthetic,
}

/// Which quantity the oracle subcommand computes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OraclePolicy {
    Optimal,
    Uniform,
    Scheduler { sigma: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub model: Option<PathBuf>,
    /// Property source text, or the name of a property embedded in the
    /// model file.
    pub property: Option<String>,
    pub direction: Direction,
    pub class: SchedulerClass,
    pub epsilon: f64,
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub theta: Option<f64>,
    /// Per-iteration simulation budget (smart modes, synthetic).
    pub budget: Option<u64>,
    /// Scheduler count (simple modes).
    pub schedulers: Option<u64>,
    pub oracle_policy: Option<OraclePolicy>,
    pub population: Option<SyntheticPopulation>,
    pub master_seed: u64,
    pub workers: usize,
    pub format: OutputFormat,
}

impl RunConfig {
    pub fn chernoff(&self) -> Result<ChernoffSpec, StatsError> {
        ChernoffSpec::new(self.epsilon, self.delta)
    }

    pub fn sprt(&self) -> Result<SprtSpec, StatsError> {
        let theta = self.theta.ok_or_else(|| {
            StatsError::InvalidParameter("hypothesis modes require --theta".into())
        })?;
        SprtSpec::new(theta, self.epsilon, self.alpha, self.beta)
    }

    pub fn hypothesis_kind(&self) -> HypothesisKind {
        match self.direction {
            Direction::Max => HypothesisKind::ExistsAtLeast,
            Direction::Min => HypothesisKind::ExistsAtMost,
        }
    }

    /// A neutral default population with the documented convergence-study
    /// shape: exponential, zero density at 0.2, 1.44% nonzero mass.
    pub fn default_population() -> SyntheticPopulation {
        SyntheticPopulation::fig9_exponential()
    }
}

/// Parses an explicit population list: comma-separated probabilities with
/// an optional `xCOUNT` repeat suffix, e.g. `0.0x999,0.9`.
pub fn parse_population_list(text: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (value, count) = match part.split_once('x') {
            Some((v, c)) => {
                let count: usize =
                    c.parse().map_err(|_| format!("bad repeat count in `{part}`"))?;
                (v, count)
            }
            None => (part, 1),
        };
        let p: f64 = value.parse().map_err(|_| format!("bad probability in `{part}`"))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(format!("probability {p} outside [0,1]"));
        }
        out.extend(std::iter::repeat(p).take(count));
    }
    if out.is_empty() {
        return Err("empty population list".into());
    }
    Ok(out)
}

/// Builds a density from CLI-ish parts.
pub fn density_from_parts(
    kind: &str,
    p_max: f64,
    rate: f64,
    probs: Option<&str>,
) -> Result<SchedulerDensity, String> {
    match kind {
        "linear" => Ok(SchedulerDensity::Linear { p_max }),
        "exponential" => Ok(SchedulerDensity::Exponential { p_max, rate }),
        "explicit" => {
            let list = probs.ok_or("explicit density requires --probs")?;
            Ok(SchedulerDensity::Explicit(parse_population_list(list)?))
        }
        other => Err(format!("unknown density `{other}`")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_list_supports_repeats() {
        let ps = parse_population_list("0.0x3,0.9").unwrap();
        assert_eq!(ps, vec![0.0, 0.0, 0.0, 0.9]);
        assert!(parse_population_list("1.5").is_err());
        assert!(parse_population_list("").is_err());
    }

    #[test]
    fn density_parsing() {
        assert!(matches!(
            density_from_parts("linear", 0.2, 0.0, None),
            Ok(SchedulerDensity::Linear { .. })
        ));
        assert!(density_from_parts("explicit", 0.2, 0.0, None).is_err());
        assert!(density_from_parts("weird", 0.2, 0.0, None).is_err());
    }
}
