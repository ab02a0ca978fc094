use clap::{Args, Parser, Subcommand, ValueEnum};
use smc_cli::config::{
    density_from_parts, Mode, OraclePolicy, OutputFormat, RunConfig, DEFAULT_MASTER_SEED,
};
use smc_cli::engine::run;
use smc_cli::output::emit;
use smc_core::algorithms::{Direction, SyntheticPopulation};
use smc_core::scheduler::SchedulerClass;
use std::path::PathBuf;
use std::process::ExitCode;

/// Statistical model checker for MDPs: samples hash-defined schedulers
/// uniformly and refines them with smart-sampling estimation and
/// hypothesis-testing algorithms.
#[derive(Parser)]
#[command(name = "smc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Estimate the extremal satisfaction probability over schedulers.
    /// --budget runs smart sampling; --schedulers runs simple sampling.
    Estimate(EstimateArgs),
    /// Test whether some scheduler satisfies the property with probability
    /// >= theta (--max) or <= theta (--min).
    Hypothesis(HypothesisArgs),
    /// Compute exact probabilities at desk scale.
    Oracle(OracleArgs),
    /// Run the smart-estimation convergence harness on a synthetic
    /// scheduler population.
    Synthetic(SyntheticArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassArg {
    History,
    Memoryless,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Args)]
struct CommonArgs {
    /// Optimize for the maximum probability (default).
    #[arg(long, conflicts_with = "min")]
    max: bool,
    /// Optimize for the minimum probability.
    #[arg(long)]
    min: bool,
    /// Scheduler class to sample.
    #[arg(long, value_enum, default_value = "history", env = "SMC_CLASS")]
    class: ClassArg,
    /// Master seed; every result is a pure function of the configuration.
    #[arg(long, env = "SMC_SEED", default_value_t = DEFAULT_MASTER_SEED)]
    seed: u64,
    /// Draw the master seed from OS entropy instead.
    #[arg(long)]
    random_seed: bool,
    /// Simulation worker threads.
    #[arg(long, env = "SMC_WORKERS", default_value_t = 1)]
    workers: usize,
    /// Output format.
    #[arg(long, value_enum, default_value = "json", env = "SMC_FORMAT")]
    format: FormatArg,
    /// Write output to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatArgs {
    /// Chernoff error bound epsilon.
    #[arg(long, default_value_t = 0.01, env = "SMC_EPSILON")]
    epsilon: f64,
    /// Chernoff confidence parameter delta.
    #[arg(long, default_value_t = 0.01, env = "SMC_DELTA")]
    delta: f64,
    /// SPRT type I error bound alpha.
    #[arg(long, default_value_t = 0.01, env = "SMC_ALPHA")]
    alpha: f64,
    /// SPRT type II error bound beta.
    #[arg(long, default_value_t = 0.01, env = "SMC_BETA")]
    beta: f64,
}

#[derive(Args)]
struct EstimateArgs {
    /// Model file.
    #[arg(long)]
    model: PathBuf,
    /// Property text, or the name of a property embedded in the model.
    #[arg(long)]
    prop: String,
    /// Per-iteration simulation budget (smart sampling).
    #[arg(long, conflicts_with = "schedulers")]
    budget: Option<u64>,
    /// Number of schedulers to test (simple sampling).
    #[arg(long)]
    schedulers: Option<u64>,
    #[command(flatten)]
    stat: StatArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct HypothesisArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    prop: String,
    /// Probability threshold of the existence hypothesis.
    #[arg(long)]
    theta: f64,
    /// Per-iteration simulation budget (smart testing).
    #[arg(long, conflicts_with = "schedulers")]
    budget: Option<u64>,
    /// Number of schedulers to test (simple testing).
    #[arg(long)]
    schedulers: Option<u64>,
    #[command(flatten)]
    stat: StatArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    prop: String,
    /// Replay one hash-defined scheduler instead of optimizing.
    #[arg(long, conflicts_with = "uniform")]
    sigma: Option<u64>,
    /// Expectation under the uniform probabilistic scheduler.
    #[arg(long)]
    uniform: bool,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct SyntheticArgs {
    /// Per-iteration Bernoulli trial budget.
    #[arg(long)]
    budget: u64,
    /// Population density shape.
    #[arg(long, default_value = "exponential")]
    density: String,
    /// Upper end of the density support (density is zero there).
    #[arg(long, default_value_t = 0.2)]
    p_max: f64,
    /// Decay rate of the exponential density.
    #[arg(long, default_value_t = 50.0)]
    rate: f64,
    /// Fraction of schedulers with nonzero success probability.
    #[arg(long, default_value_t = 0.0144)]
    mass: f64,
    /// Explicit population list, e.g. `0.0x999,0.9` (with --density explicit).
    #[arg(long)]
    probs: Option<String>,
    #[command(flatten)]
    stat: StatArgs,
    #[command(flatten)]
    common: CommonArgs,
}

impl CommonArgs {
    fn direction(&self) -> Direction {
        if self.min {
            Direction::Min
        } else {
            Direction::Max
        }
    }

    fn class(&self) -> SchedulerClass {
        match self.class {
            ClassArg::History => SchedulerClass::History,
            ClassArg::Memoryless => SchedulerClass::Memoryless,
        }
    }

    fn format(&self) -> OutputFormat {
        match self.format {
            FormatArg::Json => OutputFormat::Json,
            FormatArg::Csv => OutputFormat::Csv,
        }
    }

    fn master_seed(&self) -> u64 {
        if self.random_seed {
            // OS entropy via the hasher of a fresh RandomState.
            use std::hash::{BuildHasher, Hasher};
            std::collections::hash_map::RandomState::new().build_hasher().finish()
        } else {
            self.seed
        }
    }
}

fn base_config(common: &CommonArgs, stat: &StatArgs, mode: Mode) -> RunConfig {
    RunConfig {
        mode,
        model: None,
        property: None,
        direction: common.direction(),
        class: common.class(),
        epsilon: stat.epsilon,
        delta: stat.delta,
        alpha: stat.alpha,
        beta: stat.beta,
        theta: None,
        budget: None,
        schedulers: None,
        oracle_policy: None,
        population: None,
        master_seed: common.master_seed(),
        workers: common.workers,
        format: common.format(),
    }
}

fn build_config(cli: Cli) -> anyhow::Result<RunConfig> {
    Ok(match cli.command {
        Cmd::Estimate(a) => {
            let mode = if a.budget.is_some() { Mode::SmartEstimate } else { Mode::SimpleEstimate };
            let mut c = base_config(&a.common, &a.stat, mode);
            c.model = Some(a.model);
            c.property = Some(a.prop);
            c.budget = a.budget;
            c.schedulers = a.schedulers;
            if c.budget.is_none() && c.schedulers.is_none() {
                anyhow::bail!("estimate requires --budget (smart) or --schedulers (simple)");
            }
            c
        }
        Cmd::Hypothesis(a) => {
            let mode =
                if a.budget.is_some() { Mode::SmartHypothesis } else { Mode::SimpleHypothesis };
            let mut c = base_config(&a.common, &a.stat, mode);
            c.model = Some(a.model);
            c.property = Some(a.prop);
            c.theta = Some(a.theta);
            c.budget = a.budget;
            c.schedulers = a.schedulers;
            if c.budget.is_none() && c.schedulers.is_none() {
                anyhow::bail!("hypothesis requires --budget (smart) or --schedulers (simple)");
            }
            c
        }
        Cmd::Oracle(a) => {
            let stat = StatArgs { epsilon: 0.01, delta: 0.01, alpha: 0.01, beta: 0.01 };
            let mut c = base_config(&a.common, &stat, Mode::Oracle);
            c.model = Some(a.model);
            c.property = Some(a.prop);
            c.oracle_policy = Some(match (a.sigma, a.uniform) {
                (Some(sigma), _) => OraclePolicy::Scheduler { sigma },
                (None, true) => OraclePolicy::Uniform,
                (None, false) => OraclePolicy::Optimal,
            });
            c
        }
        Cmd::Synthetic(a) => {
            let mut c = base_config(&a.common, &a.stat, Mode::Synthetic);
            let density = density_from_parts(&a.density, a.p_max, a.rate, a.probs.as_deref())
                .map_err(|e| anyhow::anyhow!(e))?;
            c.population = Some(SyntheticPopulation::new(density, a.mass)?);
            c.budget = Some(a.budget);
            c
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out_path = match &cli.command {
        Cmd::Estimate(a) => a.common.out.clone(),
        Cmd::Hypothesis(a) => a.common.out.clone(),
        Cmd::Oracle(a) => a.common.out.clone(),
        Cmd::Synthetic(a) => a.common.out.clone(),
    };
    let config = match build_config(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(3);
        }
    };
    match run(&config) {
        Ok(record) => {
            let text = match emit(&record, config.format) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    return ExitCode::from(3);
                }
            };
            if let Some(path) = out_path {
                if let Err(e) = std::fs::write(&path, &text) {
                    eprintln!("error: writing {}: {e}", path.display());
                    return ExitCode::from(3);
                }
            } else {
                println!("{text}");
            }
            ExitCode::from(record.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
