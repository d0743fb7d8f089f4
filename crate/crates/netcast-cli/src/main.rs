//! Batch CLI: one-shot temperature solves, schedule dumps, seeded
//! experiment and ablation runs from config files, and metric reports over
//! attack logs.
//!
//! Exit codes: 0 success, 2 input or domain error, 3 numerical
//! non-convergence.

mod config;
mod experiments;

use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use netcast::annealing::{
    schedule_threshold, weights_for_target, AnnealError, LossVector, TemperatureOutcome,
    UniformReason,
};
use netcast::metrics::{
    aggregate_runs, compute_report, fmt_sig6, ingest_log, SelectionPolicy,
};
use netcast::testbed::substream;

use config::{ExponentFormName, ScheduleConfig, ScheduleKind};

const EXIT_DOMAIN: u8 = 2;
const EXIT_NO_CONVERGENCE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "netcast",
    version,
    about = "Entropy-annealed update scheduling experiments and wide-net metrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the temperature that makes the update weights meet an
    /// entropy target, and print the weights as JSON.
    Solve(SolveArgs),
    /// Print a CSV of (t, threshold) for an entropy schedule.
    Schedule(ScheduleArgs),
    /// Run the configured strategies over all seeds and write logs, traces,
    /// reports, and a per-cell summary CSV.
    Simulate(ConfigArgs),
    /// Run the full strategy matrix and write a mean/sd comparison table.
    Ablate(ConfigArgs),
    /// Compute ASR/WASR/toxicity metrics over a JSONL attack log.
    Metrics(MetricsArgs),
    /// Validate a config file against the schema and exit.
    Validate(ConfigArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Comma-separated loss values, M >= 2.
    #[arg(long, value_delimiter = ',', required = true)]
    losses: Vec<f64>,
    /// Entropy target in nats, in (0, ln M].
    #[arg(long, conflicts_with = "schedule")]
    target_entropy: Option<f64>,
    /// Derive the target from a schedule instead.
    #[arg(long, requires = "step", requires = "total_steps")]
    schedule: Option<ScheduleKind>,
    #[arg(long = "t")]
    step: Option<usize>,
    #[arg(long = "T")]
    total_steps: Option<usize>,
    #[arg(long, default_value_t = 0.99)]
    gamma: f64,
    #[arg(long)]
    fixed_value: Option<f64>,
    #[arg(long)]
    epsilon_floor: Option<f64>,
    #[arg(long, value_enum, default_value = "fraction_of_run")]
    exponent_form: ExponentFormName,
    /// Seed for the random schedule's draw stream.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ScheduleArgs {
    #[arg(long, value_enum)]
    kind: ScheduleKind,
    #[arg(long = "M")]
    models: usize,
    #[arg(long = "T")]
    total_steps: usize,
    #[arg(long, default_value_t = 0.99)]
    gamma: f64,
    #[arg(long)]
    fixed_value: Option<f64>,
    #[arg(long)]
    epsilon_floor: Option<f64>,
    #[arg(long, value_enum, default_value = "fraction_of_run")]
    exponent_form: ExponentFormName,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    /// JSONL attack log path.
    #[arg(long)]
    log: PathBuf,
    #[arg(long, default_value_t = netcast::metrics::DEFAULT_SUCCESS_THRESHOLD)]
    threshold: f64,
    /// Which response is selected per intent: by judge rating or by
    /// harm likelihood (toxicity).
    #[arg(long, value_enum, default_value = "rating")]
    selection: SelectionName,
    /// Fill missing (intent, model) cells with zeros instead of erroring.
    #[arg(long)]
    allow_missing: bool,
    /// Also write report.json and report.csv under this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum SelectionName {
    Rating,
    Harm,
}

impl From<SelectionName> for SelectionPolicy {
    fn from(name: SelectionName) -> Self {
        match name {
            SelectionName::Rating => SelectionPolicy::JudgeRating,
            SelectionName::Harm => SelectionPolicy::HarmLikelihood,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Schedule(args) => cmd_schedule(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Ablate(args) => cmd_ablate(args),
        Command::Metrics(args) => cmd_metrics(args),
        Command::Validate(args) => cmd_validate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::from(exit_code_for(&error))
        }
    }
}

/// Numerical non-convergence gets its own exit code; everything else that
/// reaches main is an input or domain error.
fn exit_code_for(error: &anyhow::Error) -> u8 {
    for cause in error.chain() {
        if let Some(AnnealError::NoConvergence { .. }) = cause.downcast_ref::<AnnealError>() {
            return EXIT_NO_CONVERGENCE;
        }
        if let Some(netcast::scheduler::SchedulerError::Anneal(AnnealError::NoConvergence {
            ..
        })) = cause.downcast_ref::<netcast::scheduler::SchedulerError>()
        {
            return EXIT_NO_CONVERGENCE;
        }
    }
    EXIT_DOMAIN
}

#[derive(Serialize)]
struct SolveOutput {
    beta: Option<f64>,
    weights: Vec<f64>,
    residual: Option<f64>,
    iterations: usize,
    used_bisection_fallback: bool,
    /// Why the solve was skipped, when it was ("identical_losses" or
    /// "max_entropy_target").
    sentinel: Option<UniformReason>,
    target_entropy: f64,
    entropy: f64,
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let losses = LossVector::new(args.losses.clone())?;
    let target = match (args.target_entropy, args.schedule) {
        (Some(target), None) => target,
        (None, Some(kind)) => {
            let schedule = ScheduleConfig {
                kind,
                gamma: args.gamma,
                fixed_value: args.fixed_value,
                exponent_form: args.exponent_form,
                epsilon_floor: args.epsilon_floor,
            }
            .build(losses.len());
            let mut rng = substream(args.seed, "schedule");
            schedule_threshold(
                &schedule,
                args.step.expect("clap requires --t"),
                args.total_steps.expect("clap requires --T"),
                losses.len(),
                &mut rng,
            )?
        }
        (None, None) => bail!("one of --target-entropy or --schedule is required"),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    let solved = weights_for_target(&losses, target)?;
    let entropy = netcast::annealing::entropy(&solved.weights);
    let output = match solved.temperature {
        TemperatureOutcome::Solved(solution) => SolveOutput {
            beta: Some(solution.beta),
            weights: solved.weights.as_slice().to_vec(),
            residual: Some(solution.residual),
            iterations: solution.iterations,
            used_bisection_fallback: solution.used_bisection_fallback,
            sentinel: None,
            target_entropy: target,
            entropy,
        },
        TemperatureOutcome::UniformSentinel(reason) => SolveOutput {
            beta: None,
            weights: solved.weights.as_slice().to_vec(),
            residual: None,
            iterations: 0,
            used_bisection_fallback: false,
            sentinel: Some(reason),
            target_entropy: target,
            entropy,
        },
    };
    experiments::print_json(&output)
}

fn cmd_schedule(args: ScheduleArgs) -> Result<()> {
    if args.models < 2 {
        bail!("--M must be at least 2, got {}", args.models);
    }
    let schedule = ScheduleConfig {
        kind: args.kind,
        gamma: args.gamma,
        fixed_value: args.fixed_value,
        exponent_form: args.exponent_form,
        epsilon_floor: args.epsilon_floor,
    }
    .build(args.models);
    let mut rng = substream(args.seed, "schedule");
    let mut writer = csv::Writer::from_writer(std::io::stdout().lock());
    writer.write_record(["t", "threshold"])?;
    for t in 0..args.total_steps {
        let value = schedule_threshold(&schedule, t, args.total_steps, args.models, &mut rng)?;
        writer.write_record([t.to_string(), fmt_sig6(value)])?;
    }
    writer.flush()?;
    Ok(())
}

fn cmd_simulate(args: ConfigArgs) -> Result<()> {
    let config = config::load_config(&args.config)?;
    let cells = experiments::run_matrix(&config)?;
    experiments::write_simulation_outputs(&config, &cells)?;
    println!(
        "wrote {} cells to {}",
        cells.len(),
        config.output.dir.display()
    );
    Ok(())
}

fn cmd_ablate(args: ConfigArgs) -> Result<()> {
    let config = config::load_config(&args.config)?;
    let cells = experiments::run_matrix(&config)?;
    experiments::write_ablation_outputs(&config, &cells)?;
    println!(
        "wrote ablation table for {} strategies x {} seeds to {}",
        config.strategies.len(),
        config.seeds.len(),
        config.output.dir.display()
    );
    Ok(())
}

fn cmd_metrics(args: MetricsArgs) -> Result<()> {
    if !args.threshold.is_finite() {
        bail!("--threshold must be finite");
    }
    let file = std::fs::File::open(&args.log)
        .with_context(|| format!("opening {}", args.log.display()))?;
    let tables = ingest_log(BufReader::new(file), args.allow_missing)?;
    if tables.is_empty() {
        bail!("log {} contains no records", args.log.display());
    }
    let policy: SelectionPolicy = args.selection.into();
    let reports: Vec<_> = tables
        .iter()
        .map(|t| compute_report(t, args.threshold, policy))
        .collect();
    let aggregated = aggregate_runs(&reports)?;
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut json = serde_json::to_vec_pretty(&aggregated)?;
        json.push(b'\n');
        std::fs::write(dir.join("report.json"), &json)?;
        std::fs::write(dir.join("report.csv"), aggregated.to_csv())?;
    }
    experiments::print_json(&aggregated)
}

fn cmd_validate(args: ConfigArgs) -> Result<()> {
    let config = config::load_config(&args.config)?;
    println!(
        "config valid: {} strategies, {} seeds, T={}",
        config.strategies.len(),
        config.seeds.len(),
        config.scheduler.total_steps
    );
    Ok(())
}

// Keep the unused-variant lint honest: the name mapping is exercised from
// config files even when no subcommand names it directly.
#[allow(dead_code)]
fn _strategy_name_coverage(name: config::StrategyName) -> &'static str {
    name.as_str()
}
