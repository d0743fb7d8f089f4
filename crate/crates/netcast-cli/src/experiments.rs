//! Shared runner for the simulate and ablate commands: executes the
//! (strategy x seed) matrix, then writes logs, traces, reports, and CSV
//! summaries in a fixed order so reruns are byte-identical.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use rayon::prelude::*;

use netcast::metrics::{aggregate_runs, fmt_sig6, write_log, MetricsReport};
use netcast::scheduler::{TrainingOptions, TrainingTrace};
use netcast::testbed::{run_experiment, ExperimentOutcome};

use crate::config::{build_strategy, ExperimentConfig, OutputFormat, StrategyName};

pub struct CellResult {
    pub strategy: StrategyName,
    pub seed: u64,
    pub outcome: ExperimentOutcome,
}

/// Runs every (strategy, seed) cell. Cells are independent and execute in
/// parallel; results come back in matrix order regardless of thread timing.
pub fn run_matrix(config: &ExperimentConfig) -> Result<Vec<CellResult>> {
    let cells: Vec<(StrategyName, u64)> = config
        .strategies
        .iter()
        .flat_map(|&s| config.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let options = TrainingOptions {
        total_steps: config.scheduler.total_steps,
        normalize_losses: config.scheduler.normalize_losses,
    };
    cells
        .into_par_iter()
        .map(|(name, seed)| {
            let strategy = build_strategy(name, &config.schedule, config.testbed.models);
            let testbed = config.testbed.build(seed);
            let run_id = config
                .seeds
                .iter()
                .position(|&s| s == seed)
                .expect("seed from the config list") as u32;
            let outcome = run_experiment(&testbed, &strategy, &options, run_id)
                .with_context(|| format!("strategy {} seed {seed}", name.as_str()))?;
            Ok(CellResult {
                strategy: name,
                seed,
                outcome,
            })
        })
        .collect()
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// Mean report per strategy, averaging run-level metrics over seeds.
pub fn aggregate_by_strategy(
    config: &ExperimentConfig,
    cells: &[CellResult],
) -> Result<Vec<(StrategyName, MetricsReport)>> {
    config
        .strategies
        .iter()
        .map(|&name| {
            let reports: Vec<MetricsReport> = cells
                .iter()
                .filter(|c| c.strategy == name)
                .map(|c| c.outcome.report.clone())
                .collect();
            Ok((name, aggregate_runs(&reports)?))
        })
        .collect()
}

pub fn write_summary_csv(path: &Path, cells: &[CellResult]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["strategy", "seed", "wasr", "w_toxicity"])?;
    for cell in cells {
        writer.write_record([
            cell.strategy.as_str(),
            &cell.seed.to_string(),
            &fmt_sig6(cell.outcome.report.wasr),
            &fmt_sig6(cell.outcome.report.w_toxicity),
        ])?;
    }
    write_file(path, &writer.into_inner()?)
}

/// Full simulate output tree: per-strategy logs and aggregated reports,
/// per-run traces, and the per-cell summary.
pub fn write_simulation_outputs(config: &ExperimentConfig, cells: &[CellResult]) -> Result<()> {
    let out = &config.output;
    ensure_dir(&out.dir)?;

    if out.wants(OutputFormat::Jsonl) {
        let logs_dir = out.dir.join("logs");
        let traces_dir = out.dir.join("traces");
        ensure_dir(&logs_dir)?;
        ensure_dir(&traces_dir)?;
        for &name in &config.strategies {
            let mut log_bytes = Vec::new();
            for cell in cells.iter().filter(|c| c.strategy == name) {
                write_log(&mut log_bytes, &cell.outcome.table)?;
                let mut trace_bytes = Vec::new();
                cell.outcome.trace.write_jsonl(&mut trace_bytes)?;
                write_file(
                    &traces_dir.join(format!("{}_run{}.jsonl", name.as_str(), cell.seed)),
                    &trace_bytes,
                )?;
            }
            write_file(&logs_dir.join(format!("{}.jsonl", name.as_str())), &log_bytes)?;
        }
    }

    if out.wants(OutputFormat::Json) || out.wants(OutputFormat::Csv) {
        let reports_dir = out.dir.join("reports");
        ensure_dir(&reports_dir)?;
        for (name, report) in aggregate_by_strategy(config, cells)? {
            if out.wants(OutputFormat::Json) {
                let mut json = serde_json::to_vec_pretty(&report)?;
                json.push(b'\n');
                write_file(&reports_dir.join(format!("{}.json", name.as_str())), &json)?;
            }
            if out.wants(OutputFormat::Csv) {
                write_file(
                    &reports_dir.join(format!("{}.csv", name.as_str())),
                    report.to_csv().as_bytes(),
                )?;
            }
        }
    }

    write_summary_csv(&out.dir.join("summary.csv"), cells)
}

/// Ablation table: one row per strategy with mean and sample standard
/// deviation of WASR and W-toxicity across seeds, plus the per-cell summary.
pub fn write_ablation_outputs(config: &ExperimentConfig, cells: &[CellResult]) -> Result<()> {
    let out = &config.output;
    ensure_dir(&out.dir)?;

    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record([
        "strategy",
        "runs",
        "wasr_mean",
        "wasr_sd",
        "w_toxicity_mean",
        "w_toxicity_sd",
    ])?;
    for &name in &config.strategies {
        let wasr: Vec<f64> = cells
            .iter()
            .filter(|c| c.strategy == name)
            .map(|c| c.outcome.report.wasr)
            .collect();
        let wtox: Vec<f64> = cells
            .iter()
            .filter(|c| c.strategy == name)
            .map(|c| c.outcome.report.w_toxicity)
            .collect();
        writer.write_record([
            name.as_str(),
            &wasr.len().to_string(),
            &fmt_sig6(mean(&wasr)),
            &fmt_sig6(sample_sd(&wasr)),
            &fmt_sig6(mean(&wtox)),
            &fmt_sig6(sample_sd(&wtox)),
        ])?;
    }
    write_file(&out.dir.join("ablation.csv"), &writer.into_inner()?)?;
    write_summary_csv(&out.dir.join("summary.csv"), cells)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// Reads back a trace written by `write_simulation_outputs`.
pub fn read_trace(path: &Path) -> Result<TrainingTrace> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(TrainingTrace::read_jsonl(std::io::BufReader::new(file))?)
}

/// Writes a report pair (JSON to stdout is the caller's job).
pub fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let stdout = std::io::stdout();
    let mut handle = stdout.lock();
    serde_json::to_writer_pretty(&mut handle, value)?;
    handle.write_all(b"\n")?;
    Ok(())
}
