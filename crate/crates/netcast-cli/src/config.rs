//! Experiment config file: strict schema, defaults, and the mapping from
//! config names to concrete strategies and schedules.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use netcast::annealing::{EntropySchedule, ExponentForm};
use netcast::scheduler::Strategy;
use netcast::testbed::TestbedConfig;

/// Best-performing fixed emphasis for the smallest-loss learner.
const DEFAULT_LAMBDA0: f64 = 0.8;
/// Judge-rating success threshold.
const DEFAULT_SUCCESS_THRESHOLD: f64 = netcast::metrics::DEFAULT_SUCCESS_THRESHOLD;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    pub strategies: Vec<StrategyName>,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub scheduler: SchedulerConfig,
    #[serde(default)]
    pub testbed: TestbedSection,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[clap(rename_all = "snake_case")]
pub enum StrategyName {
    Baseline,
    Naive1,
    Naive2,
    Naive3,
    Variant1,
    Variant2,
    Variant3,
    Variant4,
    Variant5,
    Variant6,
    Variant7,
    Ours,
}

impl StrategyName {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Baseline => "baseline",
            Self::Naive1 => "naive1",
            Self::Naive2 => "naive2",
            Self::Naive3 => "naive3",
            Self::Variant1 => "variant1",
            Self::Variant2 => "variant2",
            Self::Variant3 => "variant3",
            Self::Variant4 => "variant4",
            Self::Variant5 => "variant5",
            Self::Variant6 => "variant6",
            Self::Variant7 => "variant7",
            Self::Ours => "ours",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[clap(rename_all = "snake_case")]
pub enum ScheduleKind {
    Linear,
    Exponential,
    Cosine,
    Fixed,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[clap(rename_all = "snake_case")]
pub enum ExponentFormName {
    /// gamma^(t/T): decays to gamma * ln M over a whole run.
    FractionOfRun,
    /// gamma^t: compounds per step.
    PerStep,
}

impl From<ExponentFormName> for ExponentForm {
    fn from(name: ExponentFormName) -> Self {
        match name {
            ExponentFormName::FractionOfRun => ExponentForm::FractionOfRun,
            ExponentFormName::PerStep => ExponentForm::PerStep,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default = "default_schedule_kind")]
    pub kind: ScheduleKind,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub fixed_value: Option<f64>,
    #[serde(default = "default_exponent_form")]
    pub exponent_form: ExponentFormName,
    #[serde(default)]
    pub epsilon_floor: Option<f64>,
}

fn default_schedule_kind() -> ScheduleKind {
    ScheduleKind::Linear
}

fn default_gamma() -> f64 {
    0.99
}

fn default_exponent_form() -> ExponentFormName {
    ExponentFormName::FractionOfRun
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            kind: default_schedule_kind(),
            gamma: default_gamma(),
            fixed_value: None,
            exponent_form: default_exponent_form(),
            epsilon_floor: None,
        }
    }
}

impl ScheduleConfig {
    /// Schedule for the annealed strategy. `fixed_value` defaults to
    /// `ln(M)/2` when the fixed kind is selected without a value.
    pub fn build(&self, models: usize) -> EntropySchedule {
        match self.kind {
            ScheduleKind::Linear => EntropySchedule::Linear,
            ScheduleKind::Exponential => EntropySchedule::Exponential {
                gamma: self.gamma,
                form: self.exponent_form.into(),
            },
            ScheduleKind::Cosine => EntropySchedule::Cosine,
            ScheduleKind::Fixed => EntropySchedule::Fixed {
                value: self
                    .fixed_value
                    .unwrap_or_else(|| 0.5 * (models as f64).ln()),
            },
            ScheduleKind::Random => EntropySchedule::Random {
                epsilon_floor: self.epsilon_floor,
            },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerConfig {
    #[serde(rename = "T", default = "default_total_steps")]
    pub total_steps: usize,
    #[serde(default)]
    pub normalize_losses: bool,
}

fn default_total_steps() -> usize {
    2000
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            total_steps: default_total_steps(),
            normalize_losses: false,
        }
    }
}

/// Testbed section; `hardness` defaults to the evenly spaced ramp when
/// omitted, and the per-run seed is filled in by the runner.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestbedSection {
    #[serde(default = "default_models")]
    pub models: usize,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_clusters")]
    pub clusters_per_model: usize,
    #[serde(default = "default_train_intents")]
    pub train_intents: usize,
    #[serde(default = "default_test_intents")]
    pub test_intents: usize,
    #[serde(default = "default_overlap")]
    pub overlap: f64,
    #[serde(default)]
    pub hardness: Option<Vec<f64>>,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_warm_steps")]
    pub warm_steps: usize,
}

fn default_models() -> usize {
    4
}
fn default_dim() -> usize {
    8
}
fn default_clusters() -> usize {
    3
}
fn default_train_intents() -> usize {
    240
}
fn default_test_intents() -> usize {
    120
}
fn default_overlap() -> f64 {
    0.15
}
fn default_learning_rate() -> f64 {
    0.05
}
fn default_warm_steps() -> usize {
    500
}

impl Default for TestbedSection {
    fn default() -> Self {
        Self {
            models: default_models(),
            dim: default_dim(),
            clusters_per_model: default_clusters(),
            train_intents: default_train_intents(),
            test_intents: default_test_intents(),
            overlap: default_overlap(),
            hardness: None,
            learning_rate: default_learning_rate(),
            warm_steps: default_warm_steps(),
        }
    }
}

impl TestbedSection {
    pub fn build(&self, seed: u64) -> TestbedConfig {
        TestbedConfig {
            models: self.models,
            dim: self.dim,
            clusters_per_model: self.clusters_per_model,
            train_intents: self.train_intents,
            test_intents: self.test_intents,
            overlap: self.overlap,
            hardness: self
                .hardness
                .clone()
                .unwrap_or_else(|| TestbedConfig::default_hardness(self.models)),
            learning_rate: self.learning_rate,
            warm_steps: self.warm_steps,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Json,
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
}

fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Json, OutputFormat::Csv, OutputFormat::Jsonl]
}

impl OutputConfig {
    pub fn wants(&self, format: OutputFormat) -> bool {
        self.formats.contains(&format)
    }
}

/// Builds the concrete strategy for a config name. Schedule-bearing variants
/// take their parameters from the schedule section; the named variants pin
/// the schedule kind itself.
pub fn build_strategy(
    name: StrategyName,
    schedule: &ScheduleConfig,
    models: usize,
) -> Strategy {
    match name {
        StrategyName::Baseline => Strategy::Baseline,
        StrategyName::Naive1 => Strategy::Naive1,
        StrategyName::Naive2 => Strategy::Naive2,
        StrategyName::Naive3 => Strategy::Naive3 {
            success_threshold: DEFAULT_SUCCESS_THRESHOLD,
        },
        StrategyName::Variant1 => Strategy::VariantI,
        StrategyName::Variant2 => Strategy::VariantII {
            lambda0: DEFAULT_LAMBDA0,
        },
        StrategyName::Variant3 => Strategy::VariantIII,
        StrategyName::Variant4 => Strategy::Ours {
            schedule: EntropySchedule::Random {
                epsilon_floor: schedule.epsilon_floor,
            },
        },
        StrategyName::Variant5 => Strategy::Ours {
            schedule: EntropySchedule::Fixed {
                value: 0.5 * (models as f64).ln(),
            },
        },
        StrategyName::Variant6 => Strategy::Ours {
            schedule: EntropySchedule::Exponential {
                gamma: schedule.gamma,
                form: schedule.exponent_form.into(),
            },
        },
        StrategyName::Variant7 => Strategy::Ours {
            schedule: EntropySchedule::Cosine,
        },
        StrategyName::Ours => Strategy::Ours {
            schedule: schedule.build(models),
        },
    }
}

/// Parses and validates a config file. Schema violations report the exact
/// field path.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let deserializer = &mut serde_json::Deserializer::from_str(&text);
    let config: ExperimentConfig = serde_path_to_error::deserialize(deserializer)
        .map_err(|e| anyhow::anyhow!("config {}: at `{}`: {}", path.display(), e.path(), e.inner()))?;
    validate(&config)?;
    Ok(config)
}

fn validate(config: &ExperimentConfig) -> Result<()> {
    if config.seeds.is_empty() {
        bail!("config: `seeds` must be non-empty");
    }
    if config.strategies.is_empty() {
        bail!("config: `strategies` must be non-empty");
    }
    let mut seen = std::collections::BTreeSet::new();
    for strategy in &config.strategies {
        if !seen.insert(strategy.as_str()) {
            bail!("config: duplicate strategy `{}`", strategy.as_str());
        }
    }
    if !(config.schedule.gamma > 0.0 && config.schedule.gamma < 1.0) {
        bail!("config: `schedule.gamma` must lie in (0, 1)");
    }
    // Instantiate once to surface testbed field errors early.
    config.testbed.build(0).validate().map_err(|e| anyhow::anyhow!("config: {e}"))?;
    Ok(())
}
