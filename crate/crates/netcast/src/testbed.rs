//! Desk-scale synthetic stand-in for multi-target attack experiments.
//!
//! Each synthetic target model is vulnerable inside a few ball-shaped regions
//! of attack space. Each generator is an affine map from intent features to
//! an attack vector, trained by gradient descent on a softplus distance loss
//! against its paired model's regions. Intent clusters sit at per-model
//! offsets from the attack regions, so a single affine map can serve one
//! model's clusters exactly but cannot cover every model's at once; that
//! capacity pressure is what makes specialization pay off.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{self, MetricsReport, OutcomeTable, SelectionPolicy};
use crate::scheduler::{run_joint_training, Learner, SchedulerError, Strategy, TrainingOptions, TrainingTrace};

/// Radius of every vulnerable region.
pub const DEFAULT_RADIUS: f64 = 1.0;
/// Minimum pairwise distance between sampled centers, in radii.
const CENTER_SEPARATION: f64 = 8.0;
/// Per-coordinate standard deviation of intent noise, in radii.
const INTENT_NOISE: f64 = 0.10;
/// Half-width of the initial sampling box, in radii; grown on packing failure.
const BOX_HALF_WIDTH: f64 = 4.0;

#[derive(Debug, Error)]
pub enum TestbedError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
}

/// Deterministic named substream of a base seed. All randomness in an
/// experiment flows from one seed through these labeled streams.
pub fn substream(seed: u64, label: &str) -> ChaCha8Rng {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    for (i, b) in label.bytes().enumerate() {
        bytes[8 + (i % 24)] ^= b;
    }
    ChaCha8Rng::from_seed(bytes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestbedConfig {
    /// Number of target models (and generators), M.
    pub models: usize,
    /// Feature/attack space dimension.
    pub dim: usize,
    pub clusters_per_model: usize,
    pub train_intents: usize,
    pub test_intents: usize,
    /// Probability that an intent cluster is shared with another model,
    /// making its intents multi-model-vulnerable.
    pub overlap: f64,
    /// Per-model loss scale; heterogeneous by default.
    pub hardness: Vec<f64>,
    pub learning_rate: f64,
    pub warm_steps: usize,
    pub seed: u64,
}

impl Default for TestbedConfig {
    fn default() -> Self {
        Self {
            models: 4,
            dim: 8,
            clusters_per_model: 3,
            train_intents: 240,
            test_intents: 120,
            overlap: 0.15,
            hardness: Self::default_hardness(4),
            learning_rate: 0.05,
            warm_steps: 500,
            seed: 0,
        }
    }
}

impl TestbedConfig {
    /// Evenly spaced hardness values on [0.5, 2.0], one per model.
    pub fn default_hardness(models: usize) -> Vec<f64> {
        if models == 1 {
            return vec![1.0];
        }
        (0..models)
            .map(|m| 0.5 + 1.5 * m as f64 / (models - 1) as f64)
            .collect()
    }

    pub fn validate(&self) -> Result<(), TestbedError> {
        let err = |msg: String| Err(TestbedError::Config(msg));
        if self.models == 0 {
            return err("models must be >= 1".into());
        }
        if self.dim < 2 {
            return err(format!("dim must be >= 2, got {}", self.dim));
        }
        if self.clusters_per_model == 0 {
            return err("clusters_per_model must be >= 1".into());
        }
        if self.train_intents == 0 || self.test_intents == 0 {
            return err("train_intents and test_intents must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return err(format!("overlap must lie in [0, 1), got {}", self.overlap));
        }
        if self.hardness.len() != self.models {
            return err(format!(
                "hardness has {} entries for {} models",
                self.hardness.len(),
                self.models
            ));
        }
        if self.hardness.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
            return err("hardness entries must be positive and finite".into());
        }
        if !(self.learning_rate > 0.0) {
            return err(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        Ok(())
    }
}

/// A synthetic harmful intent: a feature vector plus the index of the model
/// whose vulnerable region it was sampled for (hidden from strategies).
#[derive(Debug, Clone, PartialEq)]
pub struct Intent {
    pub features: Vec<f64>,
    pub cluster_label: usize,
}

/// A synthetic target model: vulnerable inside `radius` of any of its
/// `centers`; `hardness` scales its loss.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetModelSpec {
    pub centers: Vec<Vec<f64>>,
    pub radius: f64,
    pub hardness: f64,
    pub overlap: f64,
}

/// A generated problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub targets: Vec<TargetModelSpec>,
    pub train: Vec<Intent>,
    pub test: Vec<Intent>,
    /// Intent-space cluster prototypes, per model per cluster. Kept so tests
    /// can build oracle generators; strategies never see them.
    pub prototypes: Vec<Vec<Vec<f64>>>,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Samples `count` points in a box, pairwise at least `min_dist` apart,
/// growing the box if packing fails.
fn sample_separated_points<R: Rng + ?Sized>(
    count: usize,
    dim: usize,
    min_dist: f64,
    mut half_width: f64,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let min_sq = min_dist * min_dist;
    loop {
        let mut points: Vec<Vec<f64>> = Vec::with_capacity(count);
        let mut attempts = 0usize;
        while points.len() < count && attempts < 200 * count.max(1) {
            attempts += 1;
            let candidate: Vec<f64> = (0..dim)
                .map(|_| rng.random_range(-half_width..half_width))
                .collect();
            if points.iter().all(|p| squared_distance(p, &candidate) >= min_sq) {
                points.push(candidate);
            }
        }
        if points.len() == count {
            return points;
        }
        half_width *= 1.5;
    }
}

/// Builds targets and intents deterministically from the config seed.
///
/// Attack centers are pairwise separated by at least four radii. Intent
/// prototypes are the centers offset by one shift per model, re-drawn until
/// prototypes of different models are separated as well; the overlap pass
/// then lets a fraction of clusters share another model's prototype exactly,
/// so those intents can be cracked through more than one model.
pub fn generate_instance(config: &TestbedConfig) -> Result<Instance, TestbedError> {
    config.validate()?;
    let mut rng = substream(config.seed, "instance");
    let m = config.models;
    let k = config.clusters_per_model;
    let dim = config.dim;
    let radius = DEFAULT_RADIUS;
    let separation = CENTER_SEPARATION * radius;
    let box_half = BOX_HALF_WIDTH * radius;

    let flat_centers = sample_separated_points(m * k, dim, separation, box_half, &mut rng);
    let centers: Vec<Vec<Vec<f64>>> = flat_centers.chunks(k).map(|c| c.to_vec()).collect();

    // Per-model shifts, re-drawn until cross-model prototypes keep the same
    // separation (within-model separation is inherited from the centers).
    let mut prototypes: Vec<Vec<Vec<f64>>> = Vec::with_capacity(m);
    let min_sq = separation * separation;
    for model in 0..m {
        let mut shift_box = box_half;
        let mut attempts = 0usize;
        loop {
            attempts += 1;
            let shift: Vec<f64> = (0..dim)
                .map(|_| rng.random_range(-shift_box..shift_box))
                .collect();
            let candidate: Vec<Vec<f64>> = centers[model]
                .iter()
                .map(|c| c.iter().zip(&shift).map(|(a, b)| a + b).collect())
                .collect();
            let clear = candidate.iter().all(|p| {
                prototypes
                    .iter()
                    .flatten()
                    .all(|q| squared_distance(p, q) >= min_sq)
            });
            if clear {
                prototypes.push(candidate);
                break;
            }
            if attempts % 200 == 0 {
                shift_box *= 1.5;
            }
        }
    }

    // Overlap pass: share a fraction of prototypes across models.
    if config.overlap > 0.0 && m > 1 {
        for model in 0..m {
            for cluster in 0..k {
                if rng.random::<f64>() < config.overlap {
                    let mut other = rng.random_range(0..m - 1);
                    if other >= model {
                        other += 1;
                    }
                    let donor_cluster = rng.random_range(0..k);
                    prototypes[model][cluster] = prototypes[other][donor_cluster].clone();
                }
            }
        }
    }

    let sample_intents = |count: usize, rng: &mut ChaCha8Rng| -> Vec<Intent> {
        (0..count)
            .map(|i| {
                let cell = i % (m * k);
                let model = cell / k;
                let cluster = cell % k;
                let features = prototypes[model][cluster]
                    .iter()
                    .map(|&p| {
                        let noise: f64 = StandardNormal.sample(rng);
                        p + INTENT_NOISE * radius * noise
                    })
                    .collect();
                Intent {
                    features,
                    cluster_label: model,
                }
            })
            .collect()
    };
    let train = sample_intents(config.train_intents, &mut rng);
    let test = sample_intents(config.test_intents, &mut rng);

    let targets = centers
        .into_iter()
        .zip(&config.hardness)
        .map(|(centers, &hardness)| TargetModelSpec {
            centers,
            radius,
            hardness,
            overlap: config.overlap,
        })
        .collect();

    Ok(Instance {
        targets,
        train,
        test,
        prototypes,
    })
}

/// An affine attack map: `attack = weight * features + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticGenerator {
    /// Row-major `dim x dim` matrix.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub learning_rate: f64,
}

impl AnalyticGenerator {
    /// Identity map with zero bias.
    pub fn identity(dim: usize, learning_rate: f64) -> Self {
        let mut weight = vec![0.0; dim * dim];
        for i in 0..dim {
            weight[i * dim + i] = 1.0;
        }
        Self {
            weight,
            bias: vec![0.0; dim],
            learning_rate,
        }
    }

    pub fn dim(&self) -> usize {
        self.bias.len()
    }

    /// The attack vector for an intent.
    pub fn map(&self, features: &[f64]) -> Vec<f64> {
        let dim = self.dim();
        let mut out = self.bias.clone();
        for i in 0..dim {
            let row = &self.weight[i * dim..(i + 1) * dim];
            out[i] += row.iter().zip(features).map(|(w, x)| w * x).sum::<f64>();
        }
        out
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `hardness * softplus(min_c ||attack - c|| - radius)`: near zero iff the
/// attack vector lands inside a vulnerable region, growing linearly with
/// distance outside.
pub fn attack_loss(
    generator: &AnalyticGenerator,
    target: &TargetModelSpec,
    intent: &Intent,
) -> f64 {
    let attack = generator.map(&intent.features);
    let min_dist = target
        .centers
        .iter()
        .map(|c| squared_distance(&attack, c).sqrt())
        .fold(f64::INFINITY, f64::min);
    target.hardness * softplus(min_dist - target.radius)
}

/// Loss plus its gradient with respect to the generator's weight and bias.
///
/// At an exact center (distance zero) the distance term has no unique
/// gradient; the zero subgradient is used.
pub fn attack_loss_and_grad(
    generator: &AnalyticGenerator,
    target: &TargetModelSpec,
    intent: &Intent,
) -> (f64, Vec<f64>, Vec<f64>) {
    let dim = generator.dim();
    let attack = generator.map(&intent.features);
    let (mut min_dist, mut nearest) = (f64::INFINITY, 0);
    for (i, c) in target.centers.iter().enumerate() {
        let d = squared_distance(&attack, c).sqrt();
        if d < min_dist {
            min_dist = d;
            nearest = i;
        }
    }
    let z = min_dist - target.radius;
    let loss = target.hardness * softplus(z);
    let scale = target.hardness * sigmoid(z);
    let mut grad_weight = vec![0.0; dim * dim];
    let mut grad_bias = vec![0.0; dim];
    if min_dist > 0.0 {
        let center = &target.centers[nearest];
        for i in 0..dim {
            let dy = scale * (attack[i] - center[i]) / min_dist;
            grad_bias[i] = dy;
            for j in 0..dim {
                grad_weight[i * dim + j] = dy * intent.features[j];
            }
        }
    }
    (loss, grad_weight, grad_bias)
}

/// `exp(-loss / hardness)`, in `(0, 1]`. With the softplus loss this exceeds
/// 0.5 exactly when the attack vector lies strictly inside the soft radius.
pub fn rating_from_loss(loss: f64, hardness: f64) -> f64 {
    (-loss / hardness).exp()
}

pub fn judge_rating(
    generator: &AnalyticGenerator,
    target: &TargetModelSpec,
    intent: &Intent,
) -> f64 {
    rating_from_loss(attack_loss(generator, target, intent), target.hardness)
}

/// A generator paired with its target model; the unit that joint training
/// schedules updates over.
#[derive(Debug, Clone, PartialEq)]
pub struct TestbedLearner {
    pub generator: AnalyticGenerator,
    pub target: TargetModelSpec,
}

impl Learner for TestbedLearner {
    type Task = Intent;
    type State = AnalyticGenerator;

    fn loss(&self, task: &Intent) -> f64 {
        attack_loss(&self.generator, &self.target, task)
    }

    fn judge_rating(&self, task: &Intent) -> f64 {
        judge_rating(&self.generator, &self.target, task)
    }

    fn apply_update(&mut self, task: &Intent, weight: f64) {
        if weight == 0.0 {
            return;
        }
        let (_, grad_weight, grad_bias) = attack_loss_and_grad(&self.generator, &self.target, task);
        let step = self.generator.learning_rate * weight;
        for (w, g) in self.generator.weight.iter_mut().zip(&grad_weight) {
            *w -= step * g;
        }
        for (b, g) in self.generator.bias.iter_mut().zip(&grad_bias) {
            *b -= step * g;
        }
    }

    fn state(&self) -> AnalyticGenerator {
        self.generator.clone()
    }

    fn restore(&mut self, state: &AnalyticGenerator) {
        self.generator = state.clone();
    }
}

/// One identity-initialized learner per target model.
pub fn make_learners(instance: &Instance, config: &TestbedConfig) -> Vec<TestbedLearner> {
    instance
        .targets
        .iter()
        .map(|target| TestbedLearner {
            generator: AnalyticGenerator::identity(config.dim, config.learning_rate),
            target: target.clone(),
        })
        .collect()
}

/// Independent warm-start: every learner updated with weight 1 on every
/// sampled task for `warm_steps` steps.
pub fn warm_start(
    learners: &mut [TestbedLearner],
    train: &[Intent],
    config: &TestbedConfig,
) -> Result<TrainingTrace, TestbedError> {
    let mut task_rng = substream(config.seed, "warm");
    let mut schedule_rng = substream(config.seed, "warm-schedule");
    let trace = run_joint_training(
        learners,
        train,
        &Strategy::Baseline,
        &TrainingOptions::new(config.warm_steps),
        &mut task_rng,
        &mut schedule_rng,
    )?;
    Ok(trace)
}

/// Judge ratings and toxicity for every (intent, learner) pair. Toxicity is
/// the squared rating: partial jailbreaks yield disproportionately less
/// harmful content.
pub fn evaluate_outcomes(
    learners: &[TestbedLearner],
    intents: &[Intent],
    run_id: u32,
) -> Result<OutcomeTable, TestbedError> {
    let intent_ids = (0..intents.len()).map(|n| format!("intent_{n:04}")).collect();
    let model_ids = (0..learners.len()).map(|m| format!("model_{m}")).collect();
    let mut ratings = Vec::with_capacity(intents.len());
    let mut toxicity = Vec::with_capacity(intents.len());
    for intent in intents {
        let row: Vec<f64> = learners.iter().map(|l| l.judge_rating(intent)).collect();
        toxicity.push(row.iter().map(|r| r * r).collect());
        ratings.push(row);
    }
    Ok(OutcomeTable::new(
        intent_ids, model_ids, ratings, toxicity, run_id,
    )?)
}

/// Fraction of test intents whose best-rating generator is the one matched to
/// the intent's ground-truth owner, under the confusion-matrix matching that
/// maximizes agreement (exact over all generator-to-owner bijections).
pub fn specialization_purity(learners: &[TestbedLearner], test_intents: &[Intent]) -> f64 {
    let m = learners.len();
    if m == 0 || test_intents.is_empty() {
        return 0.0;
    }
    let mut confusion = vec![vec![0usize; m]; m];
    for intent in test_intents {
        let ratings: Vec<f64> = learners.iter().map(|l| l.judge_rating(intent)).collect();
        let mut best = 0;
        for (i, r) in ratings.iter().enumerate().skip(1) {
            if *r > ratings[best] {
                best = i;
            }
        }
        confusion[best][intent.cluster_label] += 1;
    }
    let matched = best_assignment_score(&confusion);
    matched as f64 / test_intents.len() as f64
}

/// Maximum total agreement over all generator-to-owner bijections.
/// Exhaustive over permutations; intended for desk-scale M.
fn best_assignment_score(confusion: &[Vec<usize>]) -> usize {
    let m = confusion.len();
    let mut assigned = vec![false; m];
    fn recurse(confusion: &[Vec<usize>], row: usize, assigned: &mut [bool]) -> usize {
        if row == confusion.len() {
            return 0;
        }
        let mut best = 0;
        for owner in 0..assigned.len() {
            if !assigned[owner] {
                assigned[owner] = true;
                let score = confusion[row][owner] + recurse(confusion, row + 1, assigned);
                assigned[owner] = false;
                best = best.max(score);
            }
        }
        best
    }
    recurse(confusion, 0, &mut assigned)
}

/// Everything an experiment cell produces.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: MetricsReport,
    pub trace: TrainingTrace,
    pub table: OutcomeTable,
    pub purity: f64,
}

/// Full experiment: generate the instance, warm-start every generator
/// independently, jointly train under `strategy`, then evaluate on the test
/// intents and compute the group metrics.
pub fn run_experiment(
    config: &TestbedConfig,
    strategy: &Strategy,
    options: &TrainingOptions,
    run_id: u32,
) -> Result<ExperimentOutcome, TestbedError> {
    let instance = generate_instance(config)?;
    let mut learners = make_learners(&instance, config);
    warm_start(&mut learners, &instance.train, config)?;
    let mut task_rng = substream(config.seed, "train");
    let mut schedule_rng = substream(config.seed, "schedule");
    let trace = run_joint_training(
        &mut learners,
        &instance.train,
        strategy,
        options,
        &mut task_rng,
        &mut schedule_rng,
    )?;
    let table = evaluate_outcomes(&learners, &instance.test, run_id)?;
    let report = metrics::compute_report(
        &table,
        metrics::DEFAULT_SUCCESS_THRESHOLD,
        SelectionPolicy::JudgeRating,
    );
    let purity = specialization_purity(&learners, &instance.test);
    Ok(ExperimentOutcome {
        report,
        trace,
        table,
        purity,
    })
}
