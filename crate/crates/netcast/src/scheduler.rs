//! Joint-training driver and the catalog of update strategies.
//!
//! The driver runs `T` steps; each step samples one task, reads every
//! learner's loss on it (pre-update, so the order of updates cannot matter),
//! computes per-learner update weights according to the strategy in force,
//! and applies one weighted update to every learner. A weight of zero must
//! leave a learner's parameters bit-identical.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annealing::{
    self, AnnealError, EntropySchedule, LossVector, ScheduledWeights, TemperatureOutcome,
    WeightVector,
};

#[derive(Debug, Error)]
pub enum SchedulerError {
    #[error(transparent)]
    Anneal(#[from] AnnealError),
    #[error("learner {learner} produced non-finite loss {value} at step {step}")]
    LearnerFailure {
        step: usize,
        learner: usize,
        value: f64,
    },
    #[error("lambda0 = {lambda0} outside ({min_exclusive}, 1)")]
    InvalidLambda { lambda0: f64, min_exclusive: f64 },
    #[error("no learners provided")]
    NoLearners,
    #[error("no tasks provided")]
    NoTasks,
}

/// A trainable expert paired with its target.
///
/// `apply_update` performs one gradient step on `weight * loss(task)`;
/// calling it with weight 0 must leave parameters bit-identical. `loss` must
/// be deterministic given parameters and task.
pub trait Learner {
    type Task;
    type State: Clone + PartialEq;

    fn loss(&self, task: &Self::Task) -> f64;
    /// Judge rating in `[0, 1]` of the learner's current attempt on `task`;
    /// a rating strictly above the success threshold counts as success.
    fn judge_rating(&self, task: &Self::Task) -> f64;
    fn apply_update(&mut self, task: &Self::Task, weight: f64);
    fn state(&self) -> Self::State;
    fn restore(&mut self, state: &Self::State);
}

/// Update-weighting policy for joint training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Strategy {
    /// Independent training: every learner updated with weight 1 on every
    /// sampled task.
    Baseline,
    /// One-shot assignment of each task to its lowest-loss learner on the
    /// warm-start snapshots; a step updates only the assigned learner.
    Naive1,
    /// Per-step winner-take-all: update only the currently lowest-loss
    /// learner.
    Naive2,
    /// One-shot assignment of each task to every learner whose judge rating
    /// strictly exceeds `success_threshold` on the warm-start snapshots;
    /// tasks with no success fall back to the lowest-loss learner.
    Naive3 { success_threshold: f64 },
    /// Weight inversely proportional to current loss.
    VariantI,
    /// Fixed emphasis `lambda0` on the lowest-loss learner, remainder shared
    /// equally.
    VariantII { lambda0: f64 },
    /// Emphasis on the lowest-loss learner grown linearly from `1/M` to 1
    /// over the run.
    VariantIII,
    /// Entropy-annealed Boltzmann weights meeting the scheduled threshold
    /// exactly.
    Ours { schedule: EntropySchedule },
}

/// Thin wrapper over [`annealing::optimal_weights`] in strategy terms.
pub fn weights_ours<R: Rng + ?Sized>(
    losses: &LossVector,
    step: usize,
    total_steps: usize,
    schedule: &EntropySchedule,
    rng: &mut R,
) -> Result<ScheduledWeights, AnnealError> {
    annealing::optimal_weights(losses, schedule, step, total_steps, rng)
}

/// One-hot on the smallest loss; ties break to the lowest index.
pub fn weights_naive2(losses: &LossVector) -> WeightVector {
    WeightVector::one_hot(losses.len(), losses.argmin())
}

/// Weights inversely proportional to loss. Nonpositive losses are shifted up
/// so the smallest becomes 1e-6 before inverting.
pub fn weights_variant1(losses: &LossVector) -> WeightVector {
    let min = losses.as_slice()[losses.argmin()];
    let shift = if min <= 0.0 { -min + 1e-6 } else { 0.0 };
    let inverses: Vec<f64> = losses.as_slice().iter().map(|l| 1.0 / (l + shift)).collect();
    let sum: f64 = inverses.iter().sum();
    WeightVector::new(inverses.into_iter().map(|x| x / sum).collect())
        .expect("normalized inverse losses lie on the simplex")
}

/// `lambda0` on the smallest loss, `(1 - lambda0) / (M - 1)` on the rest.
pub fn weights_variant2(losses: &LossVector, lambda0: f64) -> Result<WeightVector, SchedulerError> {
    if !(0.0..=1.0).contains(&lambda0) {
        return Err(SchedulerError::InvalidLambda {
            lambda0,
            min_exclusive: 0.0,
        });
    }
    let m = losses.len();
    let rest = (1.0 - lambda0) / (m - 1) as f64;
    let mut weights = vec![rest; m];
    weights[losses.argmin()] = lambda0;
    Ok(WeightVector::new(weights).expect("emphasis weights lie on the simplex"))
}

/// Variant II with `lambda0` interpolated from `1/M` at t=0 to 1 at t=T-1.
pub fn weights_variant3(
    losses: &LossVector,
    step: usize,
    total_steps: usize,
) -> Result<WeightVector, SchedulerError> {
    if step >= total_steps {
        return Err(AnnealError::StepOutOfRange { step, total_steps }.into());
    }
    let m = losses.len() as f64;
    let denom = (total_steps - 1).max(1) as f64;
    let frac = step as f64 / denom;
    // Convex combination so the endpoints are exact: 1/M at t=0, 1 at t=T-1.
    let lambda0 = (1.0 - frac) * (1.0 / m) + frac;
    weights_variant2(losses, lambda0)
}

/// Maps each task to the learner with the smallest loss on it, evaluated once
/// on the learners as given (the warm-start snapshots). Ties break low.
pub fn assign_naive1<L: Learner>(learners: &[L], tasks: &[L::Task]) -> Vec<usize> {
    tasks
        .iter()
        .map(|task| {
            let losses: Vec<f64> = learners.iter().map(|l| l.loss(task)).collect();
            annealing::argmin(&losses)
        })
        .collect()
}

/// Maps each task to every learner whose judge rating strictly exceeds
/// `success_threshold`; tasks with no success fall back to the single
/// lowest-loss learner. Every returned set is nonempty.
pub fn assign_naive3<L: Learner>(
    learners: &[L],
    tasks: &[L::Task],
    success_threshold: f64,
) -> Vec<Vec<usize>> {
    tasks
        .iter()
        .map(|task| {
            let successes: Vec<usize> = learners
                .iter()
                .enumerate()
                .filter(|(_, l)| l.judge_rating(task) > success_threshold)
                .map(|(i, _)| i)
                .collect();
            if successes.is_empty() {
                let losses: Vec<f64> = learners.iter().map(|l| l.loss(task)).collect();
                vec![annealing::argmin(&losses)]
            } else {
                successes
            }
        })
        .collect()
}

/// One training step's record. `beta` is absent when the step used a uniform
/// sentinel or a strategy that does not solve for a temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub t: usize,
    pub losses: Vec<f64>,
    pub weights: Vec<f64>,
    pub beta: Option<f64>,
    pub entropy: f64,
    pub task: usize,
}

/// Full record of a joint-training run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingTrace {
    pub steps: Vec<TraceStep>,
    /// Total update weight each learner received over the run.
    pub update_mass: Vec<f64>,
}

impl TrainingTrace {
    /// One JSON object per line, in step order.
    pub fn write_jsonl<W: std::io::Write>(&self, mut writer: W) -> std::io::Result<()> {
        for step in &self.steps {
            serde_json::to_writer(&mut writer, step)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: std::io::BufRead>(reader: R) -> std::io::Result<Self> {
        let mut steps = Vec::new();
        let mut update_mass: Vec<f64> = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let step: TraceStep = serde_json::from_str(&line)?;
            if update_mass.len() < step.weights.len() {
                update_mass.resize(step.weights.len(), 0.0);
            }
            for (mass, w) in update_mass.iter_mut().zip(&step.weights) {
                *mass += w;
            }
            steps.push(step);
        }
        Ok(Self { steps, update_mass })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrainingOptions {
    pub total_steps: usize,
    /// Feed per-learner running z-scores instead of raw losses into the
    /// weight computation (the update itself always uses the raw loss).
    pub normalize_losses: bool,
}

impl TrainingOptions {
    pub fn new(total_steps: usize) -> Self {
        Self {
            total_steps,
            normalize_losses: false,
        }
    }
}

/// Per-learner running mean/variance (Welford) for loss z-normalization.
struct RunningNorm {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningNorm {
    fn new(learners: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; learners],
            m2: vec![0.0; learners],
        }
    }

    fn observe_and_normalize(&mut self, raw: &[f64]) -> Vec<f64> {
        self.count += 1;
        for (i, &x) in raw.iter().enumerate() {
            let delta = x - self.mean[i];
            self.mean[i] += delta / self.count as f64;
            self.m2[i] += delta * (x - self.mean[i]);
        }
        raw.iter()
            .enumerate()
            .map(|(i, &x)| {
                if self.count < 2 {
                    return 0.0;
                }
                let sd = (self.m2[i] / (self.count - 1) as f64).sqrt();
                if sd > 1e-12 {
                    (x - self.mean[i]) / sd
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Runs `options.total_steps` joint-training steps over `learners`.
///
/// `task_rng` drives uniform-with-replacement task sampling; `schedule_rng`
/// feeds the random entropy schedule when one is in force. A run is
/// sequential by contract; distinct runs may execute in parallel.
pub fn run_joint_training<L, RT, RS>(
    learners: &mut [L],
    tasks: &[L::Task],
    strategy: &Strategy,
    options: &TrainingOptions,
    task_rng: &mut RT,
    schedule_rng: &mut RS,
) -> Result<TrainingTrace, SchedulerError>
where
    L: Learner,
    RT: Rng + ?Sized,
    RS: Rng + ?Sized,
{
    let m = learners.len();
    if m == 0 {
        return Err(SchedulerError::NoLearners);
    }
    if options.total_steps > 0 && tasks.is_empty() {
        return Err(SchedulerError::NoTasks);
    }
    if let Strategy::VariantII { lambda0 } = strategy {
        let min_exclusive = 1.0 / m as f64;
        if !(*lambda0 > min_exclusive && *lambda0 < 1.0) {
            return Err(SchedulerError::InvalidLambda {
                lambda0: *lambda0,
                min_exclusive,
            });
        }
    }

    // One-shot assignments are computed on the learners as handed in, i.e.
    // the warm-start snapshots, before any joint update.
    let assignment_single = match strategy {
        Strategy::Naive1 => Some(assign_naive1(learners, tasks)),
        _ => None,
    };
    let assignment_set = match strategy {
        Strategy::Naive3 { success_threshold } => {
            Some(assign_naive3(learners, tasks, *success_threshold))
        }
        _ => None,
    };

    let mut normalizer = options
        .normalize_losses
        .then(|| RunningNorm::new(m));
    let mut steps = Vec::with_capacity(options.total_steps);
    let mut update_mass = vec![0.0; m];

    for t in 0..options.total_steps {
        let task_index = task_rng.random_range(0..tasks.len());
        let task = &tasks[task_index];
        let raw_losses: Vec<f64> = learners.iter().map(|l| l.loss(task)).collect();
        if let Some(learner) = raw_losses.iter().position(|l| !l.is_finite()) {
            return Err(SchedulerError::LearnerFailure {
                step: t,
                learner,
                value: raw_losses[learner],
            });
        }
        let weighting_losses = match normalizer.as_mut() {
            Some(norm) => norm.observe_and_normalize(&raw_losses),
            None => raw_losses.clone(),
        };

        let (weights, beta) = step_weights(
            strategy,
            &weighting_losses,
            t,
            options.total_steps,
            task_index,
            assignment_single.as_deref(),
            assignment_set.as_deref(),
            schedule_rng,
        )?;

        for (i, learner) in learners.iter_mut().enumerate() {
            learner.apply_update(task, weights[i]);
            update_mass[i] += weights[i];
        }
        let entropy = annealing::entropy_raw(&weights);
        steps.push(TraceStep {
            t,
            losses: raw_losses,
            weights,
            beta,
            entropy,
            task: task_index,
        });
    }

    Ok(TrainingTrace { steps, update_mass })
}

#[allow(clippy::too_many_arguments)]
fn step_weights<RS: Rng + ?Sized>(
    strategy: &Strategy,
    losses: &[f64],
    step: usize,
    total_steps: usize,
    task_index: usize,
    assignment_single: Option<&[usize]>,
    assignment_set: Option<&[Vec<usize>]>,
    schedule_rng: &mut RS,
) -> Result<(Vec<f64>, Option<f64>), SchedulerError> {
    let m = losses.len();
    if let Strategy::Baseline = strategy {
        return Ok((vec![1.0; m], None));
    }
    // A single learner trivially receives all the update weight.
    if m == 1 {
        return Ok((vec![1.0], None));
    }
    let weights = match strategy {
        Strategy::Baseline => unreachable!(),
        Strategy::Naive1 => {
            let assigned = assignment_single.expect("naive1 assignment precomputed")[task_index];
            (WeightVector::one_hot(m, assigned), None)
        }
        Strategy::Naive2 => {
            let vector = LossVector::new(losses.to_vec())?;
            (weights_naive2(&vector), None)
        }
        Strategy::Naive3 { .. } => {
            let set = &assignment_set.expect("naive3 assignment precomputed")[task_index];
            let share = 1.0 / set.len() as f64;
            let mut w = vec![0.0; m];
            for &i in set {
                w[i] = share;
            }
            (
                WeightVector::new(w).expect("assignment shares lie on the simplex"),
                None,
            )
        }
        Strategy::VariantI => {
            let vector = LossVector::new(losses.to_vec())?;
            (weights_variant1(&vector), None)
        }
        Strategy::VariantII { lambda0 } => {
            let vector = LossVector::new(losses.to_vec())?;
            (weights_variant2(&vector, *lambda0)?, None)
        }
        Strategy::VariantIII => {
            let vector = LossVector::new(losses.to_vec())?;
            (weights_variant3(&vector, step, total_steps)?, None)
        }
        Strategy::Ours { schedule } => {
            let vector = LossVector::new(losses.to_vec())?;
            let solved = weights_ours(&vector, step, total_steps, schedule, schedule_rng)?;
            let beta = match &solved.temperature {
                TemperatureOutcome::Solved(s) => Some(s.beta),
                TemperatureOutcome::UniformSentinel(_) => None,
            };
            (solved.weights, beta)
        }
    };
    Ok((weights.0.into_inner(), weights.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn losses(values: &[f64]) -> LossVector {
        LossVector::new(values.to_vec()).unwrap()
    }

    /// Scalar quadratic learner used to exercise the driver: parameter p,
    /// task y, loss (p - y)^2, gradient step on weight * loss.
    #[derive(Debug, Clone, PartialEq)]
    struct QuadraticLearner {
        parameter: f64,
        rate: f64,
    }

    impl Learner for QuadraticLearner {
        type Task = f64;
        type State = f64;

        fn loss(&self, task: &f64) -> f64 {
            (self.parameter - task) * (self.parameter - task)
        }

        fn judge_rating(&self, task: &f64) -> f64 {
            (-self.loss(task)).exp()
        }

        fn apply_update(&mut self, task: &f64, weight: f64) {
            if weight == 0.0 {
                return;
            }
            self.parameter -= self.rate * weight * 2.0 * (self.parameter - task);
        }

        fn state(&self) -> f64 {
            self.parameter
        }

        fn restore(&mut self, state: &f64) {
            self.parameter = *state;
        }
    }

    fn quad(parameters: &[f64]) -> Vec<QuadraticLearner> {
        parameters
            .iter()
            .map(|&parameter| QuadraticLearner {
                parameter,
                rate: 0.1,
            })
            .collect()
    }

    #[test]
    fn naive2_picks_argmin_and_breaks_ties_low() {
        assert_eq!(
            weights_naive2(&losses(&[3.0, 1.0, 2.0])).as_slice(),
            &[0.0, 1.0, 0.0]
        );
        assert_eq!(weights_naive2(&losses(&[1.0, 1.0])).as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn variant1_inverse_proportional() {
        assert_eq!(
            weights_variant1(&losses(&[1.0, 1.0])).as_slice(),
            &[0.5, 0.5]
        );
        let w = weights_variant1(&losses(&[1.0, 3.0]));
        assert!((w.as_slice()[0] - 0.75).abs() < 1e-15);
        assert!((w.as_slice()[1] - 0.25).abs() < 1e-15);
        let uniform = weights_variant1(&losses(&[2.0, 2.0, 2.0, 2.0]));
        for &w in uniform.as_slice() {
            assert!((w - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn variant1_shifts_nonpositive_losses() {
        let w = weights_variant1(&losses(&[-1.0, 0.0]));
        assert!(w.as_slice()[0] > 0.999);
        assert!(w.as_slice()[1] > 0.0);
    }

    #[test]
    fn variant2_fixed_emphasis() {
        let w = weights_variant2(&losses(&[0.5, 2.0, 3.0, 4.0]), 0.8).unwrap();
        assert!((w.as_slice()[0] - 0.8).abs() < 1e-15);
        for &v in &w.as_slice()[1..] {
            assert!((v - 0.2 / 3.0).abs() < 1e-15);
        }
        let w = weights_variant2(&losses(&[5.0, 1.0]), 0.8).unwrap();
        assert!((w.as_slice()[0] - 0.2).abs() < 1e-15);
        assert!((w.as_slice()[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn variant2_boundary_is_uniform() {
        let w = weights_variant2(&losses(&[1.0, 2.0, 3.0, 4.0]), 0.25).unwrap();
        for &v in w.as_slice() {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn variant3_interpolates_emphasis() {
        let l = losses(&[2.0, 1.0]);
        let start = weights_variant3(&l, 0, 101).unwrap();
        assert_eq!(start.as_slice(), &[0.5, 0.5]);
        let end = weights_variant3(&l, 100, 101).unwrap();
        assert_eq!(end.as_slice(), &[0.0, 1.0]);
        let mid = weights_variant3(&l, 50, 101).unwrap();
        assert!((mid.as_slice()[1] - 0.75).abs() < 1e-15);
        assert!((mid.as_slice()[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn assign_naive1_takes_lowest_loss_learner() {
        let learners = quad(&[0.2, 0.9]);
        assert_eq!(assign_naive1(&learners, &[0.1]), vec![0]);
        assert_eq!(assign_naive1(&learners, &[1.0]), vec![1]);
        // Equidistant task: both losses equal, lowest index wins.
        let tied = quad(&[0.0, 1.0]);
        assert_eq!(assign_naive1(&tied, &[0.5]), vec![0]);
    }

    #[test]
    fn assign_naive3_collects_successes_with_fallback() {
        let learners = quad(&[0.0, 0.5, 4.0]);
        // Task 0.25: learners 0 and 1 rate exp(-0.0625) > 0.5, learner 2 fails.
        let sets = assign_naive3(&learners, &[0.25], 0.5);
        assert_eq!(sets, vec![vec![0, 1]]);
        // Task 10: nobody succeeds, falls back to the argmin-loss learner.
        let sets = assign_naive3(&learners, &[10.0], 0.5);
        assert_eq!(sets, vec![vec![2]]);
        // Near everyone: all succeed.
        let near = quad(&[0.1, 0.2, 0.3]);
        let sets = assign_naive3(&near, &[0.2], 0.5);
        assert_eq!(sets, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn zero_steps_leaves_learners_bit_identical() {
        let mut learners = quad(&[0.3, 0.7]);
        let initial: Vec<f64> = learners.iter().map(|l| l.state()).collect();
        let mut rng_a = ChaCha8Rng::seed_from_u64(1);
        let mut rng_b = ChaCha8Rng::seed_from_u64(2);
        let trace = run_joint_training(
            &mut learners,
            &[0.5f64],
            &Strategy::Baseline,
            &TrainingOptions::new(0),
            &mut rng_a,
            &mut rng_b,
        )
        .unwrap();
        assert!(trace.steps.is_empty());
        let after: Vec<f64> = learners.iter().map(|l| l.state()).collect();
        assert_eq!(initial, after);
    }

    #[test]
    fn naive2_changes_exactly_one_learner_per_step() {
        let mut learners = quad(&[0.0, 1.0, 2.0]);
        let tasks: Vec<f64> = vec![0.1, 0.9, 1.7, 2.5];
        let mut task_rng = ChaCha8Rng::seed_from_u64(3);
        let mut schedule_rng = ChaCha8Rng::seed_from_u64(4);
        let mut previous: Vec<f64> = learners.iter().map(|l| l.state()).collect();
        for _ in 0..50 {
            run_joint_training(
                &mut learners,
                &tasks,
                &Strategy::Naive2,
                &TrainingOptions::new(1),
                &mut task_rng,
                &mut schedule_rng,
            )
            .unwrap();
            let current: Vec<f64> = learners.iter().map(|l| l.state()).collect();
            let changed = previous
                .iter()
                .zip(&current)
                .filter(|(a, b)| a != b)
                .count();
            assert_eq!(changed, 1);
            previous = current;
        }
    }

    #[test]
    fn baseline_updates_every_learner_with_weight_one() {
        let mut learners = quad(&[0.0, 1.0]);
        let mut task_rng = ChaCha8Rng::seed_from_u64(5);
        let mut schedule_rng = ChaCha8Rng::seed_from_u64(6);
        let trace = run_joint_training(
            &mut learners,
            &[0.5f64],
            &Strategy::Baseline,
            &TrainingOptions::new(10),
            &mut task_rng,
            &mut schedule_rng,
        )
        .unwrap();
        for step in &trace.steps {
            assert_eq!(step.weights, vec![1.0, 1.0]);
            assert_eq!(step.entropy, 0.0);
        }
        assert_eq!(trace.update_mass, vec![10.0, 10.0]);
    }

    #[test]
    fn ours_realizes_scheduled_entropy() {
        let mut learners = quad(&[0.0, 0.4, 1.1, 2.0]);
        let tasks: Vec<f64> = (0..16).map(|i| i as f64 * 0.2).collect();
        let mut task_rng = ChaCha8Rng::seed_from_u64(7);
        let mut schedule_rng = ChaCha8Rng::seed_from_u64(8);
        let total = 40;
        let trace = run_joint_training(
            &mut learners,
            &tasks,
            &Strategy::Ours {
                schedule: EntropySchedule::Linear,
            },
            &TrainingOptions::new(total),
            &mut task_rng,
            &mut schedule_rng,
        )
        .unwrap();
        let ln4 = 4.0f64.ln();
        for step in &trace.steps {
            let spread = step
                .losses
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max)
                - step.losses.iter().cloned().fold(f64::INFINITY, f64::min);
            if spread > 1e-9 {
                let target = ln4 * ((total - step.t) as f64 / total as f64);
                assert!(
                    (step.entropy - target).abs() <= 1e-10,
                    "step {} entropy {} target {}",
                    step.t,
                    step.entropy,
                    target
                );
            }
        }
    }

    #[test]
    fn identical_seeds_give_identical_traces() {
        let run = || {
            let mut learners = quad(&[0.0, 0.5, 1.5]);
            let mut task_rng = ChaCha8Rng::seed_from_u64(11);
            let mut schedule_rng = ChaCha8Rng::seed_from_u64(12);
            run_joint_training(
                &mut learners,
                &[0.2f64, 0.8, 1.4],
                &Strategy::Ours {
                    schedule: EntropySchedule::Random { epsilon_floor: None },
                },
                &TrainingOptions::new(60),
                &mut task_rng,
                &mut schedule_rng,
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn variant2_lambda_validated_against_learner_count() {
        let mut learners = quad(&[0.0, 1.0, 2.0, 3.0]);
        let mut task_rng = ChaCha8Rng::seed_from_u64(13);
        let mut schedule_rng = ChaCha8Rng::seed_from_u64(14);
        let result = run_joint_training(
            &mut learners,
            &[0.5f64],
            &Strategy::VariantII { lambda0: 0.25 },
            &TrainingOptions::new(1),
            &mut task_rng,
            &mut schedule_rng,
        );
        assert!(matches!(
            result,
            Err(SchedulerError::InvalidLambda { .. })
        ));
    }

    #[test]
    fn trace_round_trips_through_jsonl() {
        let mut learners = quad(&[0.0, 1.0]);
        let mut task_rng = ChaCha8Rng::seed_from_u64(15);
        let mut schedule_rng = ChaCha8Rng::seed_from_u64(16);
        let trace = run_joint_training(
            &mut learners,
            &[0.3f64, 0.9],
            &Strategy::Ours {
                schedule: EntropySchedule::Linear,
            },
            &TrainingOptions::new(8),
            &mut task_rng,
            &mut schedule_rng,
        )
        .unwrap();
        let mut buffer = Vec::new();
        trace.write_jsonl(&mut buffer).unwrap();
        let parsed = TrainingTrace::read_jsonl(buffer.as_slice()).unwrap();
        assert_eq!(parsed, trace);
    }
}
