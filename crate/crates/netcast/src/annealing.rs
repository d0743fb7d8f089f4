//! Boltzmann update weights with an exact entropy target.
//!
//! Given per-learner losses and an entropy threshold, the weights that
//! minimize the weighted loss subject to a minimum-entropy constraint form a
//! Boltzmann distribution over the negated losses. The temperature is the
//! unique scalar at which the weight entropy meets the threshold; it is found
//! by a Newton iteration on `log beta`, safeguarded by bisection inside a
//! bracketing interval.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Residual tolerance for the temperature solve, in nats.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;
/// Iteration cap for the safeguarded Newton loop. Bisection alone halves a
/// bracket of width 1e12 in under 60 steps, so this never binds first.
pub const DEFAULT_MAX_ITERATIONS: usize = 60;

/// Relative spread below which a loss vector is treated as identical
/// (the temperature would be numerically unbounded).
const IDENTICAL_SPREAD: f64 = 1e-12;

/// Tolerance for the simplex sum check on weight vectors.
const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// Bracket expansion factor for the initial temperature search.
const BRACKET_GROWTH: f64 = 8.0;
/// Cap on bracket expansions; 8^60 spans far beyond any representable need.
const MAX_BRACKET_STEPS: usize = 60;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnnealError {
    #[error("loss vector must have at least 2 entries, got {0}")]
    TooFewEntries(usize),
    #[error("loss at index {0} is not finite")]
    NonFiniteLoss(usize),
    #[error("weight at index {index} is negative ({value})")]
    NegativeWeight { index: usize, value: f64 },
    #[error("weights sum to {0}, expected 1 within 1e-12")]
    BadWeightSum(f64),
    #[error("temperature must be positive and finite, got {0}")]
    NonPositiveTemperature(f64),
    #[error("target entropy {target} outside (0, {max_entropy}]")]
    TargetOutOfRange { target: f64, max_entropy: f64 },
    #[error("all losses are identical; any temperature yields uniform weights")]
    IdenticalLosses,
    #[error(
        "temperature solve did not converge in {iterations} iterations \
         (best beta {best_beta:e}, residual {residual:e})"
    )]
    NoConvergence {
        best_beta: f64,
        residual: f64,
        iterations: usize,
    },
    #[error("step {step} out of range for {total_steps} total steps")]
    StepOutOfRange { step: usize, total_steps: usize },
    #[error("schedule parameter {name} = {value} out of range")]
    BadScheduleParameter { name: &'static str, value: f64 },
    #[error("index {index} out of bounds for {len} entries")]
    IndexOutOfBounds { index: usize, len: usize },
    #[error("shift amount {amount} outside (0, {available}]")]
    ShiftOutOfRange { amount: f64, available: f64 },
}

/// Per-step losses of the M learners. Always finite, with M >= 2.
#[derive(Debug, Clone, PartialEq)]
pub struct LossVector(Vec<f64>);

impl LossVector {
    pub fn new(values: Vec<f64>) -> Result<Self, AnnealError> {
        if values.len() < 2 {
            return Err(AnnealError::TooFewEntries(values.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(AnnealError::NonFiniteLoss(i));
        }
        Ok(Self(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Largest minus smallest entry.
    pub fn spread(&self) -> f64 {
        let min = self.0.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = self.0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        max - min
    }

    /// True when the spread is negligible relative to the magnitude, so the
    /// entropy constraint cannot pin a finite temperature.
    pub fn is_effectively_identical(&self) -> bool {
        let scale = self.0.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        self.spread() <= IDENTICAL_SPREAD * scale.max(1.0)
    }

    /// Index of the smallest entry; ties resolve to the lowest index.
    pub fn argmin(&self) -> usize {
        argmin(&self.0)
    }

    /// Maximum attainable weight entropy, `ln M`.
    pub fn max_entropy(&self) -> f64 {
        (self.0.len() as f64).ln()
    }
}

pub(crate) fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// A point on the M-simplex: nonnegative entries summing to 1 within 1e-12.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self, AnnealError> {
        if let Some((i, &v)) = weights.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(AnnealError::NegativeWeight { index: i, value: v });
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(AnnealError::BadWeightSum(sum));
        }
        Ok(Self(weights))
    }

    pub fn uniform(len: usize) -> Self {
        Self(vec![1.0 / len as f64; len])
    }

    pub fn one_hot(len: usize, index: usize) -> Self {
        let mut w = vec![0.0; len];
        w[index] = 1.0;
        Self(w)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Index of the largest weight; ties resolve to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.0.iter().enumerate().skip(1) {
            if *v > self.0[best] {
                best = i;
            }
        }
        best
    }
}

/// Shannon entropy in nats, with the convention `0 ln 0 = 0`.
pub fn entropy(weights: &WeightVector) -> f64 {
    entropy_raw(weights.as_slice())
}

/// Entropy of an arbitrary nonnegative vector, same zero convention.
/// Callers that hold a validated [`WeightVector`] should prefer [`entropy`].
pub fn entropy_raw(weights: &[f64]) -> f64 {
    weights
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| -w * w.ln())
        .sum()
}

/// Boltzmann weights `w_i = exp(-l_i / beta) / sum_m exp(-l_m / beta)`.
///
/// Computed on min-shifted losses so no intermediate overflows: the largest
/// exponent is exactly zero and the partition sum lies in `[1, M]`.
pub fn boltzmann_weights(losses: &LossVector, beta: f64) -> Result<WeightVector, AnnealError> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(AnnealError::NonPositiveTemperature(beta));
    }
    let min = losses.as_slice()[losses.argmin()];
    let unnormalized: Vec<f64> = losses
        .as_slice()
        .iter()
        .map(|l| (-(l - min) / beta).exp())
        .collect();
    let sum: f64 = unnormalized.iter().sum();
    let weights = unnormalized.into_iter().map(|x| x / sum).collect();
    WeightVector::new(weights)
}

/// Entropy of the Boltzmann weights at temperature `beta`, via the
/// log-partition form `H = ln Z + tau * U` with `tau = 1/beta`.
///
/// Evaluated on min-shifted losses, which leaves the value unchanged and
/// keeps every exponent nonpositive.
pub fn entropy_at_temperature(losses: &LossVector, beta: f64) -> Result<f64, AnnealError> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(AnnealError::NonPositiveTemperature(beta));
    }
    let shifted = shift_to_min(losses.as_slice());
    Ok(entropy_and_slope(&shifted, beta).0)
}

fn shift_to_min(losses: &[f64]) -> Vec<f64> {
    let min = losses[argmin(losses)];
    losses.iter().map(|l| l - min).collect()
}

/// Returns `(H(beta), dH/d(ln beta))` for min-shifted losses.
///
/// `H = ln Z' + tau U'` with `tau = 1/beta`. Chaining `dH/dtau = -tau Var`
/// through `dtau/d(ln beta) = -tau` gives `dH/d(ln beta) = tau^2 * Var_w(l)`,
/// where `Var_w` is the loss variance under the Boltzmann weights.
fn entropy_and_slope(shifted: &[f64], beta: f64) -> (f64, f64) {
    let tau = 1.0 / beta;
    let mut partition = 0.0;
    let mut mean_acc = 0.0;
    for &l in shifted {
        let e = (-tau * l).exp();
        partition += e;
        mean_acc += e * l;
    }
    let mean = mean_acc / partition;
    let mut variance = 0.0;
    for &l in shifted {
        let w = (-tau * l).exp() / partition;
        variance += w * (l - mean) * (l - mean);
    }
    let entropy = partition.ln() + tau * mean;
    (entropy, tau * tau * variance)
}

/// Result of a converged temperature solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemperatureSolution {
    /// The solved temperature, strictly positive.
    pub beta: f64,
    /// `|H(beta) - target|` in nats.
    pub residual: f64,
    /// Newton/bisection iterations spent after bracketing.
    pub iterations: usize,
    /// Whether any Newton step had to be replaced by bisection.
    pub used_bisection_fallback: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Starting point for the geometric bracket expansion.
    pub initial_beta: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            initial_beta: 1.0,
        }
    }
}

/// Solves `H(beta) = target_entropy` for the unique positive temperature.
///
/// `H` is continuous and strictly increasing in `beta` when the losses are
/// not all identical, so a bracket found by geometric expansion contains
/// exactly one root. Newton steps use the analytic slope and iterate in
/// `ln beta`; any step that would leave the bracket is replaced by bisection.
///
/// Identical losses are rejected with [`AnnealError::IdenticalLosses`]; the
/// caller decides what uniform weights mean in its context.
pub fn solve_temperature(
    losses: &LossVector,
    target_entropy: f64,
) -> Result<TemperatureSolution, AnnealError> {
    solve_temperature_with(losses, target_entropy, &SolverOptions::default())
}

pub fn solve_temperature_with(
    losses: &LossVector,
    target_entropy: f64,
    options: &SolverOptions,
) -> Result<TemperatureSolution, AnnealError> {
    let max_entropy = losses.max_entropy();
    if !(target_entropy > 0.0) || target_entropy > max_entropy {
        return Err(AnnealError::TargetOutOfRange {
            target: target_entropy,
            max_entropy,
        });
    }
    if losses.is_effectively_identical() {
        return Err(AnnealError::IdenticalLosses);
    }
    let shifted = shift_to_min(losses.as_slice());

    // Geometric bracket expansion from the seed temperature. Each probe may
    // already satisfy the residual tolerance (targets at or near ln M sit on
    // the asymptote and never straddle), so convergence is checked here too.
    let mut beta = options.initial_beta;
    let (mut h, _) = entropy_and_slope(&shifted, beta);
    if (h - target_entropy).abs() <= options.tolerance {
        return Ok(TemperatureSolution {
            beta,
            residual: (h - target_entropy).abs(),
            iterations: 0,
            used_bisection_fallback: false,
        });
    }
    let expand_up = h < target_entropy;
    let lo;
    let hi;
    let mut steps = 0;
    loop {
        let next = if expand_up {
            beta * BRACKET_GROWTH
        } else {
            beta / BRACKET_GROWTH
        };
        let (h_next, _) = entropy_and_slope(&shifted, next);
        if (h_next - target_entropy).abs() <= options.tolerance {
            return Ok(TemperatureSolution {
                beta: next,
                residual: (h_next - target_entropy).abs(),
                iterations: 0,
                used_bisection_fallback: false,
            });
        }
        if expand_up && h_next > target_entropy {
            lo = beta;
            hi = next;
            break;
        }
        if !expand_up && h_next < target_entropy {
            lo = next;
            hi = beta;
            break;
        }
        beta = next;
        h = h_next;
        steps += 1;
        if steps > MAX_BRACKET_STEPS {
            return Err(AnnealError::NoConvergence {
                best_beta: beta,
                residual: (h - target_entropy).abs(),
                iterations: 0,
            });
        }
    }

    // Safeguarded Newton in x = ln beta on the bracket [lo, hi], where
    // H(lo) < target < H(hi).
    let mut x_lo = lo.ln();
    let mut x_hi = hi.ln();
    let mut x = 0.5 * (x_lo + x_hi);
    let mut used_bisection = false;
    let mut best_beta = lo;
    let mut best_residual = f64::INFINITY;
    for iteration in 1..=options.max_iterations {
        let beta = x.exp();
        let (h, slope) = entropy_and_slope(&shifted, beta);
        let residual = h - target_entropy;
        if residual.abs() < best_residual {
            best_residual = residual.abs();
            best_beta = beta;
        }
        if residual.abs() <= options.tolerance {
            return Ok(TemperatureSolution {
                beta,
                residual: residual.abs(),
                iterations: iteration,
                used_bisection_fallback: used_bisection,
            });
        }
        if residual < 0.0 {
            x_lo = x;
        } else {
            x_hi = x;
        }
        let newton = x - residual / slope;
        x = if newton.is_finite() && newton > x_lo && newton < x_hi {
            newton
        } else {
            used_bisection = true;
            0.5 * (x_lo + x_hi)
        };
    }
    Err(AnnealError::NoConvergence {
        best_beta,
        residual: best_residual,
        iterations: options.max_iterations,
    })
}

/// Rule producing the entropy threshold at each training step.
///
/// All thresholds lie in `(0, ln M]`. The random schedule draws from the
/// caller-supplied stream, so determinism is the caller's responsibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EntropySchedule {
    /// `ln M * (T - t) / T`: full exploration at t=0, toward zero at t=T.
    Linear,
    /// `ln M * gamma^e` with `e = t/T` or `e = t` depending on `form`.
    Exponential { gamma: f64, form: ExponentForm },
    /// `0.5 ln M (1 + cos(t pi / T))`.
    Cosine,
    /// Constant threshold; must lie in `(0, ln M]`.
    Fixed { value: f64 },
    /// Uniform draw on `[0, ln M]`, clamped to at least `epsilon_floor`
    /// (default `1e-3 * ln M`) to avoid the degenerate zero threshold.
    Random { epsilon_floor: Option<f64> },
}

/// Exponent convention for [`EntropySchedule::Exponential`].
///
/// `FractionOfRun` uses `gamma^(t/T)`, which over a whole run decays only to
/// `gamma * ln M`. `PerStep` uses `gamma^t`, the per-step compounding form
/// that anneals to near zero for usual `gamma` and `T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentForm {
    FractionOfRun,
    PerStep,
}

impl EntropySchedule {
    pub fn exponential(gamma: f64) -> Self {
        Self::Exponential {
            gamma,
            form: ExponentForm::FractionOfRun,
        }
    }
}

/// Threshold `H_t` for step `t` of `total_steps` with `num_learners` experts.
pub fn schedule_threshold<R: Rng + ?Sized>(
    schedule: &EntropySchedule,
    step: usize,
    total_steps: usize,
    num_learners: usize,
    rng: &mut R,
) -> Result<f64, AnnealError> {
    if num_learners < 2 {
        return Err(AnnealError::TooFewEntries(num_learners));
    }
    if step >= total_steps {
        return Err(AnnealError::StepOutOfRange { step, total_steps });
    }
    let max_entropy = (num_learners as f64).ln();
    let value = match schedule {
        EntropySchedule::Linear => {
            max_entropy * ((total_steps - step) as f64 / total_steps as f64)
        }
        EntropySchedule::Exponential { gamma, form } => {
            if !(*gamma > 0.0 && *gamma < 1.0) {
                return Err(AnnealError::BadScheduleParameter {
                    name: "gamma",
                    value: *gamma,
                });
            }
            let exponent = match form {
                ExponentForm::FractionOfRun => step as f64 / total_steps as f64,
                ExponentForm::PerStep => step as f64,
            };
            max_entropy * gamma.powf(exponent)
        }
        EntropySchedule::Cosine => {
            0.5 * max_entropy * (1.0 + (step as f64 * std::f64::consts::PI / total_steps as f64).cos())
        }
        EntropySchedule::Fixed { value } => {
            if !(*value > 0.0) || *value > max_entropy {
                return Err(AnnealError::BadScheduleParameter {
                    name: "fixed_value",
                    value: *value,
                });
            }
            *value
        }
        EntropySchedule::Random { epsilon_floor } => {
            let floor = epsilon_floor.unwrap_or(1e-3 * max_entropy);
            if !(floor > 0.0) || floor > max_entropy {
                return Err(AnnealError::BadScheduleParameter {
                    name: "epsilon_floor",
                    value: floor,
                });
            }
            (rng.random::<f64>() * max_entropy).max(floor)
        }
    };
    Ok(value)
}

/// Why a solve was skipped and uniform weights returned directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UniformReason {
    /// All losses identical: every temperature yields uniform weights.
    IdenticalLosses,
    /// Target exactly `ln M`: uniform is the only feasible point
    /// (conceptually `beta = infinity`).
    MaxEntropyTarget,
}

/// Temperature part of a scheduled-weight computation.
#[derive(Debug, Clone, PartialEq)]
pub enum TemperatureOutcome {
    Solved(TemperatureSolution),
    UniformSentinel(UniformReason),
}

impl TemperatureOutcome {
    pub fn beta(&self) -> Option<f64> {
        match self {
            Self::Solved(s) => Some(s.beta),
            Self::UniformSentinel(_) => None,
        }
    }
}

/// Weights meeting an entropy target, plus the temperature that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledWeights {
    pub weights: WeightVector,
    pub temperature: TemperatureOutcome,
}

/// Boltzmann weights whose entropy equals `target_entropy`.
///
/// Identical losses and a target of exactly `ln M` short-circuit to uniform
/// weights with a sentinel record instead of running the solver.
pub fn weights_for_target(
    losses: &LossVector,
    target_entropy: f64,
) -> Result<ScheduledWeights, AnnealError> {
    let max_entropy = losses.max_entropy();
    if !(target_entropy > 0.0) || target_entropy > max_entropy {
        return Err(AnnealError::TargetOutOfRange {
            target: target_entropy,
            max_entropy,
        });
    }
    if losses.is_effectively_identical() {
        return Ok(ScheduledWeights {
            weights: WeightVector::uniform(losses.len()),
            temperature: TemperatureOutcome::UniformSentinel(UniformReason::IdenticalLosses),
        });
    }
    if target_entropy == max_entropy {
        return Ok(ScheduledWeights {
            weights: WeightVector::uniform(losses.len()),
            temperature: TemperatureOutcome::UniformSentinel(UniformReason::MaxEntropyTarget),
        });
    }
    let solution = solve_temperature(losses, target_entropy)?;
    let weights = boltzmann_weights(losses, solution.beta)?;
    Ok(ScheduledWeights {
        weights,
        temperature: TemperatureOutcome::Solved(solution),
    })
}

/// Weights for step `t` under `schedule`: the threshold is evaluated and the
/// temperature solved so the weight entropy meets it exactly.
pub fn optimal_weights<R: Rng + ?Sized>(
    losses: &LossVector,
    schedule: &EntropySchedule,
    step: usize,
    total_steps: usize,
    rng: &mut R,
) -> Result<ScheduledWeights, AnnealError> {
    let target = schedule_threshold(schedule, step, total_steps, losses.len(), rng)?;
    weights_for_target(losses, target)
}

/// Moves `amount` of weight from one entry to another, staying on the simplex.
///
/// Shifting weight from a higher-loss entry to a lower-loss one strictly
/// decreases the weighted loss; annealing exploits exactly this move as the
/// threshold drops.
pub fn exploitation_shift(
    weights: &WeightVector,
    from: usize,
    to: usize,
    amount: f64,
) -> Result<WeightVector, AnnealError> {
    let len = weights.len();
    for index in [from, to] {
        if index >= len {
            return Err(AnnealError::IndexOutOfBounds { index, len });
        }
    }
    let available = weights.as_slice()[from];
    if !(amount > 0.0) || amount > available {
        return Err(AnnealError::ShiftOutOfRange { amount, available });
    }
    let mut shifted = weights.as_slice().to_vec();
    shifted[from] -= amount;
    shifted[to] += amount;
    WeightVector::new(shifted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const LN_2: f64 = std::f64::consts::LN_2;

    fn losses(values: &[f64]) -> LossVector {
        LossVector::new(values.to_vec()).unwrap()
    }

    #[test]
    fn entropy_uniform_is_log_m() {
        let h = entropy(&WeightVector::uniform(4));
        assert!((h - 4.0f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn entropy_one_hot_is_zero() {
        assert_eq!(entropy(&WeightVector::one_hot(4, 0)), 0.0);
    }

    #[test]
    fn entropy_binary_uniform_is_log_2() {
        let w = WeightVector::new(vec![0.5, 0.5]).unwrap();
        assert!((entropy(&w) - LN_2).abs() < 1e-15);
    }

    #[test]
    fn invalid_simplex_is_rejected() {
        assert!(matches!(
            WeightVector::new(vec![0.5, 0.6]),
            Err(AnnealError::BadWeightSum(_))
        ));
        assert!(matches!(
            WeightVector::new(vec![-0.1, 1.1]),
            Err(AnnealError::NegativeWeight { .. })
        ));
    }

    #[test]
    fn boltzmann_identical_losses_uniform() {
        for beta in [1e-6, 1.0, 1e6] {
            let w = boltzmann_weights(&losses(&[1.0, 1.0, 1.0]), beta).unwrap();
            for &wi in w.as_slice() {
                assert!((wi - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn boltzmann_matches_direct_evaluation() {
        // Frozen from a high-precision evaluation of exp(-l/beta)/sum.
        let w = boltzmann_weights(&losses(&[1.0, 2.0]), 1.0).unwrap();
        assert!((w.as_slice()[0] - 0.731_058_578_630_004_9).abs() < 1e-15);
        assert!((w.as_slice()[1] - 0.268_941_421_369_995_1).abs() < 1e-15);
    }

    #[test]
    fn boltzmann_small_beta_concentrates_on_argmin() {
        let w = boltzmann_weights(&losses(&[0.0, 5.0, 9.0]), 1e-12).unwrap();
        assert_eq!(w.as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn boltzmann_rejects_bad_beta() {
        for beta in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(
                boltzmann_weights(&losses(&[0.0, 1.0]), beta),
                Err(AnnealError::NonPositiveTemperature(_))
            ));
        }
    }

    #[test]
    fn entropy_at_temperature_matches_composition() {
        // Frozen composition oracle: entropy of the beta=1 weights of (0,1).
        let h = entropy_at_temperature(&losses(&[0.0, 1.0]), 1.0).unwrap();
        assert!((h - 0.582_203_108_888_218).abs() < 1e-14);
        let w = boltzmann_weights(&losses(&[0.0, 1.0]), 1.0).unwrap();
        assert!((h - entropy(&w)).abs() < 1e-12);
    }

    #[test]
    fn entropy_at_high_temperature_approaches_log_m() {
        let h = entropy_at_temperature(&losses(&[0.3, 1.9, 0.2, 4.0]), 1e6).unwrap();
        assert!((h - 4.0f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn entropy_identical_losses_is_log_m() {
        let h = entropy_at_temperature(&losses(&[2.0, 2.0, 2.0]), 0.37).unwrap();
        assert!((h - 3.0f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn solve_matches_bisection_oracle() {
        // Frozen from an independent 1e-12 bisection oracle on the binary
        // entropy: beta = 0.7204048031464885, argmin weight 0.8002900974460228.
        let solution = solve_temperature(&losses(&[0.0, 1.0]), 0.5).unwrap();
        assert!((solution.beta - 0.720_404_803_146_488_5).abs() < 1e-9);
        assert!(solution.residual <= DEFAULT_TOLERANCE);
        let w = boltzmann_weights(&losses(&[0.0, 1.0]), solution.beta).unwrap();
        assert!((w.as_slice()[0] - 0.800_290_097_446_022_8).abs() < 1e-10);
    }

    #[test]
    fn solve_max_entropy_target_accepts_large_beta() {
        let ls = losses(&[3.0, 7.0]);
        let solution = solve_temperature(&ls, LN_2).unwrap();
        assert!(solution.residual <= DEFAULT_TOLERANCE);
        let w = boltzmann_weights(&ls, solution.beta).unwrap();
        for &wi in w.as_slice() {
            assert!((wi - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn solve_rejects_identical_losses() {
        assert_eq!(
            solve_temperature(&losses(&[2.0, 2.0]), 0.5),
            Err(AnnealError::IdenticalLosses)
        );
    }

    #[test]
    fn solve_rejects_out_of_range_targets() {
        for target in [0.0, -0.3, LN_2 + 0.1, 2.0] {
            assert!(matches!(
                solve_temperature(&losses(&[0.0, 1.0]), target),
                Err(AnnealError::TargetOutOfRange { .. })
            ));
        }
    }

    #[test]
    fn schedule_linear_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ln4 = 4.0f64.ln();
        let h0 = schedule_threshold(&EntropySchedule::Linear, 0, 3000, 4, &mut rng).unwrap();
        assert_eq!(h0, ln4);
        let mid = schedule_threshold(&EntropySchedule::Linear, 1500, 3000, 4, &mut rng).unwrap();
        assert!((mid - 0.5 * ln4).abs() < 1e-15);
    }

    #[test]
    fn schedule_exponential_default_form_barely_decays() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = 2999;
        let h = schedule_threshold(
            &EntropySchedule::exponential(0.99),
            t,
            3000,
            4,
            &mut rng,
        )
        .unwrap();
        let expected = 4.0f64.ln() * 0.99f64.powf(t as f64 / 3000.0);
        assert!((h - expected).abs() < 1e-15);
        assert!(h > 0.989 * 4.0f64.ln());
    }

    #[test]
    fn schedule_per_step_form_anneals_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let schedule = EntropySchedule::Exponential {
            gamma: 0.99,
            form: ExponentForm::PerStep,
        };
        let h = schedule_threshold(&schedule, 1999, 2000, 4, &mut rng).unwrap();
        assert!(h < 1e-6);
        assert!(h > 0.0);
    }

    #[test]
    fn schedule_rejects_step_past_end() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            schedule_threshold(&EntropySchedule::Linear, 10, 10, 4, &mut rng),
            Err(AnnealError::StepOutOfRange { .. })
        ));
    }

    #[test]
    fn schedule_random_respects_floor_and_ceiling() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let schedule = EntropySchedule::Random { epsilon_floor: None };
        let ln4 = 4.0f64.ln();
        for t in 0..2000 {
            let h = schedule_threshold(&schedule, t, 2000, 4, &mut rng).unwrap();
            assert!(h >= 1e-3 * ln4 && h <= ln4);
        }
    }

    #[test]
    fn optimal_weights_identical_losses_uniform_sentinel() {
        let out = weights_for_target(&losses(&[5.0, 5.0, 5.0, 5.0]), 0.9).unwrap();
        assert_eq!(out.weights, WeightVector::uniform(4));
        assert_eq!(
            out.temperature,
            TemperatureOutcome::UniformSentinel(UniformReason::IdenticalLosses)
        );
    }

    #[test]
    fn optimal_weights_linear_start_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = optimal_weights(
            &losses(&[0.4, 1.1, 3.0, 0.2]),
            &EntropySchedule::Linear,
            0,
            3000,
            &mut rng,
        )
        .unwrap();
        for &w in out.weights.as_slice() {
            assert!((w - 0.25).abs() < 1e-6);
        }
        assert_eq!(out.temperature.beta(), None);
    }

    #[test]
    fn optimal_weights_late_step_concentrates_on_argmin() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = optimal_weights(
            &losses(&[0.0, 1.0, 2.0, 3.0]),
            &EntropySchedule::Linear,
            2999,
            3000,
            &mut rng,
        )
        .unwrap();
        assert!(out.weights.as_slice()[0] > 0.99);
    }

    #[test]
    fn exploitation_shift_moves_mass() {
        let w = WeightVector::new(vec![0.5, 0.5]).unwrap();
        let shifted = exploitation_shift(&w, 0, 1, 0.1).unwrap();
        assert!((shifted.as_slice()[0] - 0.4).abs() < 1e-15);
        assert!((shifted.as_slice()[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn exploitation_shift_strictly_decreases_weighted_loss() {
        let w = WeightVector::new(vec![0.5, 0.5]).unwrap();
        let l = [2.0, 1.0];
        let before: f64 = w.as_slice().iter().zip(l).map(|(w, l)| w * l).sum();
        let shifted = exploitation_shift(&w, 0, 1, 0.1).unwrap();
        let after: f64 = shifted.as_slice().iter().zip(l).map(|(w, l)| w * l).sum();
        assert!((before - 1.5).abs() < 1e-15);
        assert!((after - 1.4).abs() < 1e-15);
        assert!(after < before);
    }

    #[test]
    fn exploitation_shift_full_amount_zeroes_source() {
        let w = WeightVector::new(vec![0.3, 0.7]).unwrap();
        let shifted = exploitation_shift(&w, 0, 1, 0.3).unwrap();
        assert_eq!(shifted.as_slice()[0], 0.0);
        assert!((shifted.as_slice()[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exploitation_shift_rejects_excess_amount() {
        let w = WeightVector::new(vec![0.3, 0.7]).unwrap();
        assert!(matches!(
            exploitation_shift(&w, 0, 1, 0.31),
            Err(AnnealError::ShiftOutOfRange { .. })
        ));
        assert!(matches!(
            exploitation_shift(&w, 0, 1, 0.0),
            Err(AnnealError::ShiftOutOfRange { .. })
        ));
    }
}
