//! Independent oracles for solver checks.
//!
//! These deliberately avoid the library's solve path: weights come from
//! direct normalized exponentials, entropy from the plain Shannon sum, and
//! the temperature from interval bisection. Only the min-shift identity is
//! shared, since direct exponentials overflow without it.

pub fn oracle_weights(losses: &[f64], beta: f64) -> Vec<f64> {
    let min = losses.iter().cloned().fold(f64::INFINITY, f64::min);
    let exps: Vec<f64> = losses.iter().map(|l| (-(l - min) / beta).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

pub fn oracle_entropy(weights: &[f64]) -> f64 {
    weights
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| -w * w.ln())
        .sum()
}

pub fn oracle_entropy_at(losses: &[f64], beta: f64) -> f64 {
    oracle_entropy(&oracle_weights(losses, beta))
}

/// Plain bisection on the monotone map `beta -> H(beta)` over a fixed wide
/// bracket. 200 halvings take the bracket width below any f64 resolution.
pub fn oracle_solve_beta(losses: &[f64], target: f64) -> f64 {
    let mut lo = 1e-12f64;
    let mut hi = 1e12f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if oracle_entropy_at(losses, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
