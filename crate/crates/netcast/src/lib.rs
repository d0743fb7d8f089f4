//! Entropy-annealed update scheduling for groups of trainable learners,
//! plus the evaluation metrics for attacks that count success on *any*
//! member of a model group ("wide net casting").
//!
//! The crate is organized around four modules:
//!
//! - [`annealing`]: Boltzmann weights, entropy thresholds, and the
//!   temperature solve that pins the weight entropy to an exact target.
//! - [`scheduler`]: the joint-training driver and the catalog of update
//!   strategies (baseline, naive assignment rules, heuristic variants, and
//!   the entropy-annealed scheme).
//! - [`metrics`]: ASR / WASR / toxicity metrics, output selection,
//!   attack-log ingestion, and multi-run aggregation.
//! - [`testbed`]: a desk-scale synthetic stand-in for multi-target attack
//!   experiments: analytic generators, synthetic target models with
//!   cluster-structured vulnerable regions, and specialization measurement.

pub mod annealing;
pub mod metrics;
pub mod scheduler;
pub mod testbed;
