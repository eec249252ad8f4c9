//! Exact randomization-based confidence sets for quantiles of counterfactual
//! outcomes in two-arm experiments where quality of life is censored by
//! death.
//!
//! Death is placed in the quality scale by a [`DeathPlacement`] cut; every
//! analysis is repeated per placement. Probabilities are exact rationals.

pub mod coverage_lab;
pub mod dataset;
pub mod decimal;
pub mod exact_inference;
pub mod experiment;
pub mod ordering;
pub mod report;

pub use exact_inference::{
    classify, confidence_set, confidence_set_dual, eq1_coverage, event_coverage, find_interval,
    fw_pmf, quantile_indices, ConfidenceSet, DesignCounts, EffectCall, InferenceError, Policy,
    RankInterval,
};
pub use experiment::{
    ground_truth_upsilon, observe, randomize, synth_population, Assignment, ObservedExperiment,
    PotentialOutcomes, SynthSpec, UpsilonTruth,
};
pub use ordering::{compare, sort_outcomes, Arm, DeathPlacement, OrderedSample, Outcome};
