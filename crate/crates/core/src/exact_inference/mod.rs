//! Exact finite-population machinery: the rank law, coverage sums, rank
//! interval search, confidence sets and effect calls.

mod confidence;
mod counting;
mod interval;

use num_rational::BigRational;
use thiserror::Error;

use crate::ordering::{Arm, OrderingError};

pub use confidence::{
    classify, confidence_set, confidence_set_dual, confidence_set_from_interval, parse_fraction,
    quantile_indices, ConfidenceSet, EffectCall,
};
pub use counting::{binom, eq1_coverage, event_coverage, fw_pmf, DesignCounts, RankPmf};
pub use interval::{check_alpha, find_interval, max_event_coverage, Policy, RankInterval};

pub(crate) use interval::{find_interval_with, Alpha};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferenceError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error(
        "no rank interval reaches coverage {}: widest closed interval covers {} (printed sum {})",
        crate::decimal::probability(level),
        crate::decimal::probability(max_event_coverage),
        crate::decimal::probability(max_printed_coverage)
    )]
    IntervalInfeasible {
        level: Box<BigRational>,
        max_event_coverage: Box<BigRational>,
        max_printed_coverage: Box<BigRational>,
    },
    #[error("arm {0} has no subjects")]
    EmptyArm(Arm),
    #[error(transparent)]
    Ordering(#[from] OrderingError),
}
