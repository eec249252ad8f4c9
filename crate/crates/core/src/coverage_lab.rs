//! Ground truth for the exact machinery: exhaustive enumeration of every
//! assignment on small populations, and seeded Monte Carlo at full scale.

use itertools::Itertools;
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::exact_inference::{
    binom, confidence_set_from_interval, find_interval_with, Alpha, DesignCounts, InferenceError,
    Policy, RankInterval, RankPmf,
};
use crate::experiment::{
    ground_truth_upsilon, observe, randomize_with, rng_for_stream, ExperimentError,
    PotentialOutcomes,
};
use crate::ordering::{Arm, DeathPlacement, Outcome};

/// Largest number of assignments an enumeration will visit by default.
pub const DEFAULT_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("enumeration needs {needed} assignments, budget is {budget}")]
    BudgetExceeded { needed: BigUint, budget: u64 },
    #[error("trials must be at least 1")]
    NoTrials,
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}

fn check_budget(population: usize, treated: usize, budget: u64) -> Result<u64, LabError> {
    let needed = binom(population as u64, treated as u64);
    match needed.to_u64() {
        Some(k) if k <= budget => Ok(k),
        _ => Err(LabError::BudgetExceeded { needed, budget }),
    }
}

fn check_sizes(population: usize, treated: usize, i: usize) -> Result<(), LabError> {
    if treated == 0 || treated >= population {
        return Err(ExperimentError::Domain(format!(
            "need 1 <= n < N, got n={treated}, N={population}"
        ))
        .into());
    }
    if i == 0 || i > treated {
        return Err(ExperimentError::Domain(format!("rank i={i} outside 1..={treated}")).into());
    }
    Ok(())
}

/// Visits every treated subset of positions `0..population` in
/// lexicographic order, handing the ascending treated and control position
/// lists to `visit`.
fn for_each_assignment(
    population: usize,
    treated: usize,
    mut visit: impl FnMut(&[usize], &[usize]),
) {
    let mut control = Vec::with_capacity(population - treated);
    for set in (0..population).combinations(treated) {
        control.clear();
        let mut next = set.iter().peekable();
        for k in 0..population {
            if next.peek() == Some(&&k) {
                next.next();
            } else {
                control.push(k);
            }
        }
        visit(&set, &control);
    }
}

/// Exact fraction of assignments for which `R_C(a) ⪯ R̃_C(i) ⪯ R_C(b)`.
///
/// The event depends only on control responses, so units are pre-sorted by
/// `r_C` once; treated and control positions then come out already ordered.
pub fn enumerate_event_coverage(
    pop: &PotentialOutcomes,
    treated: usize,
    i: usize,
    a: usize,
    b: usize,
    p: DeathPlacement,
    budget: u64,
) -> Result<BigRational, LabError> {
    let population = pop.len();
    check_sizes(population, treated, i)?;
    let control = population - treated;
    if a == 0 || a > b || b > control {
        return Err(InferenceError::Domain(format!(
            "control ranks need 1 <= a <= b <= m, got a={a}, b={b}, m={control}"
        ))
        .into());
    }
    let total = check_budget(population, treated, budget)?;

    let mut values: Vec<Outcome> = pop.control_outcomes().collect();
    values.sort_by(|x, y| p.compare(x, y));

    let mut hits = 0u64;
    for_each_assignment(population, treated, |t, c| {
        let target = &values[t[i - 1]];
        if p.le(&values[c[a - 1]], target) && p.le(target, &values[c[b - 1]]) {
            hits += 1;
        }
    });
    Ok(BigRational::new(BigInt::from(hits), BigInt::from(total)))
}

/// Number of assignments with exactly `j` controls strictly below the
/// `i`-th smallest treated rank, for untied ranks `1..=N`; index `j`.
pub fn enumerate_counts(
    population: usize,
    treated: usize,
    i: usize,
    budget: u64,
) -> Result<Vec<u64>, LabError> {
    check_sizes(population, treated, i)?;
    check_budget(population, treated, budget)?;
    let mut counts = vec![0u64; population - treated + 1];
    for_each_assignment(population, treated, |t, _| {
        // position t[i-1] has t[i-1] units below it, i-1 of them treated
        counts[t[i - 1] - (i - 1)] += 1;
    });
    Ok(counts)
}

/// Exact law of `j` by enumeration.
pub fn enumerate_pmf(
    population: usize,
    treated: usize,
    i: usize,
    budget: u64,
) -> Result<Vec<BigRational>, LabError> {
    let counts = enumerate_counts(population, treated, i, budget)?;
    let total: u64 = counts.iter().sum();
    Ok(counts
        .into_iter()
        .map(|c| BigRational::new(BigInt::from(c), BigInt::from(total)))
        .collect())
}

/// Monte Carlo estimate of `Pr{R̃_C(i) ∈ [lower, upper]}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageEstimate {
    pub trials: u64,
    pub hits: u64,
    pub estimate: f64,
    pub std_error: f64,
    /// One-sided 95% lower confidence bound, normal approximation.
    pub lower_bound: f64,
}

impl CoverageEstimate {
    pub fn from_counts(trials: u64, hits: u64) -> Self {
        assert!(hits <= trials && trials > 0);
        let estimate = hits as f64 / trials as f64;
        let std_error = (estimate * (1.0 - estimate) / trials as f64).sqrt();
        CoverageEstimate {
            trials,
            hits,
            estimate,
            std_error,
            lower_bound: (estimate - 1.644_853_626_951_472_2 * std_error).max(0.0),
        }
    }
}

/// Everything a coverage run produced: the rank interval used in every
/// trial plus the estimate.
#[derive(Debug, Clone)]
pub struct CoverageRun {
    pub design: DesignCounts,
    pub rank: usize,
    pub interval: RankInterval,
    pub estimate: CoverageEstimate,
}

/// Repeats randomize → observe → confidence set → compare with the true
/// counterfactual order statistic. Trial `t` uses stream `t` of `seed`, and
/// hits are summed, so the result does not depend on thread count.
#[allow(clippy::too_many_arguments)]
pub fn mc_coverage(
    pop: &PotentialOutcomes,
    treated: usize,
    i: usize,
    alpha: f64,
    p: DeathPlacement,
    policy: Policy,
    trials: u64,
    seed: u64,
) -> Result<CoverageRun, LabError> {
    if trials == 0 {
        return Err(LabError::NoTrials);
    }
    let population = pop.len();
    check_sizes(population, treated, i)?;
    let design = DesignCounts::new(treated, population - treated)?;
    let pmf = RankPmf::new(i, design)?;
    let interval = find_interval_with(&pmf, &Alpha::new(alpha)?, policy)?;

    let one = |t: u64| -> Result<u64, LabError> {
        let mut rng = rng_for_stream(seed, t);
        let z = randomize_with(population, treated, &mut rng)?;
        let obs = observe(pop, &z)?;
        let cs = confidence_set_from_interval(&obs, Arm::Treated, i, &interval, alpha, p)?;
        let truth = ground_truth_upsilon(pop, &z, i, p)?;
        Ok(u64::from(cs.contains(&truth.counterfactual_stat)))
    };
    let hits = (0..trials)
        .into_par_iter()
        .map(one)
        .try_reduce(|| 0, |x, y| Ok(x + y))?;

    Ok(CoverageRun {
        design,
        rank: i,
        interval,
        estimate: CoverageEstimate::from_counts(trials, hits),
    })
}
