use std::cmp::Ordering;

use num_rational::Ratio;
use serde::Serialize;

use super::interval::{find_interval, Policy, RankInterval};
use super::InferenceError;
use crate::experiment::ObservedExperiment;
use crate::ordering::{Arm, DeathPlacement, Outcome};

/// `{⟨point, w⟩ : w ∈ [lower, upper]}` for the pair formed by an observed
/// order statistic of one arm and the same-rank counterfactual order
/// statistic of that arm under the other condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceSet {
    pub rank: usize,
    /// Arm whose observed order statistic is the point. `Treated` for the
    /// usual set; `Control` for the arms-swapped one.
    pub point_arm: Arm,
    pub point: Outcome,
    pub lower: Outcome,
    pub upper: Outcome,
    pub interval: RankInterval,
    pub alpha: f64,
    pub placement: DeathPlacement,
}

impl ConfidenceSet {
    pub fn contains(&self, w: &Outcome) -> bool {
        self.placement.le(&self.lower, w) && self.placement.le(w, &self.upper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectCall {
    TreatedSuperior,
    ControlSuperior,
    Equal,
    Inconclusive,
}

impl std::fmt::Display for EffectCall {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EffectCall::TreatedSuperior => "treated_superior",
            EffectCall::ControlSuperior => "control_superior",
            EffectCall::Equal => "equal",
            EffectCall::Inconclusive => "inconclusive",
        })
    }
}

/// Builds the set from a precomputed rank interval. The interval depends
/// only on the design, so Monte Carlo loops compute it once.
pub fn confidence_set_from_interval(
    obs: &ObservedExperiment,
    point_arm: Arm,
    rank: usize,
    interval: &RankInterval,
    alpha: f64,
    p: DeathPlacement,
) -> Result<ConfidenceSet, InferenceError> {
    let own = obs.ordered(point_arm, p);
    let other = obs.ordered(point_arm.other(), p);
    if own.is_empty() {
        return Err(InferenceError::EmptyArm(point_arm));
    }
    if other.is_empty() {
        return Err(InferenceError::EmptyArm(point_arm.other()));
    }
    Ok(ConfidenceSet {
        rank,
        point_arm,
        point: own.order_stat(rank)?,
        lower: other.order_stat(interval.a)?,
        upper: other.order_stat(interval.b)?,
        interval: interval.clone(),
        alpha,
        placement: p,
    })
}

fn build(
    obs: &ObservedExperiment,
    point_arm: Arm,
    rank: usize,
    alpha: f64,
    p: DeathPlacement,
    policy: Policy,
) -> Result<ConfidenceSet, InferenceError> {
    let design = obs.design()?;
    let design = match point_arm {
        Arm::Treated => design,
        Arm::Control => design.swapped(),
    };
    let interval = find_interval(rank, design, alpha, policy)?;
    confidence_set_from_interval(obs, point_arm, rank, &interval, alpha, p)
}

/// Set for `⟨R_T(i), R̃_C(i)⟩` with endpoints taken from the control arm.
pub fn confidence_set(
    obs: &ObservedExperiment,
    i: usize,
    alpha: f64,
    p: DeathPlacement,
    policy: Policy,
) -> Result<ConfidenceSet, InferenceError> {
    build(obs, Arm::Treated, i, alpha, p, policy)
}

/// Set for `⟨R_C(j), R̃_T(j)⟩`: the control arm's `j`-th order statistic and
/// the one those controls would have shown under treatment.
pub fn confidence_set_dual(
    obs: &ObservedExperiment,
    j: usize,
    alpha: f64,
    p: DeathPlacement,
    policy: Policy,
) -> Result<ConfidenceSet, InferenceError> {
    build(obs, Arm::Control, j, alpha, p, policy)
}

pub fn classify(cs: &ConfidenceSet, p: DeathPlacement) -> EffectCall {
    let (better, worse) = match cs.point_arm {
        Arm::Treated => (EffectCall::TreatedSuperior, EffectCall::ControlSuperior),
        Arm::Control => (EffectCall::ControlSuperior, EffectCall::TreatedSuperior),
    };
    if p.compare(&cs.point, &cs.upper) == Ordering::Greater {
        better
    } else if p.compare(&cs.point, &cs.lower) == Ordering::Less {
        worse
    } else if p.compare(&cs.point, &cs.lower) == Ordering::Equal
        && p.compare(&cs.point, &cs.upper) == Ordering::Equal
    {
        EffectCall::Equal
    } else {
        EffectCall::Inconclusive
    }
}

/// Parses `"1/8"` or `"0.125"` into an exact fraction.
pub fn parse_fraction(s: &str) -> Result<Ratio<u64>, InferenceError> {
    let bad = || InferenceError::Domain(format!("cannot parse quantile {s:?}"));
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: u64 = n.trim().parse().map_err(|_| bad())?;
        let d: u64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Ratio::new(n, d));
    }
    let r = crate::decimal::parse_decimal(s).ok_or_else(bad)?;
    use num_traits::ToPrimitive;
    let n = r.numer().to_u64().ok_or_else(bad)?;
    let d = r.denom().to_u64().ok_or_else(bad)?;
    Ok(Ratio::new(n, d))
}

/// Ranks for quantile fractions in an arm of size `n`.
///
/// For `q <= 1/2` the rank is `q(n+1)` rounded half up; upper quantiles
/// mirror the lower ones, `n + 1 - rank(1 - q)`, so that paired quantiles
/// sit symmetrically.
pub fn quantile_indices(n: usize, quantiles: &[Ratio<u64>]) -> Result<Vec<usize>, InferenceError> {
    if n == 0 {
        return Err(InferenceError::Domain("arm size must be positive".into()));
    }
    let half = Ratio::new(1u64, 2);
    let lower_rank = |q: Ratio<u64>| -> usize {
        let x = q * (n as u64 + 1) + half;
        (x.to_integer() as usize).clamp(1, n)
    };
    quantiles
        .iter()
        .map(|&q| {
            if q <= Ratio::from_integer(0) || q >= Ratio::from_integer(1) {
                return Err(InferenceError::Domain(format!(
                    "quantile {q} outside (0, 1)"
                )));
            }
            Ok(if q <= half {
                lower_rank(q)
            } else {
                n + 1 - lower_rank(Ratio::from_integer(1) - q)
            })
        })
        .collect()
}
