//! Exact law of the number of control units falling strictly below the
//! `i`-th smallest counterfactual control response of the treated group.
//!
//! With untied control responses and `n` of `N` units treated uniformly at
//! random, exactly `C(m+n-i-j, m-j) * C(i+j-1, j)` of the `C(N, m)`
//! assignments put `j` controls below that order statistic: `i+j-1` units
//! sit below it (`i-1` treated, `j` control) and `N-i-j` above it
//! (`n-i` treated, `m-j` control).

use std::ops::Range;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use super::InferenceError;
use crate::decimal;

/// `C(u, k)`, zero when `k > u`.
pub fn binom(u: u64, k: u64) -> BigUint {
    if k > u {
        return BigUint::zero();
    }
    let k = k.min(u - k);
    let mut acc = BigUint::one();
    for t in 1..=k {
        // C(u-k+t, t) = C(u-k+t-1, t-1) * (u-k+t) / t, exact at every step.
        acc *= u - k + t;
        acc /= t;
    }
    acc
}

/// Population size and arm sizes of a completely randomized design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct DesignCounts {
    #[serde(rename = "N")]
    population: usize,
    #[serde(rename = "n")]
    treated: usize,
    #[serde(rename = "m")]
    control: usize,
}

impl DesignCounts {
    pub fn new(treated: usize, control: usize) -> Result<Self, InferenceError> {
        if treated == 0 || control == 0 {
            return Err(InferenceError::Domain(format!(
                "both arms need at least one unit (n={treated}, m={control})"
            )));
        }
        Ok(DesignCounts {
            population: treated + control,
            treated,
            control,
        })
    }

    pub fn population(&self) -> usize {
        self.population
    }

    pub fn treated(&self) -> usize {
        self.treated
    }

    pub fn control(&self) -> usize {
        self.control
    }

    /// Same population with the arm labels exchanged.
    pub fn swapped(&self) -> Self {
        DesignCounts {
            population: self.population,
            treated: self.control,
            control: self.treated,
        }
    }

    pub(crate) fn check_rank(&self, i: usize) -> Result<(), InferenceError> {
        if i == 0 || i > self.treated {
            return Err(InferenceError::Domain(format!(
                "treated rank i={i} outside 1..={}",
                self.treated
            )));
        }
        Ok(())
    }

    pub(crate) fn check_ranks(&self, a: usize, b: usize) -> Result<(), InferenceError> {
        if a == 0 || a > b || b > self.control {
            return Err(InferenceError::Domain(format!(
                "control ranks need 1 <= a <= b <= m, got a={a}, b={b}, m={}",
                self.control
            )));
        }
        Ok(())
    }
}

/// Integer weights `w_j = C(m+n-i-j, m-j) C(i+j-1, j)` for `j = 0..=m`,
/// together with their prefix sums. Probabilities are `w_j / C(N, m)`.
#[derive(Debug, Clone)]
pub struct RankPmf {
    rank: usize,
    design: DesignCounts,
    weights: Vec<BigUint>,
    // prefix[k] = w_0 + ... + w_{k-1}
    prefix: Vec<BigUint>,
    total: BigUint,
}

impl RankPmf {
    pub fn new(i: usize, design: DesignCounts) -> Result<Self, InferenceError> {
        design.check_rank(i)?;
        let (big_n, m) = (design.population as u64, design.control as u64);
        let rank = i as u64;

        let mut weights = Vec::with_capacity(design.control + 1);
        let mut above = binom(big_n - rank, m);
        let mut below = BigUint::one();
        for j in 0..=m {
            weights.push(&above * &below);
            if j < m {
                // C(u-1, k-1) = C(u, k) * k / u with u = N-i-j, k = m-j
                above = above * (m - j) / (big_n - rank - j);
                // C(i+j, j+1) = C(i+j-1, j) * (i+j) / (j+1)
                below = below * (rank + j) / (j + 1);
            }
        }

        let mut prefix = Vec::with_capacity(weights.len() + 1);
        let mut acc = BigUint::zero();
        prefix.push(acc.clone());
        for w in &weights {
            acc += w;
            prefix.push(acc.clone());
        }
        Ok(RankPmf {
            rank: i,
            design,
            weights,
            prefix,
            total: binom(big_n, m),
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn design(&self) -> DesignCounts {
        self.design
    }

    pub fn weights(&self) -> &[BigUint] {
        &self.weights
    }

    /// `C(N, m)`, the number of equally likely assignments.
    pub fn total(&self) -> &BigUint {
        &self.total
    }

    pub fn prob(&self, j: usize) -> Result<BigRational, InferenceError> {
        let w = self.weights.get(j).ok_or_else(|| {
            InferenceError::Domain(format!("j={j} outside 0..={}", self.design.control))
        })?;
        Ok(decimal::ratio_of(w, &self.total))
    }

    pub fn probs(&self) -> Vec<BigRational> {
        self.weights
            .iter()
            .map(|w| decimal::ratio_of(w, &self.total))
            .collect()
    }

    /// Sum of weights over `j` in `range` (clamped to `0..=m`).
    pub fn mass(&self, range: Range<usize>) -> BigUint {
        let hi = range.end.min(self.weights.len());
        let lo = range.start.min(hi);
        &self.prefix[hi] - &self.prefix[lo]
    }

    /// Printed-sum coverage: `j = a..=b`.
    pub fn printed_coverage(&self, a: usize, b: usize) -> Result<BigRational, InferenceError> {
        self.design.check_ranks(a, b)?;
        Ok(decimal::ratio_of(&self.mass(a..b + 1), &self.total))
    }

    /// Probability that `[R_C(a), R_C(b)]` contains the counterfactual order
    /// statistic when control responses are untied: `a <= j <= b-1`.
    pub fn event_coverage(&self, a: usize, b: usize) -> Result<BigRational, InferenceError> {
        self.design.check_ranks(a, b)?;
        Ok(decimal::ratio_of(&self.mass(a..b), &self.total))
    }
}

/// `P(j controls below the i-th counterfactual control order statistic)`.
pub fn fw_pmf(j: usize, i: usize, d: DesignCounts) -> Result<BigRational, InferenceError> {
    if j > d.control {
        return Err(InferenceError::Domain(format!(
            "j={j} outside 0..={}",
            d.control
        )));
    }
    d.check_rank(i)?;
    let m = d.control as u64;
    let n = d.treated as u64;
    let (i, j) = (i as u64, j as u64);
    let w = binom(m + n - i - j, m - j) * binom(i + j - 1, j);
    Ok(decimal::ratio_of(&w, &binom(m + n, m)))
}

/// Sum of [`fw_pmf`] over `j = a..=b`, as the coverage sum is usually written.
pub fn eq1_coverage(
    a: usize,
    b: usize,
    i: usize,
    d: DesignCounts,
) -> Result<BigRational, InferenceError> {
    d.check_ranks(a, b)?;
    RankPmf::new(i, d)?.printed_coverage(a, b)
}

/// Exact probability of `R_C(a) <= counterfactual R_C(i) <= R_C(b)` under
/// untied control responses.
pub fn event_coverage(
    a: usize,
    b: usize,
    i: usize,
    d: DesignCounts,
) -> Result<BigRational, InferenceError> {
    d.check_ranks(a, b)?;
    RankPmf::new(i, d)?.event_coverage(a, b)
}
