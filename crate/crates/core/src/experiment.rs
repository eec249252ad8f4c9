//! Completely randomized two-arm experiment over a fixed finite population
//! of potential outcomes.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact_inference::{DesignCounts, InferenceError};
use crate::ordering::{Arm, DeathPlacement, OrderedSample, OrderingError, Outcome};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Ordering(#[from] OrderingError),
}

/// Seeded generator used for every stochastic step.
pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` derived from `seed`.
pub fn rng_for_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One subject's pair of potential responses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialPair {
    pub treated: Outcome,
    pub control: Outcome,
}

/// The fixed population `{(r_T, r_C)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialOutcomes {
    ids: Vec<String>,
    subjects: Vec<PotentialPair>,
}

impl PotentialOutcomes {
    pub fn new(subjects: Vec<PotentialPair>) -> Result<Self, ExperimentError> {
        let ids = (1..=subjects.len()).map(|k| format!("s{k}")).collect();
        Self::with_ids(ids, subjects)
    }

    pub fn with_ids(
        ids: Vec<String>,
        subjects: Vec<PotentialPair>,
    ) -> Result<Self, ExperimentError> {
        if subjects.len() < 2 {
            return Err(ExperimentError::Domain(format!(
                "population needs at least 2 subjects, got {}",
                subjects.len()
            )));
        }
        if ids.len() != subjects.len() {
            return Err(ExperimentError::Domain(
                "id count differs from subject count".into(),
            ));
        }
        Ok(PotentialOutcomes { ids, subjects })
    }

    /// Population where treatment changes nothing: `r_T = r_C = x`.
    pub fn null_effect(values: &[Outcome]) -> Result<Self, ExperimentError> {
        Self::new(
            values
                .iter()
                .map(|&x| PotentialPair {
                    treated: x,
                    control: x,
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn subjects(&self) -> &[PotentialPair] {
        &self.subjects
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn control_outcomes(&self) -> impl Iterator<Item = Outcome> + '_ {
        self.subjects.iter().map(|s| s.control)
    }
}

/// Treatment indicators `Z`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    treated: Vec<bool>,
    count: usize,
}

impl Assignment {
    pub fn from_indicators(treated: Vec<bool>) -> Self {
        let count = treated.iter().filter(|&&z| z).count();
        Assignment { treated, count }
    }

    /// Assignment treating exactly the listed subjects.
    pub fn from_treated_set(population: usize, set: &[usize]) -> Result<Self, ExperimentError> {
        let mut z = vec![false; population];
        for &k in set {
            let slot = z.get_mut(k).ok_or_else(|| {
                ExperimentError::Domain(format!("subject {k} outside 0..{population}"))
            })?;
            if *slot {
                return Err(ExperimentError::Domain(format!("subject {k} listed twice")));
            }
            *slot = true;
        }
        Ok(Self::from_indicators(z))
    }

    pub fn len(&self) -> usize {
        self.treated.len()
    }

    pub fn is_empty(&self) -> bool {
        self.treated.is_empty()
    }

    pub fn treated_count(&self) -> usize {
        self.count
    }

    pub fn is_treated(&self, k: usize) -> bool {
        self.treated[k]
    }

    pub fn indicators(&self) -> &[bool] {
        &self.treated
    }

    pub fn treated_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.treated
            .iter()
            .enumerate()
            .filter_map(|(k, &z)| z.then_some(k))
    }
}

fn check_design(population: usize, treated: usize) -> Result<(), ExperimentError> {
    if treated == 0 || treated >= population {
        return Err(ExperimentError::Domain(format!(
            "need 1 <= n < N, got n={treated}, N={population}"
        )));
    }
    Ok(())
}

/// Uniform draw over all `C(N, n)` treated subsets.
pub fn randomize(
    population: usize,
    treated: usize,
    seed: u64,
) -> Result<Assignment, ExperimentError> {
    randomize_with(population, treated, &mut rng_for(seed))
}

pub fn randomize_with<R: Rng + ?Sized>(
    population: usize,
    treated: usize,
    rng: &mut R,
) -> Result<Assignment, ExperimentError> {
    check_design(population, treated)?;
    let mut z = vec![false; population];
    for k in index::sample(rng, population, treated) {
        z[k] = true;
    }
    Ok(Assignment {
        treated: z,
        count: treated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedSubject {
    pub id: String,
    pub arm: Arm,
    pub outcome: Outcome,
}

/// Observed data `{(R_i, Z_i)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedExperiment {
    subjects: Vec<ObservedSubject>,
}

impl ObservedExperiment {
    pub fn new(subjects: Vec<ObservedSubject>) -> Self {
        ObservedExperiment { subjects }
    }

    pub fn subjects(&self) -> &[ObservedSubject] {
        &self.subjects
    }

    pub fn arm_count(&self, arm: Arm) -> usize {
        self.subjects.iter().filter(|s| s.arm == arm).count()
    }

    pub fn treated_count(&self) -> usize {
        self.arm_count(Arm::Treated)
    }

    pub fn control_count(&self) -> usize {
        self.arm_count(Arm::Control)
    }

    pub fn design(&self) -> Result<DesignCounts, InferenceError> {
        for arm in [Arm::Treated, Arm::Control] {
            if self.arm_count(arm) == 0 {
                return Err(InferenceError::EmptyArm(arm));
            }
        }
        DesignCounts::new(self.treated_count(), self.control_count())
    }

    pub fn arm_outcomes(&self, arm: Arm) -> impl Iterator<Item = (usize, Outcome)> + '_ {
        self.subjects
            .iter()
            .enumerate()
            .filter(move |(_, s)| s.arm == arm)
            .map(|(k, s)| (k, s.outcome))
    }

    /// Responses of one arm, sorted under `p`.
    pub fn ordered(&self, arm: Arm, p: DeathPlacement) -> OrderedSample {
        OrderedSample::from_entries(self.arm_outcomes(arm), Some(arm), p)
    }

    /// Same data with the arm labels exchanged.
    pub fn swapped(&self) -> Self {
        ObservedExperiment {
            subjects: self
                .subjects
                .iter()
                .map(|s| ObservedSubject {
                    arm: s.arm.other(),
                    ..s.clone()
                })
                .collect(),
        }
    }

    pub fn death_count(&self, arm: Arm) -> usize {
        self.subjects
            .iter()
            .filter(|s| s.arm == arm && s.outcome.is_death())
            .count()
    }
}

/// Applies `R_i = r_Ti` if treated, else `r_Ci`.
pub fn observe(
    pop: &PotentialOutcomes,
    z: &Assignment,
) -> Result<ObservedExperiment, ExperimentError> {
    if pop.len() != z.len() {
        return Err(ExperimentError::Domain(format!(
            "assignment length {} differs from population size {}",
            z.len(),
            pop.len()
        )));
    }
    let subjects = pop
        .subjects
        .iter()
        .zip(&pop.ids)
        .zip(z.indicators())
        .map(|((pair, id), &treated)| ObservedSubject {
            id: id.clone(),
            arm: if treated { Arm::Treated } else { Arm::Control },
            outcome: if treated { pair.treated } else { pair.control },
        })
        .collect();
    Ok(ObservedExperiment { subjects })
}

/// `⟨R_T(i), R̃_C(i)⟩`: observed treated order statistic and the one the
/// same treated subjects would have shown under control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpsilonTruth {
    pub rank: usize,
    pub treated_stat: Outcome,
    pub counterfactual_stat: Outcome,
}

pub fn ground_truth_upsilon(
    pop: &PotentialOutcomes,
    z: &Assignment,
    i: usize,
    p: DeathPlacement,
) -> Result<UpsilonTruth, ExperimentError> {
    if pop.len() != z.len() {
        return Err(ExperimentError::Domain("assignment length mismatch".into()));
    }
    let n = z.treated_count();
    if i == 0 || i > n {
        return Err(ExperimentError::Domain(format!(
            "rank i={i} outside 1..={n}"
        )));
    }
    let treated: Vec<usize> = z.treated_indices().collect();
    let under_t = OrderedSample::from_entries(
        treated.iter().map(|&k| (k, pop.subjects[k].treated)),
        Some(Arm::Treated),
        p,
    );
    let under_c = OrderedSample::from_entries(
        treated.iter().map(|&k| (k, pop.subjects[k].control)),
        Some(Arm::Treated),
        p,
    );
    Ok(UpsilonTruth {
        rank: i,
        treated_stat: under_t.order_stat(i)?,
        counterfactual_stat: under_c.order_stat(i)?,
    })
}

/// Location/scale of a normal quality-of-life law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityLaw {
    pub location: f64,
    pub scale: f64,
}

fn default_correlation() -> f64 {
    0.5
}

fn default_decimals() -> Option<u32> {
    Some(2)
}

/// Recipe for a synthetic population.
///
/// Each subject draws one uniform `u`; it dies under treatment iff
/// `u < treated_death_prob` and under control iff `u < control_death_prob`.
/// Quality scores are correlated normals rounded to `decimals` places,
/// which produces ties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub population: usize,
    #[serde(default)]
    pub treated: Option<usize>,
    pub treated_death_prob: f64,
    pub control_death_prob: f64,
    pub treated_quality: QualityLaw,
    pub control_quality: QualityLaw,
    #[serde(default = "default_correlation")]
    pub correlation: f64,
    #[serde(default = "default_decimals")]
    pub decimals: Option<u32>,
    #[serde(default)]
    pub seed: u64,
}

impl SynthSpec {
    /// 650 subjects split 325/325 with death rates 16/325 and 111/325.
    pub fn demo() -> Self {
        SynthSpec {
            population: 650,
            treated: Some(325),
            treated_death_prob: 16.0 / 325.0,
            control_death_prob: 111.0 / 325.0,
            treated_quality: QualityLaw {
                location: 4.2,
                scale: 0.9,
            },
            control_quality: QualityLaw {
                location: 4.5,
                scale: 0.6,
            },
            correlation: 0.5,
            decimals: Some(2),
            seed: 2006,
        }
    }

    pub fn treated_count(&self) -> usize {
        self.treated.unwrap_or(self.population / 2)
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        let prob_ok = |p: f64| (0.0..=1.0).contains(&p);
        if !prob_ok(self.treated_death_prob) || !prob_ok(self.control_death_prob) {
            return Err(ExperimentError::Domain(
                "death probabilities must lie in [0, 1]".into(),
            ));
        }
        if !(-1.0..=1.0).contains(&self.correlation) {
            return Err(ExperimentError::Domain(
                "correlation must lie in [-1, 1]".into(),
            ));
        }
        for law in [self.treated_quality, self.control_quality] {
            if !law.location.is_finite() || !law.scale.is_finite() || law.scale < 0.0 {
                return Err(ExperimentError::Domain(
                    "quality law needs finite location and nonnegative scale".into(),
                ));
            }
        }
        if self.population < 2 {
            return Err(ExperimentError::Domain(
                "population needs at least 2 subjects".into(),
            ));
        }
        Ok(())
    }
}

pub fn synth_population(spec: &SynthSpec) -> Result<PotentialOutcomes, ExperimentError> {
    spec.validate()?;
    let mut rng = rng_for(spec.seed);
    let rho = spec.correlation;
    let round = |x: f64| match spec.decimals {
        Some(d) => {
            let f = 10f64.powi(d as i32);
            (x * f).round() / f
        }
        None => x,
    };
    let mut subjects = Vec::with_capacity(spec.population);
    for _ in 0..spec.population {
        let u: f64 = rng.random();
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let e_t = z1;
        let e_c = rho * z1 + (1.0 - rho * rho).sqrt() * z2;
        let treated = if u < spec.treated_death_prob {
            Outcome::Death
        } else {
            Outcome::quality(round(
                spec.treated_quality.location + spec.treated_quality.scale * e_t,
            ))?
        };
        let control = if u < spec.control_death_prob {
            Outcome::Death
        } else {
            Outcome::quality(round(
                spec.control_quality.location + spec.control_quality.scale * e_c,
            ))?
        };
        subjects.push(PotentialPair { treated, control });
    }
    PotentialOutcomes::new(subjects)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn q(x: f64) -> Outcome {
        Outcome::Quality(x)
    }

    fn pair(t: Outcome, c: Outcome) -> PotentialPair {
        PotentialPair {
            treated: t,
            control: c,
        }
    }

    #[test]
    fn randomize_rejects_bad_sizes() {
        assert!(randomize(5, 5, 1).is_err());
        assert!(randomize(5, 0, 1).is_err());
        assert!(randomize(5, 6, 1).is_err());
        let z = randomize(5, 2, 1).unwrap();
        assert_eq!(z.treated_count(), 2);
        assert_eq!(z, randomize(5, 2, 1).unwrap());
    }

    // 10 subsets of {0..5} of size 2, each with probability 1/10.
    #[test]
    fn randomize_uniform_over_subsets() {
        let draws = 100_000usize;
        let mut rng = rng_for(7);
        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut marginal = [0usize; 5];
        for _ in 0..draws {
            let z = randomize_with(5, 2, &mut rng).unwrap();
            let set: Vec<usize> = z.treated_indices().collect();
            for &k in &set {
                marginal[k] += 1;
            }
            *counts.entry(set).or_default() += 1;
        }
        assert_eq!(counts.len(), 10);
        let expected = draws as f64 / 10.0;
        let sigma = (draws as f64 * 0.1 * 0.9).sqrt();
        let mut chi2 = 0.0;
        for &c in counts.values() {
            assert!((c as f64 - expected).abs() < 4.0 * sigma);
            chi2 += (c as f64 - expected).powi(2) / expected;
        }
        // chi-square(9) upper 1e-6 quantile
        assert!(chi2 < 47.0, "chi2 = {chi2}");
        for m in marginal {
            let p = m as f64 / draws as f64;
            assert!((p - 0.4).abs() < 4.0 * (0.4 * 0.6 / draws as f64).sqrt());
        }
    }

    #[test]
    fn observe_applies_consistency() {
        let pop = PotentialOutcomes::new(vec![pair(q(1.0), q(2.0)), pair(Outcome::Death, q(3.0))])
            .unwrap();
        let z = Assignment::from_indicators(vec![true, false]);
        let obs = observe(&pop, &z).unwrap();
        assert_eq!(obs.subjects()[0].outcome, q(1.0));
        assert_eq!(obs.subjects()[0].arm, Arm::Treated);
        assert_eq!(obs.subjects()[1].outcome, q(3.0));
        let short = Assignment::from_indicators(vec![true]);
        assert!(observe(&pop, &short).is_err());
    }

    #[test]
    fn null_effect_observation_ignores_assignment() {
        let values = [q(1.0), Outcome::Death, q(0.5), q(2.0)];
        let pop = PotentialOutcomes::null_effect(&values).unwrap();
        for seed in 0..20 {
            let z = randomize(4, 2, seed).unwrap();
            let obs = observe(&pop, &z).unwrap();
            let got: Vec<Outcome> = obs.subjects().iter().map(|s| s.outcome).collect();
            assert_eq!(got, values);
            for i in 1..=2 {
                let u = ground_truth_upsilon(&pop, &z, i, DeathPlacement::DEFAULT).unwrap();
                assert_eq!(u.treated_stat, u.counterfactual_stat);
            }
        }
    }

    #[test]
    fn counterfactual_is_lost_when_arms_differ() {
        // Two populations differing only in subject 1's control response give
        // identical data whenever subject 1 is treated.
        let a = PotentialOutcomes::new(vec![
            pair(q(1.0), q(5.0)),
            pair(q(2.0), q(6.0)),
            pair(q(3.0), q(7.0)),
        ])
        .unwrap();
        let b = PotentialOutcomes::new(vec![
            pair(q(1.0), q(5.0)),
            pair(q(2.0), Outcome::Death),
            pair(q(3.0), q(7.0)),
        ])
        .unwrap();
        let z = Assignment::from_treated_set(3, &[1]).unwrap();
        assert_eq!(observe(&a, &z).unwrap(), observe(&b, &z).unwrap());
        let z = Assignment::from_treated_set(3, &[0]).unwrap();
        assert_ne!(observe(&a, &z).unwrap(), observe(&b, &z).unwrap());
    }

    #[test]
    fn upsilon_by_hand() {
        // treated = {0, 1}; their control values 9 and 4 -> sorted (4, 9)
        let pop = PotentialOutcomes::new(vec![
            pair(q(2.0), q(9.0)),
            pair(q(1.0), q(4.0)),
            pair(q(0.0), q(1.0)),
        ])
        .unwrap();
        let z = Assignment::from_treated_set(3, &[0, 1]).unwrap();
        let u1 = ground_truth_upsilon(&pop, &z, 1, DeathPlacement::DEFAULT).unwrap();
        assert_eq!((u1.treated_stat, u1.counterfactual_stat), (q(1.0), q(4.0)));
        let u2 = ground_truth_upsilon(&pop, &z, 2, DeathPlacement::DEFAULT).unwrap();
        assert_eq!((u2.treated_stat, u2.counterfactual_stat), (q(2.0), q(9.0)));
        assert!(ground_truth_upsilon(&pop, &z, 3, DeathPlacement::DEFAULT).is_err());
        assert!(ground_truth_upsilon(&pop, &z, 0, DeathPlacement::DEFAULT).is_err());
    }

    #[test]
    fn upsilon_ignores_control_subjects() {
        let mut rng = rng_for(3);
        for trial in 0..200 {
            let mut pop: Vec<PotentialPair> = (0..9)
                .map(|_| {
                    let t = if rng.random_bool(0.2) {
                        Outcome::Death
                    } else {
                        q(rng.random_range(0..6) as f64)
                    };
                    let c = if rng.random_bool(0.3) {
                        Outcome::Death
                    } else {
                        q(rng.random_range(0..6) as f64)
                    };
                    pair(t, c)
                })
                .collect();
            let z = randomize(9, 4, trial).unwrap();
            let p = DeathPlacement::at(2.5).unwrap();
            let before =
                ground_truth_upsilon(&PotentialOutcomes::new(pop.clone()).unwrap(), &z, 2, p)
                    .unwrap();
            for (k, s) in pop.iter_mut().enumerate() {
                if !z.is_treated(k) {
                    s.control = q(-100.0 - k as f64);
                }
            }
            let after =
                ground_truth_upsilon(&PotentialOutcomes::new(pop).unwrap(), &z, 2, p).unwrap();
            assert_eq!(before, after);
        }
    }

    #[test]
    fn synth_extremes() {
        let mut spec = SynthSpec::demo();
        spec.population = 200;
        spec.treated_death_prob = 0.0;
        spec.control_death_prob = 0.0;
        let pop = synth_population(&spec).unwrap();
        assert!(pop
            .subjects()
            .iter()
            .all(|s| !s.treated.is_death() && !s.control.is_death()));
        spec.treated_death_prob = 1.0;
        spec.control_death_prob = 1.0;
        let pop = synth_population(&spec).unwrap();
        assert!(pop
            .subjects()
            .iter()
            .all(|s| s.treated.is_death() && s.control.is_death()));
        spec.control_death_prob = 1.5;
        assert!(synth_population(&spec).is_err());
    }

    #[test]
    fn synth_is_deterministic() {
        let spec = SynthSpec::demo();
        assert_eq!(
            synth_population(&spec).unwrap(),
            synth_population(&spec).unwrap()
        );
        let mut other = spec.clone();
        other.seed += 1;
        assert_ne!(
            synth_population(&spec).unwrap(),
            synth_population(&other).unwrap()
        );
    }

    #[test]
    fn demo_death_counts_follow_binomial_law() {
        let spec = SynthSpec::demo();
        let pop = synth_population(&spec).unwrap();
        let z = randomize(650, 325, 11).unwrap();
        let obs = observe(&pop, &z).unwrap();
        for (arm, p) in [
            (Arm::Treated, 16.0f64 / 325.0),
            (Arm::Control, 111.0 / 325.0),
        ] {
            let mean = 325.0 * p;
            let sd = (325.0 * p * (1.0 - p)).sqrt();
            let got = obs.death_count(arm) as f64;
            assert!((got - mean).abs() <= 4.0 * sd, "{arm}: {got} vs {mean}");
        }
    }

    #[test]
    fn swapped_is_involution() {
        let pop = synth_population(&SynthSpec::demo()).unwrap();
        let obs = observe(&pop, &randomize(650, 325, 1).unwrap()).unwrap();
        assert_eq!(obs.swapped().swapped(), obs);
        assert_eq!(obs.swapped().treated_count(), obs.control_count());
    }
}
