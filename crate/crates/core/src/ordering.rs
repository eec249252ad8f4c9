//! Outcome space for quality of life censored by death, and the family of
//! total preorders obtained by cutting the quality scale at a point where
//! death is inserted.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrderingError {
    #[error("quality score must be finite, got {0}")]
    NonFiniteQuality(f64),
    #[error("death placement cut must not be NaN")]
    NanCut,
    #[error("rank {rank} out of range 1..={len}")]
    RankOutOfRange { rank: usize, len: usize },
    #[error("cannot parse death placement {0:?}; expected -inf, +inf or a decimal")]
    BadCut(String),
}

/// A response: either death, or a finite quality-of-life score.
///
/// Serialized as the string `"D"` or a JSON number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Death,
    Quality(f64),
}

impl Serialize for Outcome {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match *self {
            Outcome::Death => s.serialize_str("D"),
            Outcome::Quality(q) => s.serialize_f64(q),
        }
    }
}

impl<'de> Deserialize<'de> for Outcome {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Score(f64),
            Tag(String),
        }
        match Raw::deserialize(d)? {
            Raw::Score(q) => Outcome::quality(q).map_err(serde::de::Error::custom),
            Raw::Tag(t) if t == "D" => Ok(Outcome::Death),
            Raw::Tag(t) => Err(serde::de::Error::custom(format!(
                "expected \"D\" or a number, got {t:?}"
            ))),
        }
    }
}

impl Outcome {
    pub fn quality(score: f64) -> Result<Self, OrderingError> {
        if score.is_finite() {
            Ok(Outcome::Quality(score))
        } else {
            Err(OrderingError::NonFiniteQuality(score))
        }
    }

    pub fn is_death(&self) -> bool {
        matches!(self, Outcome::Death)
    }

    pub fn score(&self) -> Option<f64> {
        match *self {
            Outcome::Death => None,
            Outcome::Quality(q) => Some(q),
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Death => f.write_str("D"),
            Outcome::Quality(q) => write!(f, "{q}"),
        }
    }
}

/// Location of death within the quality scale.
///
/// A quality `q` ranks below death iff `q < cut`; a quality equal to the
/// cut ranks above death. `cut = -inf` is the default view (death below
/// every quality) and `cut = +inf` puts death above every quality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeathPlacement {
    cut: f64,
}

impl DeathPlacement {
    pub const DEFAULT: DeathPlacement = DeathPlacement {
        cut: f64::NEG_INFINITY,
    };
    pub const ABOVE_ALL: DeathPlacement = DeathPlacement { cut: f64::INFINITY };

    pub fn at(cut: f64) -> Result<Self, OrderingError> {
        if cut.is_nan() {
            return Err(OrderingError::NanCut);
        }
        Ok(DeathPlacement { cut })
    }

    pub fn cut(&self) -> f64 {
        self.cut
    }

    /// Orders two outcomes under this placement.
    pub fn compare(&self, x: &Outcome, y: &Outcome) -> Ordering {
        match (x, y) {
            (Outcome::Death, Outcome::Death) => Ordering::Equal,
            (Outcome::Quality(a), Outcome::Quality(b)) => a.total_cmp_finite(*b),
            (Outcome::Quality(q), Outcome::Death) => {
                if *q < self.cut {
                    Ordering::Less
                } else {
                    Ordering::Greater
                }
            }
            (Outcome::Death, Outcome::Quality(_)) => self.compare(y, x).reverse(),
        }
    }

    pub fn le(&self, x: &Outcome, y: &Outcome) -> bool {
        self.compare(x, y) != Ordering::Greater
    }
}

impl Default for DeathPlacement {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl fmt::Display for DeathPlacement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.cut == f64::NEG_INFINITY {
            f.write_str("-inf")
        } else if self.cut == f64::INFINITY {
            f.write_str("+inf")
        } else {
            write!(f, "{}", self.cut)
        }
    }
}

impl std::str::FromStr for DeathPlacement {
    type Err = OrderingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "-inf" | "-infinity" => return Ok(Self::DEFAULT),
            "+inf" | "inf" | "+infinity" | "infinity" => return Ok(Self::ABOVE_ALL),
            _ => {}
        }
        let cut: f64 = t
            .parse()
            .map_err(|_| OrderingError::BadCut(s.to_string()))?;
        if !cut.is_finite() {
            return Err(OrderingError::BadCut(s.to_string()));
        }
        DeathPlacement::at(cut)
    }
}

impl Serialize for DeathPlacement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

trait FiniteCmp {
    fn total_cmp_finite(self, other: Self) -> Ordering;
}

impl FiniteCmp for f64 {
    // Scores are finite, so partial_cmp never fails; -0.0 == 0.0.
    fn total_cmp_finite(self, other: f64) -> Ordering {
        self.partial_cmp(&other).unwrap_or(Ordering::Equal)
    }
}

/// Convenience wrapper around [`DeathPlacement::compare`].
pub fn compare(x: &Outcome, y: &Outcome, p: DeathPlacement) -> Ordering {
    p.compare(x, y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arm {
    #[serde(rename = "T")]
    Treated,
    #[serde(rename = "C")]
    Control,
}

impl Arm {
    pub fn other(self) -> Arm {
        match self {
            Arm::Treated => Arm::Control,
            Arm::Control => Arm::Treated,
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arm::Treated => "T",
            Arm::Control => "C",
        })
    }
}

/// Outcomes sorted ascending under a placement, keeping the subject index
/// each one came from.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedSample {
    arm: Option<Arm>,
    placement: DeathPlacement,
    entries: Vec<(usize, Outcome)>,
}

impl OrderedSample {
    /// Stable sort of `(subject, outcome)` pairs; ties keep input order.
    pub fn from_entries<I>(entries: I, arm: Option<Arm>, placement: DeathPlacement) -> Self
    where
        I: IntoIterator<Item = (usize, Outcome)>,
    {
        let mut entries: Vec<_> = entries.into_iter().collect();
        entries.sort_by(|x, y| placement.compare(&x.1, &y.1));
        OrderedSample {
            arm,
            placement,
            entries,
        }
    }

    pub fn arm(&self) -> Option<Arm> {
        self.arm
    }

    pub fn placement(&self) -> DeathPlacement {
        self.placement
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, Outcome)] {
        &self.entries
    }

    pub fn outcomes(&self) -> impl Iterator<Item = &Outcome> + '_ {
        self.entries.iter().map(|(_, o)| o)
    }

    /// The `k`-th smallest outcome, 1-based.
    pub fn order_stat(&self, k: usize) -> Result<Outcome, OrderingError> {
        if k == 0 || k > self.entries.len() {
            return Err(OrderingError::RankOutOfRange {
                rank: k,
                len: self.entries.len(),
            });
        }
        Ok(self.entries[k - 1].1)
    }
}

/// Sorts a plain list, using list positions as subject indices.
pub fn sort_outcomes(xs: &[Outcome], p: DeathPlacement) -> OrderedSample {
    OrderedSample::from_entries(xs.iter().copied().enumerate(), None, p)
}

pub fn order_stat(s: &OrderedSample, k: usize) -> Result<Outcome, OrderingError> {
    s.order_stat(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Ordering::*;

    fn q(x: f64) -> Outcome {
        Outcome::quality(x).unwrap()
    }

    fn cut(t: f64) -> DeathPlacement {
        DeathPlacement::at(t).unwrap()
    }

    #[test]
    fn quality_below_threshold_is_worse_than_death() {
        assert_eq!(compare(&q(3.23), &Outcome::Death, cut(3.5)), Less);
        assert_eq!(compare(&q(3.5), &Outcome::Death, cut(3.5)), Greater);
        assert_eq!(compare(&Outcome::Death, &q(3.49), cut(3.5)), Greater);
    }

    #[test]
    fn deaths_tie_under_every_placement() {
        for t in [f64::NEG_INFINITY, -1.0, 0.0, 3.5, f64::INFINITY] {
            assert_eq!(compare(&Outcome::Death, &Outcome::Death, cut(t)), Equal);
        }
    }

    #[test]
    fn default_placement_puts_death_first() {
        for x in [-1e300, -5.0, 0.0, 1.0, 1e300] {
            assert_eq!(
                compare(&Outcome::Death, &q(x), DeathPlacement::DEFAULT),
                Less
            );
            assert_eq!(
                compare(&Outcome::Death, &q(x), DeathPlacement::ABOVE_ALL),
                Greater
            );
        }
    }

    #[test]
    fn non_finite_rejected() {
        assert!(Outcome::quality(f64::NAN).is_err());
        assert!(Outcome::quality(f64::INFINITY).is_err());
        assert!(DeathPlacement::at(f64::NAN).is_err());
    }

    #[test]
    fn parse_placement() {
        assert_eq!(
            "-inf".parse::<DeathPlacement>().unwrap(),
            DeathPlacement::DEFAULT
        );
        assert_eq!(
            "+inf".parse::<DeathPlacement>().unwrap(),
            DeathPlacement::ABOVE_ALL
        );
        assert_eq!("3.5".parse::<DeathPlacement>().unwrap(), cut(3.5));
        assert!("nope".parse::<DeathPlacement>().is_err());
        assert!("NaN".parse::<DeathPlacement>().is_err());
        assert_eq!(DeathPlacement::DEFAULT.to_string(), "-inf");
        assert_eq!(cut(3.5).to_string(), "3.5");
    }

    #[test]
    fn control_deaths_come_first_by_default() {
        let mut xs = Vec::new();
        for k in 0..214 {
            xs.push(q(3.5 + k as f64 / 100.0));
            if k < 111 {
                xs.push(Outcome::Death);
            }
        }
        let s = sort_outcomes(&xs, DeathPlacement::DEFAULT);
        assert_eq!(s.len(), 325);
        assert!(s.outcomes().take(111).all(Outcome::is_death));
        assert!(!s.order_stat(112).unwrap().is_death());
        assert_eq!(s.order_stat(61).unwrap(), Outcome::Death);
    }

    #[test]
    fn deaths_slot_between_low_and_high_qualities() {
        let mut xs = Vec::new();
        xs.extend((0..243).map(|k| q(3.5 + k as f64 / 100.0)));
        xs.extend(std::iter::repeat_n(Outcome::Death, 16));
        xs.extend((0..66).map(|k| q(2.0 + k as f64 / 100.0)));
        let s = sort_outcomes(&xs, cut(3.5));
        for k in 1..=66 {
            assert!(!s.order_stat(k).unwrap().is_death());
        }
        for k in 67..=82 {
            assert!(s.order_stat(k).unwrap().is_death());
        }
        assert_eq!(s.order_stat(83).unwrap(), q(3.5));
    }

    #[test]
    fn empty_and_singleton() {
        let s = sort_outcomes(&[], DeathPlacement::DEFAULT);
        assert!(s.is_empty());
        assert_eq!(
            s.order_stat(1),
            Err(OrderingError::RankOutOfRange { rank: 1, len: 0 })
        );
        let s = sort_outcomes(&[q(2.0)], DeathPlacement::DEFAULT);
        assert_eq!(s.order_stat(1).unwrap(), q(2.0));
        assert!(matches!(
            s.order_stat(0),
            Err(OrderingError::RankOutOfRange { rank: 0, .. })
        ));
    }

    #[test]
    fn stable_on_ties() {
        let xs = [Outcome::Death, q(1.0), Outcome::Death, q(1.0)];
        let s = sort_outcomes(&xs, DeathPlacement::DEFAULT);
        let idx: Vec<usize> = s.entries().iter().map(|e| e.0).collect();
        assert_eq!(idx, vec![0, 2, 1, 3]);
    }

    #[test]
    fn exhaustive_total_preorder() {
        let mut pts: Vec<Outcome> = [-1.0, 0.0, 0.5, 1.0, 2.0].iter().map(|&x| q(x)).collect();
        pts.push(Outcome::Death);
        pts.push(Outcome::Death);
        for t in [
            f64::NEG_INFINITY,
            -2.0,
            0.0,
            0.5,
            0.75,
            2.0,
            3.0,
            f64::INFINITY,
        ] {
            let p = cut(t);
            for x in &pts {
                assert_eq!(p.compare(x, x), Equal);
                for y in &pts {
                    assert_eq!(p.compare(x, y), p.compare(y, x).reverse());
                    for z in &pts {
                        if p.le(x, y) && p.le(y, z) {
                            assert!(p.le(x, z), "{x} {y} {z} under {t}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn outcome_json() {
        assert_eq!(serde_json::to_string(&Outcome::Death).unwrap(), "\"D\"");
        assert_eq!(serde_json::to_string(&q(4.16)).unwrap(), "4.16");
        let back: Vec<Outcome> = serde_json::from_str("[\"D\", 3.81]").unwrap();
        assert_eq!(back, vec![Outcome::Death, q(3.81)]);
    }

    fn outcome_strategy() -> impl Strategy<Value = Outcome> {
        prop_oneof![
            1 => Just(Outcome::Death),
            4 => (-20i32..20).prop_map(|k| Outcome::Quality(k as f64 / 4.0)),
        ]
    }

    fn cut_strategy() -> impl Strategy<Value = DeathPlacement> {
        prop_oneof![
            Just(DeathPlacement::DEFAULT),
            Just(DeathPlacement::ABOVE_ALL),
            (-20i32..20).prop_map(|k| cut(k as f64 / 4.0 + 0.125)),
            (-20i32..20).prop_map(|k| cut(k as f64 / 4.0)),
        ]
    }

    // Strictly increasing map that keeps the side of the cut.
    fn rerank(x: f64, t: f64) -> f64 {
        if !t.is_finite() {
            return x.powi(3) + 2.0 * x + 7.0;
        }
        let d = x - t;
        if d >= 0.0 {
            t + d * d + 3.0 * d
        } else {
            t + d * 5.0
        }
    }

    proptest! {
        #[test]
        fn order_stat_permutation_invariant(
            xs in proptest::collection::vec(outcome_strategy(), 1..30),
            p in cut_strategy(),
            seed in any::<u64>(),
        ) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut ys = xs.clone();
            ys.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = sort_outcomes(&xs, p);
            let b = sort_outcomes(&ys, p);
            for k in 1..=xs.len() {
                let (u, v) = (a.order_stat(k).unwrap(), b.order_stat(k).unwrap());
                prop_assert_eq!(p.compare(&u, &v), Equal);
            }
            for w in a.outcomes().collect::<Vec<_>>().windows(2) {
                prop_assert!(p.le(w[0], w[1]));
            }
        }

        #[test]
        fn monotone_rerank_preserves_order(
            xs in proptest::collection::vec(outcome_strategy(), 1..25),
            p in cut_strategy(),
        ) {
            let map = |o: &Outcome| match *o {
                Outcome::Death => Outcome::Death,
                Outcome::Quality(x) => Outcome::Quality(rerank(x, p.cut())),
            };
            let ys: Vec<Outcome> = xs.iter().map(map).collect();
            for (x1, y1) in xs.iter().zip(&ys) {
                for (x2, y2) in xs.iter().zip(&ys) {
                    prop_assert_eq!(p.compare(x1, x2), p.compare(y1, y2));
                }
            }
            let a = sort_outcomes(&xs, p);
            let b = sort_outcomes(&ys, p);
            let ia: Vec<usize> = a.entries().iter().map(|e| e.0).collect();
            let ib: Vec<usize> = b.entries().iter().map(|e| e.0).collect();
            prop_assert_eq!(ia, ib);
        }
    }
}
