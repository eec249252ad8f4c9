//! Analysis reports across quantiles and death placements, rendered as
//! JSON, a text table, or CSV. All three renderings share the same number
//! strings.

use std::fmt::Write as _;

use num_rational::Ratio;
use serde::Serialize;
use serde_json::Value;

use crate::coverage_lab::CoverageRun;
use crate::decimal;
use crate::exact_inference::{
    check_alpha, classify, confidence_set_from_interval, find_interval, quantile_indices,
    DesignCounts, EffectCall, InferenceError, Policy, RankInterval,
};
use crate::experiment::ObservedExperiment;
use crate::ordering::{Arm, DeathPlacement, Outcome};

pub const SCHEMA_VERSION: u32 = 1;

pub const PLACEMENT_SEMANTICS: &str =
    "a quality q ranks above death iff q >= t; deaths tie with each other";

/// Canonical rendering of an outcome: `D` or the JSON form of the score.
pub fn fmt_outcome(o: &Outcome) -> String {
    match o {
        Outcome::Death => "D".to_string(),
        Outcome::Quality(q) => Value::from(*q).to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalSummary {
    pub a: usize,
    pub b: usize,
    pub printed_coverage: String,
    pub event_coverage: String,
    pub coverage_divergent: bool,
}

impl From<&RankInterval> for IntervalSummary {
    fn from(iv: &RankInterval) -> Self {
        IntervalSummary {
            a: iv.a,
            b: iv.b,
            printed_coverage: iv.printed_decimal(),
            event_coverage: iv.event_decimal(),
            coverage_divergent: iv.divergent(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowResult {
    #[serde(flatten)]
    pub interval: IntervalSummary,
    pub point: Outcome,
    pub lower: Outcome,
    pub upper: Outcome,
    pub call: EffectCall,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Infeasible {
    pub infeasible: bool,
    pub reason: String,
    pub max_event_coverage: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum RowOutcome {
    Ok(RowResult),
    Failed(Infeasible),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub quantile: String,
    pub rank: usize,
    #[serde(flatten)]
    pub outcome: RowOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlacementBlock {
    pub placement: DeathPlacement,
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub design: DesignCounts,
    pub deaths: ArmCounts,
    pub alpha: f64,
    pub policy: String,
    pub policy_note: Option<String>,
    pub placement_semantics: &'static str,
    pub blocks: Vec<PlacementBlock>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArmCounts {
    pub treated: usize,
    pub control: usize,
}

impl AnalysisReport {
    pub fn has_infeasible(&self) -> bool {
        self.blocks
            .iter()
            .flat_map(|b| &b.rows)
            .any(|r| matches!(r.outcome, RowOutcome::Failed(_)))
    }

    pub fn to_json(&self) -> String {
        canonical_json(self)
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let d = self.design;
        let _ = writeln!(
            s,
            "design: N={} n={} m={}  deaths: treated={} control={}",
            d.population(),
            d.treated(),
            d.control(),
            self.deaths.treated,
            self.deaths.control
        );
        let _ = writeln!(
            s,
            "alpha: {}  policy: {}",
            Value::from(self.alpha),
            self.policy
        );
        if let Some(note) = &self.policy_note {
            let _ = writeln!(s, "note: {note}");
        }
        let _ = writeln!(s, "placement t: {}", self.placement_semantics);
        for block in &self.blocks {
            let _ = writeln!(s);
            let _ = writeln!(s, "placement t = {}", block.placement);
            let _ = writeln!(
                s,
                "{:<8} {:>5} {:>12} {:>8} {:>22} {:>15} {:>15}  call",
                "quantile", "i", "(a, b)", "R_T(i)", "[R_C(a), R_C(b)]", "printed_cov", "event_cov"
            );
            for row in &block.rows {
                match &row.outcome {
                    RowOutcome::Ok(r) => {
                        let flag = if r.interval.coverage_divergent {
                            "*"
                        } else {
                            ""
                        };
                        let _ = writeln!(
                            s,
                            "{:<8} {:>5} {:>12} {:>8} {:>22} {:>15} {:>15}  {}",
                            row.quantile,
                            row.rank,
                            format!("({}, {})", r.interval.a, r.interval.b),
                            fmt_outcome(&r.point),
                            format!("[{}, {}]", fmt_outcome(&r.lower), fmt_outcome(&r.upper)),
                            format!("{}{}", r.interval.printed_coverage, flag),
                            r.interval.event_coverage,
                            r.call
                        );
                    }
                    RowOutcome::Failed(f) => {
                        let _ = writeln!(
                            s,
                            "{:<8} {:>5} INFEASIBLE: {}",
                            row.quantile, row.rank, f.reason
                        );
                    }
                }
            }
        }
        if self
            .blocks
            .iter()
            .flat_map(|b| &b.rows)
            .any(|r| matches!(&r.outcome, RowOutcome::Ok(x) if x.interval.coverage_divergent))
        {
            let _ = writeln!(s);
            let _ = writeln!(
                s,
                "* printed_cov sums j = a..b; event_cov is the exact closed-interval coverage (j = a..b-1) and is the guaranteed level"
            );
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let _ = w.write_record([
            "placement",
            "quantile",
            "i",
            "a",
            "b",
            "printed_coverage",
            "event_coverage",
            "coverage_divergent",
            "point",
            "lower",
            "upper",
            "call",
            "error",
        ]);
        for block in &self.blocks {
            for row in &block.rows {
                let p = block.placement.to_string();
                let rank = row.rank.to_string();
                let rec: Vec<String> = match &row.outcome {
                    RowOutcome::Ok(r) => vec![
                        p,
                        row.quantile.clone(),
                        rank,
                        r.interval.a.to_string(),
                        r.interval.b.to_string(),
                        r.interval.printed_coverage.clone(),
                        r.interval.event_coverage.clone(),
                        r.interval.coverage_divergent.to_string(),
                        fmt_outcome(&r.point),
                        fmt_outcome(&r.lower),
                        fmt_outcome(&r.upper),
                        r.call.to_string(),
                        String::new(),
                    ],
                    RowOutcome::Failed(f) => {
                        let mut v = vec![p, row.quantile.clone(), rank];
                        v.extend(std::iter::repeat_n(String::new(), 9));
                        v.push(f.reason.clone());
                        v
                    }
                };
                let _ = w.write_record(rec);
            }
        }
        String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
    }
}

/// Pretty JSON with keys sorted, so that parse + re-render is byte-identical.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("report types serialize");
    canonical_value(&v)
}

pub fn canonical_value(v: &Value) -> String {
    // serde_json's default map is ordered by key
    serde_json::to_string_pretty(v).expect("value serializes")
}

fn fraction_label(q: &Ratio<u64>) -> String {
    if *q.denom() == 1 {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Confidence sets for every `(placement, quantile)` pair.
///
/// Rank intervals depend only on the design, so each is found once and
/// reused across placements. A quantile whose interval cannot reach the
/// level becomes an infeasible row; other rows are unaffected.
pub fn analyze(
    obs: &ObservedExperiment,
    alpha: f64,
    placements: &[DeathPlacement],
    quantiles: &[Ratio<u64>],
    policy: Policy,
) -> Result<AnalysisReport, InferenceError> {
    let design = obs.design()?;
    let ranks = quantile_indices(design.treated(), quantiles)?;
    check_alpha(alpha)?;

    let intervals: Vec<Result<RankInterval, InferenceError>> = ranks
        .iter()
        .map(|&i| find_interval(i, design, alpha, policy))
        .collect();

    let blocks = placements
        .iter()
        .map(|&p| {
            let rows = quantiles
                .iter()
                .zip(&ranks)
                .zip(&intervals)
                .map(|((q, &i), iv)| {
                    let outcome = match iv {
                        Ok(iv) => {
                            match confidence_set_from_interval(obs, Arm::Treated, i, iv, alpha, p) {
                                Ok(cs) => RowOutcome::Ok(RowResult {
                                    interval: IntervalSummary::from(iv),
                                    point: cs.point,
                                    lower: cs.lower,
                                    upper: cs.upper,
                                    call: classify(&cs, p),
                                }),
                                Err(e) => RowOutcome::Failed(Infeasible {
                                    infeasible: false,
                                    reason: e.to_string(),
                                    max_event_coverage: None,
                                }),
                            }
                        }
                        Err(e) => RowOutcome::Failed(Infeasible {
                            infeasible: matches!(e, InferenceError::IntervalInfeasible { .. }),
                            reason: e.to_string(),
                            max_event_coverage: match e {
                                InferenceError::IntervalInfeasible {
                                    max_event_coverage, ..
                                } => Some(decimal::probability(max_event_coverage)),
                                _ => None,
                            },
                        }),
                    };
                    ReportRow {
                        quantile: fraction_label(q),
                        rank: i,
                        outcome,
                    }
                })
                .collect();
            PlacementBlock { placement: p, rows }
        })
        .collect();

    Ok(AnalysisReport {
        schema_version: SCHEMA_VERSION,
        design,
        deaths: ArmCounts {
            treated: obs.death_count(Arm::Treated),
            control: obs.death_count(Arm::Control),
        },
        alpha,
        policy: policy.to_string(),
        policy_note: policy.note().map(str::to_string),
        placement_semantics: PLACEMENT_SEMANTICS,
        blocks,
    })
}

/// Output of the `interval` command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalReport {
    pub schema_version: u32,
    pub design: DesignCounts,
    pub rank: usize,
    pub alpha: f64,
    pub policy: String,
    pub policy_note: Option<String>,
    #[serde(flatten)]
    pub interval: IntervalSummary,
}

impl IntervalReport {
    pub fn new(
        design: DesignCounts,
        rank: usize,
        alpha: f64,
        policy: Policy,
        iv: &RankInterval,
    ) -> Self {
        IntervalReport {
            schema_version: SCHEMA_VERSION,
            design,
            rank,
            alpha,
            policy: policy.to_string(),
            policy_note: policy.note().map(str::to_string),
            interval: iv.into(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "(a, b) = ({}, {})\nprinted_coverage = {} ({})\nevent_coverage = {} ({})\n",
            self.interval.a,
            self.interval.b,
            self.interval.printed_coverage,
            short3(&self.interval.printed_coverage),
            self.interval.event_coverage,
            short3(&self.interval.event_coverage),
        );
        if let Some(note) = &self.policy_note {
            let _ = writeln!(s, "note: {note}");
        }
        s
    }
}

fn short3(p: &str) -> String {
    decimal::parse_decimal(p)
        .map(|r| decimal::render_fixed(&r, 3))
        .unwrap_or_default()
}

/// Machine-readable result of a Monte Carlo coverage run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub schema_version: u32,
    pub kind: &'static str,
    pub design: DesignCounts,
    pub rank: usize,
    pub alpha: f64,
    pub policy: String,
    pub placement: DeathPlacement,
    pub seed: u64,
    pub sharp_null: bool,
    #[serde(flatten)]
    pub interval: IntervalSummary,
    pub trials: u64,
    pub hits: u64,
    pub estimate: f64,
    pub std_error: f64,
    pub lower_bound: f64,
    pub nominal_level: f64,
    pub meets_level_within_3se: bool,
}

impl CoverageReport {
    pub fn new(
        run: &CoverageRun,
        alpha: f64,
        policy: Policy,
        placement: DeathPlacement,
        seed: u64,
        sharp_null: bool,
    ) -> Self {
        let e = &run.estimate;
        CoverageReport {
            schema_version: SCHEMA_VERSION,
            kind: "coverage",
            design: run.design,
            rank: run.rank,
            alpha,
            policy: policy.to_string(),
            placement,
            seed,
            sharp_null,
            interval: (&run.interval).into(),
            trials: e.trials,
            hits: e.hits,
            estimate: e.estimate,
            std_error: e.std_error,
            lower_bound: e.lower_bound,
            nominal_level: 1.0 - alpha,
            meets_level_within_3se: e.estimate >= 1.0 - alpha - 3.0 * e.std_error,
        }
    }
}
