//! CSV ingestion and export.
//!
//! Observed data: header `id,arm,status,qol`, with `arm` in `{T, C}`,
//! `status` in `{alive, dead}`, and `qol` present iff the subject is alive.
//! Populations of potential outcomes: `id,status_t,qol_t,status_c,qol_c`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::experiment::{ObservedExperiment, ObservedSubject, PotentialOutcomes, PotentialPair};
use crate::ordering::{Arm, Outcome};

pub const OBSERVED_HEADER: [&str; 4] = ["id", "arm", "status", "qol"];
pub const POPULATION_HEADER: [&str; 5] = ["id", "status_t", "qol_t", "status_c", "qol_c"];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("unexpected header {found:?}; expected {expected}")]
    Header {
        found: Vec<String>,
        expected: String,
    },
    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("line {line}: subject {id} is dead but has a qol value")]
    QolOnDead { line: u64, id: String },
    #[error("line {line}: subject {id} is alive but has no qol value")]
    MissingQol { line: u64, id: String },
    #[error("population: {0}")]
    Population(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Alive,
    Dead,
}

/// One parsed line of the observed-data CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRow {
    pub id: String,
    pub arm: Arm,
    pub status: Status,
    pub qol: Option<f64>,
}

impl DatasetRow {
    pub fn outcome(&self) -> Outcome {
        match (self.status, self.qol) {
            (Status::Alive, Some(q)) => Outcome::Quality(q),
            _ => Outcome::Death,
        }
    }
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn parse_status(s: &str, line: u64) -> Result<Status, DataError> {
    match s.trim().to_ascii_lowercase().as_str() {
        "alive" => Ok(Status::Alive),
        "dead" => Ok(Status::Dead),
        other => Err(DataError::MalformedRow {
            line,
            reason: format!("status must be alive or dead, got {other:?}"),
        }),
    }
}

fn parse_qol(s: &str, line: u64) -> Result<Option<f64>, DataError> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(None);
    }
    match s.parse::<f64>() {
        Ok(q) if q.is_finite() => Ok(Some(q)),
        _ => Err(DataError::MalformedRow {
            line,
            reason: format!("qol must be a finite number, got {s:?}"),
        }),
    }
}

fn to_outcome(status: Status, qol: Option<f64>, id: &str, line: u64) -> Result<Outcome, DataError> {
    match (status, qol) {
        (Status::Alive, Some(q)) => Ok(Outcome::Quality(q)),
        (Status::Dead, None) => Ok(Outcome::Death),
        (Status::Dead, Some(_)) => Err(DataError::QolOnDead {
            line,
            id: id.to_string(),
        }),
        (Status::Alive, None) => Err(DataError::MissingQol {
            line,
            id: id.to_string(),
        }),
    }
}

fn parse_row(rec: &csv::StringRecord) -> Result<DatasetRow, DataError> {
    let line = line_of(rec);
    if rec.len() != 4 {
        return Err(DataError::MalformedRow {
            line,
            reason: format!("expected 4 fields, found {}", rec.len()),
        });
    }
    let id = rec[0].trim().to_string();
    if id.is_empty() {
        return Err(DataError::MalformedRow {
            line,
            reason: "empty id".into(),
        });
    }
    let arm = match rec[1].trim() {
        "T" | "t" => Arm::Treated,
        "C" | "c" => Arm::Control,
        other => {
            return Err(DataError::MalformedRow {
                line,
                reason: format!("arm must be T or C, got {other:?}"),
            })
        }
    };
    let status = parse_status(&rec[2], line)?;
    let qol = parse_qol(&rec[3], line)?;
    to_outcome(status, qol, &id, line)?;
    Ok(DatasetRow {
        id,
        arm,
        status,
        qol,
    })
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn header_of<R: Read>(rdr: &mut csv::Reader<R>) -> Result<Vec<String>, DataError> {
    Ok(rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_ascii_lowercase())
        .collect())
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<DatasetRow>, DataError> {
    let mut rdr = reader(input);
    let header = header_of(&mut rdr)?;
    if header != OBSERVED_HEADER {
        return Err(DataError::Header {
            found: header,
            expected: OBSERVED_HEADER.join(","),
        });
    }
    rdr.records().map(|rec| parse_row(&rec?)).collect()
}

pub fn ingest_reader<R: Read>(input: R) -> Result<ObservedExperiment, DataError> {
    let rows = read_rows(input)?;
    Ok(ObservedExperiment::new(
        rows.into_iter()
            .map(|r| ObservedSubject {
                outcome: r.outcome(),
                id: r.id,
                arm: r.arm,
            })
            .collect(),
    ))
}

fn open(path: &Path) -> Result<File, DataError> {
    File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn ingest_csv(path: impl AsRef<Path>) -> Result<ObservedExperiment, DataError> {
    ingest_reader(open(path.as_ref())?)
}

fn outcome_fields(o: &Outcome) -> (&'static str, String) {
    match o {
        Outcome::Death => ("dead", String::new()),
        Outcome::Quality(q) => ("alive", q.to_string()),
    }
}

pub fn write_observed<W: Write>(obs: &ObservedExperiment, out: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(OBSERVED_HEADER)?;
    for s in obs.subjects() {
        let (status, qol) = outcome_fields(&s.outcome);
        w.write_record([s.id.as_str(), &s.arm.to_string(), status, &qol])?;
    }
    w.flush().map_err(|e| DataError::Csv(e.into()))?;
    Ok(())
}

pub fn write_population<W: Write>(pop: &PotentialOutcomes, out: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(POPULATION_HEADER)?;
    for (id, s) in pop.ids().iter().zip(pop.subjects()) {
        let (st, qt) = outcome_fields(&s.treated);
        let (sc, qc) = outcome_fields(&s.control);
        w.write_record([id.as_str(), st, &qt, sc, &qc])?;
    }
    w.flush().map_err(|e| DataError::Csv(e.into()))?;
    Ok(())
}

fn read_population_records<R: Read>(
    mut rdr: csv::Reader<R>,
) -> Result<PotentialOutcomes, DataError> {
    let mut ids = Vec::new();
    let mut subjects = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        if rec.len() != 5 {
            return Err(DataError::MalformedRow {
                line,
                reason: format!("expected 5 fields, found {}", rec.len()),
            });
        }
        let id = rec[0].trim().to_string();
        let treated = to_outcome(
            parse_status(&rec[1], line)?,
            parse_qol(&rec[2], line)?,
            &id,
            line,
        )?;
        let control = to_outcome(
            parse_status(&rec[3], line)?,
            parse_qol(&rec[4], line)?,
            &id,
            line,
        )?;
        ids.push(id);
        subjects.push(PotentialPair { treated, control });
    }
    PotentialOutcomes::with_ids(ids, subjects).map_err(|e| DataError::Population(e.to_string()))
}

/// A coverage input: either a full population, or observed data lifted to
/// the population in which treatment has no effect on anyone.
#[derive(Debug, Clone)]
pub enum PopulationSource {
    Population(PotentialOutcomes),
    SharpNull {
        population: PotentialOutcomes,
        treated: usize,
    },
}

impl PopulationSource {
    pub fn population(&self) -> &PotentialOutcomes {
        match self {
            PopulationSource::Population(p) => p,
            PopulationSource::SharpNull { population, .. } => population,
        }
    }

    /// Treated count recorded in the observed data, if any.
    pub fn observed_treated(&self) -> Option<usize> {
        match self {
            PopulationSource::Population(_) => None,
            PopulationSource::SharpNull { treated, .. } => Some(*treated),
        }
    }
}

pub fn read_population_or_observed<R: Read>(input: R) -> Result<PopulationSource, DataError> {
    let mut rdr = reader(input);
    let header = header_of(&mut rdr)?;
    if header == POPULATION_HEADER {
        return read_population_records(rdr).map(PopulationSource::Population);
    }
    if header != OBSERVED_HEADER {
        return Err(DataError::Header {
            found: header,
            expected: format!(
                "{} or {}",
                OBSERVED_HEADER.join(","),
                POPULATION_HEADER.join(",")
            ),
        });
    }
    let rows: Vec<DatasetRow> = rdr
        .records()
        .map(|rec| parse_row(&rec?))
        .collect::<Result<_, _>>()?;
    let treated = rows.iter().filter(|r| r.arm == Arm::Treated).count();
    let values: Vec<Outcome> = rows.iter().map(DatasetRow::outcome).collect();
    let ids: Vec<String> = rows.into_iter().map(|r| r.id).collect();
    let subjects = values
        .into_iter()
        .map(|x| PotentialPair {
            treated: x,
            control: x,
        })
        .collect();
    let population = PotentialOutcomes::with_ids(ids, subjects)
        .map_err(|e| DataError::Population(e.to_string()))?;
    Ok(PopulationSource::SharpNull {
        population,
        treated,
    })
}

pub fn load_population_or_observed(path: impl AsRef<Path>) -> Result<PopulationSource, DataError> {
    read_population_or_observed(open(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(body: &str) -> Result<ObservedExperiment, DataError> {
        ingest_reader(format!("id,arm,status,qol\n{body}").as_bytes())
    }

    #[test]
    fn rows_become_outcomes() {
        let obs = parse("s1,T,dead,\ns2,C,alive,4.16\n").unwrap();
        assert_eq!(obs.subjects()[0].arm, Arm::Treated);
        assert_eq!(obs.subjects()[0].outcome, Outcome::Death);
        assert_eq!(obs.subjects()[1].arm, Arm::Control);
        assert_eq!(obs.subjects()[1].outcome, Outcome::Quality(4.16));
    }

    #[test]
    fn row_errors() {
        assert!(matches!(
            parse("s3,T,dead,2.0\n"),
            Err(DataError::QolOnDead { line: 2, .. })
        ));
        assert!(matches!(
            parse("s1,T,alive,4\ns4,C,alive,\n"),
            Err(DataError::MissingQol { line: 3, .. })
        ));
        assert!(matches!(
            parse("s5,X,alive,1\n"),
            Err(DataError::MalformedRow { line: 2, .. })
        ));
        assert!(matches!(
            parse("s6,T,zombie,1\n"),
            Err(DataError::MalformedRow { .. })
        ));
        assert!(matches!(
            parse("s7,T,alive,abc\n"),
            Err(DataError::MalformedRow { .. })
        ));
        assert!(matches!(
            parse("s8,T,alive,inf\n"),
            Err(DataError::MalformedRow { .. })
        ));
        assert!(matches!(
            parse("s9,T,alive\n"),
            Err(DataError::MalformedRow { .. })
        ));
        assert!(matches!(
            ingest_reader("a,b,c,d\n".as_bytes()),
            Err(DataError::Header { .. })
        ));
    }

    #[test]
    fn observed_round_trip() {
        let obs = parse("a,T,dead,\nb,C,alive,3.81\nc,T,alive,4.19\n").unwrap();
        let mut buf = Vec::new();
        write_observed(&obs, &mut buf).unwrap();
        assert_eq!(ingest_reader(buf.as_slice()).unwrap(), obs);
    }

    #[test]
    fn population_round_trip_and_sharp_null() {
        let pop = PotentialOutcomes::new(vec![
            PotentialPair {
                treated: Outcome::Quality(1.5),
                control: Outcome::Death,
            },
            PotentialPair {
                treated: Outcome::Death,
                control: Outcome::Quality(2.0),
            },
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_population(&pop, &mut buf).unwrap();
        match read_population_or_observed(buf.as_slice()).unwrap() {
            PopulationSource::Population(p) => assert_eq!(p, pop),
            other => panic!("{other:?}"),
        }
        let src = read_population_or_observed(
            "id,arm,status,qol\na,T,dead,\nb,C,alive,2\nc,C,alive,3\n".as_bytes(),
        )
        .unwrap();
        assert_eq!(src.observed_treated(), Some(1));
        let p = src.population();
        assert!(p.subjects().iter().all(|s| s.treated == s.control));
    }
}
