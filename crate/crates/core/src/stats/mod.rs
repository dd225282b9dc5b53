//! Human-response tables and their analysis: naming-time cleaning,
//! Pearson correlation, balanced fixed-effects ANOVA, preference rates and
//! the correlation report against the automatic measures.

mod anova;
mod clean;
mod correlation;
mod preference;
mod report;

use std::fmt;
use std::io;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ObjectType;
use crate::simplify::{Algorithm, Version};

pub use anova::{anova, f_survival, AnovaInput, AnovaRow, AnovaTable, Scheme};
pub use clean::{clean_naming, CleanedNaming, ExclusionReport};
pub use correlation::{pearson, t_two_sided_p, Correlation};
pub use preference::{preference_rates, PreferenceRate, PreferenceSummary};
pub use report::{
    automatic_anovas, correlate_report, experimental_anovas, format_anova_table, format_correlation_tables,
    format_experimental_anovas, write_correlations_csv, CorrelationReport, CorrelationRow, ExperimentalAnova, Pooling,
    ReportOptions, SubsetKind, Variable, P_MARGINAL, P_SIGNIFICANT,
};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("no data")]
    Empty,
    #[error("expected {expected} responses only, found a {found} response")]
    WrongTask { expected: Task, found: Task },
    #[error("need at least {needed} paired values, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("correlation undefined: a series has zero variance")]
    ZeroVariance,
    #[error("unbalanced design: {0}")]
    Unbalanced(String),
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error("no responses for condition {0}")]
    EmptyCondition(String),
    #[error("unmatched join keys: {}", .0.join(", "))]
    Unmatched(Vec<String>),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Task {
    Naming,
    Rating,
    Preference,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Naming, Task::Rating, Task::Preference];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Naming => "NAMING",
            Task::Rating => "RATING",
            Task::Preference => "PREFERENCE",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Task::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown task `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SimpType {
    Qslim,
    Vclust,
    None,
}

impl SimpType {
    pub fn as_str(self) -> &'static str {
        match self {
            SimpType::Qslim => "QSLIM",
            SimpType::Vclust => "VCLUST",
            SimpType::None => "NONE",
        }
    }

    pub fn algorithm(self) -> Option<Algorithm> {
        match self {
            SimpType::Qslim => Some(Algorithm::Qem),
            SimpType::Vclust => Some(Algorithm::Vclust),
            SimpType::None => None,
        }
    }

    pub fn of(version: Version) -> SimpType {
        match version.algorithm() {
            Some(Algorithm::Qem) => SimpType::Qslim,
            Some(Algorithm::Vclust) => SimpType::Vclust,
            None => SimpType::None,
        }
    }
}

impl fmt::Display for SimpType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SimpType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "QSLIM" | "Q" => Ok(SimpType::Qslim),
            "VCLUST" | "V" => Ok(SimpType::Vclust),
            "NONE" | "S" | "" => Ok(SimpType::None),
            other => Err(format!("unknown simp_type `{other}`")),
        }
    }
}

/// What a participant answered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseValue {
    /// Naming latency in milliseconds.
    NamingMs(f64),
    /// Likeness to the standard, 1 (least) to 7 (most).
    Rating(u8),
    /// The simplifier whose version was preferred.
    Choice(SimpType),
}

/// One row of `human.csv`.
///
/// Naming and rating rows carry the simplifier and level of the version
/// shown (rated). Preference rows carry the level of the compared pair and,
/// in `simp_type`, the simplifier whose version was on the left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanResponse {
    pub participant: u32,
    pub object: String,
    pub object_type: ObjectType,
    pub task: Task,
    pub simp_type: SimpType,
    pub simp_level: u32,
    pub value: ResponseValue,
    pub spoiled: bool,
    pub error: bool,
    /// Free-form collection method tag, e.g. `typed-onset` for naming
    /// latencies taken from the first keypress.
    pub variant: String,
}

impl HumanResponse {
    pub fn validate(&self) -> Result<(), String> {
        match (self.task, self.value) {
            (Task::Naming, ResponseValue::NamingMs(ms)) => {
                if !(ms.is_finite() && ms > 0.0) {
                    return Err(format!("naming time must be positive, got {ms}"));
                }
            }
            (Task::Rating, ResponseValue::Rating(r)) => {
                if !(1..=7).contains(&r) {
                    return Err(format!("rating must be 1-7, got {r}"));
                }
            }
            (Task::Preference, ResponseValue::Choice(c)) => {
                if c == SimpType::None {
                    return Err("preference choice must be QSLIM or VCLUST".into());
                }
            }
            (t, v) => return Err(format!("value {v:?} does not fit task {t}")),
        }
        if (self.simp_type == SimpType::None) != (self.simp_level == 0) {
            return Err("simp_type NONE goes with simp_level 0 and only with it".into());
        }
        if self.simp_level >= 100 {
            return Err(format!("simp_level {} out of range", self.simp_level));
        }
        if self.task != Task::Naming && self.simp_level == 0 {
            return Err(format!("{} responses need a simplified version", self.task));
        }
        Ok(())
    }

    pub fn naming_ms(&self) -> Option<f64> {
        match self.value {
            ResponseValue::NamingMs(v) => Some(v),
            _ => None,
        }
    }

    pub fn rating(&self) -> Option<u8> {
        match self.value {
            ResponseValue::Rating(v) => Some(v),
            _ => None,
        }
    }

    pub fn choice(&self) -> Option<SimpType> {
        match self.value {
            ResponseValue::Choice(v) => Some(v),
            _ => None,
        }
    }

    /// The version a naming or rating row refers to, given the configured
    /// low level.
    pub fn version(&self, low_level: u32) -> Option<Version> {
        let high = self.simp_level != low_level;
        match self.simp_type {
            SimpType::None => Some(Version::S),
            t => t.algorithm().map(|a| Version::from_parts(a, high)),
        }
    }
}

pub const HUMAN_HEADER: [&str; 10] = [
    "participant",
    "object",
    "object_type",
    "task",
    "simp_type",
    "simp_level",
    "value",
    "spoiled",
    "error",
    "variant",
];

fn value_text(v: &ResponseValue) -> String {
    match v {
        ResponseValue::NamingMs(ms) => format!("{ms}"),
        ResponseValue::Rating(r) => r.to_string(),
        ResponseValue::Choice(c) => c.to_string(),
    }
}

pub fn write_human_csv<W: io::Write>(out: W, rows: &[HumanResponse]) -> Result<(), StatsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HUMAN_HEADER)?;
    for r in rows {
        w.write_record([
            r.participant.to_string(),
            r.object.clone(),
            r.object_type.to_string(),
            r.task.to_string(),
            r.simp_type.to_string(),
            r.simp_level.to_string(),
            value_text(&r.value),
            r.spoiled.to_string(),
            r.error.to_string(),
            r.variant.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn parse_flag(s: &str) -> Result<bool, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" | "" => Ok(false),
        other => Err(format!("bad flag `{other}`")),
    }
}

pub fn read_human_csv<R: io::Read>(input: R) -> Result<Vec<HumanResponse>, StatsError> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != HUMAN_HEADER {
        return Err(StatsError::Parse {
            line: 1,
            message: format!("expected header {}", HUMAN_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |message: String| StatsError::Parse { line, message };
        let task: Task = rec[3].parse().map_err(bad)?;
        let raw = rec[6].trim();
        let value = match task {
            Task::Naming => ResponseValue::NamingMs(raw.parse().map_err(|_| bad(format!("bad naming time `{raw}`")))?),
            Task::Rating => ResponseValue::Rating(raw.parse().map_err(|_| bad(format!("bad rating `{raw}`")))?),
            Task::Preference => ResponseValue::Choice(raw.parse().map_err(bad)?),
        };
        let row = HumanResponse {
            participant: rec[0].trim().parse().map_err(|_| bad(format!("bad participant `{}`", &rec[0])))?,
            object: rec[1].trim().to_string(),
            object_type: rec[2].parse().map_err(bad)?,
            task,
            simp_type: rec[4].parse().map_err(bad)?,
            simp_level: rec[5].trim().parse().map_err(|_| bad(format!("bad simp_level `{}`", &rec[5])))?,
            value,
            spoiled: parse_flag(&rec[7]).map_err(bad)?,
            error: parse_flag(&rec[8]).map_err(bad)?,
            variant: rec[9].to_string(),
        };
        row.validate().map_err(bad)?;
        rows.push(row);
    }
    Ok(rows)
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(task: Task, simp_type: SimpType, level: u32, value: ResponseValue) -> HumanResponse {
        HumanResponse {
            participant: 3,
            object: "cow".into(),
            object_type: ObjectType::Animal,
            task,
            simp_type,
            simp_level: level,
            value,
            spoiled: false,
            error: false,
            variant: String::new(),
        }
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            row(Task::Naming, SimpType::None, 0, ResponseValue::NamingMs(812.5)),
            row(Task::Rating, SimpType::Vclust, 80, ResponseValue::Rating(3)),
            row(Task::Preference, SimpType::Qslim, 50, ResponseValue::Choice(SimpType::Vclust)),
        ];
        let mut buf = Vec::new();
        write_human_csv(&mut buf, &rows).unwrap();
        assert_eq!(read_human_csv(buf.as_slice()).unwrap(), rows);

        let mut empty = Vec::new();
        write_human_csv(&mut empty, &[]).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap().lines().count(), 1);
    }

    #[test]
    fn validation() {
        assert!(row(Task::Rating, SimpType::Qslim, 50, ResponseValue::Rating(9)).validate().is_err());
        assert!(row(Task::Rating, SimpType::None, 0, ResponseValue::Rating(4)).validate().is_err());
        assert!(row(Task::Naming, SimpType::Qslim, 0, ResponseValue::NamingMs(500.0)).validate().is_err());
        assert!(row(Task::Naming, SimpType::None, 0, ResponseValue::NamingMs(-1.0)).validate().is_err());
        assert!(row(Task::Naming, SimpType::None, 0, ResponseValue::Rating(2)).validate().is_err());
        let text = "participant,object,object_type,task,simp_type,simp_level,value,spoiled,error,variant\n\
                    1,cow,animal,RATING,QSLIM,50,9,false,false,\n";
        assert!(matches!(read_human_csv(text.as_bytes()), Err(StatsError::Parse { line: 2, .. })));
    }

    #[test]
    fn versions() {
        let r = row(Task::Rating, SimpType::Vclust, 80, ResponseValue::Rating(3));
        assert_eq!(r.version(50), Some(Version::V8));
        let n = row(Task::Naming, SimpType::None, 0, ResponseValue::NamingMs(1.0));
        assert_eq!(n.version(50), Some(Version::S));
    }
}
