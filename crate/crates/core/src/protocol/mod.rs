//! The three human tasks: counterbalanced trial plans, per-participant
//! sessions with an append-only record file, and export to the response
//! table the statistics read.

mod plan;
mod session;
mod store;

use std::io;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use plan::{
    build_naming_plan, build_preference_plan, build_rating_plan, naming_groups, PlanObject, Stimulus, Trial, TrialPlan,
    NAMING_CONDITIONS, NAMING_GROUPS, NAMING_PRACTICE, PREFERENCE_PRACTICE, RATING_PRACTICE,
};
pub use session::{
    export_responses, ResponseRecord, ResponseSchema, Session, SessionHeader, SessionSummary, StimulusRef, TaskProgress,
    TrialView,
};
pub use store::SessionStore;

use crate::stats::Task;

/// Version of every structured payload and record line.
pub const SCHEMA_VERSION: u32 = 1;
pub const FIXATION_MS: u32 = 750;
pub const DELAY_MS: u32 = 250;
/// Longest naming latency accepted.
pub const MAX_LATENCY_MS: f64 = 60_000.0;
/// Allowed disagreement between client and server clocks.
pub const CLOCK_SLACK_MS: u64 = 1_000;
/// Recorded with every naming response: latency runs from stimulus paint to
/// the first keypress of the typed name.
pub const NAMING_VARIANT: &str = "typed-onset";

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("corpus cannot be planned: {0}")]
    Corpus(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("session is complete")]
    SessionComplete,
    #[error("trial {got} is not the current trial ({expected})")]
    OutOfOrder { expected: usize, got: usize },
    #[error("trial {0} already has a response")]
    Duplicate(usize),
    #[error("trial {0} has not been shown yet")]
    NotServed(usize),
    #[error("response {elapsed_ms} ms after serving arrived before stimulus onset at {onset_ms} ms")]
    BeforeOnset { elapsed_ms: u64, onset_ms: u64 },
    #[error("rating must be 1-7, got {0}")]
    InvalidRating(u8),
    #[error("invalid naming latency {0} ms")]
    InvalidLatency(f64),
    #[error("a {got} response does not fit a {expected} trial")]
    PayloadMismatch { expected: Task, got: &'static str },
    #[error("corrupt record file {path} line {line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// What the participant answered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResponsePayload {
    Naming {
        name: String,
        latency_ms: f64,
        /// Set by the client when the trial was disturbed.
        #[serde(default)]
        spoiled: bool,
    },
    Rating {
        rating: u8,
    },
    Choice {
        side: Side,
    },
}

impl ResponsePayload {
    pub fn kind(&self) -> &'static str {
        match self {
            ResponsePayload::Naming { .. } => "naming",
            ResponsePayload::Rating { .. } => "rating",
            ResponsePayload::Choice { .. } => "choice",
        }
    }

    pub fn fits(&self, task: Task) -> bool {
        matches!(
            (self, task),
            (ResponsePayload::Naming { .. }, Task::Naming)
                | (ResponsePayload::Rating { .. }, Task::Rating)
                | (ResponsePayload::Choice { .. }, Task::Preference)
        )
    }
}

/// Lowercase letters and digits only; a typed name is correct when it
/// normalizes to the object's name.
pub fn normalize_name(s: &str) -> String {
    s.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect()
}
