use serde::{Deserialize, Serialize};

use super::{
    build_naming_plan, build_preference_plan, build_rating_plan, normalize_name, PlanObject, ProtocolError,
    ResponsePayload, Side, Stimulus, Trial, TrialPlan, CLOCK_SLACK_MS, MAX_LATENCY_MS, NAMING_VARIANT, SCHEMA_VERSION,
};
use crate::corpus::ObjectType;
use crate::simplify::{Levels, Version};
use crate::stats::{HumanResponse, ResponseValue, SimpType, Task};

/// Everything the plans of a session are built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub schema_version: u32,
    pub id: String,
    pub participant: u32,
    pub seed: u64,
    pub levels: Levels,
    pub corpus: Vec<PlanObject>,
    pub created_at_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    /// Position in the whole session, practice included.
    pub trial: usize,
    pub task: Task,
    pub practice: bool,
    pub object: String,
    pub object_type: ObjectType,
    pub stimulus: Stimulus,
    pub payload: ResponsePayload,
    /// Preference only: the simplifier of the chosen side.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choice: Option<SimpType>,
    pub spoiled: bool,
    pub error: bool,
    pub served_at_ms: u64,
    pub received_at_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StimulusRef {
    pub object: String,
    pub version: Version,
}

/// The answer the client must send for a trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResponseSchema {
    /// Typed name plus milliseconds from stimulus paint to first keypress.
    Naming,
    Rating { min: u8, max: u8 },
    Choice { options: Vec<Side> },
}

/// One trial as the client sees it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialView {
    pub schema_version: u32,
    pub session_id: String,
    pub trial_id: usize,
    pub task: Task,
    pub practice: bool,
    /// 0-based position within the task.
    pub index_in_task: usize,
    pub task_trials: usize,
    pub completed_trials: usize,
    pub total_trials: usize,
    pub layout: String,
    /// Left to right.
    pub images: Vec<StimulusRef>,
    pub fixation_ms: u32,
    pub delay_ms: u32,
    pub response: ResponseSchema,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskProgress {
    pub task: Task,
    pub done: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub schema_version: u32,
    pub id: String,
    pub participant: u32,
    pub seed: u64,
    pub completed_trials: usize,
    pub total_trials: usize,
    pub current_task: Option<Task>,
    pub complete: bool,
    pub tasks: Vec<TaskProgress>,
}

/// One participant's run through naming, rating and preference, in that
/// order. Trials are numbered across the whole session, so a later task
/// cannot start before the earlier ones are done.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    header: SessionHeader,
    plans: Vec<TrialPlan>,
    records: Vec<ResponseRecord>,
    /// (trial, server time) of the trial on screen.
    served: Option<(usize, u64)>,
}

impl Session {
    pub fn new(header: SessionHeader) -> Result<Self, ProtocolError> {
        let plans = vec![
            build_naming_plan(header.participant, &header.corpus)?,
            build_rating_plan(header.participant, &header.corpus, header.seed)?,
            build_preference_plan(header.participant, &header.corpus, header.seed)?,
        ];
        Ok(Session {
            header,
            plans,
            records: Vec::new(),
            served: None,
        })
    }

    pub fn header(&self) -> &SessionHeader {
        &self.header
    }

    pub fn id(&self) -> &str {
        &self.header.id
    }

    pub fn plans(&self) -> &[TrialPlan] {
        &self.plans
    }

    pub fn records(&self) -> &[ResponseRecord] {
        &self.records
    }

    pub fn total_trials(&self) -> usize {
        self.plans.iter().map(|p| p.trials.len()).sum()
    }

    pub fn cursor(&self) -> usize {
        self.records.len()
    }

    pub fn is_complete(&self) -> bool {
        self.cursor() == self.total_trials()
    }

    /// (plan, trial, index within the plan) of a session-wide trial number.
    pub fn locate(&self, trial: usize) -> Option<(&TrialPlan, &Trial, usize)> {
        let mut i = trial;
        for p in &self.plans {
            if i < p.trials.len() {
                return Some((p, &p.trials[i], i));
            }
            i -= p.trials.len();
        }
        None
    }

    pub fn served(&self) -> Option<(usize, u64)> {
        self.served
    }

    /// The current trial and the serving time to record, if any. Serving
    /// the same trial again keeps the first time, so a reload resumes the
    /// trial instead of restarting its clock.
    pub fn prepare_serve(&self, now_ms: u64) -> Result<(TrialView, Option<u64>), ProtocolError> {
        if self.is_complete() {
            return Err(ProtocolError::SessionComplete);
        }
        let cursor = self.cursor();
        let fresh = match self.served {
            Some((t, _)) if t == cursor => None,
            _ => Some(now_ms),
        };
        Ok((self.view(cursor), fresh))
    }

    pub fn apply_serve(&mut self, trial: usize, at_ms: u64) {
        self.served = Some((trial, at_ms));
    }

    fn view(&self, trial: usize) -> TrialView {
        let (plan, t, index_in_task) = self.locate(trial).expect("cursor in range");
        let (layout, images) = match t.stimulus {
            Stimulus::Single { version } => ("single", vec![version]),
            Stimulus::Pair { left, right } => ("pair", vec![left, right]),
        };
        TrialView {
            schema_version: SCHEMA_VERSION,
            session_id: self.header.id.clone(),
            trial_id: trial,
            task: plan.task,
            practice: t.practice,
            index_in_task,
            task_trials: plan.trials.len(),
            completed_trials: self.cursor(),
            total_trials: self.total_trials(),
            layout: layout.to_string(),
            images: images
                .into_iter()
                .map(|version| StimulusRef {
                    object: t.object.clone(),
                    version,
                })
                .collect(),
            fixation_ms: plan.fixation_ms,
            delay_ms: plan.delay_ms,
            response: match plan.task {
                Task::Naming => ResponseSchema::Naming,
                Task::Rating => ResponseSchema::Rating { min: 1, max: 7 },
                Task::Preference => ResponseSchema::Choice {
                    options: vec![Side::Left, Side::Right],
                },
            },
        }
    }

    /// Validates a response without changing the session.
    pub fn check_response(
        &self,
        trial: usize,
        payload: ResponsePayload,
        token: Option<String>,
        now_ms: u64,
    ) -> Result<ResponseRecord, ProtocolError> {
        let cursor = self.cursor();
        if trial < cursor {
            return Err(ProtocolError::Duplicate(trial));
        }
        if self.is_complete() {
            return Err(ProtocolError::SessionComplete);
        }
        if trial > cursor {
            return Err(ProtocolError::OutOfOrder { expected: cursor, got: trial });
        }
        let served_at = match self.served {
            Some((t, at)) if t == trial => at,
            _ => return Err(ProtocolError::NotServed(trial)),
        };
        let (plan, t, _) = self.locate(trial).expect("cursor in range");
        if !payload.fits(plan.task) {
            return Err(ProtocolError::PayloadMismatch {
                expected: plan.task,
                got: payload.kind(),
            });
        }
        let elapsed = now_ms.saturating_sub(served_at);
        let onset = u64::from(plan.fixation_ms);
        if elapsed < onset {
            return Err(ProtocolError::BeforeOnset {
                elapsed_ms: elapsed,
                onset_ms: onset,
            });
        }
        let (mut spoiled, mut error, mut choice) = (false, false, None);
        match &payload {
            ResponsePayload::Naming {
                name,
                latency_ms,
                spoiled: s,
            } => {
                let lat = *latency_ms;
                let bound = (elapsed - onset + CLOCK_SLACK_MS) as f64;
                if !(lat.is_finite() && lat > 0.0 && lat <= MAX_LATENCY_MS && lat <= bound) {
                    return Err(ProtocolError::InvalidLatency(lat));
                }
                spoiled = *s;
                error = normalize_name(name) != normalize_name(&t.object);
            }
            ResponsePayload::Rating { rating } => {
                if !(1..=7).contains(rating) {
                    return Err(ProtocolError::InvalidRating(*rating));
                }
            }
            ResponsePayload::Choice { side } => {
                let Stimulus::Pair { left, right } = t.stimulus else {
                    unreachable!("preference trials show pairs")
                };
                choice = Some(SimpType::of(if *side == Side::Left { left } else { right }));
            }
        }
        Ok(ResponseRecord {
            trial,
            task: plan.task,
            practice: t.practice,
            object: t.object.clone(),
            object_type: t.object_type,
            stimulus: t.stimulus,
            payload,
            choice,
            spoiled,
            error,
            served_at_ms: served_at,
            received_at_ms: now_ms,
            token,
        })
    }

    pub fn apply_response(&mut self, record: ResponseRecord) {
        debug_assert_eq!(record.trial, self.cursor());
        self.records.push(record);
        self.served = None;
    }

    pub fn summary(&self) -> SessionSummary {
        let mut offset = 0;
        let tasks = self
            .plans
            .iter()
            .map(|p| {
                let done = self.cursor().saturating_sub(offset).min(p.trials.len());
                offset += p.trials.len();
                TaskProgress {
                    task: p.task,
                    done,
                    total: p.trials.len(),
                }
            })
            .collect();
        SessionSummary {
            schema_version: SCHEMA_VERSION,
            id: self.header.id.clone(),
            participant: self.header.participant,
            seed: self.header.seed,
            completed_trials: self.cursor(),
            total_trials: self.total_trials(),
            current_task: self.locate(self.cursor()).map(|(p, _, _)| p.task),
            complete: self.is_complete(),
            tasks,
        }
    }

    /// Real (non-practice) responses as analysis rows.
    pub fn human_rows(&self) -> Vec<HumanResponse> {
        let levels = self.header.levels;
        self.records
            .iter()
            .filter(|r| !r.practice)
            .map(|r| {
                let t = Trial {
                    practice: false,
                    object: r.object.clone(),
                    object_type: r.object_type,
                    stimulus: r.stimulus,
                    condition: None,
                };
                let v = t.condition_version();
                let value = match &r.payload {
                    ResponsePayload::Naming { latency_ms, .. } => ResponseValue::NamingMs(*latency_ms),
                    ResponsePayload::Rating { rating } => ResponseValue::Rating(*rating),
                    ResponsePayload::Choice { .. } => ResponseValue::Choice(r.choice.expect("choice resolved")),
                };
                HumanResponse {
                    participant: self.header.participant,
                    object: r.object.clone(),
                    object_type: r.object_type,
                    task: r.task,
                    simp_type: SimpType::of(v),
                    simp_level: levels.percent(v),
                    value,
                    spoiled: r.spoiled,
                    error: r.error,
                    variant: if r.task == Task::Naming { NAMING_VARIANT.into() } else { String::new() },
                }
            })
            .collect()
    }
}

/// Rows of every session, in the order given, practice trials left out.
pub fn export_responses<'a>(sessions: impl IntoIterator<Item = &'a Session>) -> Vec<HumanResponse> {
    sessions.into_iter().flat_map(Session::human_rows).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus() -> Vec<PlanObject> {
        (0..12)
            .map(|i| {
                let t = if i < 6 { ObjectType::Animal } else { ObjectType::Artifact };
                PlanObject::new(format!("thing{i}"), t)
            })
            .collect()
    }

    fn session() -> Session {
        Session::new(SessionHeader {
            schema_version: SCHEMA_VERSION,
            id: "p000-0".into(),
            participant: 0,
            seed: 5,
            levels: Levels::default(),
            corpus: corpus(),
            created_at_ms: 0,
        })
        .unwrap()
    }

    fn answer(view: &TrialView, object: &str) -> ResponsePayload {
        match view.task {
            Task::Naming => ResponsePayload::Naming {
                name: object.to_uppercase(),
                latency_ms: 900.0,
                spoiled: false,
            },
            Task::Rating => ResponsePayload::Rating { rating: 4 },
            Task::Preference => ResponsePayload::Choice { side: Side::Left },
        }
    }

    fn step(s: &mut Session, now: &mut u64) -> ResponseRecord {
        let (view, fresh) = s.prepare_serve(*now).unwrap();
        if let Some(at) = fresh {
            s.apply_serve(view.trial_id, at);
        }
        *now += 2000;
        let rec = s
            .check_response(view.trial_id, answer(&view, &view.images[0].object), None, *now)
            .unwrap();
        s.apply_response(rec.clone());
        rec
    }

    #[test]
    fn full_session_exports_plan_length() {
        let mut s = session();
        let mut now = 0;
        assert_eq!(s.total_trials(), 8 + 12 + 4 + 48 + 4 + 24);
        while !s.is_complete() {
            step(&mut s, &mut now);
        }
        let rows = s.human_rows();
        assert_eq!(rows.len(), 12 + 48 + 24);
        assert!(rows.iter().all(|r| r.validate().is_ok()));
        assert!(rows.iter().filter(|r| r.task == Task::Naming).all(|r| !r.error && r.variant == NAMING_VARIANT));
        assert!(matches!(s.prepare_serve(now), Err(ProtocolError::SessionComplete)));
        assert!(s.summary().complete);
    }

    #[test]
    fn ordering_and_gating() {
        let mut s = session();
        let mut now = 10_000;
        let naming = ResponsePayload::Naming {
            name: "x".into(),
            latency_ms: 500.0,
            spoiled: false,
        };
        assert!(matches!(s.check_response(0, naming.clone(), None, now), Err(ProtocolError::NotServed(0))));
        let (view, fresh) = s.prepare_serve(now).unwrap();
        s.apply_serve(view.trial_id, fresh.unwrap());
        assert!(matches!(
            s.check_response(0, naming.clone(), None, now + 700),
            Err(ProtocolError::BeforeOnset { .. })
        ));
        assert!(matches!(s.check_response(1, naming.clone(), None, now + 2000), Err(ProtocolError::OutOfOrder { .. })));
        assert!(matches!(
            s.check_response(0, ResponsePayload::Rating { rating: 3 }, None, now + 2000),
            Err(ProtocolError::PayloadMismatch { .. })
        ));
        // reload keeps the first serving time
        let (_, again) = s.prepare_serve(now + 500).unwrap();
        assert_eq!(again, None);
        let rec = s.check_response(0, naming, None, now + 2000).unwrap();
        assert!(rec.error);
        s.apply_response(rec);
        let before = s.clone();
        assert!(matches!(
            s.check_response(0, ResponsePayload::Rating { rating: 3 }, None, now + 4000),
            Err(ProtocolError::Duplicate(0))
        ));
        assert_eq!(s, before);
        // rating task cannot start until naming is done
        while s.locate(s.cursor()).unwrap().0.task == Task::Naming {
            step(&mut s, &mut now);
        }
        let (view, fresh) = s.prepare_serve(now).unwrap();
        s.apply_serve(view.trial_id, fresh.unwrap());
        assert!(matches!(
            s.check_response(view.trial_id, ResponsePayload::Rating { rating: 9 }, None, now + 2000),
            Err(ProtocolError::InvalidRating(9))
        ));
        assert!(matches!(
            s.check_response(view.trial_id, ResponsePayload::Rating { rating: 0 }, None, now + 2000),
            Err(ProtocolError::InvalidRating(0))
        ));
    }

    #[test]
    fn latency_bounds() {
        let mut s = session();
        let (view, fresh) = s.prepare_serve(0).unwrap();
        s.apply_serve(view.trial_id, fresh.unwrap());
        let lat = |ms: f64| ResponsePayload::Naming {
            name: "a".into(),
            latency_ms: ms,
            spoiled: false,
        };
        assert!(matches!(s.check_response(0, lat(0.0), None, 2000), Err(ProtocolError::InvalidLatency(_))));
        assert!(matches!(s.check_response(0, lat(f64::NAN), None, 2000), Err(ProtocolError::InvalidLatency(_))));
        // 1250 ms of stimulus time plus the clock slack
        assert!(s.check_response(0, lat(2250.0), None, 2000).is_ok());
        assert!(matches!(s.check_response(0, lat(2251.0), None, 2000), Err(ProtocolError::InvalidLatency(_))));
    }

    #[test]
    fn preference_rows_record_left_member() {
        let mut s = session();
        let mut now = 0;
        while !s.is_complete() {
            step(&mut s, &mut now);
        }
        for (rec, row) in s
            .records()
            .iter()
            .filter(|r| !r.practice && r.task == Task::Preference)
            .zip(s.human_rows().iter().filter(|r| r.task == Task::Preference))
        {
            let Stimulus::Pair { left, .. } = rec.stimulus else { panic!() };
            assert_eq!(row.simp_type, SimpType::of(left));
            // the scripted answer always picks the left side
            assert_eq!(row.choice(), Some(SimpType::of(left)));
        }
    }
}
