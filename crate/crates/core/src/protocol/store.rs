use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{
    export_responses, PlanObject, ProtocolError, ResponsePayload, ResponseRecord, Session, SessionHeader, SessionSummary,
    TrialView, SCHEMA_VERSION,
};
use crate::simplify::Levels;
use crate::stats::HumanResponse;

/// One line of a session file.
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    Session(SessionHeader),
    Served { trial: usize, at_ms: u64 },
    Response(ResponseRecord),
}

/// Sessions kept in memory and mirrored to `<dir>/<id>.jsonl`, one event
/// per line, never rewritten. Each session is locked on its own, so
/// sessions proceed independently while updates to one are serialized.
#[derive(Debug)]
pub struct SessionStore {
    dir: PathBuf,
    sessions: Mutex<BTreeMap<String, Arc<Mutex<Session>>>>,
}

fn append(path: &Path, event: &Event) -> Result<(), ProtocolError> {
    let mut line = serde_json::to_string(event).expect("events serialize");
    line.push('\n');
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(line.as_bytes())?;
    f.flush()?;
    Ok(())
}

fn replay(path: &Path) -> Result<Session, ProtocolError> {
    let corrupt = |line: usize, message: String| ProtocolError::Corrupt {
        path: path.to_path_buf(),
        line,
        message,
    };
    let reader = BufReader::new(fs::File::open(path)?);
    let mut session: Option<Session> = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: Event = serde_json::from_str(&line).map_err(|e| corrupt(i + 1, e.to_string()))?;
        match (event, session.as_mut()) {
            (Event::Session(h), None) => {
                if h.schema_version != SCHEMA_VERSION {
                    return Err(corrupt(i + 1, format!("schema version {}", h.schema_version)));
                }
                session = Some(Session::new(h)?);
            }
            (Event::Served { trial, at_ms }, Some(s)) => s.apply_serve(trial, at_ms),
            (Event::Response(r), Some(s)) => {
                if r.trial != s.cursor() {
                    return Err(corrupt(i + 1, format!("response to trial {} at cursor {}", r.trial, s.cursor())));
                }
                s.apply_response(r);
            }
            _ => return Err(corrupt(i + 1, "session header must come first, once".into())),
        }
    }
    session.ok_or_else(|| corrupt(0, "empty file".into()))
}

impl SessionStore {
    /// Opens `dir`, creating it if needed, and replays every session file
    /// in it.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, ProtocolError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let mut sessions = BTreeMap::new();
        for entry in fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "jsonl") {
                let s = replay(&path)?;
                sessions.insert(s.id().to_string(), Arc::new(Mutex::new(s)));
            }
        }
        Ok(SessionStore {
            dir,
            sessions: Mutex::new(sessions),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.jsonl"))
    }

    fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>, ProtocolError> {
        self.sessions
            .lock()
            .expect("store lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ProtocolError::UnknownSession(id.to_string()))
    }

    pub fn ids(&self) -> Vec<String> {
        self.sessions.lock().expect("store lock").keys().cloned().collect()
    }

    /// Starts a session for `participant`, named `p<participant>-<k>` with
    /// the first free `k`.
    pub fn create(
        &self,
        participant: u32,
        seed: u64,
        levels: Levels,
        corpus: &[PlanObject],
        now_ms: u64,
    ) -> Result<SessionSummary, ProtocolError> {
        let mut map = self.sessions.lock().expect("store lock");
        let id = (0..)
            .map(|k| format!("p{participant:03}-{k}"))
            .find(|id| !map.contains_key(id) && !self.path(id).exists())
            .expect("unbounded");
        let header = SessionHeader {
            schema_version: SCHEMA_VERSION,
            id: id.clone(),
            participant,
            seed,
            levels,
            corpus: corpus.to_vec(),
            created_at_ms: now_ms,
        };
        let session = Session::new(header.clone())?;
        append(&self.path(&id), &Event::Session(header))?;
        let summary = session.summary();
        map.insert(id, Arc::new(Mutex::new(session)));
        Ok(summary)
    }

    pub fn summary(&self, id: &str) -> Result<SessionSummary, ProtocolError> {
        Ok(self.get(id)?.lock().expect("session lock").summary())
    }

    /// The current trial; the first request for it starts its clock.
    pub fn next_trial(&self, id: &str, now_ms: u64) -> Result<TrialView, ProtocolError> {
        let s = self.get(id)?;
        let mut s = s.lock().expect("session lock");
        let (view, fresh) = s.prepare_serve(now_ms)?;
        if let Some(at_ms) = fresh {
            append(&self.path(id), &Event::Served { trial: view.trial_id, at_ms })?;
            s.apply_serve(view.trial_id, at_ms);
        }
        Ok(view)
    }

    pub fn record(
        &self,
        id: &str,
        trial: usize,
        payload: ResponsePayload,
        token: Option<String>,
        now_ms: u64,
    ) -> Result<ResponseRecord, ProtocolError> {
        let s = self.get(id)?;
        let mut s = s.lock().expect("session lock");
        let rec = s.check_response(trial, payload, token, now_ms)?;
        append(&self.path(id), &Event::Response(rec.clone()))?;
        s.apply_response(rec.clone());
        Ok(rec)
    }

    /// The stored response of a finished trial.
    pub fn response(&self, id: &str, trial: usize) -> Result<Option<ResponseRecord>, ProtocolError> {
        Ok(self.get(id)?.lock().expect("session lock").records().get(trial).cloned())
    }

    /// Analysis rows of one session, or of all sessions in id order.
    pub fn export(&self, id: Option<&str>) -> Result<Vec<HumanResponse>, ProtocolError> {
        let handles: Vec<Arc<Mutex<Session>>> = match id {
            Some(id) => vec![self.get(id)?],
            None => self.sessions.lock().expect("store lock").values().cloned().collect(),
        };
        let sessions: Vec<Session> = handles.iter().map(|h| h.lock().expect("session lock").clone()).collect();
        Ok(export_responses(&sessions))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ObjectType;
    use crate::protocol::Side;
    use crate::stats::Task;

    fn corpus() -> Vec<PlanObject> {
        ["ant", "bee", "cat", "dog", "eel", "fox", "axe", "bat", "cup", "die", "egg", "fan"]
            .iter()
            .enumerate()
            .map(|(i, n)| PlanObject::new(*n, if i < 6 { ObjectType::Animal } else { ObjectType::Artifact }))
            .collect()
    }

    fn run(store: &SessionStore, id: &str, trials: usize, now: &mut u64) {
        for _ in 0..trials {
            let v = store.next_trial(id, *now).unwrap();
            *now += 1500;
            let p = match v.task {
                Task::Naming => ResponsePayload::Naming {
                    name: v.images[0].object.clone(),
                    latency_ms: 640.0,
                    spoiled: false,
                },
                Task::Rating => ResponsePayload::Rating { rating: 5 },
                Task::Preference => ResponsePayload::Choice { side: Side::Right },
            };
            store.record(id, v.trial_id, p, Some(format!("t{}", v.trial_id)), *now).unwrap();
        }
    }

    #[test]
    fn replay_restores_state() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        assert!(store.export(None).unwrap().is_empty());
        let a = store.create(4, 1, Levels::default(), &corpus(), 0).unwrap();
        let b = store.create(4, 1, Levels::default(), &corpus(), 0).unwrap();
        assert_eq!((a.id.as_str(), b.id.as_str()), ("p004-0", "p004-1"));
        let mut now = 0;
        run(&store, &a.id, 30, &mut now);
        // a trial shown but not answered survives a restart with its clock
        let shown = store.next_trial(&a.id, now).unwrap();
        drop(store);

        let store = SessionStore::open(dir.path()).unwrap();
        assert_eq!(store.ids(), vec!["p004-0".to_string(), "p004-1".to_string()]);
        let s = store.summary(&a.id).unwrap();
        assert_eq!(s.completed_trials, 30);
        assert_eq!(s.current_task, Some(Task::Rating));
        let again = store.next_trial(&a.id, now + 10_000).unwrap();
        assert_eq!(again.trial_id, shown.trial_id);
        let err = store.record(&a.id, shown.trial_id, ResponsePayload::Rating { rating: 2 }, None, now + 100);
        assert!(matches!(err, Err(ProtocolError::BeforeOnset { .. })));
        run(&store, &a.id, s.total_trials - 30, &mut now);
        assert!(store.summary(&a.id).unwrap().complete);
        assert_eq!(store.export(Some(&a.id)).unwrap().len(), 12 + 48 + 24);
        assert!(matches!(store.summary("nope"), Err(ProtocolError::UnknownSession(_))));

        let lines = fs::read_to_string(dir.path().join("p004-0.jsonl")).unwrap();
        let responses = lines.lines().filter(|l| l.contains("\"event\":\"response\"")).count();
        assert_eq!(responses, s.total_trials);
    }

    #[test]
    fn corrupt_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("bad.jsonl"), "{\"event\":\"served\",\"trial\":0,\"at_ms\":1}\n").unwrap();
        assert!(matches!(SessionStore::open(dir.path()), Err(ProtocolError::Corrupt { .. })));
    }
}
