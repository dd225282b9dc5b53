use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ProtocolError, DELAY_MS, FIXATION_MS};
use crate::corpus::ObjectType;
use crate::simplify::{Algorithm, Version};
use crate::stats::{SimpType, Task};

pub const NAMING_PRACTICE: usize = 8;
pub const RATING_PRACTICE: usize = 4;
pub const PREFERENCE_PRACTICE: usize = 4;

/// Groups, and conditions each group rotates through.
pub const NAMING_GROUPS: usize = 6;

/// The naming conditions: simplifier × {standard, low, high}. The two
/// standard conditions show the same image and keep the rotation square.
pub const NAMING_CONDITIONS: [(SimpType, Option<bool>); NAMING_GROUPS] = [
    (SimpType::Qslim, None),
    (SimpType::Qslim, Some(false)),
    (SimpType::Qslim, Some(true)),
    (SimpType::Vclust, None),
    (SimpType::Vclust, Some(false)),
    (SimpType::Vclust, Some(true)),
];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PlanObject {
    pub name: String,
    pub object_type: ObjectType,
}

impl PlanObject {
    pub fn new(name: impl Into<String>, object_type: ObjectType) -> Self {
        PlanObject {
            name: name.into(),
            object_type,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "snake_case")]
pub enum Stimulus {
    Single { version: Version },
    Pair { left: Version, right: Version },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trial {
    pub practice: bool,
    pub object: String,
    pub object_type: ObjectType,
    pub stimulus: Stimulus,
    /// Naming only: index into [`NAMING_CONDITIONS`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<usize>,
}

impl Trial {
    /// Simplifier and high-level flag recorded with the response: the shown
    /// version for naming, the simplified (right) member for rating and the
    /// left member for preference.
    pub fn condition_version(&self) -> Version {
        match self.stimulus {
            Stimulus::Single { version } => version,
            Stimulus::Pair { left: Version::S, right } => right,
            Stimulus::Pair { left, .. } => left,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialPlan {
    pub task: Task,
    /// Practice trials first.
    pub trials: Vec<Trial>,
    pub fixation_ms: u32,
    pub delay_ms: u32,
}

impl TrialPlan {
    fn new(task: Task, trials: Vec<Trial>) -> Self {
        TrialPlan {
            task,
            trials,
            fixation_ms: FIXATION_MS,
            delay_ms: DELAY_MS,
        }
    }

    pub fn real_trials(&self) -> impl Iterator<Item = &Trial> {
        self.trials.iter().filter(|t| !t.practice)
    }

    pub fn practice_count(&self) -> usize {
        self.trials.iter().filter(|t| t.practice).count()
    }
}

fn plan_rng(seed: u64, participant: u32, task: Task) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(participant) * 4 + task as u64);
    rng
}

fn sorted(corpus: &[PlanObject]) -> Result<Vec<PlanObject>, ProtocolError> {
    if corpus.is_empty() {
        return Err(ProtocolError::Corpus("no objects".into()));
    }
    let mut v = corpus.to_vec();
    v.sort();
    if let Some(w) = v.windows(2).find(|w| w[0].name == w[1].name) {
        return Err(ProtocolError::Corpus(format!("object `{}` listed twice", w[0].name)));
    }
    Ok(v)
}

fn practice(objects: &[PlanObject], n: usize, stimulus: impl Fn(usize) -> Stimulus) -> Vec<Trial> {
    (0..n)
        .map(|i| {
            let o = &objects[(objects.len() - 1 - i % objects.len()) % objects.len()];
            Trial {
                practice: true,
                object: o.name.clone(),
                object_type: o.object_type,
                stimulus: stimulus(i),
                condition: None,
            }
        })
        .collect()
}

/// Splits the corpus into six groups with the same number of each object
/// type: objects of one type, sorted by name, are dealt out in turn.
pub fn naming_groups(corpus: &[PlanObject]) -> Result<Vec<Vec<PlanObject>>, ProtocolError> {
    let objects = sorted(corpus)?;
    let mut groups = vec![Vec::new(); NAMING_GROUPS];
    let mut per_type = Vec::new();
    for t in ObjectType::ALL {
        let of_type: Vec<&PlanObject> = objects.iter().filter(|o| o.object_type == t).collect();
        if of_type.len() % NAMING_GROUPS != 0 {
            return Err(ProtocolError::Corpus(format!(
                "{} {t} objects do not split into {NAMING_GROUPS} equal groups",
                of_type.len()
            )));
        }
        per_type.push(of_type.len());
        for (i, o) in of_type.into_iter().enumerate() {
            groups[i % NAMING_GROUPS].push(o.clone());
        }
    }
    if per_type.iter().any(|&n| n != per_type[0]) {
        return Err(ProtocolError::Corpus(format!("object types are unbalanced: {per_type:?}")));
    }
    Ok(groups)
}

/// Every object once, group `g` in condition `(g + participant) mod 6`, in
/// an order that depends on the rotation position only.
pub fn build_naming_plan(participant: u32, corpus: &[PlanObject]) -> Result<TrialPlan, ProtocolError> {
    let groups = naming_groups(corpus)?;
    let rotation = participant as usize % NAMING_GROUPS;
    let mut trials = Vec::new();
    for (g, group) in groups.iter().enumerate() {
        let c = (g + rotation) % NAMING_GROUPS;
        let (st, level) = NAMING_CONDITIONS[c];
        let version = match level {
            None => Version::S,
            Some(high) => Version::from_parts(st.algorithm().expect("simplified"), high),
        };
        for o in group {
            trials.push(Trial {
                practice: false,
                object: o.name.clone(),
                object_type: o.object_type,
                stimulus: Stimulus::Single { version },
                condition: Some(c),
            });
        }
    }
    trials.sort_by(|a, b| a.object.cmp(&b.object));
    trials.shuffle(&mut plan_rng(0, rotation as u32, Task::Naming));
    let objects = sorted(corpus)?;
    let mut all = practice(&objects, NAMING_PRACTICE, |i| Stimulus::Single {
        version: Version::ALL[i % Version::ALL.len()],
    });
    all.extend(trials);
    Ok(TrialPlan::new(Task::Naming, all))
}

/// Every (object, simplified version) against its standard on the left,
/// shuffled.
pub fn build_rating_plan(participant: u32, corpus: &[PlanObject], seed: u64) -> Result<TrialPlan, ProtocolError> {
    let objects = sorted(corpus)?;
    let mut trials: Vec<Trial> = objects
        .iter()
        .flat_map(|o| {
            Version::SIMPLIFIED.into_iter().map(|v| Trial {
                practice: false,
                object: o.name.clone(),
                object_type: o.object_type,
                stimulus: Stimulus::Pair {
                    left: Version::S,
                    right: v,
                },
                condition: None,
            })
        })
        .collect();
    trials.shuffle(&mut plan_rng(seed, participant, Task::Rating));
    let mut all = practice(&objects, RATING_PRACTICE, |i| Stimulus::Pair {
        left: Version::S,
        right: Version::SIMPLIFIED[i % 4],
    });
    all.extend(trials);
    Ok(TrialPlan::new(Task::Rating, all))
}

/// Qslim against Vclust at the same level for every object and level,
/// shuffled. Each consecutive pair of trials has Qslim on the left once,
/// so exactly half do overall.
pub fn build_preference_plan(participant: u32, corpus: &[PlanObject], seed: u64) -> Result<TrialPlan, ProtocolError> {
    let objects = sorted(corpus)?;
    let mut rng = plan_rng(seed, participant, Task::Preference);
    let mut cells: Vec<(&PlanObject, bool)> = objects.iter().flat_map(|o| [(o, false), (o, true)]).collect();
    cells.shuffle(&mut rng);
    let mut sides: Vec<bool> = Vec::with_capacity(cells.len());
    for _ in 0..cells.len() / 2 {
        let mut block = [true, false];
        block.shuffle(&mut rng);
        sides.extend(block);
    }
    let trials = cells.into_iter().zip(sides).map(|((o, high), qslim_left)| {
        let q = Version::from_parts(Algorithm::Qem, high);
        let v = q.counterpart();
        let (left, right) = if qslim_left { (q, v) } else { (v, q) };
        Trial {
            practice: false,
            object: o.name.clone(),
            object_type: o.object_type,
            stimulus: Stimulus::Pair { left, right },
            condition: None,
        }
    });
    let mut all = practice(&objects, PREFERENCE_PRACTICE, |i| {
        let q = Version::from_parts(Algorithm::Qem, i % 2 == 1);
        if i % 2 == 0 {
            Stimulus::Pair { left: q, right: q.counterpart() }
        } else {
            Stimulus::Pair { left: q.counterpart(), right: q }
        }
    });
    all.extend(trials);
    Ok(TrialPlan::new(Task::Preference, all))
}
