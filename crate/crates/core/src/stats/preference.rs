use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{HumanResponse, Scheme, SimpType, StatsError, Task};
use crate::corpus::ObjectType;

/// Percentage of Qslim choices of one participant (or for one object) in
/// one object-type × level condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceRate {
    pub unit: String,
    pub object_type: ObjectType,
    pub simp_level: u32,
    pub percent_qslim: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceSummary {
    pub scheme: Scheme,
    /// Sorted by unit, object type, level.
    pub rates: Vec<PreferenceRate>,
    /// Mean over units for every condition, sorted by object type and level.
    pub conditions: Vec<(ObjectType, u32, f64)>,
}

/// Qslim preference percentages per unit and condition. Under
/// `ByParticipant` a unit is a participant and the percentage counts their
/// choices over the condition's objects; under `ByObject` a unit is an
/// object and the percentage counts participants.
pub fn preference_rates(responses: &[HumanResponse], scheme: Scheme) -> Result<PreferenceSummary, StatsError> {
    if responses.is_empty() {
        return Err(StatsError::Empty);
    }
    // units sort numerically for participants and by name for objects
    let mut tally: BTreeMap<((u32, String), ObjectType, u32), (usize, usize)> = BTreeMap::new();
    let mut types = BTreeSet::new();
    let mut levels = BTreeSet::new();
    for r in responses {
        if r.task != Task::Preference {
            return Err(StatsError::WrongTask {
                expected: Task::Preference,
                found: r.task,
            });
        }
        let unit = match scheme {
            Scheme::ByParticipant => (r.participant, String::new()),
            Scheme::ByObject => (0, r.object.clone()),
        };
        types.insert(r.object_type);
        levels.insert(r.simp_level);
        let e = tally.entry((unit, r.object_type, r.simp_level)).or_default();
        e.1 += 1;
        if r.choice() == Some(SimpType::Qslim) {
            e.0 += 1;
        }
    }
    let rates: Vec<PreferenceRate> = tally
        .into_iter()
        .map(|((unit, object_type, simp_level), (q, n))| PreferenceRate {
            unit: match scheme {
                Scheme::ByParticipant => unit.0.to_string(),
                Scheme::ByObject => unit.1,
            },
            object_type,
            simp_level,
            percent_qslim: 100.0 * q as f64 / n as f64,
            n,
        })
        .collect();
    let mut conditions = Vec::new();
    for &t in &types {
        for &l in &levels {
            let v: Vec<f64> = rates
                .iter()
                .filter(|r| r.object_type == t && r.simp_level == l)
                .map(|r| r.percent_qslim)
                .collect();
            if v.is_empty() {
                return Err(StatsError::EmptyCondition(format!("{t} at {l}%")));
            }
            conditions.push((t, l, super::mean(&v)));
        }
    }
    Ok(PreferenceSummary {
        scheme,
        rates,
        conditions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ResponseValue;

    fn pref(participant: u32, object: &str, t: ObjectType, level: u32, choice: SimpType) -> HumanResponse {
        HumanResponse {
            participant,
            object: object.into(),
            object_type: t,
            task: Task::Preference,
            simp_type: SimpType::Qslim,
            simp_level: level,
            value: ResponseValue::Choice(choice),
            spoiled: false,
            error: false,
            variant: String::new(),
        }
    }

    #[test]
    fn all_qslim_and_alternating() {
        let all: Vec<_> = (0..4).map(|p| pref(p, "cow", ObjectType::Animal, 50, SimpType::Qslim)).collect();
        let s = preference_rates(&all, Scheme::ByParticipant).unwrap();
        assert!(s.rates.iter().all(|r| r.percent_qslim == 100.0));
        let alt: Vec<_> = (0..4)
            .map(|p| {
                let c = if p % 2 == 0 { SimpType::Qslim } else { SimpType::Vclust };
                pref(p, "cow", ObjectType::Animal, 50, c)
            })
            .collect();
        let s = preference_rates(&alt, Scheme::ByObject).unwrap();
        assert_eq!(s.rates[0].percent_qslim, 50.0);
        assert_eq!(s.conditions, vec![(ObjectType::Animal, 50, 50.0)]);
    }

    #[test]
    fn hand_tally_and_scheme_agreement() {
        use ObjectType::*;
        use SimpType::*;
        // participants 0..4, two animals, one level; choices by hand:
        //        cow  pig
        // p0      Q    Q
        // p1      Q    V
        // p2      V    V
        // p3      Q    Q
        let c = [[Qslim, Qslim], [Qslim, Vclust], [Vclust, Vclust], [Qslim, Qslim]];
        let mut rows = Vec::new();
        for (p, row) in c.iter().enumerate() {
            for (o, name) in ["cow", "pig"].iter().enumerate() {
                rows.push(pref(p as u32, name, Animal, 80, row[o]));
            }
        }
        let by_p = preference_rates(&rows, Scheme::ByParticipant).unwrap();
        let pct: Vec<f64> = by_p.rates.iter().map(|r| r.percent_qslim).collect();
        assert_eq!(pct, vec![100.0, 50.0, 0.0, 100.0]);
        assert_eq!(by_p.rates[0].unit, "0");
        let by_o = preference_rates(&rows, Scheme::ByObject).unwrap();
        let pct: Vec<f64> = by_o.rates.iter().map(|r| r.percent_qslim).collect();
        assert_eq!(pct, vec![75.0, 50.0]);
        assert_eq!(by_p.conditions[0].2, 62.5);
        assert_eq!(by_o.conditions[0].2, 62.5);
    }

    #[test]
    fn empty_condition_is_an_error() {
        let rows = vec![
            pref(0, "cow", ObjectType::Animal, 50, SimpType::Qslim),
            pref(0, "cup", ObjectType::Artifact, 80, SimpType::Qslim),
        ];
        assert!(matches!(preference_rates(&rows, Scheme::ByObject), Err(StatsError::EmptyCondition(_))));
        assert!(preference_rates(&[], Scheme::ByObject).is_err());
    }
}
