//! Synthetic participants for exercising the analysis end to end. Every
//! simulated participant runs the same counterbalanced plans a real one
//! would; answers are noisy functions of one automatic measure.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::predict::{Measure, PairMeasures};
use crate::protocol::{
    build_naming_plan, build_preference_plan, build_rating_plan, PlanObject, ProtocolError, Stimulus, NAMING_VARIANT,
};
use crate::simplify::{Levels, Version};
use crate::stats::{HumanResponse, ResponseValue, SimpType, Task};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub participants: u32,
    pub seed: u64,
    /// The measure responses depend on.
    pub driver: Measure,
    pub levels: Levels,
    /// Rating before rounding: `7 − 6·x + N(0, rating_noise)`, with `x` the
    /// driver scaled to [0, 1] over all pairs.
    pub rating_noise: f64,
    pub naming_base_ms: f64,
    pub naming_gain_ms: f64,
    pub naming_noise_ms: f64,
    pub error_rate: f64,
    pub spoil_rate: f64,
    /// Share of naming trials given an extra slow lapse.
    pub lapse_rate: f64,
    pub lapse_ms: f64,
    /// Slope of the logistic choice rule on the scaled driver difference.
    pub preference_gain: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            participants: 6,
            seed: 0,
            driver: Measure::MetroMn,
            levels: Levels::default(),
            rating_noise: 0.3,
            naming_base_ms: 900.0,
            naming_gain_ms: 500.0,
            naming_noise_ms: 80.0,
            error_rate: 0.03,
            spoil_rate: 0.01,
            lapse_rate: 0.01,
            lapse_ms: 5000.0,
            preference_gain: 10.0,
        }
    }
}

/// The objects of a measures table, for planning.
pub fn plan_objects(measures: &[PairMeasures]) -> Vec<PlanObject> {
    let mut objects: Vec<PlanObject> = measures.iter().map(|m| PlanObject::new(m.object.clone(), m.object_type)).collect();
    objects.sort();
    objects.dedup();
    objects
}

/// Responses of `cfg.participants` simulated participants to every real
/// trial of their plans.
pub fn simulate_responses(measures: &[PairMeasures], cfg: &SimConfig) -> Result<Vec<HumanResponse>, ProtocolError> {
    let objects = plan_objects(measures);
    let max = measures.iter().map(|m| m.get(cfg.driver)).fold(0.0f64, f64::max);
    let scale = if max > 0.0 { max } else { 1.0 };
    let driver: BTreeMap<(&str, Version), f64> = measures
        .iter()
        .map(|m| ((m.object.as_str(), m.pair), m.get(cfg.driver) / scale))
        .collect();
    let x = |object: &str, v: Version| -> Result<f64, ProtocolError> {
        if v == Version::S {
            return Ok(0.0);
        }
        driver
            .get(&(object, v))
            .copied()
            .ok_or_else(|| ProtocolError::Corpus(format!("no measures for {object} s-{v}")))
    };
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let mut out = Vec::new();
    for p in 0..cfg.participants {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(u64::from(p));
        let row = |task: Task, object: &str, t: crate::corpus::ObjectType, v: Version, value: ResponseValue| HumanResponse {
            participant: p,
            object: object.to_string(),
            object_type: t,
            task,
            simp_type: SimpType::of(v),
            simp_level: cfg.levels.percent(v),
            value,
            spoiled: false,
            error: false,
            variant: String::new(),
        };
        for t in build_naming_plan(p, &objects)?.real_trials() {
            let v = t.condition_version();
            let mut ms = cfg.naming_base_ms + cfg.naming_gain_ms * x(&t.object, v)? + cfg.naming_noise_ms * unit.sample(&mut rng);
            if rng.random::<f64>() < cfg.lapse_rate {
                ms += cfg.lapse_ms;
            }
            let mut r = row(Task::Naming, &t.object, t.object_type, v, ResponseValue::NamingMs(ms.max(150.0)));
            r.error = rng.random::<f64>() < cfg.error_rate;
            r.spoiled = rng.random::<f64>() < cfg.spoil_rate;
            r.variant = NAMING_VARIANT.into();
            out.push(r);
        }
        for t in build_rating_plan(p, &objects, cfg.seed)?.real_trials() {
            let v = t.condition_version();
            let raw = 7.0 - 6.0 * x(&t.object, v)? + cfg.rating_noise * unit.sample(&mut rng);
            let rating = raw.round().clamp(1.0, 7.0) as u8;
            out.push(row(Task::Rating, &t.object, t.object_type, v, ResponseValue::Rating(rating)));
        }
        for t in build_preference_plan(p, &objects, cfg.seed)?.real_trials() {
            let Stimulus::Pair { left, right } = t.stimulus else {
                unreachable!("preference trials show pairs")
            };
            let (q, v) = if SimpType::of(left) == SimpType::Qslim { (left, right) } else { (right, left) };
            let d = x(&t.object, v)? - x(&t.object, q)?;
            let p_qslim = 1.0 / (1.0 + (-cfg.preference_gain * d).exp());
            let choice = if rng.random::<f64>() < p_qslim { SimpType::Qslim } else { SimpType::Vclust };
            out.push(row(Task::Preference, &t.object, t.object_type, left, ResponseValue::Choice(choice)));
        }
    }
    Ok(out)
}

/// Permutes the values of one task's rows among themselves, breaking any
/// relation to the stimuli.
pub fn shuffle_values(rows: &mut [HumanResponse], task: Task, seed: u64) {
    let idx: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].task == task).collect();
    let mut values: Vec<ResponseValue> = idx.iter().map(|&i| rows[i].value).collect();
    values.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    for (&i, v) in idx.iter().zip(values) {
        rows[i].value = v;
    }
}
