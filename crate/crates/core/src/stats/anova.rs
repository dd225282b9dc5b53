use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use super::StatsError;

/// Which unit the responses were averaged over before the analysis; the
/// other unit supplies the replicates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Averaged over objects; participants are the replicates.
    ByParticipant,
    /// Averaged over participants; objects are the replicates.
    ByObject,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::ByParticipant => "participants",
            Scheme::ByObject => "objects",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Observations labelled by one level per factor.
#[derive(Debug, Clone, Default)]
pub struct AnovaInput {
    factors: Vec<String>,
    observations: Vec<(Vec<String>, f64)>,
}

impl AnovaInput {
    pub fn new<S: Into<String>>(factors: impl IntoIterator<Item = S>) -> Self {
        AnovaInput {
            factors: factors.into_iter().map(Into::into).collect(),
            observations: Vec::new(),
        }
    }

    pub fn push<S: ToString>(&mut self, levels: &[S], value: f64) {
        self.observations.push((levels.iter().map(ToString::to_string).collect(), value));
    }

    pub fn factors(&self) -> &[String] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaRow {
    /// Factor names joined by ` x `.
    pub effect: String,
    pub df_effect: usize,
    pub df_error: usize,
    pub ss_effect: f64,
    pub f: f64,
    pub p: f64,
    pub scheme: Scheme,
}

impl AnovaRow {
    pub fn f_label(&self) -> String {
        format!("F({},{}) = {:.2}", self.df_effect, self.df_error, self.f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    pub rows: Vec<AnovaRow>,
    pub ss_error: f64,
    pub df_error: usize,
    pub ss_total: f64,
    pub replicates: usize,
}

/// Upper tail of the F distribution.
pub fn f_survival(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    beta_reg(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))
}

/// Balanced fixed-effects factorial ANOVA: every main effect and
/// interaction, tested against the within-cell error.
///
/// Effects are listed by order (main effects first) and then by factor
/// position. An effect with zero sum of squares gets `F = 0`.
pub fn anova(input: &AnovaInput, scheme: Scheme) -> Result<AnovaTable, StatsError> {
    let k = input.factors.len();
    if k == 0 || k > 4 {
        return Err(StatsError::InvalidDesign(format!("{k} factors; 1 to 4 supported")));
    }
    if input.observations.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut levels: Vec<Vec<String>> = Vec::with_capacity(k);
    for f in 0..k {
        let mut set = BTreeSet::new();
        for (labels, _) in &input.observations {
            if labels.len() != k {
                return Err(StatsError::InvalidDesign(format!("observation with {} labels for {k} factors", labels.len())));
            }
            set.insert(labels[f].clone());
        }
        if set.len() < 2 {
            return Err(StatsError::InvalidDesign(format!("factor `{}` has a single level", input.factors[f])));
        }
        levels.push(set.into_iter().collect());
    }
    let sizes: Vec<usize> = levels.iter().map(Vec::len).collect();
    let n_cells: usize = sizes.iter().product();
    let cell_of = |labels: &[String]| -> usize {
        let mut idx = 0;
        for f in 0..k {
            idx = idx * sizes[f] + levels[f].binary_search(&labels[f]).expect("level collected above");
        }
        idx
    };
    let digits = |mut c: usize| -> Vec<usize> {
        let mut d = vec![0; k];
        for f in (0..k).rev() {
            d[f] = c % sizes[f];
            c /= sizes[f];
        }
        d
    };

    // Shifting by one observation changes no sum of squares and makes
    // constant data exactly zero.
    let origin = input.observations[0].1;
    let mut count = vec![0usize; n_cells];
    let mut sum = vec![0.0f64; n_cells];
    for (labels, y) in &input.observations {
        let c = cell_of(labels);
        count[c] += 1;
        sum[c] += y - origin;
    }
    let r = count[0];
    if let Some(c) = (0..n_cells).find(|&c| count[c] != r) {
        let d = digits(c);
        let name: Vec<String> = (0..k).map(|f| format!("{}={}", input.factors[f], levels[f][d[f]])).collect();
        return Err(StatsError::Unbalanced(format!(
            "cell [{}] has {} observations, expected {r}",
            name.join(", "),
            count[c]
        )));
    }
    if r < 2 {
        return Err(StatsError::InvalidDesign("at least 2 replicates per cell are needed".into()));
    }
    let cell_mean: Vec<f64> = sum.iter().map(|s| s / r as f64).collect();

    let ss_error: f64 = input
        .observations
        .iter()
        .map(|(labels, y)| {
            let d = (y - origin) - cell_mean[cell_of(labels)];
            d * d
        })
        .sum();
    let n = input.observations.len();
    let grand = cell_mean.iter().sum::<f64>() / n_cells as f64;
    let ss_total: f64 = input
        .observations
        .iter()
        .map(|(_, y)| {
            let d = (y - origin) - grand;
            d * d
        })
        .sum();
    let df_error = n - n_cells;

    // Marginal means of the cell means for every factor subset.
    let cells_in = |mask: usize| -> usize { (0..k).filter(|f| mask >> f & 1 == 1).map(|f| sizes[f]).product() };
    let project = |mask: usize, d: &[usize]| -> usize {
        let mut idx = 0;
        for f in 0..k {
            if mask >> f & 1 == 1 {
                idx = idx * sizes[f] + d[f];
            }
        }
        idx
    };
    let marginals: Vec<Vec<f64>> = (0..1usize << k)
        .map(|mask| {
            let m = cells_in(mask);
            let mut acc = vec![0.0; m];
            for (c, cm) in cell_mean.iter().enumerate() {
                acc[project(mask, &digits(c))] += cm;
            }
            let per = (n_cells / m) as f64;
            acc.into_iter().map(|s| s / per).collect()
        })
        .collect();

    let mut masks: Vec<usize> = (1..1usize << k).collect();
    masks.sort_by_key(|&m| (m.count_ones(), (0..k).map(|f| usize::from(m >> f & 1 == 0)).collect::<Vec<_>>()));
    let ms_error = ss_error / df_error as f64;
    let rows = masks
        .into_iter()
        .map(|e| {
            let m = cells_in(e);
            let mut ss = 0.0;
            for c in 0..n_cells {
                let d = digits(c);
                // visit each cell of the effect once: cells whose other
                // digits are zero
                if (0..k).any(|f| e >> f & 1 == 0 && d[f] != 0) {
                    continue;
                }
                let mut tau = 0.0;
                let mut s = e;
                loop {
                    let sign = if (e.count_ones() - s.count_ones()) % 2 == 0 { 1.0 } else { -1.0 };
                    tau += sign * marginals[s][project(s, &d)];
                    if s == 0 {
                        break;
                    }
                    s = (s - 1) & e;
                }
                ss += tau * tau;
            }
            ss *= (r * (n_cells / m)) as f64;
            let df_effect: usize = (0..k).filter(|f| e >> f & 1 == 1).map(|f| sizes[f] - 1).product();
            let f = if ss == 0.0 {
                0.0
            } else if ms_error == 0.0 {
                f64::INFINITY
            } else {
                (ss / df_effect as f64) / ms_error
            };
            let names: Vec<&str> = (0..k).filter(|f| e >> f & 1 == 1).map(|f| input.factors[f].as_str()).collect();
            AnovaRow {
                effect: names.join(" x "),
                df_effect,
                df_error,
                ss_effect: ss,
                f,
                p: f_survival(f, df_effect as f64, df_error as f64),
                scheme,
            }
        })
        .collect();
    Ok(AnovaTable {
        rows,
        ss_error,
        df_error,
        ss_total,
        replicates: r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{pearson, t_two_sided_p};

    #[test]
    fn constant_data_gives_zero_f() {
        let mut inp = AnovaInput::new(["a", "b"]);
        for a in ["x", "y"] {
            for b in ["u", "v", "w"] {
                for _ in 0..3 {
                    inp.push(&[a, b], 0.1);
                }
            }
        }
        let t = anova(&inp, Scheme::ByObject).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert!(t.rows.iter().all(|r| r.f == 0.0 && r.p == 1.0));
        assert_eq!(t.rows[2].effect, "a x b");
    }

    #[test]
    fn one_way_matches_t_test() {
        let mut inp = AnovaInput::new(["group"]);
        for v in [1.0, 2.0, 3.0] {
            inp.push(&["A"], v);
        }
        for v in [4.0, 5.0, 6.0] {
            inp.push(&["B"], v);
        }
        let row = &anova(&inp, Scheme::ByObject).unwrap().rows[0];
        // pooled t: (5 - 2) / sqrt(1 * (1/3 + 1/3))
        let t = 3.0 / (2.0f64 / 3.0).sqrt();
        assert!((row.f - t * t).abs() < 1e-12);
        assert!((row.p - t_two_sided_p(t, 4.0)).abs() < 1e-12);
        assert_eq!((row.df_effect, row.df_error), (1, 4));
        // the same through the point-biserial correlation
        let c = pearson(&[0.0, 0.0, 0.0, 1.0, 1.0, 1.0], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert!((c.p - row.p).abs() < 1e-12);
    }

    #[test]
    fn sums_of_squares_add_up() {
        let mut inp = AnovaInput::new(["a", "b", "c"]);
        let mut v = 0.37;
        for a in 0..2 {
            for b in 0..3 {
                for c in 0..2 {
                    for _ in 0..4 {
                        v = (v * 7.31 + 0.113f64).fract();
                        inp.push(&[a, b, c], v + a as f64 * 0.5 + (b * c) as f64 * 0.2);
                    }
                }
            }
        }
        let t = anova(&inp, Scheme::ByParticipant).unwrap();
        assert_eq!(t.rows.len(), 7);
        let total: f64 = t.rows.iter().map(|r| r.ss_effect).sum::<f64>() + t.ss_error;
        assert!((total - t.ss_total).abs() <= 1e-9 * t.ss_total);
        assert_eq!(t.df_error, 48 - 12);
    }

    #[test]
    fn design_errors() {
        let mut inp = AnovaInput::new(["a"]);
        inp.push(&["x"], 1.0);
        inp.push(&["x"], 2.0);
        assert!(matches!(anova(&inp, Scheme::ByObject), Err(StatsError::InvalidDesign(_))));
        inp.push(&["y"], 1.0);
        assert!(matches!(anova(&inp, Scheme::ByObject), Err(StatsError::Unbalanced(_))));
        let mut one = AnovaInput::new(["a"]);
        one.push(&["x"], 1.0);
        one.push(&["y"], 2.0);
        assert!(matches!(anova(&one, Scheme::ByObject), Err(StatsError::InvalidDesign(_))));
    }
}
