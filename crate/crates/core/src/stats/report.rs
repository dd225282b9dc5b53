use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::io;

use serde::{Deserialize, Serialize};

use super::{
    anova, clean_naming, mean, pearson, preference_rates, AnovaInput, AnovaTable, Correlation, ExclusionReport,
    HumanResponse, Scheme, SimpType, StatsError, Task,
};
use crate::corpus::ObjectType;
use crate::predict::{Measure, PairMeasures, PreferencePrediction};
use crate::simplify::{Algorithm, Levels, Version};

/// Marginal significance.
pub const P_MARGINAL: f64 = 0.1;
pub const P_SIGNIFICANT: f64 = 0.05;

/// How the two simplification levels of one simplifier enter a correlation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// One point per object and level.
    #[default]
    TwoPoints,
    /// One point per object, both levels averaged.
    Averaged,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportOptions {
    pub pooling: Pooling,
    pub levels: Levels,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    NamingTime,
    Rating,
    /// `name(q) − name(v)` at one level.
    NamingDiff,
    /// `rate(s,q) − rate(s,v)` at one level.
    RatingDiff,
    /// Percent of participants choosing the Qslim version.
    Preference,
}

impl Variable {
    pub fn as_str(self) -> &'static str {
        match self {
            Variable::NamingTime => "naming_time",
            Variable::Rating => "rating",
            Variable::NamingDiff => "naming_diff",
            Variable::RatingDiff => "rating_diff",
            Variable::Preference => "preference",
        }
    }

    fn title(self) -> &'static str {
        match self {
            Variable::NamingTime => "Naming Times",
            Variable::Rating => "Ratings",
            Variable::NamingDiff => "Naming Diffs",
            Variable::RatingDiff => "Rating Diffs",
            Variable::Preference => "Preferences",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetKind {
    All,
    Animals,
    Artifacts,
}

impl SubsetKind {
    pub const ALL: [SubsetKind; 3] = [SubsetKind::All, SubsetKind::Animals, SubsetKind::Artifacts];

    pub fn as_str(self) -> &'static str {
        match self {
            SubsetKind::All => "all",
            SubsetKind::Animals => "animals",
            SubsetKind::Artifacts => "artifacts",
        }
    }

    fn contains(self, t: ObjectType) -> bool {
        match self {
            SubsetKind::All => true,
            SubsetKind::Animals => t == ObjectType::Animal,
            SubsetKind::Artifacts => t == ObjectType::Artifact,
        }
    }
}

impl fmt::Display for SubsetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub measure: Measure,
    pub variable: Variable,
    pub subset: SubsetKind,
    /// Set for naming-time and rating rows.
    pub simp_type: Option<SimpType>,
    /// `None` when fewer than three points or a constant series.
    pub correlation: Option<Correlation>,
    pub n: usize,
}

impl CorrelationRow {
    fn cell(&self) -> String {
        match self.correlation {
            Some(c) => format!("{:.2}{}", c.r, marker(c.p)),
            None => "n/a".into(),
        }
    }
}

fn marker(p: f64) -> &'static str {
    if p < P_SIGNIFICANT {
        "**"
    } else if p < P_MARGINAL {
        "*"
    } else {
        ""
    }
}

fn averaged<K: Ord>(m: BTreeMap<K, Vec<f64>>) -> BTreeMap<K, f64> {
    m.into_iter().map(|(k, v)| (k, mean(&v))).collect()
}

/// Participant means keyed by (object, version) or (object, level).
struct HumanMeans {
    naming: BTreeMap<(String, Version), f64>,
    rating: BTreeMap<(String, Version), f64>,
    preference: BTreeMap<(String, u32), f64>,
}

fn human_means(human: &[HumanResponse], levels: Levels) -> Result<(HumanMeans, Option<ExclusionReport>), StatsError> {
    let naming_rows: Vec<HumanResponse> = human.iter().filter(|r| r.task == Task::Naming).cloned().collect();
    let (kept, exclusions) = if naming_rows.is_empty() {
        (Vec::new(), None)
    } else {
        let c = clean_naming(&naming_rows)?;
        (c.kept, Some(c.report))
    };
    let mut naming: BTreeMap<(String, Version), Vec<f64>> = BTreeMap::new();
    for r in &kept {
        if let Some(v) = r.version(levels.low) {
            naming.entry((r.object.clone(), v)).or_default().push(r.naming_ms().expect("naming row"));
        }
    }
    let mut rating: BTreeMap<(String, Version), Vec<f64>> = BTreeMap::new();
    let mut pref: BTreeMap<(String, u32), Vec<f64>> = BTreeMap::new();
    for r in human {
        match r.task {
            Task::Rating => {
                if let (Some(v), Some(x)) = (r.version(levels.low), r.rating()) {
                    rating.entry((r.object.clone(), v)).or_default().push(x as f64);
                }
            }
            Task::Preference => {
                let q = if r.choice() == Some(SimpType::Qslim) { 100.0 } else { 0.0 };
                pref.entry((r.object.clone(), r.simp_level)).or_default().push(q);
            }
            Task::Naming => {}
        }
    }
    Ok((
        HumanMeans {
            naming: averaged(naming),
            rating: averaged(rating),
            preference: averaged(pref),
        },
        exclusions,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    /// Naming-time and rating rows: measure × variable × subset × simplifier.
    pub absolute: Vec<CorrelationRow>,
    /// Difference and preference rows: measure × variable × subset.
    pub differences: Vec<CorrelationRow>,
    pub exclusions: Option<ExclusionReport>,
    /// (object, version or level) points left out for lack of human data.
    pub missing_points: usize,
    pub pooling: Pooling,
}

impl CorrelationReport {
    pub fn rows(&self) -> impl Iterator<Item = &CorrelationRow> {
        self.absolute.iter().chain(&self.differences)
    }

    pub fn find(&self, measure: Measure, variable: Variable, subset: SubsetKind, simp_type: Option<SimpType>) -> Option<&CorrelationRow> {
        self.rows()
            .find(|r| r.measure == measure && r.variable == variable && r.subset == subset && r.simp_type == simp_type)
    }
}

fn check_join(
    measures: &[PairMeasures],
    predictions: &[PreferencePrediction],
    human: &[HumanResponse],
) -> Result<BTreeMap<String, ObjectType>, StatsError> {
    let mut objects = BTreeMap::new();
    for m in measures {
        objects.insert(m.object.clone(), m.object_type);
    }
    let human_objects: BTreeSet<&str> = human.iter().map(|r| r.object.as_str()).collect();
    let pred_objects: BTreeSet<&str> = predictions.iter().map(|p| p.object.as_str()).collect();
    let mut unmatched = Vec::new();
    for o in objects.keys() {
        if !human_objects.contains(o.as_str()) {
            unmatched.push(format!("{o} (no human responses)"));
        }
        if !pred_objects.contains(o.as_str()) {
            unmatched.push(format!("{o} (no predictions)"));
        }
        for v in Version::SIMPLIFIED {
            if !measures.iter().any(|m| &m.object == o && m.pair == v) {
                unmatched.push(format!("{o} (no measures for s-{v})"));
            }
        }
    }
    for o in human_objects.iter().chain(&pred_objects) {
        if !objects.contains_key(*o) {
            unmatched.push(format!("{o} (no measures)"));
        }
    }
    for r in human {
        if objects.get(&r.object).is_some_and(|t| *t != r.object_type) {
            unmatched.push(format!("{} (object type differs from measures)", r.object));
        }
    }
    unmatched.sort();
    unmatched.dedup();
    if unmatched.is_empty() {
        Ok(objects)
    } else {
        Err(StatsError::Unmatched(unmatched))
    }
}

fn correlate(points: &[(f64, f64)]) -> Option<Correlation> {
    let (x, y): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    pearson(&x, &y).ok()
}

/// Correlations of every automatic measure with the human measures:
/// naming times and ratings of each simplified version per simplifier,
/// and the predictors `p5`/`p8` against naming differences, rating
/// differences and Qslim preference rates. Naming times are cleaned
/// first. Every row covers both levels.
pub fn correlate_report(
    measures: &[PairMeasures],
    predictions: &[PreferencePrediction],
    human: &[HumanResponse],
    opts: &ReportOptions,
) -> Result<CorrelationReport, StatsError> {
    if measures.is_empty() {
        return Err(StatsError::Empty);
    }
    let objects = check_join(measures, predictions, human)?;
    let (hm, exclusions) = human_means(human, opts.levels)?;
    let level_of = |high: bool| if high { opts.levels.high } else { opts.levels.low };
    let measure_of = |o: &str, v: Version, m: Measure| {
        measures.iter().find(|p| p.object == o && p.pair == v).map(|p| p.get(m)).expect("joined above")
    };
    let prediction_of = |o: &str, m: Measure, high: bool| {
        predictions
            .iter()
            .find(|p| p.object == o && p.measure == m)
            .map(|p| if high { p.p8 } else { p.p5 })
    };
    let mut missing = BTreeSet::new();
    // one (x, y) per object and level, pooled or averaged per object
    let mut gather = |subset: SubsetKind, f: &dyn Fn(&str, bool) -> (Option<f64>, Option<f64>, String)| {
        let mut pts = Vec::new();
        for (o, t) in &objects {
            if !subset.contains(*t) {
                continue;
            }
            let per_level: Vec<(f64, f64)> = [false, true]
                .into_iter()
                .filter_map(|high| match f(o, high) {
                    (Some(x), Some(y), _) => Some((x, y)),
                    (_, _, key) => {
                        missing.insert(key);
                        None
                    }
                })
                .collect();
            match opts.pooling {
                Pooling::TwoPoints => pts.extend(per_level),
                Pooling::Averaged => {
                    if per_level.len() == 2 {
                        pts.push((0.5 * (per_level[0].0 + per_level[1].0), 0.5 * (per_level[0].1 + per_level[1].1)));
                    }
                }
            }
        }
        pts
    };

    let mut absolute = Vec::new();
    for m in Measure::ALL {
        for variable in [Variable::NamingTime, Variable::Rating] {
            for subset in SubsetKind::ALL {
                for st in [SimpType::Qslim, SimpType::Vclust] {
                    let alg = st.algorithm().expect("simplified");
                    let table = if variable == Variable::NamingTime { &hm.naming } else { &hm.rating };
                    let pts = gather(subset, &|o: &str, high: bool| {
                        let v = Version::from_parts(alg, high);
                        (
                            Some(measure_of(o, v, m)),
                            table.get(&(o.to_string(), v)).copied(),
                            format!("{} {o} {v}", variable.as_str()),
                        )
                    });
                    absolute.push(CorrelationRow {
                        measure: m,
                        variable,
                        subset,
                        simp_type: Some(st),
                        correlation: correlate(&pts),
                        n: pts.len(),
                    });
                }
            }
        }
    }

    let mut differences = Vec::new();
    for m in Measure::ALL {
        for variable in [Variable::NamingDiff, Variable::RatingDiff, Variable::Preference] {
            for subset in SubsetKind::ALL {
                let pts = gather(subset, &|o: &str, high: bool| {
                    let (q, v) = (Version::from_parts(Algorithm::Qem, high), Version::from_parts(Algorithm::Vclust, high));
                    let diff = |t: &BTreeMap<(String, Version), f64>| {
                        Some(t.get(&(o.to_string(), q))? - t.get(&(o.to_string(), v))?)
                    };
                    let y = match variable {
                        Variable::NamingDiff => diff(&hm.naming),
                        Variable::RatingDiff => diff(&hm.rating),
                        _ => hm.preference.get(&(o.to_string(), level_of(high))).copied(),
                    };
                    (prediction_of(o, m, high), y, format!("{} {o} {}", variable.as_str(), level_of(high)))
                });
                differences.push(CorrelationRow {
                    measure: m,
                    variable,
                    subset,
                    simp_type: None,
                    correlation: correlate(&pts),
                    n: pts.len(),
                });
            }
        }
    }
    Ok(CorrelationReport {
        absolute,
        differences,
        exclusions,
        missing_points: missing.len(),
        pooling: opts.pooling,
    })
}

pub fn write_correlations_csv<W: io::Write>(out: W, report: &CorrelationReport) -> Result<(), StatsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["measure", "variable", "subset", "simp_type", "r", "p", "n"])?;
    for row in report.rows() {
        let (r, p) = match row.correlation {
            Some(c) => (format!("{:.6}", c.r), format!("{:.6}", c.p)),
            None => (String::new(), String::new()),
        };
        w.write_record([
            row.measure.as_str().to_string(),
            row.variable.as_str().to_string(),
            row.subset.as_str().to_string(),
            row.simp_type.map(|s| s.to_string()).unwrap_or_default(),
            r,
            p,
            row.n.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

const CELL: usize = 9;

/// Both correlation grids as aligned text.
pub fn format_correlation_tables(report: &CorrelationReport) -> String {
    let mut s = String::new();
    let subset_title = |k: SubsetKind| match k {
        SubsetKind::All => "All Models",
        SubsetKind::Animals => "Animals",
        SubsetKind::Artifacts => "Artifacts",
    };
    let n_of = |rows: &mut dyn Iterator<Item = &CorrelationRow>| rows.map(|r| r.n).max().unwrap_or(0);

    writeln!(s, "Correlations of naming times and ratings with the automatic measures").unwrap();
    write!(s, "{:<10}", "").unwrap();
    for v in [Variable::NamingTime, Variable::Rating] {
        write!(s, "{:<w$}", v.title(), w = 6 * CELL).unwrap();
    }
    writeln!(s).unwrap();
    write!(s, "{:<10}", "").unwrap();
    for _ in 0..2 {
        for k in SubsetKind::ALL {
            write!(s, "{:<w$}", subset_title(k), w = 2 * CELL).unwrap();
        }
    }
    writeln!(s).unwrap();
    write!(s, "{:<10}", "Measure").unwrap();
    for _ in 0..6 {
        write!(s, "{:>CELL$}{:>CELL$}", "Qslim", "Vclust").unwrap();
    }
    writeln!(s).unwrap();
    for m in Measure::ALL {
        write!(s, "{:<10}", m.display_name()).unwrap();
        for r in report.absolute.iter().filter(|r| r.measure == m) {
            write!(s, "{:>CELL$}", r.cell()).unwrap();
        }
        writeln!(s).unwrap();
    }
    writeln!(
        s,
        "n per cell: up to {}\n",
        n_of(&mut report.absolute.iter())
    )
    .unwrap();

    writeln!(s, "Correlations of preferences, naming time differences and rating differences with the automatic measures").unwrap();
    write!(s, "{:<10}", "").unwrap();
    for v in [Variable::NamingDiff, Variable::RatingDiff, Variable::Preference] {
        write!(s, "{:<w$}", v.title(), w = 3 * CELL).unwrap();
    }
    writeln!(s).unwrap();
    write!(s, "{:<10}", "Measure").unwrap();
    for _ in 0..3 {
        write!(s, "{:>CELL$}{:>CELL$}{:>CELL$}", "All", "Anims", "Artifs").unwrap();
    }
    writeln!(s).unwrap();
    for m in Measure::ALL {
        write!(s, "{:<10}", m.display_name()).unwrap();
        for r in report.differences.iter().filter(|r| r.measure == m) {
            write!(s, "{:>CELL$}", r.cell()).unwrap();
        }
        writeln!(s).unwrap();
    }
    writeln!(s, "n per cell: up to {}", n_of(&mut report.differences.iter())).unwrap();
    writeln!(
        s,
        "* p < {P_MARGINAL}, ** p < {P_SIGNIFICANT}; levels {}",
        match report.pooling {
            Pooling::TwoPoints => "pooled as separate points",
            Pooling::Averaged => "averaged per object",
        }
    )
    .unwrap();
    s.lines().map(str::trim_end).collect::<Vec<_>>().join("\n") + "\n"
}

/// Effects of simplifier, level and object type on each automatic
/// measure, objects as replicates.
pub fn automatic_anovas(measures: &[PairMeasures]) -> Result<Vec<(Measure, AnovaTable)>, StatsError> {
    Measure::ALL
        .iter()
        .map(|&m| {
            let mut input = AnovaInput::new(["simp type", "simp level", "object type"]);
            for p in measures {
                let st = SimpType::of(p.pair);
                let level = if p.pair.is_high_level() { "high" } else { "low" };
                input.push(&[st.as_str(), level, p.object_type.as_str()], p.get(m));
            }
            Ok((m, anova(&input, Scheme::ByObject)?))
        })
        .collect()
}

fn effect_title(effect: &str) -> String {
    match effect {
        "simp type" => "Simp Type".into(),
        "simp level" => "Simp Level".into(),
        "object type" => "Object Type".into(),
        "simp type x simp level" => "SType x SLevel".into(),
        "simp type x object type" => "SType x OType".into(),
        "simp level x object type" => "SLevel x OType".into(),
        "simp type x simp level x object type" => "Three Way".into(),
        other => other.to_string(),
    }
}

/// F values of every effect per measure; markers as in the correlation
/// tables.
pub fn format_anova_table(tables: &[(Measure, AnovaTable)]) -> String {
    let mut s = String::new();
    let Some((_, first)) = tables.first() else {
        return s;
    };
    writeln!(
        s,
        "ANOVAs of the automatic measures (objects as replicates, F({},{}))",
        first.rows.first().map_or(0, |r| r.df_effect),
        first.df_error
    )
    .unwrap();
    write!(s, "{:<10}", "Measure").unwrap();
    for r in &first.rows {
        write!(s, "{:>16}", effect_title(&r.effect)).unwrap();
    }
    writeln!(s).unwrap();
    for (m, t) in tables {
        write!(s, "{:<10}", m.display_name()).unwrap();
        for r in &t.rows {
            let f = if r.f.is_finite() { format!("{:.2}", r.f) } else { "inf".into() };
            write!(s, "{:>16}", format!("{f}{}", marker(r.p))).unwrap();
        }
        writeln!(s).unwrap();
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentalAnova {
    pub title: String,
    pub scheme: Scheme,
    pub table: AnovaTable,
    /// Replicate units dropped for lacking a cell.
    pub dropped_units: usize,
}

/// Averages values per (unit, cell) and runs the ANOVA on units that have
/// as many cells as the most complete unit. Units nested in a factor (an
/// object is always one object type) are then trimmed to the same count
/// per level of that factor, keeping the first by id.
fn unit_anova(
    factors: &[&str],
    obs: &[(String, Vec<String>, f64)],
    scheme: Scheme,
) -> Result<(AnovaTable, usize), StatsError> {
    let mut cells: BTreeMap<(String, Vec<String>), Vec<f64>> = BTreeMap::new();
    for (unit, cell, y) in obs {
        cells.entry((unit.clone(), cell.clone())).or_default().push(*y);
    }
    let mut per_unit: BTreeMap<&str, Vec<&Vec<String>>> = BTreeMap::new();
    for (u, c) in cells.keys() {
        per_unit.entry(u.as_str()).or_default().push(c);
    }
    let full = per_unit.values().map(Vec::len).max().unwrap_or(0);
    let complete: Vec<(&str, &Vec<&Vec<String>>)> =
        per_unit.iter().filter(|(_, c)| c.len() == full).map(|(u, c)| (*u, c)).collect();
    let nested: Vec<usize> = (0..factors.len())
        .filter(|&f| complete.iter().all(|(_, c)| c.iter().all(|cell| cell[f] == c[0][f])))
        .collect();
    let mut groups: BTreeMap<Vec<&str>, Vec<&str>> = BTreeMap::new();
    for (u, c) in &complete {
        groups.entry(nested.iter().map(|&f| c[0][f].as_str()).collect()).or_default().push(u);
    }
    let size = groups.values().map(Vec::len).min().unwrap_or(0);
    let keep: BTreeSet<&str> = groups.values().flat_map(|g| g[..size].iter().copied()).collect();
    let dropped = per_unit.len() - keep.len();
    let mut input = AnovaInput::new(factors.iter().copied());
    for ((u, cell), ys) in &cells {
        if keep.contains(u.as_str()) {
            input.push(cell, mean(ys));
        }
    }
    Ok((anova(&input, scheme)?, dropped))
}

/// The dual (participant and object) analyses of the human data: naming
/// over object type × level averaged over simplifier, naming and ratings
/// over simplifier × level × object type without standards, and Qslim
/// preference rates over object type × level.
pub fn experimental_anovas(human: &[HumanResponse]) -> Result<Vec<ExperimentalAnova>, StatsError> {
    let naming: Vec<HumanResponse> = human.iter().filter(|r| r.task == Task::Naming).cloned().collect();
    let kept = if naming.is_empty() { Vec::new() } else { clean_naming(&naming)?.kept };
    let unit = |r: &HumanResponse, scheme: Scheme| match scheme {
        Scheme::ByParticipant => format!("{:06}", r.participant),
        Scheme::ByObject => r.object.clone(),
    };
    let mut out = Vec::new();
    let mut run = |title: &str, factors: &[&str], obs: Vec<(String, Vec<String>, f64)>, scheme: Scheme| -> Result<(), StatsError> {
        if obs.is_empty() {
            return Ok(());
        }
        let (table, dropped_units) = unit_anova(factors, &obs, scheme)?;
        out.push(ExperimentalAnova {
            title: title.to_string(),
            scheme,
            table,
            dropped_units,
        });
        Ok(())
    };
    for scheme in [Scheme::ByParticipant, Scheme::ByObject] {
        let obs = kept
            .iter()
            .map(|r| {
                let cell = vec![r.object_type.to_string(), r.simp_level.to_string()];
                (unit(r, scheme), cell, r.naming_ms().expect("naming"))
            })
            .collect();
        run("naming times, averaged over simp type", &["object type", "simp level"], obs, scheme)?;
    }
    for (task, title) in [(Task::Naming, "naming times without standards"), (Task::Rating, "ratings")] {
        let rows: &[HumanResponse] = if task == Task::Naming { &kept } else { human };
        for scheme in [Scheme::ByParticipant, Scheme::ByObject] {
            let obs = rows
                .iter()
                .filter(|r| r.task == task && r.simp_type != SimpType::None)
                .map(|r| {
                    let cell = vec![r.simp_type.to_string(), r.simp_level.to_string(), r.object_type.to_string()];
                    let y = r.naming_ms().or(r.rating().map(f64::from)).expect("naming or rating");
                    (unit(r, scheme), cell, y)
                })
                .collect();
            run(title, &["simp type", "simp level", "object type"], obs, scheme)?;
        }
    }
    let prefs: Vec<HumanResponse> = human.iter().filter(|r| r.task == Task::Preference).cloned().collect();
    if !prefs.is_empty() {
        for scheme in [Scheme::ByParticipant, Scheme::ByObject] {
            let rates = preference_rates(&prefs, scheme)?;
            let obs = rates
                .rates
                .iter()
                .map(|r| {
                    (
                        r.unit.clone(),
                        vec![r.object_type.to_string(), r.simp_level.to_string()],
                        r.percent_qslim,
                    )
                })
                .collect();
            run("preferences for Qslim (%)", &["object type", "simp level"], obs, scheme)?;
        }
    }
    Ok(out)
}

/// One block per analysis in the `Variable / Avg by / ANOVA` layout.
pub fn format_experimental_anovas(analyses: &[ExperimentalAnova]) -> String {
    let mut s = String::new();
    let mut titles: Vec<&str> = Vec::new();
    for a in analyses {
        if !titles.contains(&a.title.as_str()) {
            titles.push(&a.title);
        }
    }
    for title in titles {
        writeln!(s, "ANOVA: {title}").unwrap();
        writeln!(s, "{:<40}{:<14}{:<24}{:>10}", "Variable", "Avg by", "ANOVA", "p").unwrap();
        for a in analyses.iter().filter(|a| a.title == title) {
            for r in &a.table.rows {
                writeln!(s, "{:<40}{:<14}{:<24}{:>10.4}{}", r.effect, a.scheme.as_str(), r.f_label(), r.p, marker(r.p)).unwrap();
            }
            if a.dropped_units > 0 {
                writeln!(s, "  ({} {} without every cell left out)", a.dropped_units, a.scheme.as_str()).unwrap();
            }
        }
        writeln!(s).unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predict::predictions_for;
    use crate::stats::ResponseValue;

    fn measures(n_per_type: usize) -> Vec<PairMeasures> {
        let mut rows = Vec::new();
        for t in ObjectType::ALL {
            for i in 0..n_per_type {
                let name = format!("{t}{i}");
                for (k, v) in Version::SIMPLIFIED.into_iter().enumerate() {
                    let x = 0.01 * (1 + i + 3 * k) as f64 + if t == ObjectType::Animal { 0.002 } else { 0.0 };
                    rows.push(PairMeasures {
                        object: name.clone(),
                        object_type: t,
                        pair: v,
                        bm: x,
                        mse: x * x,
                        metro_mn: x,
                        metro_mse: x * 0.5 + (i % 2) as f64 * 0.001,
                        metro_max: 2.0 * x,
                        metro_vol: (i % 3) as f64,
                    });
                }
            }
        }
        rows
    }

    fn human_from(ms: &[PairMeasures], participants: u32) -> Vec<HumanResponse> {
        let mut out = Vec::new();
        for p in 0..participants {
            for m in ms {
                let st = SimpType::of(m.pair);
                let level = if m.pair.is_high_level() { 80 } else { 50 };
                let base = HumanResponse {
                    participant: p,
                    object: m.object.clone(),
                    object_type: m.object_type,
                    task: Task::Rating,
                    simp_type: st,
                    simp_level: level,
                    value: ResponseValue::Rating(1),
                    spoiled: false,
                    error: false,
                    variant: String::new(),
                };
                out.push(HumanResponse {
                    value: ResponseValue::NamingMs(800.0 + 1000.0 * m.metro_mn + p as f64),
                    task: Task::Naming,
                    ..base.clone()
                });
                // exact linear relation on the integer grid: x = 0.01·k
                let rating = (8.0 - 100.0 * m.metro_mn).round().clamp(1.0, 7.0) as u8;
                out.push(HumanResponse {
                    value: ResponseValue::Rating(rating),
                    ..base.clone()
                });
                if st == SimpType::Qslim {
                    out.push(HumanResponse {
                        task: Task::Preference,
                        value: ResponseValue::Choice(if (p as usize + m.object.len()) % 3 == 0 { SimpType::Vclust } else { SimpType::Qslim }),
                        ..base
                    });
                }
            }
        }
        out
    }

    #[test]
    fn report_shape_and_exact_relation() {
        // x values 0.01..0.06 keep ratings 8 - 100x inside 1..7
        let ms = measures(2);
        let preds = predictions_for(&ms).unwrap();
        let human = human_from(&ms, 3);
        let rep = correlate_report(&ms, &preds, &human, &ReportOptions::default()).unwrap();
        assert_eq!(rep.absolute.len(), 72);
        assert_eq!(rep.differences.len(), 54);
        let r = rep.find(Measure::Bm, Variable::NamingTime, SubsetKind::Artifacts, Some(SimpType::Qslim)).unwrap();
        assert_eq!(r.n, 4);
        assert!((r.correlation.unwrap().r - 1.0).abs() < 1e-12);
        let text = format_correlation_tables(&rep);
        assert_eq!(text.lines().filter(|l| l.starts_with("MetroMn")).count(), 2);

        let averaged = correlate_report(
            &ms,
            &preds,
            &human,
            &ReportOptions {
                pooling: Pooling::Averaged,
                ..Default::default()
            },
        )
        .unwrap();
        let r = averaged.find(Measure::Bm, Variable::Rating, SubsetKind::All, Some(SimpType::Vclust)).unwrap();
        assert_eq!(r.n, 4);
    }

    #[test]
    fn unmatched_objects_are_listed() {
        let ms = measures(2);
        let preds = predictions_for(&ms).unwrap();
        let mut human = human_from(&ms, 2);
        human.retain(|r| r.object != "animal0");
        match correlate_report(&ms, &preds, &human, &ReportOptions::default()) {
            Err(StatsError::Unmatched(keys)) => assert_eq!(keys, vec!["animal0 (no human responses)".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn automatic_anova_layout() {
        let ms = measures(3);
        let tables = automatic_anovas(&ms).unwrap();
        assert_eq!(tables.len(), 6);
        assert_eq!(tables[0].1.rows.len(), 7);
        assert_eq!(tables[0].1.df_error, 24 - 8);
        let text = format_anova_table(&tables);
        assert!(text.contains("SType x SLevel"));
    }

    #[test]
    fn experimental_anovas_run_both_schemes() {
        let ms = measures(2);
        let human = human_from(&ms, 4);
        let a = experimental_anovas(&human).unwrap();
        // naming 3-way and ratings and preferences; the naming 2-way needs
        // standards, which this data lacks, so it has one level only
        assert!(a.iter().any(|x| x.title == "ratings" && x.scheme == Scheme::ByObject));
        assert!(a.iter().any(|x| x.title.starts_with("preferences") && x.scheme == Scheme::ByParticipant));
        let text = format_experimental_anovas(&a);
        assert!(text.contains("participants"));
    }
}
