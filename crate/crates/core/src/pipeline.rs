//! Corpus to artifacts: families, stimuli, measures, predictions and a
//! text report, laid out as
//!
//! ```text
//! out/<object>/meshes/{s,q5,q8,v5,v8}.off
//! out/<object>/images/{s,q5,q8,v5,v8}.pgm
//! out/measures.csv
//! out/predictions.csv
//! out/report.txt
//! out/config.toml
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Manifest, ManifestEntry, ManifestError, ObjectType};
use crate::geom::MetroOptions;
use crate::image_fidelity::ViewParams;
use crate::mesh::{load_mesh, write_off};
use crate::predict::{
    measure_family, predictions_for, write_measures, write_predictions, MeasureConfig, PairMeasures, PredictError,
    PreferencePrediction, Stimuli,
};
use crate::render::{canonical_camera, CameraOverrides};
use crate::simplify::{build_family, Levels, Version};
use crate::stats::{
    automatic_anovas, correlate_report, experimental_anovas, format_anova_table, format_correlation_tables,
    format_experimental_anovas, preference_rates, HumanResponse, ReportOptions, Scheme, StatsError, Task,
};
use crate::synth;

pub const DEFAULT_BUDGET: usize = 3700;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub manifest: PathBuf,
    pub out_dir: PathBuf,
    /// Face count of the standard versions.
    pub budget: usize,
    pub levels: Levels,
    /// Surface samples per distance pass; unset scales with the standard.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    pub seed: u64,
    pub view: ViewParams,
    pub metro: MetroOptions,
    /// Applied to every object; manifest entries override it field by field.
    pub camera: CameraOverrides,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub write_meshes: bool,
    pub write_images: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            manifest: PathBuf::from("corpus/manifest.toml"),
            out_dir: PathBuf::from("out"),
            budget: DEFAULT_BUDGET,
            levels: Levels::default(),
            samples: None,
            seed: 0,
            view: ViewParams::default(),
            metro: MetroOptions::default(),
            camera: CameraOverrides::default(),
            workers: 0,
            write_meshes: true,
            write_images: true,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.budget == 0 {
            return Err(PipelineError::Config("budget must be positive".into()));
        }
        self.levels.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        if self.levels.low >= self.levels.high {
            return Err(PipelineError::Config(format!(
                "low level {} must be below high level {}",
                self.levels.low, self.levels.high
            )));
        }
        self.view.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        if self.samples == Some(0) {
            return Err(PipelineError::Config("samples must be positive".into()));
        }
        Ok(())
    }

    pub fn measure_config(&self) -> MeasureConfig {
        MeasureConfig {
            samples: self.samples,
            seed: self.seed,
            view: self.view,
            metro: self.metro,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectOutcome {
    pub name: String,
    pub object_type: ObjectType,
    pub face_counts: [usize; 5],
    pub measures: Vec<PairMeasures>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    /// Sorted by object name.
    pub objects: Vec<ObjectOutcome>,
    pub measures: Vec<PairMeasures>,
    pub predictions: Vec<PreferencePrediction>,
    /// (object, message) of every object that failed.
    pub failures: Vec<(String, String)>,
    pub report: String,
}

fn process_object(cfg: &PipelineConfig, manifest: &Manifest, entry: &ManifestEntry) -> Result<ObjectOutcome, String> {
    let path = manifest.resolve(entry);
    let mesh = load_mesh(&path, None).map_err(|e| format!("{}: {e}", path.display()))?;
    let fam = build_family(&mesh, &entry.name, entry.object_type, cfg.budget, cfg.levels).map_err(|e| e.to_string())?;
    let cam = canonical_camera(&fam.s, &cfg.camera.merged(&entry.camera)).map_err(|e| e.to_string())?;
    let stimuli = Stimuli::render(&fam, &cam).map_err(|e| e.to_string())?;
    let measures = measure_family(&fam, &stimuli, &cfg.measure_config()).map_err(|e| e.to_string())?;
    let dir = cfg.out_dir.join(&entry.name);
    if cfg.write_meshes {
        let d = dir.join("meshes");
        fs::create_dir_all(&d).map_err(|e| format!("{}: {e}", d.display()))?;
        for v in Version::ALL {
            write_off(fam.get(v), &d.join(format!("{v}.off"))).map_err(|e| e.to_string())?;
        }
    }
    if cfg.write_images {
        let d = dir.join("images");
        fs::create_dir_all(&d).map_err(|e| format!("{}: {e}", d.display()))?;
        for v in Version::ALL {
            stimuli.get(v).write_pgm(&d.join(format!("{v}.pgm"))).map_err(|e| e.to_string())?;
        }
    }
    for w in &fam.warnings {
        log::warn!("{}: {w}", entry.name);
    }
    Ok(ObjectOutcome {
        name: entry.name.clone(),
        object_type: entry.object_type,
        face_counts: fam.face_counts(),
        measures,
        warnings: fam.warnings.clone(),
    })
}

/// Runs every manifest object, `cfg.workers` at a time. An object that
/// fails is reported and left out; the others complete.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome, PipelineError> {
    cfg.validate()?;
    let manifest = Manifest::load(&cfg.manifest)?;
    fs::create_dir_all(&cfg.out_dir).map_err(io_err(&cfg.out_dir))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let mut results: Vec<(String, Result<ObjectOutcome, String>)> = pool.install(|| {
        manifest
            .objects
            .par_iter()
            .map(|entry| {
                log::info!("processing {}", entry.name);
                (entry.name.clone(), process_object(cfg, &manifest, entry))
            })
            .collect()
    });
    results.sort_by(|a, b| a.0.cmp(&b.0));
    let mut objects = Vec::new();
    let mut failures = Vec::new();
    for (name, r) in results {
        match r {
            Ok(o) => objects.push(o),
            Err(e) => {
                log::error!("{name}: {e}");
                failures.push((name, e));
            }
        }
    }
    let measures: Vec<PairMeasures> = objects.iter().flat_map(|o| o.measures.iter().cloned()).collect();
    let predictions = predictions_for(&measures)?;

    let out = &cfg.out_dir;
    let measures_path = out.join("measures.csv");
    write_measures(fs::File::create(&measures_path).map_err(io_err(&measures_path))?, &measures)?;
    let predictions_path = out.join("predictions.csv");
    write_predictions(fs::File::create(&predictions_path).map_err(io_err(&predictions_path))?, &predictions)?;
    let report = pipeline_report(cfg, &objects, &measures, &failures);
    let report_path = out.join("report.txt");
    fs::write(&report_path, &report).map_err(io_err(&report_path))?;
    let config_path = out.join("config.toml");
    fs::write(&config_path, cfg.to_toml()).map_err(io_err(&config_path))?;
    Ok(PipelineOutcome {
        objects,
        measures,
        predictions,
        failures,
        report,
    })
}

fn pipeline_report(
    cfg: &PipelineConfig,
    objects: &[ObjectOutcome],
    measures: &[PairMeasures],
    failures: &[(String, String)],
) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "{} objects processed, {} failed; budget {}, levels {}%/{}%, seed {}\n",
        objects.len(),
        failures.len(),
        cfg.budget,
        cfg.levels.low,
        cfg.levels.high,
        cfg.seed
    )
    .unwrap();
    writeln!(s, "{:<16}{:<10}{:>7}{:>7}{:>7}{:>7}{:>7}", "object", "type", "s", "q5", "q8", "v5", "v8").unwrap();
    for o in objects {
        write!(s, "{:<16}{:<10}", o.name, o.object_type.as_str()).unwrap();
        for n in o.face_counts {
            write!(s, "{n:>7}").unwrap();
        }
        writeln!(s).unwrap();
    }
    let warnings: Vec<String> = objects.iter().flat_map(|o| o.warnings.iter().map(move |w| format!("{}: {w}", o.name))).collect();
    if !warnings.is_empty() {
        writeln!(s, "\nwarnings:").unwrap();
        for w in warnings {
            writeln!(s, "  {w}").unwrap();
        }
    }
    if !failures.is_empty() {
        writeln!(s, "\nfailures:").unwrap();
        for (name, e) in failures {
            writeln!(s, "  {name}: {e}").unwrap();
        }
    }
    writeln!(s).unwrap();
    let rounded: Vec<PairMeasures> = measures.iter().map(PairMeasures::rounded).collect();
    match automatic_anovas(&rounded) {
        Ok(t) => s.push_str(&format_anova_table(&t)),
        Err(e) => writeln!(s, "automatic-measure ANOVAs not computed: {e}").unwrap(),
    }
    s
}

/// The full analysis of a human response table: exclusions, the
/// participant and object ANOVAs, preference rates, correlation tables and
/// the automatic-measure ANOVAs.
pub fn stats_report(
    measures: &[PairMeasures],
    predictions: &[PreferencePrediction],
    human: &[HumanResponse],
    opts: &ReportOptions,
) -> Result<String, PipelineError> {
    let report = correlate_report(measures, predictions, human, opts)?;
    let mut s = String::new();
    if let Some(x) = report.exclusions {
        writeln!(
            s,
            "Naming times: {} trials, {} spoiled, {} errors, {} slower than {:.1} ms (mean {:.1}, SD {:.1}) excluded\n",
            x.total, x.spoiled, x.errors, x.outliers, x.threshold, x.mean, x.sd
        )
        .unwrap();
    }
    if report.missing_points > 0 {
        writeln!(s, "{} points without human data were left out\n", report.missing_points).unwrap();
    }
    s.push_str(&format_experimental_anovas(&experimental_anovas(human)?));
    let prefs: Vec<HumanResponse> = human.iter().filter(|r| r.task == Task::Preference).cloned().collect();
    if !prefs.is_empty() {
        writeln!(s, "Preferences for Qslim (%)").unwrap();
        for scheme in [Scheme::ByParticipant, Scheme::ByObject] {
            let p = preference_rates(&prefs, scheme)?;
            for (t, level, pct) in p.conditions {
                writeln!(s, "  {:<14}{:<10}{:>4}%  {pct:.1}", scheme.as_str(), t.as_str(), level).unwrap();
            }
        }
        writeln!(s).unwrap();
    }
    s.push_str(&format_correlation_tables(&report));
    writeln!(s).unwrap();
    s.push_str(&format_anova_table(&automatic_anovas(measures)?));
    Ok(s)
}

/// Writes the bundled synthetic corpus as OFF files plus `manifest.toml`.
pub fn write_demo_corpus(dir: &Path) -> Result<Manifest, PipelineError> {
    let models = dir.join("models");
    fs::create_dir_all(&models).map_err(io_err(&models))?;
    let mut manifest = Manifest::default();
    for shape in synth::demo_corpus() {
        let file = PathBuf::from("models").join(format!("{}.off", shape.name));
        let path = dir.join(&file);
        write_off(&shape.mesh, &path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        manifest.objects.push(ManifestEntry {
            name: shape.name.to_string(),
            file,
            object_type: shape.object_type,
            camera: CameraOverrides::default(),
        });
    }
    let path = dir.join("manifest.toml");
    fs::write(&path, manifest.to_toml()).map_err(io_err(&path))?;
    manifest.root = dir.to_path_buf();
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_corpus(dir: &Path, broken: bool) -> PathBuf {
        fs::create_dir_all(dir.join("m")).unwrap();
        let a = synth::radial(20, 24, "blob", |d| 1.0 + 0.2 * d.x * d.y);
        let b = synth::torus(1.0, 0.4, 24, 12);
        write_off(&a, &dir.join("m/blob.off")).unwrap();
        write_off(&b, &dir.join("m/ring.off")).unwrap();
        let mut text = String::from(
            "[[object]]\nname = \"blob\"\nfile = \"m/blob.off\"\nobject_type = \"animal\"\n\n\
             [[object]]\nname = \"ring\"\nfile = \"m/ring.off\"\nobject_type = \"artifact\"\n",
        );
        if broken {
            fs::write(dir.join("m/bad.off"), "OFF\n3 1 0\n0 0 0\n").unwrap();
            text.push_str("\n[[object]]\nname = \"bad\"\nfile = \"m/bad.off\"\nobject_type = \"artifact\"\n");
        }
        let p = dir.join("manifest.toml");
        fs::write(&p, text).unwrap();
        p
    }

    fn config(dir: &Path, manifest: PathBuf) -> PipelineConfig {
        PipelineConfig {
            manifest,
            out_dir: dir.join("out"),
            budget: 400,
            samples: Some(4000),
            workers: 2,
            ..Default::default()
        }
    }

    #[test]
    fn toy_corpus_counts_and_layout() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), toy_corpus(dir.path(), false));
        let out = run_pipeline(&cfg).unwrap();
        assert_eq!(out.objects.len(), 2);
        assert_eq!(out.measures.len(), 8);
        assert_eq!(out.predictions.len(), 12);
        assert!(out.failures.is_empty());
        for f in ["measures.csv", "predictions.csv", "report.txt", "config.toml", "blob/meshes/q8.off", "ring/images/v5.pgm"] {
            assert!(cfg.out_dir.join(f).exists(), "{f}");
        }
        let echoed: PipelineConfig = toml::from_str(&fs::read_to_string(cfg.out_dir.join("config.toml")).unwrap()).unwrap();
        assert_eq!(echoed, cfg);
    }

    #[test]
    fn failing_object_is_isolated() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), toy_corpus(dir.path(), true));
        let out = run_pipeline(&cfg).unwrap();
        assert_eq!(out.objects.len(), 2);
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].0, "bad");
        assert!(out.report.contains("bad:"));
    }

    #[test]
    fn config_validation() {
        let mut cfg = PipelineConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.levels = Levels { low: 80, high: 50 };
        assert!(cfg.validate().is_err());
        cfg = PipelineConfig {
            budget: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        assert!(toml::from_str::<PipelineConfig>("bogus = 1").is_err());
    }
}
