//! Per-pair measure sets and the preference predictors built from them.

use std::fmt;
use std::io;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ObjectType;
use crate::geom::{metro_measures, GeomError, MetroOptions, SurfaceSampler};
use crate::image_fidelity::{bm, mse, ImageFidelityError, ViewParams};
use crate::render::{render_stimulus, CameraSpec, GrayImage, RenderError};
use crate::simplify::{ModelFamily, Version};

#[derive(Debug, Error)]
pub enum PredictError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Image(#[from] ImageFidelityError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("object `{object}` has no measures for pair s-{pair}")]
    MissingPair { object: String, pair: Version },
    #[error("object `{object}` has measures for pair s-{pair} twice")]
    DuplicatePair { object: String, pair: Version },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Bm,
    Mse,
    MetroMn,
    MetroMse,
    MetroMax,
    MetroVol,
}

impl Measure {
    pub const ALL: [Measure; 6] = [
        Measure::Bm,
        Measure::Mse,
        Measure::MetroMn,
        Measure::MetroMse,
        Measure::MetroMax,
        Measure::MetroVol,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Measure::Bm => "bm",
            Measure::Mse => "mse",
            Measure::MetroMn => "metro_mn",
            Measure::MetroMse => "metro_mse",
            Measure::MetroMax => "metro_max",
            Measure::MetroVol => "metro_vol",
        }
    }

    /// Name used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Measure::Bm => "BM",
            Measure::Mse => "MSE",
            Measure::MetroMn => "MetroMn",
            Measure::MetroMse => "MetroMSE",
            Measure::MetroMax => "MetroMax",
            Measure::MetroVol => "MetroVol",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Measure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Measure::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()) || m.display_name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown measure `{s}`"))
    }
}

/// Pair label as written to CSV, e.g. `s-q5`.
pub fn pair_label(v: Version) -> String {
    format!("s-{v}")
}

pub fn parse_pair_label(s: &str) -> Result<Version, String> {
    let v: Version = s.trim().strip_prefix("s-").ok_or_else(|| format!("bad pair `{s}`"))?.parse()?;
    if v == Version::S {
        return Err(format!("bad pair `{s}`"));
    }
    Ok(v)
}

/// The six measures of `(s, pair)` for one object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMeasures {
    pub object: String,
    pub object_type: ObjectType,
    pub pair: Version,
    pub bm: f64,
    pub mse: f64,
    pub metro_mn: f64,
    pub metro_mse: f64,
    pub metro_max: f64,
    pub metro_vol: f64,
}

impl PairMeasures {
    pub fn get(&self, m: Measure) -> f64 {
        match m {
            Measure::Bm => self.bm,
            Measure::Mse => self.mse,
            Measure::MetroMn => self.metro_mn,
            Measure::MetroMse => self.metro_mse,
            Measure::MetroMax => self.metro_max,
            Measure::MetroVol => self.metro_vol,
        }
    }

    fn set(&mut self, m: Measure, v: f64) {
        match m {
            Measure::Bm => self.bm = v,
            Measure::Mse => self.mse = v,
            Measure::MetroMn => self.metro_mn = v,
            Measure::MetroMse => self.metro_mse = v,
            Measure::MetroMax => self.metro_max = v,
            Measure::MetroVol => self.metro_vol = v,
        }
    }

    /// Every value rounded the way the CSV stores it.
    pub fn rounded(&self) -> PairMeasures {
        let mut r = self.clone();
        for m in Measure::ALL {
            r.set(m, round_sig(self.get(m)));
        }
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePrediction {
    pub object: String,
    pub measure: Measure,
    /// `meas(s,q5) − meas(s,v5)`; negative predicts a Qslim preference.
    pub p5: f64,
    pub p8: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeasureConfig {
    /// Surface samples; `None` means the per-pivot default.
    pub samples: Option<usize>,
    pub seed: u64,
    pub view: ViewParams,
    pub metro: MetroOptions,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig {
            samples: None,
            seed: 0,
            view: ViewParams::default(),
            metro: MetroOptions::default(),
        }
    }
}

impl MeasureConfig {
    pub fn sampler(&self, pivot: &crate::mesh::TriMesh) -> SurfaceSampler {
        match self.samples {
            Some(n) => SurfaceSampler::new(n, self.seed),
            None => SurfaceSampler::for_pivot(pivot, self.seed),
        }
    }
}

/// The five stimuli of a family, as stored (8-bit quantized).
#[derive(Debug, Clone, PartialEq)]
pub struct Stimuli {
    images: [GrayImage; 5],
}

impl Stimuli {
    pub fn render(fam: &ModelFamily, cam: &CameraSpec) -> Result<Stimuli, RenderError> {
        let mut images = Vec::with_capacity(5);
        for v in Version::ALL {
            images.push(render_stimulus(fam.get(v), cam)?.quantized());
        }
        Ok(Stimuli {
            images: images.try_into().expect("five versions"),
        })
    }

    pub fn from_images(images: [GrayImage; 5]) -> Stimuli {
        Stimuli { images }
    }

    pub fn get(&self, v: Version) -> &GrayImage {
        &self.images[Version::ALL.iter().position(|&x| x == v).expect("known version")]
    }
}

/// Geometric measures against `s` as pivot and image measures between the
/// stimuli of `s` and each simplified version, in `Version::SIMPLIFIED`
/// order.
pub fn measure_family(fam: &ModelFamily, stimuli: &Stimuli, cfg: &MeasureConfig) -> Result<Vec<PairMeasures>, PredictError> {
    let sampler = cfg.sampler(&fam.s);
    Version::SIMPLIFIED
        .iter()
        .map(|&v| {
            let g = metro_measures(&fam.s, fam.get(v), &sampler, cfg.metro)?;
            let (a, b) = (stimuli.get(Version::S), stimuli.get(v));
            Ok(PairMeasures {
                object: fam.name.clone(),
                object_type: fam.object_type,
                pair: v,
                bm: bm(a, b, &cfg.view)?,
                mse: mse(a, b, false)?,
                metro_mn: g.metro_mn,
                metro_mse: g.metro_mse,
                metro_max: g.metro_max,
                metro_vol: g.metro_vol,
            })
        })
        .collect()
}

/// `p5`/`p8` for every measure of one object.
pub fn preference_predictors(pm: &[PairMeasures]) -> Result<Vec<PreferencePrediction>, PredictError> {
    let object = pm.first().map(|p| p.object.clone()).unwrap_or_default();
    let find = |v: Version| -> Result<&PairMeasures, PredictError> {
        let mut it = pm.iter().filter(|p| p.pair == v);
        let first = it.next().ok_or_else(|| PredictError::MissingPair {
            object: object.clone(),
            pair: v,
        })?;
        if it.next().is_some() {
            return Err(PredictError::DuplicatePair {
                object: object.clone(),
                pair: v,
            });
        }
        Ok(first)
    };
    let (q5, q8, v5, v8) = (find(Version::Q5)?, find(Version::Q8)?, find(Version::V5)?, find(Version::V8)?);
    Ok(Measure::ALL
        .iter()
        .map(|&m| PreferencePrediction {
            object: object.clone(),
            measure: m,
            p5: q5.get(m) - v5.get(m),
            p8: q8.get(m) - v8.get(m),
        })
        .collect())
}

/// Rounds to 9 significant digits.
pub fn round_sig(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.8e}").parse().expect("formatted float parses")
}

/// Shortest decimal form of `round_sig(v)`.
pub fn format_value(v: f64) -> String {
    format!("{}", round_sig(v))
}

pub const MEASURES_HEADER: [&str; 9] = [
    "object",
    "object_type",
    "pair",
    "bm",
    "mse",
    "metro_mn",
    "metro_mse",
    "metro_max",
    "metro_vol",
];
pub const PREDICTIONS_HEADER: [&str; 4] = ["object", "measure", "p5", "p8"];

pub fn write_measures<W: io::Write>(out: W, rows: &[PairMeasures]) -> Result<(), PredictError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MEASURES_HEADER)?;
    for r in rows {
        let mut rec = vec![r.object.clone(), r.object_type.to_string(), pair_label(r.pair)];
        rec.extend(Measure::ALL.iter().map(|&m| format_value(r.get(m))));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_measures<R: io::Read>(input: R) -> Result<Vec<PairMeasures>, PredictError> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != MEASURES_HEADER {
        return Err(PredictError::Parse {
            line: 1,
            message: format!("expected header {}", MEASURES_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |message: String| PredictError::Parse { line, message };
        let mut pm = PairMeasures {
            object: rec[0].to_string(),
            object_type: rec[1].parse().map_err(bad)?,
            pair: parse_pair_label(&rec[2]).map_err(bad)?,
            bm: 0.0,
            mse: 0.0,
            metro_mn: 0.0,
            metro_mse: 0.0,
            metro_max: 0.0,
            metro_vol: 0.0,
        };
        for (k, m) in Measure::ALL.iter().enumerate() {
            let v: f64 = rec[3 + k]
                .trim()
                .parse()
                .map_err(|_| bad(format!("{} is not a number: `{}`", m, &rec[3 + k])))?;
            if !v.is_finite() || v < 0.0 {
                return Err(bad(format!("{m} must be finite and non-negative")));
            }
            pm.set(*m, v);
        }
        rows.push(pm);
    }
    Ok(rows)
}

pub fn write_predictions<W: io::Write>(out: W, rows: &[PreferencePrediction]) -> Result<(), PredictError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PREDICTIONS_HEADER)?;
    for r in rows {
        w.write_record([r.object.clone(), r.measure.to_string(), format_value(r.p5), format_value(r.p8)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_predictions<R: io::Read>(input: R) -> Result<Vec<PreferencePrediction>, PredictError> {
    let mut rd = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let bad = |message: String| PredictError::Parse { line: i + 2, message };
        if rec.len() != 4 {
            return Err(bad("expected 4 fields".into()));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(format!("not a number: `{s}`")));
        rows.push(PreferencePrediction {
            object: rec[0].to_string(),
            measure: rec[1].parse().map_err(bad)?,
            p5: num(&rec[2])?,
            p8: num(&rec[3])?,
        });
    }
    Ok(rows)
}

/// Predictors for every object in `rows`, computed from the stored
/// (rounded) values so they can be recomputed from `measures.csv` exactly.
/// Objects keep their first-appearance order.
pub fn predictions_for(rows: &[PairMeasures]) -> Result<Vec<PreferencePrediction>, PredictError> {
    let mut objects: Vec<&str> = Vec::new();
    for r in rows {
        if !objects.contains(&r.object.as_str()) {
            objects.push(&r.object);
        }
    }
    let mut out = Vec::new();
    for o in objects {
        let own: Vec<PairMeasures> = rows.iter().filter(|r| r.object == o).map(PairMeasures::rounded).collect();
        out.extend(preference_predictors(&own)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pm(object: &str, pair: Version, base: f64) -> PairMeasures {
        PairMeasures {
            object: object.into(),
            object_type: ObjectType::Animal,
            pair,
            bm: base,
            mse: base * 2.0,
            metro_mn: base * 3.0,
            metro_mse: base * 4.0,
            metro_max: base * 5.0,
            metro_vol: base * 6.0,
        }
    }

    fn set(q5: f64, q8: f64, v5: f64, v8: f64) -> Vec<PairMeasures> {
        vec![
            pm("o", Version::Q5, q5),
            pm("o", Version::Q8, q8),
            pm("o", Version::V5, v5),
            pm("o", Version::V8, v8),
        ]
    }

    #[test]
    fn predictor_sign_and_zero() {
        let mut rows = set(0.1, 0.2, 0.1, 0.3);
        rows[1].metro_mn = 0.02;
        rows[3].metro_mn = 0.05;
        let p = preference_predictors(&rows).unwrap();
        let mn = p.iter().find(|p| p.measure == Measure::MetroMn).unwrap();
        assert!((mn.p8 - -0.03).abs() < 1e-15);
        assert_eq!(p.iter().find(|p| p.measure == Measure::Bm).unwrap().p5, 0.0);
        assert_eq!(p.len(), 6);
    }

    #[test]
    fn swapping_algorithms_negates() {
        let rows = set(0.11, 0.27, 0.13, 0.41);
        let swapped: Vec<_> = rows
            .iter()
            .map(|r| PairMeasures {
                pair: r.pair.counterpart(),
                ..r.clone()
            })
            .collect();
        for (a, b) in preference_predictors(&rows).unwrap().iter().zip(preference_predictors(&swapped).unwrap()) {
            assert_eq!(a.p5, -b.p5);
            assert_eq!(a.p8, -b.p8);
        }
    }

    #[test]
    fn missing_or_duplicate_pair() {
        let mut rows = set(1.0, 2.0, 3.0, 4.0);
        rows.pop();
        assert!(matches!(preference_predictors(&rows), Err(PredictError::MissingPair { pair: Version::V8, .. })));
        rows.push(rows[0].clone());
        assert!(matches!(preference_predictors(&rows), Err(PredictError::DuplicatePair { .. })));
    }

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_value(0.1234567891234), "0.123456789");
        assert_eq!(format_value(123456789012.0), "123456789000");
        assert_eq!(format_value(0.0), "0");
        assert_eq!(format_value(-2.5e-7), "-0.00000025");
        assert_eq!(round_sig(1.0 / 3.0), 0.333333333);
    }

    #[test]
    fn csv_round_trip_and_recomputation() {
        let rows = set(0.123456789123, 0.2718281828, 0.3141592653589, 0.57721566490153);
        let mut buf = Vec::new();
        write_measures(&mut buf, &rows).unwrap();
        let back = read_measures(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 4);
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(&a.rounded(), b);
        }
        let preds = predictions_for(&rows).unwrap();
        let mut pbuf = Vec::new();
        write_predictions(&mut pbuf, &preds).unwrap();
        let mut again = Vec::new();
        write_predictions(&mut again, &predictions_for(&back).unwrap()).unwrap();
        assert_eq!(pbuf, again);
        assert!(read_measures("object,pair\n".as_bytes()).is_err());
    }
}
