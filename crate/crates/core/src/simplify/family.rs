use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{qem, vclust_to_target, Algorithm, SimplifyError, Simplified};
use crate::corpus::ObjectType;
use crate::mesh::TriMesh;

/// The two simplification levels, as percentages of the standard's faces
/// removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Levels {
    pub low: u32,
    pub high: u32,
}

impl Default for Levels {
    fn default() -> Self {
        Levels { low: 50, high: 80 }
    }
}

impl Levels {
    pub fn validate(&self) -> Result<(), SimplifyError> {
        for l in [self.low, self.high] {
            if l == 0 || l >= 100 {
                return Err(SimplifyError::InvalidLevel(l));
            }
        }
        Ok(())
    }

    pub fn percent(&self, v: Version) -> u32 {
        match v {
            Version::S => 0,
            Version::Q5 | Version::V5 => self.low,
            Version::Q8 | Version::V8 => self.high,
        }
    }
}

/// The five versions of one object. `Q5`/`V5` are the low level and
/// `Q8`/`V8` the high level whatever the configured percentages are.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Version {
    S,
    Q5,
    Q8,
    V5,
    V8,
}

impl Version {
    pub const ALL: [Version; 5] = [Version::S, Version::Q5, Version::Q8, Version::V5, Version::V8];
    pub const SIMPLIFIED: [Version; 4] = [Version::Q5, Version::Q8, Version::V5, Version::V8];

    pub fn as_str(self) -> &'static str {
        match self {
            Version::S => "s",
            Version::Q5 => "q5",
            Version::Q8 => "q8",
            Version::V5 => "v5",
            Version::V8 => "v8",
        }
    }

    pub fn algorithm(self) -> Option<Algorithm> {
        match self {
            Version::S => None,
            Version::Q5 | Version::Q8 => Some(Algorithm::Qem),
            Version::V5 | Version::V8 => Some(Algorithm::Vclust),
        }
    }

    pub fn is_high_level(self) -> bool {
        matches!(self, Version::Q8 | Version::V8)
    }

    /// The same level produced by the other algorithm.
    pub fn counterpart(self) -> Version {
        match self {
            Version::S => Version::S,
            Version::Q5 => Version::V5,
            Version::Q8 => Version::V8,
            Version::V5 => Version::Q5,
            Version::V8 => Version::Q8,
        }
    }

    pub fn from_parts(algorithm: Algorithm, high: bool) -> Version {
        match (algorithm, high) {
            (Algorithm::Qem, false) => Version::Q5,
            (Algorithm::Qem, true) => Version::Q8,
            (Algorithm::Vclust, false) => Version::V5,
            (Algorithm::Vclust, true) => Version::V8,
        }
    }
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Version {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Version::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown version `{s}`"))
    }
}

#[derive(Debug, Clone)]
pub struct ModelFamily {
    pub name: String,
    pub object_type: ObjectType,
    pub s: TriMesh,
    pub q5: TriMesh,
    pub q8: TriMesh,
    pub v5: TriMesh,
    pub v8: TriMesh,
    /// Simplifier warnings, e.g. clustering targets missed by more than 20%.
    pub warnings: Vec<String>,
}

impl ModelFamily {
    pub fn get(&self, v: Version) -> &TriMesh {
        match v {
            Version::S => &self.s,
            Version::Q5 => &self.q5,
            Version::Q8 => &self.q8,
            Version::V5 => &self.v5,
            Version::V8 => &self.v8,
        }
    }

    pub fn face_counts(&self) -> [usize; 5] {
        Version::ALL.map(|v| self.get(v).face_count())
    }
}

/// Faces left after removing `percent` of `standard_faces`.
pub fn level_target(standard_faces: usize, percent: u32) -> usize {
    let keep = standard_faces as f64 * (100 - percent) as f64 / 100.0;
    (keep.round() as usize).max(1)
}

/// QEM-reduces `mesh` to `budget` faces; the result is a family's standard.
pub fn standardize(mesh: &TriMesh, budget: usize) -> Result<Simplified, SimplifyError> {
    if budget == 0 {
        return Err(SimplifyError::ZeroTarget);
    }
    if budget > mesh.face_count() {
        return Err(SimplifyError::BudgetAboveInput {
            budget,
            faces: mesh.face_count(),
        });
    }
    qem::simplify(mesh, budget, None)
}

/// Standard plus QEM and clustering versions at both levels. Level targets
/// are taken against the standard's own face count.
pub fn build_family(
    mesh: &TriMesh,
    name: &str,
    object_type: ObjectType,
    budget: usize,
    levels: Levels,
) -> Result<ModelFamily, SimplifyError> {
    levels.validate()?;
    let mut warnings = Vec::new();
    let mut keep = |r: Simplified| {
        warnings.extend(r.warning);
        r.mesh
    };
    let s = keep(standardize(mesh, budget)?).with_label(format!("{name}_s"));
    let low = level_target(s.face_count(), levels.low);
    let high = level_target(s.face_count(), levels.high);
    let q5 = keep(qem::simplify(&s, low, None)?).with_label(format!("{name}_q5"));
    let q8 = keep(qem::simplify(&s, high, None)?).with_label(format!("{name}_q8"));
    let v5 = keep(vclust_to_target(&s, low)?.simplified).with_label(format!("{name}_v5"));
    let v8 = keep(vclust_to_target(&s, high)?.simplified).with_label(format!("{name}_v8"));
    Ok(ModelFamily {
        name: name.to_string(),
        object_type,
        s,
        q5,
        q8,
        v5,
        v8,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplify::{qem_simplify, SimplifySpec};
    use crate::synth;

    #[test]
    fn level_targets() {
        assert_eq!(level_target(3700, 50), 1850);
        assert_eq!(level_target(3700, 80), 740);
        assert_eq!(level_target(3, 80), 1);
    }

    #[test]
    fn standardize_contract() {
        let m = synth::icosphere(3);
        let same = standardize(&m, m.face_count()).unwrap();
        assert_eq!(same.mesh, m);
        assert!(matches!(
            standardize(&m, m.face_count() + 1),
            Err(SimplifyError::BudgetAboveInput { .. })
        ));
        let s = standardize(&m, 1000).unwrap();
        assert!((950..=1000).contains(&s.mesh.face_count()));
    }

    #[test]
    fn family_counts_and_determinism() {
        let shape = synth::demo_corpus().remove(6);
        let budget = 3700;
        let fam = build_family(&shape.mesh, shape.name, shape.object_type, budget, Levels::default()).unwrap();
        let [s, q5, q8, v5, v8] = fam.face_counts();
        assert!(s.abs_diff(budget) <= 50, "{s}");
        let within = |got: usize, want: f64| got as f64 <= want * 1.02 && got as f64 >= want * 0.8;
        assert!(within(q5, 0.5 * s as f64) && q5 <= level_target(s, 50));
        assert!(within(q8, 0.2 * s as f64) && q8 <= level_target(s, 80));
        assert!(within(v5, 0.5 * s as f64), "{v5}");
        assert!(within(v8, 0.2 * s as f64), "{v8}");

        let again = qem_simplify(
            &fam.s,
            &SimplifySpec {
                algorithm: Algorithm::Qem,
                target_faces: level_target(s, 50),
                seed: 0,
            },
        )
        .unwrap()
        .mesh;
        assert_eq!(again.vertices(), fam.q5.vertices());
        assert_eq!(again.faces(), fam.q5.faces());
    }

    #[test]
    fn version_helpers() {
        assert_eq!(Version::Q5.counterpart(), Version::V5);
        assert_eq!("Q8".parse::<Version>().unwrap(), Version::Q8);
        assert_eq!(Levels::default().percent(Version::V8), 80);
        assert!(Levels { low: 0, high: 80 }.validate().is_err());
    }
}
