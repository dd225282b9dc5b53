//! Corpus manifest: which model file is which object, its category, and
//! optional per-object camera overrides.
//!
//! ```toml
//! [[object]]
//! name = "bunny"
//! file = "models/bunny.off"
//! object_type = "animal"
//!
//! [object.camera]
//! azimuth_deg = 30.0
//! look_at = [0.0, 0.1, 0.0]
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::render::CameraOverrides;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectType {
    Animal,
    Artifact,
}

impl ObjectType {
    pub const ALL: [ObjectType; 2] = [ObjectType::Animal, ObjectType::Artifact];

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectType::Animal => "animal",
            ObjectType::Artifact => "artifact",
        }
    }
}

impl fmt::Display for ObjectType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "animal" => Ok(ObjectType::Animal),
            "artifact" => Ok(ObjectType::Artifact),
            other => Err(format!("unknown object type `{other}`")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid manifest: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("duplicate object name `{0}`")]
    Duplicate(String),
    #[error("manifest lists no objects")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub file: PathBuf,
    pub object_type: ObjectType,
    #[serde(default, skip_serializing_if = "CameraOverrides::is_empty")]
    pub camera: CameraOverrides,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(rename = "object", default)]
    pub objects: Vec<ManifestEntry>,
    /// Directory that relative `file` entries resolve against; set by
    /// [`Manifest::load`] to the manifest's own directory.
    #[serde(skip)]
    pub root: PathBuf,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut m = Self::parse(&text)?;
        m.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    pub fn parse(text: &str) -> Result<Self, ManifestError> {
        let m: Manifest = toml::from_str(text)?;
        if m.objects.is_empty() {
            return Err(ManifestError::Empty);
        }
        let mut seen = BTreeSet::new();
        for o in &m.objects {
            if !seen.insert(o.name.as_str()) {
                return Err(ManifestError::Duplicate(o.name.clone()));
            }
        }
        Ok(m)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.file.is_absolute() {
            entry.file.clone()
        } else {
            self.root.join(&entry.file)
        }
    }

    pub fn get(&self, name: &str) -> Option<&ManifestEntry> {
        self.objects.iter().find(|o| o.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_camera_overrides() {
        let m = Manifest::parse(
            r#"
[[object]]
name = "bunny"
file = "bunny.off"
object_type = "animal"
[object.camera]
azimuth_deg = 30.0
look_at = [0.0, 0.5, 0.0]

[[object]]
name = "chair"
file = "chair.obj"
object_type = "artifact"
"#,
        )
        .unwrap();
        assert_eq!(m.objects.len(), 2);
        assert_eq!(m.objects[0].camera.azimuth_deg, Some(30.0));
        assert_eq!(m.objects[0].camera.look_at, Some([0.0, 0.5, 0.0]));
        assert!(m.objects[1].camera.is_empty());
        let again = Manifest::parse(&m.to_toml()).unwrap();
        assert_eq!(again.objects, m.objects);
    }

    #[test]
    fn rejects_duplicates_and_empty() {
        let dup = "[[object]]\nname='a'\nfile='a.off'\nobject_type='animal'\n[[object]]\nname='a'\nfile='b.off'\nobject_type='artifact'\n";
        assert!(matches!(Manifest::parse(dup), Err(ManifestError::Duplicate(_))));
        assert!(matches!(Manifest::parse(""), Err(ManifestError::Empty)));
        assert!(Manifest::parse("[[object]]\nname='a'\nfile='a'\nobject_type='plant'\n").is_err());
    }
}
