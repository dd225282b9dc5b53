//! The `--config` file. Every section is optional and every flag of the
//! matching subcommand overrides its field.
//!
//! ```toml
//! [pipeline]
//! manifest = "corpus/manifest.toml"
//! out_dir = "out"
//! budget = 3700
//! levels = { low = 50, high = 80 }
//! seed = 7
//!
//! [stats]
//! pooling = "averaged"
//!
//! [serve]
//! addr = "127.0.0.1:8080"
//!
//! [synth_human]
//! participants = 12
//! ```

use std::path::{Path, PathBuf};

use anyhow::Context;
use meshfid_core::pipeline::PipelineConfig;
use meshfid_core::simulate::SimConfig;
use meshfid_core::stats::Pooling;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub pipeline: PipelineConfig,
    pub stats: StatsSection,
    pub serve: ServeSection,
    pub synth_human: SimConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsSection {
    pub pooling: Pooling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeSection {
    pub addr: String,
    /// Session record directory; defaults to `<out_dir>/sessions`.
    pub sessions: Option<PathBuf>,
    /// Seed of the rating and preference orders.
    pub seed: u64,
}

impl Default for ServeSection {
    fn default() -> Self {
        ServeSection {
            addr: "127.0.0.1:8080".into(),
            sessions: None,
            seed: 0,
        }
    }
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_are_optional() {
        let c: FileConfig = toml::from_str("[stats]\npooling = \"averaged\"\n").unwrap();
        assert_eq!(c.stats.pooling, Pooling::Averaged);
        assert_eq!(c.pipeline, PipelineConfig::default());
        assert!(toml::from_str::<FileConfig>("[pipeline]\nbudgett = 3\n").is_err());
        let round: FileConfig = toml::from_str(&toml::to_string(&FileConfig::default()).unwrap()).unwrap();
        assert_eq!(round, FileConfig::default());
    }
}
