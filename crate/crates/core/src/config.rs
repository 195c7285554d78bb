//! Run configuration: one JSON file, overridable by CLI flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classify::ClassifierConfig;
use crate::element::Timestamp;
use crate::error::{Error, Result};
use crate::trust::TrustParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// OSM history XML input.
    pub history: Option<PathBuf>,
    /// Study-area GeoJSON (Polygon/MultiPolygon, WGS84).
    pub boundary: Option<PathBuf>,
    pub city: String,
    /// Snapshot and evaluation instant; defaults to the newest timestamp
    /// in the store.
    pub snapshot_at: Option<Timestamp>,
    /// Years for the growth series, ascending.
    pub years: Option<Vec<i32>>,
    /// Hexagon size, flat-to-flat meters.
    pub hex_cell_m: f64,
    pub out_dir: PathBuf,
    /// Worker threads; defaults to available parallelism.
    pub threads: Option<usize>,
    pub classifier: ClassifierConfig,
    pub trust: TrustParams,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            history: None,
            boundary: None,
            city: "unnamed".to_string(),
            snapshot_at: None,
            years: None,
            hex_cell_m: 250.0,
            out_dir: PathBuf::from("out"),
            threads: None,
            classifier: ClassifierConfig::default(),
            trust: TrustParams::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<RunConfig> {
        let config: RunConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("cannot parse config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_json_path(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        RunConfig::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hex_cell_m > 0.0) {
            return Err(Error::Config("hex_cell_m must be positive".into()));
        }
        if let Some(years) = &self.years {
            if !years.windows(2).all(|w| w[0] <= w[1]) {
                return Err(Error::Config("years must be ascending".into()));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        self.classifier.validate()?;
        self.trust.validate()?;
        Ok(())
    }
}
