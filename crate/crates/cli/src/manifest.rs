use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use cloudqnn::{Error, Result};

use crate::jobs::Job;

pub const MANIFEST_FORMAT: &str = "cloudqnn-manifest";

/// Record of one command run, written next to its outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub command: String,
    pub toolkit_version: String,
    pub job: Job,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub summary: Value,
    pub wall_clock_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replayed_from: Option<PathBuf>,
}

impl Manifest {
    pub fn new(job: &Job, summary: Value, wall_clock_s: f64, replayed_from: Option<PathBuf>) -> Self {
        Self {
            format: MANIFEST_FORMAT.to_string(),
            command: job.name().to_string(),
            toolkit_version: cloudqnn::VERSION.to_string(),
            job: job.clone(),
            seeds: job.seeds(),
            inputs: job.inputs(),
            outputs: job.outputs(),
            summary,
            wall_clock_s,
            replayed_from,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let m: Manifest = serde_json::from_str(&text)?;
        if m.format != MANIFEST_FORMAT {
            return Err(Error::Schema(format!("{} is not a run manifest", path.display())));
        }
        Ok(m)
    }
}
