//! Corpus manifest: the vid-to-source mapping that drives batch sampling.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest invalid: {0}")]
    ManifestInvalid(String),
    #[error("manifest {path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("io: {0}")]
    Io(String),
}

/// One video: a unique id, where its frames or embeddings live, how many
/// frames the source holds, and optionally which question ids apply to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub video_id: String,
    pub source: PathBuf,
    pub frame_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub questions: Option<Vec<String>>,
}

/// Validated list of manifest records, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    records: Vec<ManifestRecord>,
}

impl DatasetManifest {
    /// Validates ids unique and counts positive. Whether `frame_count`
    /// matches the source is checked per video when the source is opened,
    /// so one bad file cannot abort a batch.
    pub fn new(records: Vec<ManifestRecord>) -> Result<Self, ManifestError> {
        let mut seen = BTreeSet::new();
        for r in &records {
            if r.video_id.is_empty() {
                return Err(ManifestError::ManifestInvalid("empty video_id".into()));
            }
            if !seen.insert(r.video_id.as_str()) {
                return Err(ManifestError::ManifestInvalid(format!(
                    "duplicate video_id {:?}",
                    r.video_id
                )));
            }
            if r.frame_count == 0 {
                return Err(ManifestError::ManifestInvalid(format!(
                    "video {:?}: frame_count must be >= 1",
                    r.video_id
                )));
            }
        }
        Ok(Self { records })
    }

    /// Reads a line-delimited JSON manifest.
    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ManifestError::Io(format!("{}: {e}", path.display())))?;
        let mut records = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let record: ManifestRecord = serde_json::from_str(line).map_err(|e| ManifestError::Parse {
                path: path.display().to_string(),
                line: idx + 1,
                message: e.to_string(),
            })?;
            records.push(record);
        }
        Self::new(records)
    }

    pub fn save(&self, path: &Path) -> Result<(), ManifestError> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("serializable"));
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| ManifestError::Io(e.to_string()))
    }

    pub fn records(&self) -> &[ManifestRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}
