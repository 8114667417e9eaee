//! On-disk layout, one directory per model:
//!
//! ```text
//! <root>/models/<model-id>/source.xml
//!                          complete.graphml
//!                          high.graphml
//!                          report.json
//!                          model.json        written last; marks the model complete
//!                          sessions/<session-id>.json
//! ```
//!
//! Every file is written to a temporary sibling and renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use pidrag::chat::{ChatMessage, ProviderSpec};
use pidrag::condense::CondensationReport;
use pidrag::eval::GraphLevel;
use pidrag::model::Diagnostic;
use pidrag::{import_graphml, PropertyGraph};
use serde::{Deserialize, Serialize};

const SOURCE: &str = "source.xml";
const COMPLETE: &str = "complete.graphml";
const HIGH: &str = "high.graphml";
const REPORT: &str = "report.json";
const RECORD: &str = "model.json";
const SESSIONS: &str = "sessions";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Corrupt { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub edges: usize,
    pub tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub id: String,
    pub filename: String,
    /// Milliseconds since the Unix epoch.
    pub created: u64,
    pub complete: GraphStats,
    pub high: GraphStats,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    pub model_id: String,
    pub level: GraphLevel,
    pub provider: ProviderSpec,
    pub token_budget: usize,
    pub created: u64,
    pub history: Vec<ChatMessage>,
}

pub struct StoredModel {
    pub record: ModelRecord,
    pub complete: PropertyGraph,
    pub high: PropertyGraph,
    pub report: CondensationReport,
    pub sessions: Vec<SessionRecord>,
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| StoreError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, StoreError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn read_graph(path: &Path) -> Result<PropertyGraph, StoreError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    import_graphml(&text).map_err(|e| StoreError::Corrupt {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        let models = root.join("models");
        fs::create_dir_all(&models).map_err(io_err(&models))?;
        Ok(Store { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn model_dir(&self, id: &str) -> PathBuf {
        self.root.join("models").join(id)
    }

    pub fn save_model(
        &self,
        record: &ModelRecord,
        source: &[u8],
        complete_graphml: &str,
        high_graphml: &str,
        report: &CondensationReport,
    ) -> Result<(), StoreError> {
        let dir = self.model_dir(&record.id);
        let sessions = dir.join(SESSIONS);
        fs::create_dir_all(&sessions).map_err(io_err(&sessions))?;
        write_atomic(&dir.join(SOURCE), source)?;
        write_atomic(&dir.join(COMPLETE), complete_graphml.as_bytes())?;
        write_atomic(&dir.join(HIGH), high_graphml.as_bytes())?;
        write_atomic(&dir.join(REPORT), &to_json(report))?;
        write_atomic(&dir.join(RECORD), &to_json(record))
    }

    pub fn save_session(&self, record: &SessionRecord) -> Result<(), StoreError> {
        let path = self
            .model_dir(&record.model_id)
            .join(SESSIONS)
            .join(format!("{}.json", record.id));
        write_atomic(&path, &to_json(record))
    }

    /// Every complete model directory, sorted by id. Directories without a
    /// `model.json` are leftovers of interrupted uploads and are skipped.
    pub fn load_all(&self) -> Result<Vec<StoredModel>, StoreError> {
        let models = self.root.join("models");
        let mut dirs: Vec<PathBuf> = fs::read_dir(&models)
            .map_err(io_err(&models))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join(RECORD).is_file())
            .collect();
        dirs.sort();
        dirs.iter().map(|d| self.load_dir(d)).collect()
    }

    fn load_dir(&self, dir: &Path) -> Result<StoredModel, StoreError> {
        let record: ModelRecord = read_json(&dir.join(RECORD))?;
        let mut sessions = Vec::new();
        let sdir = dir.join(SESSIONS);
        if sdir.is_dir() {
            let mut paths: Vec<PathBuf> = fs::read_dir(&sdir)
                .map_err(io_err(&sdir))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            paths.sort();
            for p in paths {
                sessions.push(read_json::<SessionRecord>(&p)?);
            }
        }
        Ok(StoredModel {
            complete: read_graph(&dir.join(COMPLETE))?,
            high: read_graph(&dir.join(HIGH))?,
            report: read_json(&dir.join(REPORT))?,
            record,
            sessions,
        })
    }
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    // Plain data structures always serialize.
    serde_json::to_vec_pretty(value).unwrap_or_default()
}
