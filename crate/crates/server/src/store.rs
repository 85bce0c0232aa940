//! In-memory model sessions with optional on-disk persistence.
//!
//! Each persisted model lives in `<data_dir>/<model_id>/` as `model.json`
//! (canonical forest document), `dataset.csv` and `meta.json`.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use pathmatrix::{export_forest, import_forest, CsvSchema, Model, ModelSummary};
use serde::{Deserialize, Serialize};

/// Immutable snapshot served to requests.
#[derive(Debug)]
pub struct Session {
    pub model: Model,
    pub schema: CsvSchema,
    pub summary: ModelSummary,
    pub created_at: u64,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    schema: CsvSchema,
    created_at: u64,
}

#[derive(Default)]
pub struct Store {
    sessions: RwLock<HashMap<String, Arc<Session>>>,
    data_dir: Option<PathBuf>,
}

impl Store {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens `dir`, loading every model persisted there.
    pub fn open(dir: impl Into<PathBuf>) -> pathmatrix::Result<Self> {
        let dir = dir.into();
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| pathmatrix::Error::Io { path, source }
        };
        fs::create_dir_all(&dir).map_err(io(&dir))?;
        let mut sessions = HashMap::new();
        let mut entries: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(io(&dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("meta.json").is_file())
            .collect();
        entries.sort();
        for path in entries {
            let read = |name: &str| {
                let p = path.join(name);
                fs::read_to_string(&p).map_err(io(&p))
            };
            let meta: Meta = serde_json::from_str(&read("meta.json")?)
                .map_err(|e| pathmatrix::Error::Schema(format!("{}: {e}", path.display())))?;
            let forest = import_forest(&read("model.json")?)?;
            let model = Model::import(forest, &read("dataset.csv")?, &meta.schema)?;
            let id = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
            sessions.insert(id, Arc::new(Session::new(model, meta.schema, meta.created_at)?));
        }
        Ok(Self {
            sessions: RwLock::new(sessions),
            data_dir: Some(dir),
        })
    }

    pub fn get(&self, id: &str) -> Option<Arc<Session>> {
        self.sessions.read().expect("store lock").get(id).cloned()
    }

    pub fn ids(&self) -> Vec<(String, u64)> {
        let mut v: Vec<(String, u64)> = self
            .sessions
            .read()
            .expect("store lock")
            .iter()
            .map(|(k, s)| (k.clone(), s.created_at))
            .collect();
        v.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        v
    }

    /// Stores a new session, persisting it first when a data dir is set.
    pub fn insert(&self, model: Model, schema: CsvSchema) -> pathmatrix::Result<(String, Arc<Session>)> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let created_at = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let session = Arc::new(Session::new(model, schema, created_at)?);
        if let Some(dir) = &self.data_dir {
            persist(&dir.join(&id), &session)?;
        }
        self.sessions.write().expect("store lock").insert(id.clone(), session.clone());
        Ok((id, session))
    }

    pub fn remove(&self, id: &str) -> pathmatrix::Result<bool> {
        let removed = self.sessions.write().expect("store lock").remove(id).is_some();
        if removed {
            if let Some(dir) = &self.data_dir {
                let path = dir.join(id);
                if path.exists() {
                    fs::remove_dir_all(&path).map_err(|source| pathmatrix::Error::Io { path, source })?;
                }
            }
        }
        Ok(removed)
    }
}

impl Session {
    fn new(model: Model, schema: CsvSchema, created_at: u64) -> pathmatrix::Result<Self> {
        let summary = model.summary()?;
        Ok(Self {
            model,
            schema,
            summary,
            created_at,
        })
    }
}

fn persist(dir: &Path, s: &Session) -> pathmatrix::Result<()> {
    let write = |name: &str, body: &str| {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|source| pathmatrix::Error::Io { path, source })
    };
    fs::create_dir_all(dir).map_err(|source| pathmatrix::Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write("model.json", &export_forest(s.model.forest()))?;
    write("dataset.csv", &s.model.dataset().to_csv_string(&s.schema.label_column))?;
    let meta = Meta {
        schema: s.schema.clone(),
        created_at: s.created_at,
    };
    write("meta.json", &serde_json::to_string_pretty(&meta).expect("meta serialises"))
}
