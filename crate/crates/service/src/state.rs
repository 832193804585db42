use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use axmc_core::{Error, Result, RunBudget, RunControl, Session, Status, StatusSummary};

use crate::error::{ApiError, ApiResult};

/// What `GET /sessions/{id}` reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    /// Unix seconds at creation.
    pub created: u64,
    #[serde(flatten)]
    pub summary: StatusSummary,
    /// Error that ended the most recent run, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_error: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    created: u64,
}

struct Entry {
    /// Latest state published at an iteration boundary.
    session: Session,
    created: u64,
    /// Present while a worker thread owns the optimizer loop.
    worker: Option<RunControl>,
    last_error: Option<String>,
}

impl Entry {
    fn info(&self) -> SessionInfo {
        let mut summary = self.session.summary();
        if self.worker.is_some() {
            summary.status = Status::Running;
        }
        SessionInfo {
            created: self.created,
            summary,
            last_error: self.last_error.clone(),
        }
    }
}

#[derive(Default)]
struct Registry {
    sessions: BTreeMap<String, Entry>,
    used_ids: HashSet<String>,
}

struct Shared {
    registry: Mutex<Registry>,
    dir: Option<PathBuf>,
    ui_dir: Option<PathBuf>,
}

/// Shared server state. Cheap to clone.
#[derive(Clone)]
pub struct AppState {
    shared: Arc<Shared>,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Write via a temporary file in the same directory and rename into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

impl AppState {
    /// In-memory state; nothing survives a restart.
    pub fn in_memory() -> Self {
        AppState::build(None, None, Registry::default())
    }

    /// State persisted under `dir`; every `*.json` session snapshot already
    /// there is restored (sessions saved mid-run come back paused).
    pub fn open(dir: impl Into<PathBuf>, ui_dir: Option<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        let mut reg = Registry::default();
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json") && !is_meta(p))
            .collect();
        paths.sort();
        for p in paths {
            let text = std::fs::read_to_string(&p)?;
            let session = match Session::restore(&text) {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("skipping {}: {e}", p.display());
                    continue;
                }
            };
            let created = std::fs::read_to_string(meta_path(&dir, &session.id))
                .ok()
                .and_then(|t| serde_json::from_str::<Meta>(&t).ok())
                .map(|m| m.created)
                .unwrap_or_else(now);
            log::info!(
                "restored session {} ({})",
                session.id,
                session.status().as_str()
            );
            reg.used_ids.insert(session.id.clone());
            reg.sessions.insert(
                session.id.clone(),
                Entry {
                    session,
                    created,
                    worker: None,
                    last_error: None,
                },
            );
        }
        Ok(AppState::build(Some(dir), ui_dir, reg))
    }

    fn build(dir: Option<PathBuf>, ui_dir: Option<PathBuf>, reg: Registry) -> Self {
        AppState {
            shared: Arc::new(Shared {
                registry: Mutex::new(reg),
                dir,
                ui_dir,
            }),
        }
    }

    pub fn ui_dir(&self) -> Option<&Path> {
        self.shared.ui_dir.as_deref()
    }

    fn registry(&self) -> MutexGuard<'_, Registry> {
        // A panicking worker cannot leave the map half-updated, so poison is ignored.
        self.shared
            .registry
            .lock()
            .unwrap_or_else(|e| e.into_inner())
    }

    fn persist(&self, session: &Session) -> Result<()> {
        if let Some(dir) = &self.shared.dir {
            write_atomic(
                &dir.join(format!("{}.json", session.id)),
                session.snapshot()?.as_bytes(),
            )?;
        }
        Ok(())
    }

    /// Register a freshly initialized session under a server-unique id:
    /// its own id when unused, otherwise the first free `-N` suffix.
    pub fn insert(&self, mut session: Session) -> ApiResult<SessionInfo> {
        let created = now();
        let info = {
            let mut reg = self.registry();
            let base = session.id.clone();
            let mut n = 1;
            while reg.used_ids.contains(&session.id) {
                n += 1;
                session.id = format!("{base}-{n}");
            }
            reg.used_ids.insert(session.id.clone());
            let entry = Entry {
                session: session.clone(),
                created,
                worker: None,
                last_error: None,
            };
            let info = entry.info();
            reg.sessions.insert(session.id.clone(), entry);
            info
        };
        if let Some(dir) = &self.shared.dir {
            let meta = serde_json::to_vec(&Meta { created })
                .map_err(|e| ApiError::internal(e.to_string()))?;
            write_atomic(&meta_path(dir, &session.id), &meta)
                .map_err(|e| ApiError::internal(e.to_string()))?;
        }
        self.persist(&session)
            .map_err(|e| ApiError::internal(e.to_string()))?;
        Ok(info)
    }

    pub fn list(&self) -> Vec<SessionInfo> {
        self.registry().sessions.values().map(Entry::info).collect()
    }

    pub fn info(&self, id: &str) -> ApiResult<SessionInfo> {
        self.registry()
            .sessions
            .get(id)
            .map(Entry::info)
            .ok_or_else(|| ApiError::not_found(id))
    }

    /// The latest published state (an immutable copy).
    pub fn session(&self, id: &str) -> ApiResult<Session> {
        self.registry()
            .sessions
            .get(id)
            .map(|e| e.session.clone())
            .ok_or_else(|| ApiError::not_found(id))
    }

    /// Launch the optimizer loop on a worker thread.
    pub fn start(&self, id: &str, budget: RunBudget) -> ApiResult<SessionInfo> {
        if let RunBudget::Seconds(s) = budget {
            if !(s > 0.0 && s.is_finite()) {
                return Err(
                    ApiError::invalid("invalid_budget", "seconds must be positive")
                        .field("seconds"),
                );
            }
        }
        let ctrl = RunControl::new();
        let (mut session, info) = {
            let mut reg = self.registry();
            let entry = reg
                .sessions
                .get_mut(id)
                .ok_or_else(|| ApiError::not_found(id))?;
            if entry.worker.is_some() {
                return Err(ApiError::conflict(format!(
                    "session `{id}` is already running"
                )));
            }
            entry.worker = Some(ctrl.clone());
            entry.last_error = None;
            (entry.session.clone(), entry.info())
        };
        let state = self.clone();
        let id = id.to_string();
        std::thread::spawn(move || {
            let result = session.run(budget, &ctrl, |s| {
                state.persist(s)?;
                if let Some(e) = state.registry().sessions.get_mut(&s.id) {
                    e.session = s.clone();
                }
                Ok(())
            });
            if let Err(e) = &result {
                log::error!("run of {id} stopped: {e}");
            }
            let persisted = state.persist(&session);
            let mut reg = state.registry();
            if let Some(e) = reg.sessions.get_mut(&id) {
                e.session = session;
                e.worker = None;
                e.last_error = result.err().or(persisted.err()).map(|e| e.to_string());
            }
        });
        Ok(info)
    }

    /// Ask a running loop to stop at the next iteration boundary. Pausing a
    /// paused session is a no-op; other states conflict.
    pub fn pause(&self, id: &str) -> ApiResult<SessionInfo> {
        let reg = self.registry();
        let entry = reg
            .sessions
            .get(id)
            .ok_or_else(|| ApiError::not_found(id))?;
        match &entry.worker {
            Some(ctrl) => ctrl.request_pause(),
            None if entry.session.status() == Status::Paused => {}
            None => {
                return Err(ApiError::conflict(format!(
                    "session `{id}` is {}, not running",
                    entry.session.status().as_str()
                )))
            }
        }
        Ok(entry.info())
    }

    /// Apply `f` to an idle, paused or done session and persist the result.
    pub fn update<F>(&self, id: &str, f: F) -> ApiResult<SessionInfo>
    where
        F: FnOnce(&mut Session) -> ApiResult<()>,
    {
        let (session, info) = {
            let mut reg = self.registry();
            let entry = reg
                .sessions
                .get_mut(id)
                .ok_or_else(|| ApiError::not_found(id))?;
            if entry.worker.is_some() {
                return Err(ApiError::conflict(format!("session `{id}` is running")));
            }
            f(&mut entry.session)?;
            (entry.session.clone(), entry.info())
        };
        self.persist(&session)
            .map_err(|e| ApiError::internal(e.to_string()))?;
        Ok(info)
    }

    /// Request a pause on every running session (used on shutdown).
    pub fn pause_all(&self) {
        for e in self.registry().sessions.values() {
            if let Some(ctrl) = &e.worker {
                ctrl.request_pause();
            }
        }
    }

    pub fn any_running(&self) -> bool {
        self.registry()
            .sessions
            .values()
            .any(|e| e.worker.is_some())
    }
}

fn meta_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.meta.json"))
}

fn is_meta(p: &Path) -> bool {
    p.file_name()
        .and_then(|n| n.to_str())
        .is_some_and(|n| n.ends_with(".meta.json"))
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        ApiError::from(Error::Io(e))
    }
}
