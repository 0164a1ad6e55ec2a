use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use rand::Rng;

use crate::session::{read_log, CreateSession, Session, SessionHeader};
use crate::ServiceError;

/// All sessions, optionally backed by a data directory with one
/// `<id>/session.json` plus `<id>/log.jsonl` per session.
pub struct SessionStore {
    dir: Option<PathBuf>,
    sessions: RwLock<BTreeMap<String, Arc<Mutex<Session>>>>,
}

impl SessionStore {
    pub fn in_memory() -> Self {
        SessionStore { dir: None, sessions: RwLock::new(BTreeMap::new()) }
    }

    /// Opens `dir`, replaying every session found there.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let mut sessions = BTreeMap::new();
        let mut entries: Vec<_> = fs::read_dir(&dir)?.collect::<Result<_, _>>()?;
        entries.sort_by_key(|e| e.file_name());
        for entry in entries {
            let path = entry.path();
            if !path.join("session.json").is_file() {
                continue;
            }
            let session = Self::recover(&path)?;
            log::info!("recovered session {} ({} log records)", session.id(), session.log().len());
            sessions.insert(session.id().to_string(), Arc::new(Mutex::new(session)));
        }
        Ok(SessionStore { dir: Some(dir), sessions: RwLock::new(sessions) })
    }

    /// Rebuilds one session from its directory.
    pub fn recover(session_dir: &Path) -> Result<Session, ServiceError> {
        let header: SessionHeader = serde_json::from_str(&fs::read_to_string(session_dir.join("session.json"))?)
            .map_err(|e| ServiceError::Log { line: 1, message: e.to_string() })?;
        let log_path = session_dir.join("log.jsonl");
        let mut session = Session::replay(header, read_log(&log_path)?)?;
        session.attach_log(log_path);
        Ok(session)
    }

    pub fn create(&self, request: CreateSession) -> Result<String, ServiceError> {
        let mut rng = rand::rng();
        let seed = request.seed.unwrap_or_else(|| rng.random());
        let id = loop {
            let id = format!("{:016x}", rng.random::<u64>());
            if !self.sessions.read().expect("store lock").contains_key(&id) {
                break id;
            }
        };
        let mut session = Session::create(id.clone(), request, seed)?;
        if let Some(dir) = &self.dir {
            let sdir = dir.join(&id);
            fs::create_dir_all(&sdir)?;
            let tmp = sdir.join("session.json.tmp");
            fs::write(&tmp, serde_json::to_string_pretty(session.header()).expect("header serializes"))?;
            fs::rename(&tmp, sdir.join("session.json"))?;
            session.attach_log(sdir.join("log.jsonl"));
        }
        self.sessions.write().expect("store lock").insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok(id)
    }

    pub fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>, ServiceError> {
        self.sessions
            .read()
            .expect("store lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    pub fn ids(&self) -> Vec<String> {
        self.sessions.read().expect("store lock").keys().cloned().collect()
    }

    /// Runs `f` inside the session's critical section.
    pub fn with<T>(&self, id: &str, f: impl FnOnce(&mut Session) -> Result<T, ServiceError>) -> Result<T, ServiceError> {
        let session = self.get(id)?;
        let mut guard = session.lock().unwrap_or_else(|p| p.into_inner());
        f(&mut guard)
    }
}
