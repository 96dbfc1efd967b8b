//! Session persistence.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Mutex;

use crate::elicitation::ElicitationSession;
use crate::error::ApiError;

/// Key-value store of sessions. `update` is atomic per store.
pub trait SessionStore: Send + Sync {
    fn insert(&self, session: &ElicitationSession) -> Result<(), ApiError>;
    fn get(&self, id: &str) -> Result<ElicitationSession, ApiError>;
    fn update(&self, id: &str, f: &mut dyn FnMut(&mut ElicitationSession) -> Result<(), ApiError>) -> Result<ElicitationSession, ApiError>;
}

#[derive(Default)]
pub struct MemoryStore {
    sessions: Mutex<HashMap<String, ElicitationSession>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl SessionStore for MemoryStore {
    fn insert(&self, session: &ElicitationSession) -> Result<(), ApiError> {
        self.sessions.lock().unwrap().insert(session.id.clone(), session.clone());
        Ok(())
    }

    fn get(&self, id: &str) -> Result<ElicitationSession, ApiError> {
        self.sessions.lock().unwrap().get(id).cloned().ok_or_else(|| ApiError::session_not_found(id))
    }

    fn update(&self, id: &str, f: &mut dyn FnMut(&mut ElicitationSession) -> Result<(), ApiError>) -> Result<ElicitationSession, ApiError> {
        let mut map = self.sessions.lock().unwrap();
        let s = map.get_mut(id).ok_or_else(|| ApiError::session_not_found(id))?;
        let mut next = s.clone();
        f(&mut next)?;
        *s = next.clone();
        Ok(next)
    }
}

/// One JSON file per session in a directory.
pub struct FileStore {
    dir: PathBuf,
    lock: Mutex<()>,
}

impl FileStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, ApiError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(ApiError::storage)?;
        Ok(FileStore { dir, lock: Mutex::new(()) })
    }

    fn path(&self, id: &str) -> Result<PathBuf, ApiError> {
        if id.is_empty() || id.len() > 64 || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
            return Err(ApiError::session_not_found(id));
        }
        Ok(self.dir.join(format!("{id}.json")))
    }

    fn read(&self, id: &str) -> Result<ElicitationSession, ApiError> {
        let path = self.path(id)?;
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(ApiError::session_not_found(id)),
            Err(e) => return Err(ApiError::storage(e)),
        };
        serde_json::from_str(&text).map_err(ApiError::storage)
    }

    fn write(&self, s: &ElicitationSession) -> Result<(), ApiError> {
        let path = self.path(&s.id)?;
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(ApiError::storage)?;
        tmp.write_all(serde_json::to_string_pretty(s).map_err(ApiError::storage)?.as_bytes()).map_err(ApiError::storage)?;
        tmp.persist(path).map_err(ApiError::storage)?;
        Ok(())
    }
}

impl SessionStore for FileStore {
    fn insert(&self, session: &ElicitationSession) -> Result<(), ApiError> {
        let _g = self.lock.lock().unwrap();
        self.write(session)
    }

    fn get(&self, id: &str) -> Result<ElicitationSession, ApiError> {
        let _g = self.lock.lock().unwrap();
        self.read(id)
    }

    fn update(&self, id: &str, f: &mut dyn FnMut(&mut ElicitationSession) -> Result<(), ApiError>) -> Result<ElicitationSession, ApiError> {
        let _g = self.lock.lock().unwrap();
        let mut s = self.read(id)?;
        f(&mut s)?;
        self.write(&s)?;
        Ok(s)
    }
}
