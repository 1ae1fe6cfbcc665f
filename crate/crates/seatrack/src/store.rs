//! Directory-backed session store with atomically swapped live snapshots.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, RwLock};

use seatrack_core::ClassSession;

use crate::format::{session_from_str, FormatError};

/// File suffix of persisted sessions; the id is the file name without it.
pub const SESSION_SUFFIX: &str = ".session.json";

#[derive(Debug, Default)]
pub struct SessionStore {
    sessions: RwLock<BTreeMap<String, Arc<ClassSession>>>,
}

impl SessionStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads every `*.session.json` in `dir`.
    pub fn open_dir(dir: &Path) -> Result<Self, FormatError> {
        let store = Self::new();
        let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<Result<_, _>>()?;
        entries.sort_by_key(|e| e.file_name());
        for e in entries {
            let name = e.file_name().to_string_lossy().into_owned();
            if let Some(id) = name.strip_suffix(SESSION_SUFFIX) {
                let text = std::fs::read_to_string(e.path())?;
                store.insert(id, session_from_str(&text)?);
            }
        }
        Ok(store)
    }

    pub fn insert(&self, id: &str, session: ClassSession) {
        self.sessions.write().expect("store lock").insert(id.to_string(), Arc::new(session));
    }

    /// Replaces the snapshot of `id`, bumping its version past the previous
    /// one. Returns the published version.
    pub fn publish(&self, id: &str, mut session: ClassSession) -> u64 {
        let mut map = self.sessions.write().expect("store lock");
        let prev = map.get(id).map_or(0, |s| s.meta.version);
        session.meta.version = prev + 1;
        let v = session.meta.version;
        map.insert(id.to_string(), Arc::new(session));
        v
    }

    pub fn ids(&self) -> Vec<String> {
        self.sessions.read().expect("store lock").keys().cloned().collect()
    }

    pub fn get(&self, id: &str) -> Option<Arc<ClassSession>> {
        self.sessions.read().expect("store lock").get(id).cloned()
    }
}
