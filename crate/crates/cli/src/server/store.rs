//! In-memory sessions with idle eviction.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use mbms_core::engine::Session;
use rand::RngCore;

pub type SharedSession = Arc<tokio::sync::Mutex<Session>>;

struct Entry {
    session: SharedSession,
    last_used: Instant,
}

/// Sessions by id. Each session sits behind its own lock, so requests on
/// one session run one at a time while different sessions proceed in
/// parallel.
pub struct SessionStore {
    entries: Mutex<HashMap<String, Entry>>,
    idle_timeout: Duration,
    max_sessions: usize,
}

#[derive(Debug, thiserror::Error)]
#[error("session limit of {0} reached")]
pub struct StoreFull(pub usize);

/// 128 random bits as 32 hex digits.
pub fn fresh_session_id() -> String {
    let mut bytes = [0u8; 16];
    rand::rng().fill_bytes(&mut bytes);
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl SessionStore {
    pub fn new(idle_timeout: Duration, max_sessions: usize) -> Self {
        Self {
            entries: Mutex::new(HashMap::new()),
            idle_timeout,
            max_sessions,
        }
    }

    /// Stores a session under a fresh id and returns the id.
    pub fn insert(&self, make: impl FnOnce(&str) -> Session) -> Result<String, StoreFull> {
        let now = Instant::now();
        let mut entries = self.entries.lock().expect("store lock");
        self.evict_locked(&mut entries, now);
        if entries.len() >= self.max_sessions {
            return Err(StoreFull(self.max_sessions));
        }
        let id = loop {
            let id = fresh_session_id();
            if !entries.contains_key(&id) {
                break id;
            }
        };
        let session = Arc::new(tokio::sync::Mutex::new(make(&id)));
        entries.insert(id.clone(), Entry { session, last_used: now });
        Ok(id)
    }

    /// The session, refreshing its idle deadline.
    pub fn get(&self, id: &str) -> Option<SharedSession> {
        let now = Instant::now();
        let mut entries = self.entries.lock().expect("store lock");
        self.evict_locked(&mut entries, now);
        let entry = entries.get_mut(id)?;
        entry.last_used = now;
        Some(Arc::clone(&entry.session))
    }

    /// Drops sessions idle past the timeout; returns how many went.
    pub fn evict_idle(&self) -> usize {
        let mut entries = self.entries.lock().expect("store lock");
        self.evict_locked(&mut entries, Instant::now())
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("store lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn evict_locked(&self, entries: &mut HashMap<String, Entry>, now: Instant) -> usize {
        let before = entries.len();
        entries.retain(|_, e| now.duration_since(e.last_used) < self.idle_timeout);
        before - entries.len()
    }
}
