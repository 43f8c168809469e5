use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use chrono::Utc;
use devscreen_core::casebase::{CaseBase, CaseRecord, RetainOutcome};
use devscreen_core::engine::{self, BoneAgeProvider, Revision, Screener, ScreeningSession};
use tokio::sync::RwLock;

use crate::error::Failure;

pub struct ServiceConfig {
    pub screener: Screener,
    /// Where the case base is persisted after every write; `None` keeps it in memory.
    pub casebase_path: Option<PathBuf>,
    pub session_ttl: Duration,
    pub source_tag: String,
    pub bone_age: Option<Arc<dyn BoneAgeProvider>>,
}

struct StoredSession {
    session: ScreeningSession,
    touched: Instant,
}

pub(crate) struct Inner {
    pub screener: Screener,
    pub source_tag: String,
    pub bone_age: Option<Arc<dyn BoneAgeProvider>>,
    /// Single writer: every mutation takes the write half.
    pub base: RwLock<CaseBase>,
    casebase_path: Option<PathBuf>,
    sessions: Mutex<HashMap<String, StoredSession>>,
    next_session: AtomicU64,
    ttl: Duration,
}

#[derive(Clone)]
pub struct AppState(pub(crate) Arc<Inner>);

impl AppState {
    pub fn new(config: ServiceConfig, base: CaseBase) -> Self {
        AppState(Arc::new(Inner {
            screener: config.screener,
            source_tag: config.source_tag,
            bone_age: config.bone_age,
            base: RwLock::new(base),
            casebase_path: config.casebase_path,
            sessions: Mutex::new(HashMap::new()),
            next_session: AtomicU64::new(1),
            ttl: config.session_ttl,
        }))
    }

    /// Snapshot of the current case base.
    pub async fn case_base(&self) -> CaseBase {
        self.0.base.read().await.clone()
    }
}

impl Inner {
    pub fn next_session_id(&self) -> String {
        format!("S-{:06}", self.next_session.fetch_add(1, Ordering::Relaxed))
    }

    fn sessions(&self) -> std::sync::MutexGuard<'_, HashMap<String, StoredSession>> {
        let mut guard = self.sessions.lock().unwrap_or_else(|p| p.into_inner());
        let ttl = self.ttl;
        guard.retain(|_, s| s.touched.elapsed() < ttl);
        guard
    }

    pub fn insert_session(&self, session: ScreeningSession) {
        self.sessions().insert(
            session.session_id.clone(),
            StoredSession {
                session,
                touched: Instant::now(),
            },
        );
    }

    pub fn session(&self, id: &str) -> Result<ScreeningSession, Failure> {
        self.sessions()
            .get(id)
            .map(|s| s.session.clone())
            .ok_or_else(|| Failure::session_not_found(id))
    }

    /// Runs `f` on the stored session and keeps its changes only on success.
    pub fn update_session<T>(
        &self,
        id: &str,
        f: impl FnOnce(&mut ScreeningSession) -> Result<T, Failure>,
    ) -> Result<(T, ScreeningSession), Failure> {
        let mut sessions = self.sessions();
        let stored = sessions
            .get_mut(id)
            .ok_or_else(|| Failure::session_not_found(id))?;
        let mut working = stored.session.clone();
        let out = f(&mut working)?;
        stored.session = working.clone();
        stored.touched = Instant::now();
        Ok((out, working))
    }

    /// Applies `f` to a copy of the base, persists the copy, then swaps it in.
    pub async fn mutate_base<T>(
        &self,
        f: impl FnOnce(&mut CaseBase) -> Result<T, Failure>,
    ) -> Result<T, Failure> {
        let mut base = self.base.write().await;
        let mut next = base.clone();
        let out = f(&mut next)?;
        if let Some(path) = &self.casebase_path {
            next.save(path).map_err(Failure::storage)?;
        }
        *base = next;
        Ok(out)
    }

    pub async fn revise(
        &self,
        id: &str,
        edits: Revision,
        reviser: &str,
    ) -> Result<ScreeningSession, Failure> {
        // a retain in flight holds the write half; wait for it
        let _base = self.base.read().await;
        let ((), session) = self.update_session(id, |s| {
            engine::revise(s, edits, reviser).map_err(Failure::from)
        })?;
        Ok(session)
    }

    /// Stores the session as a verified case. The session is marked closed
    /// only once the case base has been persisted.
    pub async fn retain(&self, id: &str) -> Result<(RetainOutcome, CaseRecord), Failure> {
        let mut base = self.base.write().await;
        let mut session = self.session(id)?;
        let mut next = base.clone();
        let (outcome, record) =
            engine::retain_session(&mut session, &mut next, Utc::now(), &self.source_tag)?;
        if let Some(path) = &self.casebase_path {
            next.save(path).map_err(Failure::storage)?;
        }
        *base = next;
        self.update_session(id, |stored| {
            *stored = session;
            Ok(())
        })?;
        Ok((outcome, record))
    }
}
