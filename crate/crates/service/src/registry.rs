//! Session registry: one serialized writer per ceremony, backed by the
//! on-disk transcript.

use std::collections::HashMap;
use std::io;
use std::path::Path;
use std::sync::{Arc, RwLock};

use fairdraw_core::{
    CeremonyError, CommitmentDigest, DrawSpec, Event, EventError, Mask, Modulus, Phase,
    Predecessor, Timestamp, Transcript,
};
use rand::rngs::OsRng;
use rand::TryRngCore;
use tokio::sync::{watch, Mutex};

use crate::api::{
    AbortRequest, CreateRequest, CreateResponse, Snapshot, StakeholderStatus, StakeholderToken,
    WhoAmI,
};
use crate::error::ServiceError;
use crate::store::{hash_token, Role, Store, TokenTable, TranscriptFile};

pub type Clock = Arc<dyn Fn() -> Timestamp + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(Timestamp::now)
}

/// Default phase lengths applied when a create request names no deadline.
#[derive(Debug, Clone, Copy)]
pub struct Windows {
    pub commit_ms: i64,
    pub reveal_ms: i64,
}

impl Default for Windows {
    fn default() -> Self {
        const DAY_MS: i64 = 24 * 60 * 60 * 1000;
        Windows {
            commit_ms: DAY_MS,
            reveal_ms: DAY_MS,
        }
    }
}

pub struct Registry {
    store: Store,
    sessions: RwLock<HashMap<String, Arc<SessionCell>>>,
    clock: Clock,
    windows: Windows,
}

pub struct SessionCell {
    session_id: String,
    inner: Mutex<Session>,
    /// Number of persisted records; bumped after every append.
    len: watch::Sender<usize>,
}

enum Session {
    Live(Live),
    Quarantined { reason: String },
}

struct Live {
    transcript: Transcript,
    lines: Vec<String>,
    tokens: TokenTable,
    file: TranscriptFile,
}

/// A persisted record as pushed to subscribers.
#[derive(Debug, Clone)]
pub struct StreamedRecord {
    pub seq: u64,
    pub kind: &'static str,
    pub line: String,
}

fn event_error(e: EventError) -> ServiceError {
    match e {
        EventError::Ceremony(c) => c.into(),
        other => ServiceError::BadRequest(other.to_string()),
    }
}

fn random_token() -> Result<String, ServiceError> {
    let mut bytes = [0u8; 32];
    OsRng
        .try_fill_bytes(&mut bytes)
        .map_err(|e| ServiceError::Entropy(e.to_string()))?;
    Ok(hex::encode(bytes))
}

impl Live {
    fn state(&self) -> &fairdraw_core::CeremonyState {
        self.transcript.state().expect("live sessions always hold a ceremony")
    }

    /// Validates, persists, then adopts `event` (plus the `completed` record
    /// when it finishes the ceremony). Nothing changes if any step fails.
    fn apply(&mut self, event: Event) -> Result<(), ServiceError> {
        let mut next = self.transcript.clone();
        next.push(event).map_err(event_error)?;
        next.seal_outcome();
        let new_lines: Vec<String> = next.records()[self.lines.len()..]
            .iter()
            .map(|r| r.to_json_line())
            .collect();
        self.file.append(&new_lines)?;
        self.transcript = next;
        self.lines.extend(new_lines);
        Ok(())
    }

    /// Aborts the ceremony if its current deadline has passed, returning that
    /// deadline.
    fn expire(&mut self, now: Timestamp) -> Result<Option<Timestamp>, ServiceError> {
        let state = self.state();
        if !state.is_expired(now) {
            return Ok(None);
        }
        let deadline = state.active_deadline().expect("expired implies a deadline");
        let reason = format!("{} deadline expired", state.phase());
        self.apply(Event::Aborted {
            reason,
            successor_hint: None,
            at: now,
        })?;
        Ok(Some(deadline))
    }

    fn snapshot(&self) -> Snapshot {
        let state = self.state();
        let spec = state.spec();
        let mut rejected: HashMap<&str, u32> = HashMap::new();
        for r in self.transcript.records() {
            if let Event::OpeningRejected { stakeholder_id, .. } = &r.event {
                *rejected.entry(stakeholder_id.as_str()).or_default() += 1;
            }
        }
        let stakeholders = spec
            .roster
            .iter()
            .map(|id| {
                let digest = state.commitments().get(id);
                let opening = state.reveals().get(id);
                StakeholderStatus {
                    stakeholder_id: id.clone(),
                    committed: digest.is_some(),
                    digest: digest.map(CommitmentDigest::to_hex),
                    revealed: opening.is_some(),
                    value: opening.map(|o| o.value.get()),
                    mask: opening.map(|o| o.mask.to_hex()),
                    rejected_openings: rejected.get(id.as_str()).copied().unwrap_or(0),
                }
            })
            .collect();
        let partial_sum = match state.phase() {
            Phase::Reveal | Phase::Complete => state.partial_sum().map(|v| v.get()),
            _ => None,
        };
        Snapshot {
            session_id: spec.session_id.clone(),
            phase: state.phase(),
            modulus: spec.modulus.get(),
            metadata: spec.metadata.clone(),
            candidates: spec.candidates.as_ref().map(Vec::len),
            commit_deadline: spec.commit_deadline.map(Timestamp::millis),
            reveal_deadline: spec.reveal_deadline.map(Timestamp::millis),
            predecessor: spec.predecessor.as_ref().map(|p| p.session_id.clone()),
            stakeholders,
            committed: state.commitments().len(),
            revealed: state.reveals().len(),
            partial_sum,
            outcome: state.outcome_of().map(|v| v.get()),
            selected_candidate: state.selected_candidate().map(str::to_string),
            abort_reason: state.abort_reason().map(str::to_string),
            records: self.lines.len() as u64,
            head: hex::encode(self.transcript.head()),
        }
    }
}

impl Session {
    fn live(&mut self, session_id: &str) -> Result<&mut Live, ServiceError> {
        match self {
            Session::Live(l) => Ok(l),
            Session::Quarantined { reason } => Err(ServiceError::Quarantined {
                session: session_id.to_string(),
                reason: reason.clone(),
            }),
        }
    }
}

impl SessionCell {
    fn new(session_id: String, session: Session, len: usize) -> Arc<SessionCell> {
        Arc::new(SessionCell {
            session_id,
            inner: Mutex::new(session),
            len: watch::channel(len).0,
        })
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    fn notify(&self, len: usize) {
        self.len.send_replace(len);
    }

    pub fn watch(&self) -> watch::Receiver<usize> {
        self.len.subscribe()
    }

    /// Records from `from` onward and whether the transcript is closed.
    pub async fn records_from(&self, from: usize) -> Result<(Vec<StreamedRecord>, bool), ServiceError> {
        let mut guard = self.inner.lock().await;
        let live = guard.live(&self.session_id)?;
        let records = live
            .lines
            .iter()
            .enumerate()
            .skip(from)
            .map(|(i, line)| StreamedRecord {
                seq: i as u64,
                kind: live.transcript.records()[i].event.kind(),
                line: line.clone(),
            })
            .collect();
        Ok((records, live.transcript.is_closed()))
    }
}

impl Registry {
    /// Loads every persisted session. Transcripts that fail verification are
    /// quarantined: readable, never mutated, never repaired.
    pub fn open(data_dir: &Path, clock: Clock, windows: Windows) -> io::Result<Registry> {
        let store = Store::open(data_dir)?;
        let mut sessions = HashMap::new();
        for stored in store.scan()? {
            let id = stored.session_id.clone();
            let (session, len) = match Self::load(&store, stored) {
                Ok(live) => {
                    let len = live.lines.len();
                    (Session::Live(live), len)
                }
                Err(reason) => {
                    log::error!("quarantining session {id:?}: {reason}");
                    (Session::Quarantined { reason }, 0)
                }
            };
            sessions.insert(id.clone(), SessionCell::new(id, session, len));
        }
        Ok(Registry {
            store,
            sessions: RwLock::new(sessions),
            clock,
            windows,
        })
    }

    fn load(store: &Store, stored: crate::store::StoredSession) -> Result<Live, String> {
        let id = &stored.session_id;
        let mut bytes = stored
            .transcript
            .ok_or_else(|| "transcript file missing".to_string())?;
        let tokens = stored.tokens.ok_or_else(|| "token table missing or unreadable".to_string())?;
        let removed = store
            .drop_torn_tail(id, &mut bytes)
            .map_err(|e| format!("cannot truncate torn write: {e}"))?;
        if removed > 0 {
            log::warn!("session {id:?}: discarded {removed} bytes of an unacknowledged partial write");
        }
        if bytes.is_empty() {
            return Err("transcript is empty".into());
        }
        let transcript = Transcript::from_jsonl(&bytes).map_err(|report| {
            report
                .findings
                .first()
                .map(|f| format!("seq {}: {}", f.seq, f.description))
                .unwrap_or_else(|| "verification failed".into())
        })?;
        let spec_id = &transcript.state().expect("verified").spec().session_id;
        if spec_id != id {
            return Err(format!("transcript belongs to session {spec_id:?}"));
        }
        let lines = transcript.records().iter().map(|r| r.to_json_line()).collect();
        let file = store
            .open_transcript(id)
            .map_err(|e| format!("cannot open transcript for append: {e}"))?;
        Ok(Live {
            transcript,
            lines,
            tokens,
            file,
        })
    }

    pub fn now(&self) -> Timestamp {
        (self.clock)()
    }

    pub fn cell(&self, session_id: &str) -> Result<Arc<SessionCell>, ServiceError> {
        self.sessions
            .read()
            .expect("registry lock poisoned")
            .get(session_id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(session_id.to_string()))
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .sessions
            .read()
            .expect("registry lock poisoned")
            .keys()
            .cloned()
            .collect();
        ids.sort();
        ids
    }

    pub async fn create(&self, req: CreateRequest) -> Result<CreateResponse, ServiceError> {
        let now = self.now();
        let session_id = match req.session_id {
            Some(id) => id,
            None => random_token()?[..32].to_string(),
        };
        if self.cell(&session_id).is_ok() || self.store.exists(&session_id) {
            return Err(ServiceError::SessionExists(session_id));
        }
        let modulus = Modulus::new(req.modulus).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        let roster = match (req.roster, req.stakeholders) {
            (Some(r), None) => r,
            (None, Some(k)) => (0..k).map(|i| format!("S{i}")).collect(),
            _ => {
                return Err(ServiceError::BadRequest(
                    "give exactly one of `roster` and `stakeholders`".into(),
                ))
            }
        };
        let predecessor = match req.predecessor {
            None => None,
            Some(pid) => Some(self.predecessor(&pid).await?),
        };
        let commit_deadline = Timestamp(
            req.commit_deadline
                .unwrap_or_else(|| now.plus_millis(self.windows.commit_ms).millis()),
        );
        let reveal_deadline = Timestamp(
            req.reveal_deadline
                .unwrap_or_else(|| commit_deadline.plus_millis(self.windows.reveal_ms).millis()),
        );
        let spec = DrawSpec {
            session_id: session_id.clone(),
            modulus,
            roster,
            candidates: req.candidates,
            metadata: req.metadata.unwrap_or_default(),
            commit_deadline: Some(commit_deadline),
            reveal_deadline: Some(reveal_deadline),
            predecessor,
        };
        spec.validate()?;

        let mut transcript = Transcript::new();
        transcript
            .push(Event::CeremonyCreated {
                spec: spec.clone(),
                at: now,
            })
            .map_err(event_error)?;

        let organizer_token = random_token()?;
        let mut tokens = Vec::with_capacity(spec.k());
        for id in &spec.roster {
            tokens.push(StakeholderToken {
                stakeholder_id: id.clone(),
                token: random_token()?,
            });
        }
        let table = TokenTable {
            organizer: hash_token(&organizer_token),
            stakeholders: tokens
                .iter()
                .map(|t| (t.stakeholder_id.clone(), hash_token(&t.token)))
                .collect(),
        };

        let mut file = self.store.create(&session_id, &table).map_err(|e| {
            if e.kind() == io::ErrorKind::AlreadyExists {
                ServiceError::SessionExists(session_id.clone())
            } else {
                e.into()
            }
        })?;
        let lines: Vec<String> = transcript.records().iter().map(|r| r.to_json_line()).collect();
        file.append(&lines)?;
        let live = Live {
            transcript,
            lines,
            tokens: table,
            file,
        };
        let state = live.snapshot();
        let cell = SessionCell::new(session_id.clone(), Session::Live(live), 1);
        self.sessions
            .write()
            .expect("registry lock poisoned")
            .insert(session_id.clone(), cell);
        log::info!("created session {session_id:?} (m = {}, k = {})", state.modulus, state.stakeholders.len());
        Ok(CreateResponse {
            session_id,
            organizer_token,
            tokens,
            state,
        })
    }

    async fn predecessor(&self, session_id: &str) -> Result<Predecessor, ServiceError> {
        let cell = self.cell(session_id)?;
        let mut guard = cell.inner.lock().await;
        let live = guard.live(session_id)?;
        let now = self.now();
        if live.expire(now)?.is_some() {
            cell.notify(live.lines.len());
        }
        if live.state().phase() != Phase::Aborted {
            return Err(ServiceError::PredecessorNotAborted(session_id.to_string()));
        }
        Ok(Predecessor {
            session_id: session_id.to_string(),
            transcript_head: live.transcript.head(),
        })
    }

    fn stakeholder(live: &Live, token: Option<&str>) -> Result<String, ServiceError> {
        match token.and_then(|t| live.tokens.role_of(t)) {
            Some(Role::Stakeholder(id)) => Ok(id),
            Some(Role::Organizer) => Err(ServiceError::Forbidden),
            None => Err(ServiceError::Unauthorized),
        }
    }

    pub async fn submit_commitment(
        &self,
        session_id: &str,
        token: Option<&str>,
        digest_hex: &str,
    ) -> Result<Snapshot, ServiceError> {
        let cell = self.cell(session_id)?;
        let mut guard = cell.inner.lock().await;
        let live = guard.live(session_id)?;
        let id = Self::stakeholder(live, token)?;
        let digest = CommitmentDigest::from_hex(digest_hex)
            .map_err(|e| ServiceError::BadRequest(format!("digest: {e}")))?;
        let now = self.now();
        if let Some(deadline) = live.expire(now)? {
            cell.notify(live.lines.len());
            return Err(CeremonyError::DeadlineExpired { deadline, now }.into());
        }
        live.apply(Event::CommitmentSubmitted {
            stakeholder_id: id,
            digest,
            at: now,
        })?;
        cell.notify(live.lines.len());
        Ok(live.snapshot())
    }

    pub async fn submit_reveal(
        &self,
        session_id: &str,
        token: Option<&str>,
        value: u64,
        mask_hex: &str,
    ) -> Result<Snapshot, ServiceError> {
        let cell = self.cell(session_id)?;
        let mut guard = cell.inner.lock().await;
        let live = guard.live(session_id)?;
        let id = Self::stakeholder(live, token)?;
        let mask = Mask::from_hex(mask_hex).map_err(|e| ServiceError::BadRequest(format!("mask: {e}")))?;
        let now = self.now();
        if let Some(deadline) = live.expire(now)? {
            cell.notify(live.lines.len());
            return Err(CeremonyError::DeadlineExpired { deadline, now }.into());
        }
        let opening = live.state().opening(value, mask)?;
        if let Some(existing) = live.state().reveals().get(&id) {
            // Retransmission of an accepted reveal.
            if *existing == opening {
                return Ok(live.snapshot());
            }
            return Err(CeremonyError::DuplicateReveal(id).into());
        }
        let result = live.apply(Event::RevealSubmitted {
            stakeholder_id: id.clone(),
            value,
            mask,
            at: now,
        });
        match result {
            Ok(()) => {}
            Err(ServiceError::Ceremony(CeremonyError::InvalidOpening(_))) => {
                live.apply(Event::OpeningRejected {
                    stakeholder_id: id.clone(),
                    value,
                    mask,
                    reason: "opening does not match commitment".into(),
                    at: now,
                })?;
                cell.notify(live.lines.len());
                log::warn!("session {session_id:?}: rejected opening from {id:?}");
                return Err(CeremonyError::InvalidOpening(id).into());
            }
            Err(e) => return Err(e),
        }
        cell.notify(live.lines.len());
        Ok(live.snapshot())
    }

    pub async fn abort(
        &self,
        session_id: &str,
        token: Option<&str>,
        req: AbortRequest,
    ) -> Result<Snapshot, ServiceError> {
        let cell = self.cell(session_id)?;
        let mut guard = cell.inner.lock().await;
        let live = guard.live(session_id)?;
        match token.and_then(|t| live.tokens.role_of(t)) {
            Some(Role::Organizer) => {}
            Some(Role::Stakeholder(_)) => return Err(ServiceError::Forbidden),
            None => return Err(ServiceError::Unauthorized),
        }
        live.apply(Event::Aborted {
            reason: req.reason,
            successor_hint: req.successor_hint,
            at: self.now(),
        })?;
        cell.notify(live.lines.len());
        Ok(live.snapshot())
    }

    pub async fn snapshot(&self, session_id: &str) -> Result<Snapshot, ServiceError> {
        let cell = self.cell(session_id)?;
        let mut guard = cell.inner.lock().await;
        let live = guard.live(session_id)?;
        if live.expire(self.now())?.is_some() {
            cell.notify(live.lines.len());
        }
        Ok(live.snapshot())
    }

    pub async fn whoami(&self, session_id: &str, token: Option<&str>) -> Result<WhoAmI, ServiceError> {
        let cell = self.cell(session_id)?;
        let mut guard = cell.inner.lock().await;
        let live = guard.live(session_id)?;
        let stakeholder_id = match token.and_then(|t| live.tokens.role_of(t)) {
            Some(Role::Stakeholder(id)) => Some(id),
            Some(Role::Organizer) => None,
            None => return Err(ServiceError::Unauthorized),
        };
        Ok(WhoAmI {
            session_id: session_id.to_string(),
            stakeholder_id,
        })
    }

    /// Persisted transcript bytes, plus a warning for quarantined sessions.
    pub async fn transcript(&self, session_id: &str) -> Result<(Vec<u8>, Option<String>), ServiceError> {
        let cell = self.cell(session_id)?;
        let guard = cell.inner.lock().await;
        let bytes = match self.store.read_transcript(session_id) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        let warning = match &*guard {
            Session::Live(_) => None,
            Session::Quarantined { reason } => Some(format!("quarantined: {reason}")),
        };
        Ok((bytes, warning))
    }

    /// Aborts every ceremony whose current deadline has passed.
    pub async fn sweep(&self) -> usize {
        let cells: Vec<Arc<SessionCell>> = self
            .sessions
            .read()
            .expect("registry lock poisoned")
            .values()
            .cloned()
            .collect();
        let now = self.now();
        let mut aborted = 0;
        for cell in cells {
            let mut guard = cell.inner.lock().await;
            let Session::Live(live) = &mut *guard else {
                continue;
            };
            match live.expire(now) {
                Ok(Some(_)) => {
                    aborted += 1;
                    cell.notify(live.lines.len());
                    log::info!("session {:?} aborted: deadline expired", cell.session_id);
                }
                Ok(None) => {}
                Err(e) => log::error!("sweeping {:?}: {e}", cell.session_id),
            }
        }
        aborted
    }
}
