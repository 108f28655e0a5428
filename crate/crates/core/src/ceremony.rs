//! Commit/reveal ceremony state machine.
//!
//! `Setup -> Commit -> Reveal -> Complete`, with `Aborted` reachable from
//! `Commit` and `Reveal`. States are immutable values: every transition
//! returns a new [`CeremonyState`] and leaves the receiver untouched, so a
//! rejected call never changes anything.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::commitment::{self, CommitmentDigest, Mask, Opening, MAX_ID_LEN};
use crate::draw::{self, ContributionValue, Modulus};
use crate::hex32;

/// Milliseconds since the Unix epoch, supplied by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn now() -> Self {
        let ms = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as i64)
            .unwrap_or(0);
        Timestamp(ms)
    }

    pub fn millis(self) -> i64 {
        self.0
    }

    pub fn plus_millis(self, ms: i64) -> Self {
        Timestamp(self.0.saturating_add(ms))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ms", self.0)
    }
}

/// Link from a replacement draw to the aborted session it supersedes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Predecessor {
    pub session_id: String,
    /// `record_hash` of the predecessor's final (`aborted`) record.
    #[serde(with = "hex32")]
    pub transcript_head: [u8; 32],
}

/// Parameters of one drawing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrawSpec {
    pub session_id: String,
    pub modulus: Modulus,
    pub roster: Vec<String>,
    pub candidates: Option<Vec<String>>,
    pub metadata: String,
    pub commit_deadline: Option<Timestamp>,
    pub reveal_deadline: Option<Timestamp>,
    pub predecessor: Option<Predecessor>,
}

impl DrawSpec {
    /// Spec with no candidates, metadata, deadlines or predecessor.
    pub fn new(session_id: impl Into<String>, modulus: Modulus, roster: Vec<String>) -> Self {
        DrawSpec {
            session_id: session_id.into(),
            modulus,
            roster,
            candidates: None,
            metadata: String::new(),
            commit_deadline: None,
            reveal_deadline: None,
            predecessor: None,
        }
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if self.session_id.is_empty() {
            return Err(SpecError::EmptySessionId);
        }
        if self.session_id.len() > MAX_ID_LEN {
            return Err(SpecError::IdentifierTooLong(self.session_id.clone()));
        }
        if self.roster.is_empty() {
            return Err(SpecError::EmptyRoster);
        }
        let mut seen = HashSet::with_capacity(self.roster.len());
        for id in &self.roster {
            if id.is_empty() {
                return Err(SpecError::EmptyStakeholderId);
            }
            if id.len() > MAX_ID_LEN {
                return Err(SpecError::IdentifierTooLong(id.clone()));
            }
            if !seen.insert(id.as_str()) {
                return Err(SpecError::DuplicateStakeholder(id.clone()));
            }
        }
        if let Some(candidates) = &self.candidates {
            if candidates.len() as u64 != self.modulus.get() {
                return Err(SpecError::CandidateCount {
                    expected: self.modulus.get(),
                    actual: candidates.len(),
                });
            }
        }
        if let (Some(c), Some(r)) = (self.commit_deadline, self.reveal_deadline) {
            if r < c {
                return Err(SpecError::DeadlineOrder);
            }
        }
        if let Some(p) = &self.predecessor {
            if p.session_id == self.session_id {
                return Err(SpecError::SelfPredecessor);
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.roster.len()
    }

    pub fn in_roster(&self, id: &str) -> bool {
        self.roster.iter().any(|r| r == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("session id is empty")]
    EmptySessionId,
    #[error("identifier longer than 255 octets: {0:?}")]
    IdentifierTooLong(String),
    #[error("roster is empty")]
    EmptyRoster,
    #[error("stakeholder id is empty")]
    EmptyStakeholderId,
    #[error("stakeholder {0:?} appears more than once in the roster")]
    DuplicateStakeholder(String),
    #[error("candidate list has {actual} entries but the modulus is {expected}")]
    CandidateCount { expected: u64, actual: usize },
    #[error("reveal deadline precedes commit deadline")]
    DeadlineOrder,
    #[error("a session cannot be its own predecessor")]
    SelfPredecessor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Setup,
    Commit,
    Reveal,
    Complete,
    Aborted,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Complete | Phase::Aborted)
    }

    fn rank(self) -> u8 {
        match self {
            Phase::Setup => 0,
            Phase::Commit => 1,
            Phase::Reveal => 2,
            Phase::Complete | Phase::Aborted => 3,
        }
    }

    /// Whether `self -> next` is a forward move (or no move at all).
    pub fn may_advance_to(self, next: Phase) -> bool {
        if self == next {
            return true;
        }
        match (self, next) {
            (Phase::Complete, _) | (Phase::Aborted, _) => false,
            (_, Phase::Aborted) => self != Phase::Setup,
            _ => next.rank() > self.rank(),
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Phase::Setup => "setup",
            Phase::Commit => "commit",
            Phase::Reveal => "reveal",
            Phase::Complete => "complete",
            Phase::Aborted => "aborted",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CeremonyError {
    #[error("invalid draw spec: {0}")]
    Config(#[from] SpecError),
    #[error("operation not allowed in {actual} phase (requires {required})")]
    PhaseViolation { required: String, actual: Phase },
    #[error("{0:?} is not in the roster")]
    UnknownStakeholder(String),
    #[error("{0:?} has already committed; commitments are immutable")]
    DuplicateCommitment(String),
    #[error("{0:?} has already revealed")]
    DuplicateReveal(String),
    #[error("opening from {0:?} does not match its commitment")]
    InvalidOpening(String),
    #[error("value {value} is out of range for modulus {modulus}")]
    OutOfRange { value: u64, modulus: u64 },
    #[error("deadline {deadline} has passed (now {now})")]
    DeadlineExpired { deadline: Timestamp, now: Timestamp },
}

impl CeremonyError {
    /// Stable machine-readable name.
    pub fn code(&self) -> &'static str {
        match self {
            CeremonyError::Config(_) => "InvalidSpec",
            CeremonyError::PhaseViolation { .. } => "PhaseViolation",
            CeremonyError::UnknownStakeholder(_) => "UnknownStakeholder",
            CeremonyError::DuplicateCommitment(_) => "DuplicateCommitment",
            CeremonyError::DuplicateReveal(_) => "DuplicateReveal",
            CeremonyError::InvalidOpening(_) => "InvalidOpening",
            CeremonyError::OutOfRange { .. } => "OutOfRange",
            CeremonyError::DeadlineExpired { .. } => "DeadlineExpired",
        }
    }
}

fn phase_violation(required: &str, actual: Phase) -> CeremonyError {
    CeremonyError::PhaseViolation {
        required: required.to_string(),
        actual,
    }
}

/// Phase-tagged aggregate of one ceremony.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CeremonyState {
    spec: Arc<DrawSpec>,
    phase: Phase,
    commitments: BTreeMap<String, CommitmentDigest>,
    reveals: BTreeMap<String, Opening>,
    outcome: Option<ContributionValue>,
    abort_reason: Option<String>,
}

/// Validates `spec` and opens the commit phase.
pub fn create_ceremony(spec: DrawSpec) -> Result<CeremonyState, CeremonyError> {
    spec.validate()?;
    Ok(CeremonyState {
        spec: Arc::new(spec),
        phase: Phase::Commit,
        commitments: BTreeMap::new(),
        reveals: BTreeMap::new(),
        outcome: None,
        abort_reason: None,
    })
}

impl CeremonyState {
    pub fn spec(&self) -> &DrawSpec {
        &self.spec
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn commitments(&self) -> &BTreeMap<String, CommitmentDigest> {
        &self.commitments
    }

    pub fn reveals(&self) -> &BTreeMap<String, Opening> {
        &self.reveals
    }

    pub fn abort_reason(&self) -> Option<&str> {
        self.abort_reason.as_deref()
    }

    pub fn modulus(&self) -> Modulus {
        self.spec.modulus
    }

    /// The outcome, present only once every stakeholder has revealed.
    pub fn outcome_of(&self) -> Option<ContributionValue> {
        match self.phase {
            Phase::Complete => self.outcome,
            _ => None,
        }
    }

    /// Candidate label for the outcome, when the spec lists candidates.
    pub fn selected_candidate(&self) -> Option<&str> {
        let outcome = self.outcome_of()?;
        let candidates = self.spec.candidates.as_deref()?;
        draw::select_candidate(outcome, candidates)
            .ok()
            .map(String::as_str)
    }

    /// Builds an opening for this ceremony's modulus.
    pub fn opening(&self, value: u64, mask: Mask) -> Result<Opening, CeremonyError> {
        let value = ContributionValue::new(value, self.spec.modulus).map_err(|_| {
            CeremonyError::OutOfRange {
                value,
                modulus: self.spec.modulus.get(),
            }
        })?;
        Ok(Opening { value, mask })
    }

    /// Deadline governing the current phase, if any.
    pub fn active_deadline(&self) -> Option<Timestamp> {
        match self.phase {
            Phase::Commit => self.spec.commit_deadline,
            Phase::Reveal => self.spec.reveal_deadline,
            _ => None,
        }
    }

    /// True when the current phase's deadline has passed and the ceremony can
    /// no longer make progress.
    pub fn is_expired(&self, now: Timestamp) -> bool {
        self.active_deadline().is_some_and(|d| now > d)
    }

    fn check_deadline(&self, now: Timestamp) -> Result<(), CeremonyError> {
        match self.active_deadline() {
            Some(deadline) if now > deadline => {
                Err(CeremonyError::DeadlineExpired { deadline, now })
            }
            _ => Ok(()),
        }
    }

    pub fn submit_commitment(
        &self,
        stakeholder_id: &str,
        digest: CommitmentDigest,
        now: Timestamp,
    ) -> Result<CeremonyState, CeremonyError> {
        self.check_commitment(stakeholder_id, now)?;
        let mut next = self.clone();
        next.record_commitment(stakeholder_id, digest);
        Ok(next)
    }

    fn check_commitment(&self, stakeholder_id: &str, now: Timestamp) -> Result<(), CeremonyError> {
        if self.phase != Phase::Commit {
            return Err(phase_violation("commit", self.phase));
        }
        if !self.spec.in_roster(stakeholder_id) {
            return Err(CeremonyError::UnknownStakeholder(stakeholder_id.to_string()));
        }
        if self.commitments.contains_key(stakeholder_id) {
            return Err(CeremonyError::DuplicateCommitment(stakeholder_id.to_string()));
        }
        self.check_deadline(now)
    }

    fn record_commitment(&mut self, stakeholder_id: &str, digest: CommitmentDigest) {
        self.commitments.insert(stakeholder_id.to_string(), digest);
        if self.commitments.len() == self.spec.k() {
            self.phase = Phase::Reveal;
        }
    }

    /// In-place [`submit_commitment`](Self::submit_commitment); unchanged on
    /// error.
    pub(crate) fn submit_commitment_mut(
        &mut self,
        stakeholder_id: &str,
        digest: CommitmentDigest,
        now: Timestamp,
    ) -> Result<(), CeremonyError> {
        self.check_commitment(stakeholder_id, now)?;
        self.record_commitment(stakeholder_id, digest);
        Ok(())
    }

    /// Checks an opening without recording it. Shares every precondition with
    /// [`submit_reveal`](Self::submit_reveal).
    pub fn check_reveal(&self, stakeholder_id: &str, opening: &Opening, now: Timestamp) -> Result<(), CeremonyError> {
        if matches!(self.phase, Phase::Reveal | Phase::Complete)
            && self.reveals.contains_key(stakeholder_id)
        {
            return Err(CeremonyError::DuplicateReveal(stakeholder_id.to_string()));
        }
        if self.phase != Phase::Reveal {
            return Err(phase_violation("reveal", self.phase));
        }
        let Some(digest) = self.commitments.get(stakeholder_id) else {
            return Err(CeremonyError::UnknownStakeholder(stakeholder_id.to_string()));
        };
        self.check_deadline(now)?;
        if opening.value.modulus() != self.spec.modulus {
            return Err(CeremonyError::OutOfRange {
                value: opening.value.get(),
                modulus: self.spec.modulus.get(),
            });
        }
        if !commitment::verify_opening(digest, &self.spec.session_id, stakeholder_id, opening) {
            return Err(CeremonyError::InvalidOpening(stakeholder_id.to_string()));
        }
        Ok(())
    }

    pub fn submit_reveal(
        &self,
        stakeholder_id: &str,
        opening: Opening,
        now: Timestamp,
    ) -> Result<CeremonyState, CeremonyError> {
        self.check_reveal(stakeholder_id, &opening, now)?;
        let mut next = self.clone();
        next.record_reveal(stakeholder_id, opening);
        Ok(next)
    }

    fn record_reveal(&mut self, stakeholder_id: &str, opening: Opening) {
        self.reveals.insert(stakeholder_id.to_string(), opening);
        if self.reveals.len() == self.spec.k() {
            let values: Vec<ContributionValue> = self
                .spec
                .roster
                .iter()
                .map(|id| self.reveals[id].value)
                .collect();
            let outcome = draw::mod_add(&values, self.spec.modulus)
                .expect("roster is non-empty and every opening carries the spec modulus");
            self.outcome = Some(outcome);
            self.phase = Phase::Complete;
        }
    }

    /// In-place [`submit_reveal`](Self::submit_reveal); unchanged on error.
    pub(crate) fn submit_reveal_mut(
        &mut self,
        stakeholder_id: &str,
        opening: Opening,
        now: Timestamp,
    ) -> Result<(), CeremonyError> {
        self.check_reveal(stakeholder_id, &opening, now)?;
        self.record_reveal(stakeholder_id, opening);
        Ok(())
    }

    /// Permanently ends the ceremony without an outcome.
    pub fn abort_ceremony(&self, reason: &str, now: Timestamp) -> Result<CeremonyState, CeremonyError> {
        let mut next = self.clone();
        next.abort_ceremony_mut(reason, now)?;
        Ok(next)
    }

    pub(crate) fn abort_ceremony_mut(&mut self, reason: &str, _now: Timestamp) -> Result<(), CeremonyError> {
        if !matches!(self.phase, Phase::Commit | Phase::Reveal) {
            return Err(phase_violation("commit or reveal", self.phase));
        }
        self.phase = Phase::Aborted;
        self.abort_reason = Some(reason.to_string());
        Ok(())
    }

    /// Sum of the values revealed so far, modulo `m`.
    pub fn partial_sum(&self) -> Option<ContributionValue> {
        let values: Vec<_> = self.reveals.values().map(|o| o.value).collect();
        draw::mod_add(&values, self.spec.modulus).ok()
    }
}
