//! Append-only, hash-chained ceremony transcripts.
//!
//! A transcript is stored as UTF-8 JSON, one record per line, each line
//! terminated by `\n`:
//!
//! ```json
//! {"seq":0,"prev_hash":"00…","event":{"type":"ceremony_created",…},"record_hash":"…"}
//! ```
//!
//! JSON is for people. The `record_hash` is SHA-256 over a fixed binary
//! framing of the record (see [`record_preimage`]), so a record verifies
//! bit-exactly regardless of how a JSON library might reorder or re-escape
//! it. Lines must also be byte-identical to the canonical serialization of
//! the record they decode to, which makes every byte of the file
//! significant.
//!
//! Binary framing, all integers big-endian:
//!
//! ```text
//! record   = "FAIRDRAW-RECORD-V1" seq:u64 prev_hash:[32] event
//! event    = tag:u8 fields…
//!   1 ceremony_created      spec at:i64
//!   2 commitment_submitted  str(id) digest:[32] at:i64
//!   3 reveal_submitted      str(id) value:u64 mask:[32] at:i64
//!   4 opening_rejected      str(id) value:u64 mask:[32] str(reason) at:i64
//!   5 completed             outcome:u64
//!   6 aborted               str(reason) opt(str(successor_hint)) at:i64
//! spec     = str(session_id) modulus:u64 list(str)(roster)
//!            opt(list(str))(candidates) str(metadata)
//!            opt(i64)(commit_deadline) opt(i64)(reveal_deadline)
//!            opt(str(session_id) head:[32])(predecessor)
//! str(x)   = len:u32 utf8-bytes
//! list(x)  = count:u32 x…
//! opt(x)   = 0x00 | 0x01 x
//! ```

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ceremony::{self, CeremonyError, CeremonyState, DrawSpec, Phase, Timestamp};
use crate::commitment::{CommitmentDigest, Mask};
use crate::draw::ContributionValue;
use crate::hex32;

pub const RECORD_DOMAIN_TAG: &[u8; 18] = b"FAIRDRAW-RECORD-V1";

/// Hash of the (absent) record before seq 0.
pub const GENESIS_HASH: [u8; 32] = [0; 32];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Event {
    CeremonyCreated {
        spec: DrawSpec,
        at: Timestamp,
    },
    CommitmentSubmitted {
        stakeholder_id: String,
        digest: CommitmentDigest,
        at: Timestamp,
    },
    RevealSubmitted {
        stakeholder_id: String,
        value: u64,
        mask: Mask,
        at: Timestamp,
    },
    /// A reveal that failed to match its commitment. Kept as evidence.
    OpeningRejected {
        stakeholder_id: String,
        value: u64,
        mask: Mask,
        reason: String,
        at: Timestamp,
    },
    Completed {
        outcome: u64,
    },
    Aborted {
        reason: String,
        successor_hint: Option<String>,
        at: Timestamp,
    },
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::CeremonyCreated { .. } => "ceremony_created",
            Event::CommitmentSubmitted { .. } => "commitment_submitted",
            Event::RevealSubmitted { .. } => "reveal_submitted",
            Event::OpeningRejected { .. } => "opening_rejected",
            Event::Completed { .. } => "completed",
            Event::Aborted { .. } => "aborted",
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, Event::Completed { .. } | Event::Aborted { .. })
    }

    fn encode(&self, out: &mut Framer) {
        match self {
            Event::CeremonyCreated { spec, at } => {
                out.u8(1);
                encode_spec(spec, out);
                out.i64(at.0);
            }
            Event::CommitmentSubmitted {
                stakeholder_id,
                digest,
                at,
            } => {
                out.u8(2);
                out.str(stakeholder_id);
                out.raw(digest.as_bytes());
                out.i64(at.0);
            }
            Event::RevealSubmitted {
                stakeholder_id,
                value,
                mask,
                at,
            } => {
                out.u8(3);
                out.str(stakeholder_id);
                out.u64(*value);
                out.raw(mask.as_bytes());
                out.i64(at.0);
            }
            Event::OpeningRejected {
                stakeholder_id,
                value,
                mask,
                reason,
                at,
            } => {
                out.u8(4);
                out.str(stakeholder_id);
                out.u64(*value);
                out.raw(mask.as_bytes());
                out.str(reason);
                out.i64(at.0);
            }
            Event::Completed { outcome } => {
                out.u8(5);
                out.u64(*outcome);
            }
            Event::Aborted {
                reason,
                successor_hint,
                at,
            } => {
                out.u8(6);
                out.str(reason);
                out.opt(successor_hint.as_deref(), |f, s| f.str(s));
                out.i64(at.0);
            }
        }
    }
}

fn encode_spec(spec: &DrawSpec, out: &mut Framer) {
    out.str(&spec.session_id);
    out.u64(spec.modulus.get());
    out.list(&spec.roster, |f, s| f.str(s));
    out.opt(spec.candidates.as_deref(), |f, c| f.list(c, |f, s| f.str(s)));
    out.str(&spec.metadata);
    out.opt(spec.commit_deadline, |f, t| f.i64(t.0));
    out.opt(spec.reveal_deadline, |f, t| f.i64(t.0));
    out.opt(spec.predecessor.as_ref(), |f, p| {
        f.str(&p.session_id);
        f.raw(&p.transcript_head);
    });
}

struct Framer(Vec<u8>);

impl Framer {
    fn u8(&mut self, x: u8) {
        self.0.push(x);
    }
    fn u32(&mut self, x: u32) {
        self.0.extend_from_slice(&x.to_be_bytes());
    }
    fn u64(&mut self, x: u64) {
        self.0.extend_from_slice(&x.to_be_bytes());
    }
    fn i64(&mut self, x: i64) {
        self.0.extend_from_slice(&x.to_be_bytes());
    }
    fn raw(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.raw(s.as_bytes());
    }
    fn list<T>(&mut self, items: &[T], mut each: impl FnMut(&mut Self, &T)) {
        self.u32(items.len() as u32);
        for item in items {
            each(self, item);
        }
    }
    fn opt<T>(&mut self, v: Option<T>, each: impl FnOnce(&mut Self, T)) {
        match v {
            None => self.u8(0),
            Some(v) => {
                self.u8(1);
                each(self, v);
            }
        }
    }
}

/// Octets hashed into `record_hash`.
pub fn record_preimage(seq: u64, prev_hash: &[u8; 32], event: &Event) -> Vec<u8> {
    let mut f = Framer(Vec::with_capacity(160));
    f.raw(RECORD_DOMAIN_TAG);
    f.u64(seq);
    f.raw(prev_hash);
    event.encode(&mut f);
    f.0
}

pub fn record_hash(seq: u64, prev_hash: &[u8; 32], event: &Event) -> [u8; 32] {
    Sha256::digest(record_preimage(seq, prev_hash, event)).into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptRecord {
    pub seq: u64,
    #[serde(with = "hex32")]
    pub prev_hash: [u8; 32],
    pub event: Event,
    #[serde(with = "hex32")]
    pub record_hash: [u8; 32],
}

impl TranscriptRecord {
    /// The record's line in a transcript file, without the trailing newline.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("records always serialize")
    }

    pub fn hash_is_valid(&self) -> bool {
        record_hash(self.seq, &self.prev_hash, &self.event) == self.record_hash
    }
}

/// Why an event cannot be appended at this point of the ceremony.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EventError {
    #[error(transparent)]
    Ceremony(#[from] CeremonyError),
    #[error("{0}")]
    Sequence(String),
    #[error("recorded outcome {recorded} differs from recomputed outcome {computed}")]
    OutcomeMismatch { recorded: u64, computed: u64 },
    #[error("rejected opening from {0:?} actually matches its commitment")]
    RejectedValidOpening(String),
}

/// Ceremony state reconstructed from events.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Replay {
    state: Option<CeremonyState>,
    outcome_recorded: bool,
}

impl Replay {
    /// Applies `event`, leaving `self` unchanged when it is rejected.
    fn apply(&mut self, event: &Event) -> Result<(), EventError> {
        let state = match (&mut self.state, event) {
            (None, Event::CeremonyCreated { spec, .. }) => {
                self.state = Some(ceremony::create_ceremony(spec.clone())?);
                return Ok(());
            }
            (Some(_), Event::CeremonyCreated { .. }) => {
                return Err(EventError::Sequence("ceremony already created".into()));
            }
            (None, _) => {
                return Err(EventError::Sequence(
                    "first record must be ceremony_created".into(),
                ))
            }
            (Some(state), _) => state,
        };

        let awaiting_outcome = state.phase() == Phase::Complete && !self.outcome_recorded;
        if awaiting_outcome && !matches!(event, Event::Completed { .. }) {
            return Err(EventError::Sequence(format!(
                "expected completed record, found {}",
                event.kind()
            )));
        }

        match event {
            Event::CeremonyCreated { .. } => unreachable!(),
            Event::CommitmentSubmitted {
                stakeholder_id,
                digest,
                at,
            } => state.submit_commitment_mut(stakeholder_id, *digest, *at)?,
            Event::RevealSubmitted {
                stakeholder_id,
                value,
                mask,
                at,
            } => {
                let opening = state.opening(*value, *mask)?;
                state.submit_reveal_mut(stakeholder_id, opening, *at)?;
            }
            Event::OpeningRejected {
                stakeholder_id,
                value,
                mask,
                at,
                ..
            } => {
                let check = state
                    .opening(*value, *mask)
                    .and_then(|o| state.check_reveal(stakeholder_id, &o, *at));
                match check {
                    Ok(()) => return Err(EventError::RejectedValidOpening(stakeholder_id.clone())),
                    Err(CeremonyError::InvalidOpening(_)) | Err(CeremonyError::OutOfRange { .. }) => {}
                    Err(other) => return Err(other.into()),
                }
            }
            Event::Completed { outcome } => {
                if self.outcome_recorded {
                    return Err(EventError::Sequence("duplicate completed record".into()));
                }
                let Some(computed) = state.outcome_of() else {
                    return Err(EventError::Sequence(format!(
                        "completed record in {} phase",
                        state.phase()
                    )));
                };
                if computed.get() != *outcome {
                    return Err(EventError::OutcomeMismatch {
                        recorded: *outcome,
                        computed: computed.get(),
                    });
                }
                self.outcome_recorded = true;
            }
            Event::Aborted { reason, at, .. } => state.abort_ceremony_mut(reason, *at)?,
        }
        Ok(())
    }
}

/// An append-only transcript together with the ceremony state it implies.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    records: Vec<TranscriptRecord>,
    replay: Replay,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[TranscriptRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Hash of the last record, or the genesis hash.
    pub fn head(&self) -> [u8; 32] {
        self.records
            .last()
            .map(|r| r.record_hash)
            .unwrap_or(GENESIS_HASH)
    }

    pub fn state(&self) -> Option<&CeremonyState> {
        self.replay.state.as_ref()
    }

    /// True once the final record (`completed` or `aborted`) is present.
    pub fn is_closed(&self) -> bool {
        match self.state().map(|s| s.phase()) {
            Some(Phase::Aborted) => true,
            Some(Phase::Complete) => self.replay.outcome_recorded,
            _ => false,
        }
    }

    /// Appends `event` in place if it is legal for the current state.
    pub fn push(&mut self, event: Event) -> Result<&TranscriptRecord, EventError> {
        self.replay.apply(&event)?;
        let seq = self.records.len() as u64;
        let prev_hash = self.head();
        let hash = record_hash(seq, &prev_hash, &event);
        self.records.push(TranscriptRecord {
            seq,
            prev_hash,
            event,
            record_hash: hash,
        });
        Ok(self.records.last().expect("just pushed"))
    }

    /// Returns a new transcript with `event` appended.
    pub fn append_record(&self, event: Event) -> Result<Transcript, EventError> {
        let mut next = self.clone();
        next.push(event)?;
        Ok(next)
    }

    /// Appends the `completed` record if every reveal is in and it is not yet
    /// recorded.
    pub fn seal_outcome(&mut self) -> Option<&TranscriptRecord> {
        let state = self.state()?;
        if self.replay.outcome_recorded {
            return None;
        }
        let outcome = state.outcome_of()?.get();
        self.push(Event::Completed { outcome }).ok()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.to_json_line());
            out.push('\n');
        }
        out
    }

    /// Parses and fully re-verifies transcript bytes. Fails unless
    /// [`verify_transcript`] reports no findings.
    pub fn from_jsonl(bytes: &[u8]) -> Result<Transcript, VerificationReport> {
        let (report, transcript) = verify_inner(bytes);
        match transcript {
            Some(t) if report.is_ok() => Ok(t),
            _ => Err(report),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub seq: u64,
    pub description: String,
}

/// Outcome of an independent re-verification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub chain_ok: bool,
    pub phase_order_ok: bool,
    pub openings_ok: bool,
    pub outcome_ok: bool,
    pub recomputed_outcome: Option<u64>,
    pub records: u64,
    pub session_id: Option<String>,
    pub final_phase: Option<Phase>,
    pub findings: Vec<Finding>,
}

impl VerificationReport {
    pub fn is_ok(&self) -> bool {
        self.chain_ok && self.phase_order_ok && self.openings_ok && self.outcome_ok
    }

    /// Lowest seq carrying a finding.
    pub fn first_failure(&self) -> Option<u64> {
        self.findings.iter().map(|f| f.seq).min()
    }
}

/// Recomputes every hash, replays the ceremony, re-verifies every opening
/// and recomputes the outcome. Never panics on hostile input.
pub fn verify_transcript(bytes: &[u8]) -> VerificationReport {
    verify_inner(bytes).0
}

#[derive(Clone, Copy)]
enum Check {
    Chain,
    Phase,
    Openings,
    Outcome,
}

fn verify_inner(bytes: &[u8]) -> (VerificationReport, Option<Transcript>) {
    let mut report = VerificationReport {
        chain_ok: true,
        phase_order_ok: true,
        openings_ok: true,
        outcome_ok: true,
        recomputed_outcome: None,
        records: 0,
        session_id: None,
        final_phase: None,
        findings: Vec::new(),
    };
    let fail = |report: &mut VerificationReport, check: Check, seq: u64, msg: String| {
        match check {
            Check::Chain => report.chain_ok = false,
            Check::Phase => report.phase_order_ok = false,
            Check::Openings => report.openings_ok = false,
            Check::Outcome => report.outcome_ok = false,
        }
        report.findings.push(Finding {
            seq,
            description: msg,
        });
    };

    if bytes.is_empty() {
        fail(&mut report, Check::Chain, 0, "empty transcript".into());
        return (report, None);
    }

    let terminated = bytes.last() == Some(&b'\n');
    let mut lines: Vec<&[u8]> = bytes.split(|b| *b == b'\n').collect();
    if terminated {
        lines.pop();
    }

    let mut replay = Replay::default();
    let mut records = Vec::with_capacity(lines.len());
    // Recomputed hash of the previous line, when it parsed.
    let mut expected_prev: Option<[u8; 32]> = Some(GENESIS_HASH);
    let mut intact = true;

    for (i, line) in lines.iter().enumerate() {
        let seq = i as u64;
        let unterminated = !terminated && i + 1 == lines.len();
        let record: TranscriptRecord = match serde_json::from_slice(line) {
            Ok(r) => r,
            Err(e) => {
                let msg = if unterminated || e.is_eof() {
                    format!("unexpected end of transcript: {e}")
                } else {
                    format!("malformed record: {e}")
                };
                fail(&mut report, Check::Chain, seq, msg);
                expected_prev = None;
                intact = false;
                continue;
            }
        };
        if unterminated {
            fail(
                &mut report,
                Check::Chain,
                seq,
                "unexpected end of transcript: final record is not newline-terminated".into(),
            );
        }
        if record.to_json_line().as_bytes() != *line {
            fail(&mut report, Check::Chain, seq, "record is not in canonical encoding".into());
        }
        if record.seq != seq {
            fail(
                &mut report,
                Check::Chain,
                seq,
                format!("sequence number {} where {} was expected", record.seq, seq),
            );
        }
        if let Some(prev) = expected_prev {
            if record.prev_hash != prev {
                fail(
                    &mut report,
                    Check::Chain,
                    seq,
                    "prev_hash does not match the preceding record".into(),
                );
            }
        }
        let recomputed = record_hash(record.seq, &record.prev_hash, &record.event);
        if recomputed != record.record_hash {
            fail(&mut report, Check::Chain, seq, "record_hash does not match record contents".into());
        }
        expected_prev = Some(recomputed);

        match replay.apply(&record.event) {
            Ok(()) => {}
            Err(e) => {
                let check = match &e {
                    EventError::Ceremony(CeremonyError::InvalidOpening(_))
                    | EventError::Ceremony(CeremonyError::OutOfRange { .. })
                    | EventError::RejectedValidOpening(_) => Check::Openings,
                    EventError::OutcomeMismatch { .. } => Check::Outcome,
                    _ => Check::Phase,
                };
                fail(&mut report, check, seq, format!("{}: {e}", record.event.kind()));
                intact = false;
            }
        }
        records.push(record);
    }

    report.records = lines.len() as u64;
    if let Some(state) = &replay.state {
        report.session_id = Some(state.spec().session_id.clone());
        report.final_phase = Some(state.phase());
        report.recomputed_outcome = state.outcome_of().map(ContributionValue::get);
        if state.phase() == Phase::Complete && !replay.outcome_recorded {
            let seq = report.records;
            fail(
                &mut report,
                Check::Outcome,
                seq,
                "all reveals present but no completed record".into(),
            );
        }
    }

    let transcript = (intact && report.is_ok()).then_some(Transcript { records, replay });
    (report, transcript)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::commitment::commit;
    use crate::draw::Modulus;

    const FIG8: [u64; 5] = [1_610_027, 5_871_032, 6_029_108, 7_664_824, 5_757_989];

    fn reference_transcript() -> Transcript {
        let roster: Vec<String> = (0..5).map(|i| format!("S{i}")).collect();
        let spec = DrawSpec::new("reference", Modulus::new(10_000_000).unwrap(), roster.clone());
        let mut t = Transcript::new();
        t.push(Event::CeremonyCreated { spec, at: Timestamp(0) }).unwrap();
        let masks: Vec<Mask> = (0..5u8).map(|i| Mask::from_bytes([i; 32])).collect();
        let m = Modulus::new(10_000_000).unwrap();
        for (i, id) in roster.iter().enumerate() {
            let digest = commit("reference", id, m.value(FIG8[i]).unwrap(), &masks[i]).unwrap();
            t.push(Event::CommitmentSubmitted {
                stakeholder_id: id.clone(),
                digest,
                at: Timestamp(1 + i as i64),
            })
            .unwrap();
        }
        for (i, id) in roster.iter().enumerate() {
            t.push(Event::RevealSubmitted {
                stakeholder_id: id.clone(),
                value: FIG8[i],
                mask: masks[i],
                at: Timestamp(10 + i as i64),
            })
            .unwrap();
        }
        assert!(t.seal_outcome().is_some());
        t
    }

    #[test]
    fn genesis_and_chain() {
        let t = reference_transcript();
        assert_eq!(t.records()[0].seq, 0);
        assert_eq!(t.records()[0].prev_hash, [0; 32]);
        assert_eq!(t.records()[1].prev_hash, t.records()[0].record_hash);
        assert!(t.records().iter().all(TranscriptRecord::hash_is_valid));
    }

    #[test]
    fn reference_has_twelve_records_and_verifies() {
        let t = reference_transcript();
        assert_eq!(t.len(), 12);
        assert!(t.is_closed());
        let report = verify_transcript(t.to_jsonl().as_bytes());
        assert!(report.is_ok(), "{report:?}");
        assert!(report.findings.is_empty());
        assert_eq!(report.recomputed_outcome, Some(6_932_980));
        assert_eq!(report.final_phase, Some(Phase::Complete));
    }

    #[test]
    fn illegal_events_are_not_appended() {
        let mut t = reference_transcript();
        let before = t.clone();
        let err = t
            .push(Event::Aborted {
                reason: "too late".into(),
                successor_hint: None,
                at: Timestamp(99),
            })
            .unwrap_err();
        assert!(matches!(err, EventError::Ceremony(CeremonyError::PhaseViolation { .. })));
        assert_eq!(t, before);

        let mut fresh = Transcript::new();
        assert!(matches!(
            fresh.push(Event::Completed { outcome: 1 }),
            Err(EventError::Sequence(_))
        ));
        assert!(fresh.is_empty());
    }

    #[test]
    fn append_record_is_persistent() {
        let t = Transcript::new();
        let spec = DrawSpec::new("s", Modulus::new(12).unwrap(), vec!["a".into()]);
        let t2 = t
            .append_record(Event::CeremonyCreated { spec, at: Timestamp(0) })
            .unwrap();
        assert!(t.is_empty());
        assert_eq!(t2.len(), 1);
    }

    #[test]
    fn completed_must_follow_last_reveal() {
        let t = reference_transcript();
        let mut partial = Transcript::new();
        for r in &t.records()[..11] {
            partial.push(r.event.clone()).unwrap();
        }
        let err = partial
            .push(Event::Aborted {
                reason: "x".into(),
                successor_hint: None,
                at: Timestamp(50),
            })
            .unwrap_err();
        assert!(matches!(err, EventError::Sequence(_)));
        assert!(matches!(
            partial.push(Event::Completed { outcome: 1 }),
            Err(EventError::OutcomeMismatch { recorded: 1, computed: 6_932_980 })
        ));
        // Dropping the completed record is itself a finding.
        let report = verify_transcript(partial.to_jsonl().as_bytes());
        assert!(!report.outcome_ok);
        assert_eq!(report.first_failure(), Some(11));
    }

    #[test]
    fn rejected_openings_are_evidence() {
        let m = Modulus::new(12).unwrap();
        let spec = DrawSpec::new("s", m, vec!["a".into(), "b".into()]);
        let mask = Mask::from_bytes([7; 32]);
        let mut t = Transcript::new();
        t.push(Event::CeremonyCreated { spec, at: Timestamp(0) }).unwrap();
        for (id, v) in [("a", 3u64), ("b", 4)] {
            let digest = commit("s", id, m.value(v).unwrap(), &mask).unwrap();
            t.push(Event::CommitmentSubmitted { stakeholder_id: id.into(), digest, at: Timestamp(1) })
                .unwrap();
        }
        t.push(Event::OpeningRejected {
            stakeholder_id: "a".into(),
            value: 4,
            mask,
            reason: "mismatch".into(),
            at: Timestamp(2),
        })
        .unwrap();
        // Claiming a genuine opening was rejected is not accepted.
        assert_eq!(
            t.push(Event::OpeningRejected {
                stakeholder_id: "a".into(),
                value: 3,
                mask,
                reason: "mismatch".into(),
                at: Timestamp(2),
            }),
            Err(EventError::RejectedValidOpening("a".into()))
        );
        t.push(Event::RevealSubmitted { stakeholder_id: "a".into(), value: 3, mask, at: Timestamp(3) })
            .unwrap();
        assert_eq!(t.len(), 5);
        assert!(verify_transcript(t.to_jsonl().as_bytes()).is_ok());
    }

    #[test]
    fn roundtrip_through_jsonl() {
        let t = reference_transcript();
        let parsed = Transcript::from_jsonl(t.to_jsonl().as_bytes()).unwrap();
        assert_eq!(parsed, t);
        assert_eq!(parsed.state(), t.state());
    }

    #[test]
    fn replay_equals_live_state_at_every_prefix() {
        let t = reference_transcript();
        let mut live = Transcript::new();
        for (i, r) in t.records().iter().enumerate() {
            live.push(r.event.clone()).unwrap();
            let text: String = t.records()[..=i]
                .iter()
                .map(|r| r.to_json_line() + "\n")
                .collect();
            if i == 10 {
                // Last reveal without its completed record is never persisted
                // on its own and is reported as incomplete.
                let report = Transcript::from_jsonl(text.as_bytes()).unwrap_err();
                assert!(report.chain_ok && !report.outcome_ok);
                continue;
            }
            let replayed = Transcript::from_jsonl(text.as_bytes()).unwrap();
            assert_eq!(replayed.state(), live.state(), "prefix {i}");
        }
    }

    #[test]
    fn swapped_commitments_break_the_chain() {
        let text = reference_transcript().to_jsonl();
        let mut lines: Vec<&str> = text.lines().collect();
        lines.swap(2, 3);
        let swapped: String = lines.iter().map(|l| format!("{l}\n")).collect();
        let report = verify_transcript(swapped.as_bytes());
        assert!(!report.chain_ok);
        assert!(report.phase_order_ok);
        assert_eq!(report.first_failure(), Some(2));
    }

    #[test]
    fn malformed_input_never_panics() {
        for input in [&b""[..], b"\n", b"{}", b"not json\n", b"{\"seq\":0}\n", &[0xff, 0xfe, b'\n']] {
            let report = verify_transcript(input);
            assert!(!report.chain_ok);
            assert!(!report.findings.is_empty());
        }
    }

    #[test]
    fn truncation_reports_unexpected_end() {
        let text = reference_transcript().to_jsonl();
        let cut = &text.as_bytes()[..text.len() - 40];
        let report = verify_transcript(cut);
        assert!(!report.chain_ok);
        assert_eq!(report.first_failure(), Some(11));
        assert!(report.findings[0].description.contains("unexpected end"));
    }

    #[test]
    fn verification_is_pure() {
        let text = reference_transcript().to_jsonl();
        let mut bad = text.clone().into_bytes();
        bad[100] ^= 1;
        assert_eq!(verify_transcript(&bad), verify_transcript(&bad));
        assert_eq!(verify_transcript(text.as_bytes()), verify_transcript(text.as_bytes()));
    }

    #[test]
    fn report_flags_iff_findings() {
        let text = reference_transcript().to_jsonl();
        for i in (0..text.len()).step_by(37) {
            let mut b = text.clone().into_bytes();
            b[i] = b'#';
            let r = verify_transcript(&b);
            assert_eq!(r.is_ok(), r.findings.is_empty());
        }
    }
}
