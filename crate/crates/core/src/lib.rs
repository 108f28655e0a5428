//! Multi-stakeholder random draws.
//!
//! Each stakeholder commits to a value in `[0, m)` with a masked SHA-256
//! commitment, reveals only after every commitment is in, and the outcome is
//! the sum of all values modulo `m`. One honest, uniformly random contributor
//! is enough to make the outcome uniform. Every step is written to a
//! hash-chained transcript that anyone can re-verify offline.
//!
//! ```
//! use fairdraw_core::{commit, DrawSpec, Event, Mask, Modulus, Timestamp, Transcript};
//!
//! let m = Modulus::new(12).unwrap();
//! let spec = DrawSpec::new("demo", m, vec!["alice".into(), "bob".into()]);
//! let mut t = Transcript::new();
//! t.push(Event::CeremonyCreated { spec, at: Timestamp(0) }).unwrap();
//!
//! let secrets = [("alice", 9, Mask::random().unwrap()), ("bob", 4, Mask::random().unwrap())];
//! for (id, value, mask) in &secrets {
//!     let digest = commit("demo", id, m.value(*value).unwrap(), mask).unwrap();
//!     t.push(Event::CommitmentSubmitted { stakeholder_id: id.to_string(), digest, at: Timestamp(1) }).unwrap();
//! }
//! for (id, value, mask) in &secrets {
//!     t.push(Event::RevealSubmitted { stakeholder_id: id.to_string(), value: *value, mask: *mask, at: Timestamp(2) }).unwrap();
//! }
//! t.seal_outcome();
//!
//! let report = fairdraw_core::verify_transcript(t.to_jsonl().as_bytes());
//! assert!(report.is_ok());
//! assert_eq!(report.recomputed_outcome, Some(1));
//! ```

pub mod audit;
pub mod ceremony;
pub mod commitment;
pub mod draw;
pub mod hex32;
pub mod transcript;

pub use audit::{audit_outcomes, chi_square_uniformity, AuditError, UniformitySummary};
pub use ceremony::{
    create_ceremony, CeremonyError, CeremonyState, DrawSpec, Phase, Predecessor, SpecError,
    Timestamp,
};
pub use commitment::{commit, new_mask, verify_opening, CommitError, CommitmentDigest, Mask, Opening};
pub use draw::{
    mod_add, select_candidate, to_unit_fraction, uniform_value, ContributionValue, DrawError,
    Modulus,
};
pub use transcript::{
    verify_transcript, Event, EventError, Finding, Transcript, TranscriptRecord, VerificationReport,
};
