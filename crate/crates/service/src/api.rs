//! JSON bodies exchanged with the coordinator.
//!
//! Digests and masks travel as lowercase hex; timestamps are milliseconds
//! since the Unix epoch.

use fairdraw_core::Phase;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    /// Generated when absent.
    #[serde(default)]
    pub session_id: Option<String>,
    pub modulus: u64,
    /// Explicit stakeholder ids. Exactly one of `roster` and `stakeholders`.
    #[serde(default)]
    pub roster: Option<Vec<String>>,
    /// Number of stakeholders, named `S0`, `S1`, ...
    #[serde(default)]
    pub stakeholders: Option<usize>,
    #[serde(default)]
    pub candidates: Option<Vec<String>>,
    #[serde(default)]
    pub metadata: Option<String>,
    #[serde(default)]
    pub commit_deadline: Option<i64>,
    #[serde(default)]
    pub reveal_deadline: Option<i64>,
    /// Aborted session this draw replaces.
    #[serde(default)]
    pub predecessor: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StakeholderToken {
    pub stakeholder_id: String,
    pub token: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateResponse {
    pub session_id: String,
    /// Authorizes aborting the ceremony.
    pub organizer_token: String,
    pub tokens: Vec<StakeholderToken>,
    pub state: Snapshot,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommitRequest {
    pub digest: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RevealRequest {
    pub value: u64,
    pub mask: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbortRequest {
    pub reason: String,
    #[serde(default)]
    pub successor_hint: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WhoAmI {
    pub session_id: String,
    /// `None` for the organizer token.
    pub stakeholder_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StakeholderStatus {
    pub stakeholder_id: String,
    pub committed: bool,
    pub digest: Option<String>,
    pub revealed: bool,
    pub value: Option<u64>,
    pub mask: Option<String>,
    pub rejected_openings: u32,
}

/// Public view of a ceremony. Carries no value or mask before that
/// stakeholder has revealed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub session_id: String,
    pub phase: Phase,
    pub modulus: u64,
    pub metadata: String,
    pub candidates: Option<usize>,
    pub commit_deadline: Option<i64>,
    pub reveal_deadline: Option<i64>,
    pub predecessor: Option<String>,
    pub stakeholders: Vec<StakeholderStatus>,
    pub committed: usize,
    pub revealed: usize,
    pub partial_sum: Option<u64>,
    pub outcome: Option<u64>,
    pub selected_candidate: Option<String>,
    pub abort_reason: Option<String>,
    pub records: u64,
    pub head: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

/// Header set on transcripts of quarantined sessions.
pub const WARNING_HEADER: &str = "x-fairdraw-warning";
