//! Text rendering. Every function here is a pure function of its input.

use std::fmt::Write as _;

use fairdraw_core::{Event, TranscriptRecord, UniformitySummary, VerificationReport};
use fairdraw_service::Snapshot;

fn short(hex: &str) -> &str {
    &hex[..hex.len().min(16)]
}

/// One line per transcript record.
pub fn record_line(r: &TranscriptRecord) -> String {
    let detail = match &r.event {
        Event::CeremonyCreated { spec, .. } => {
            let mut s = format!(
                "session={} m={} k={} roster={}",
                spec.session_id,
                spec.modulus,
                spec.k(),
                spec.roster.join(",")
            );
            if let Some(p) = &spec.predecessor {
                let _ = write!(s, " predecessor={}", p.session_id);
            }
            s
        }
        Event::CommitmentSubmitted { stakeholder_id, digest, .. } => {
            format!("{stakeholder_id} digest={}", short(&digest.to_hex()))
        }
        Event::RevealSubmitted { stakeholder_id, value, .. } => format!("{stakeholder_id} value={value}"),
        Event::OpeningRejected { stakeholder_id, value, reason, .. } => {
            format!("{stakeholder_id} value={value} ({reason})")
        }
        Event::Completed { outcome } => format!("outcome={outcome}"),
        Event::Aborted { reason, successor_hint, .. } => match successor_hint {
            Some(h) => format!("reason={reason:?} successor={h}"),
            None => format!("reason={reason:?}"),
        },
    };
    format!("#{} {} {}", r.seq, r.event.kind(), detail)
}

pub fn report_text(report: &VerificationReport) -> String {
    let flag = |ok: bool| if ok { "ok" } else { "FAILED" };
    let mut s = String::new();
    let _ = writeln!(s, "records: {}", report.records);
    if let Some(id) = &report.session_id {
        let _ = writeln!(s, "session: {id}");
    }
    if let Some(p) = report.final_phase {
        let _ = writeln!(s, "final phase: {p}");
    }
    let _ = writeln!(s, "hash chain: {}", flag(report.chain_ok));
    let _ = writeln!(s, "phase order: {}", flag(report.phase_order_ok));
    let _ = writeln!(s, "openings: {}", flag(report.openings_ok));
    match report.recomputed_outcome {
        Some(o) => {
            let _ = writeln!(s, "outcome: {} (recomputed {o})", flag(report.outcome_ok));
        }
        None => {
            let _ = writeln!(s, "outcome: {}", flag(report.outcome_ok));
        }
    }
    for f in &report.findings {
        let _ = writeln!(s, "finding: seq {}: {}", f.seq, f.description);
    }
    let _ = writeln!(s, "verdict: {}", if report.is_ok() { "ok" } else { "FAILED" });
    s
}

pub fn snapshot_text(snap: &Snapshot) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "session: {}", snap.session_id);
    let _ = writeln!(s, "phase: {}", snap.phase);
    let _ = writeln!(s, "modulus: {}", snap.modulus);
    if !snap.metadata.is_empty() {
        let _ = writeln!(s, "metadata: {}", snap.metadata);
    }
    if let Some(p) = &snap.predecessor {
        let _ = writeln!(s, "predecessor: {p}");
    }
    let _ = writeln!(
        s,
        "committed: {}/{}  revealed: {}/{}",
        snap.committed,
        snap.stakeholders.len(),
        snap.revealed,
        snap.stakeholders.len()
    );
    for st in &snap.stakeholders {
        let badge = if st.revealed {
            "revealed"
        } else if st.committed {
            "committed"
        } else {
            "waiting"
        };
        let mut line = format!("  {:<12} {badge}", st.stakeholder_id);
        if let Some(v) = st.value {
            let _ = write!(line, " value={v}");
        }
        if st.rejected_openings > 0 {
            let _ = write!(line, " rejected={}", st.rejected_openings);
        }
        let _ = writeln!(s, "{line}");
    }
    if let Some(p) = snap.partial_sum {
        let _ = writeln!(s, "partial sum: {p}");
    }
    if let Some(o) = snap.outcome {
        let _ = writeln!(s, "outcome: {o}");
    }
    if let Some(c) = &snap.selected_candidate {
        let _ = writeln!(s, "selected: {c}");
    }
    if let Some(r) = &snap.abort_reason {
        let _ = writeln!(s, "aborted: {r}");
    }
    let _ = writeln!(s, "records: {}  head: {}", snap.records, snap.head);
    s
}

pub fn audit_text(summary: &UniformitySummary, skipped: usize) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "ceremonies: {}", summary.total);
    if skipped > 0 {
        let _ = writeln!(s, "skipped (no outcome): {skipped}");
    }
    let _ = writeln!(s, "bins: {}", summary.bins);
    let counts: Vec<String> = summary.counts.iter().map(u64::to_string).collect();
    let _ = writeln!(s, "counts: {}", counts.join(" "));
    let _ = writeln!(s, "chi-square: {:.6} (dof {})", summary.statistic, summary.dof);
    let _ = writeln!(s, "p-value: {:.6}", summary.p_value);
    if let Some(w) = &summary.warning {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}
