use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use fairdraw_core::{
    audit_outcomes, commit as commit_digest, uniform_value, verify_transcript, ContributionValue,
    Mask, Modulus, Phase, Timestamp, Transcript, TranscriptRecord,
};
use fairdraw_service::{AbortRequest, CreateRequest, Snapshot};
use rand::rngs::OsRng;
use rand::TryRngCore;
use serde::Serialize;

use crate::args::{
    AbortArgs, AuditArgs, Cli, Command, CommitArgs, CreateArgs, Output, RevealArgs, TranscriptArgs,
    VerifyArgs, WatchArgs,
};
use crate::client::Client;
use crate::dice;
use crate::error::CliError;
use crate::render;
use crate::secrets::{self, LocalSecret, SecretStore};

pub struct Io<'a> {
    pub stdin: &'a mut dyn BufRead,
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

struct Ctx<'a, 'b> {
    cli: &'a Cli,
    io: &'a mut Io<'b>,
}

impl Ctx<'_, '_> {
    fn json(&self) -> bool {
        self.cli.output == Output::Json
    }

    fn session(&self) -> Result<&str, CliError> {
        self.cli
            .session
            .as_deref()
            .ok_or_else(|| CliError::Usage("this command needs --session".into()))
    }

    fn client(&self) -> Result<Client, CliError> {
        Client::new(&self.cli.server, self.cli.token.clone())
    }

    fn secrets(&self) -> SecretStore {
        SecretStore::new(self.cli.secrets_dir.clone().unwrap_or_else(secrets::default_dir))
    }

    fn print(&mut self, text: &str) -> Result<(), CliError> {
        self.io
            .out
            .write_all(text.as_bytes())
            .and_then(|_| self.io.out.flush())
            .map_err(CliError::io("writing output"))
    }

    fn print_json<T: Serialize>(&mut self, v: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(v).expect("output serializes");
        s.push('\n');
        self.print(&s)
    }

    fn note(&mut self, text: &str) {
        let _ = writeln!(self.io.err, "{text}");
    }
}

pub fn run(cli: &Cli, io: &mut Io<'_>) -> Result<(), CliError> {
    let mut ctx = Ctx { cli, io };
    match &cli.command {
        Command::Create(a) => create(&mut ctx, a),
        Command::Commit(a) => commit(&mut ctx, a),
        Command::Reveal(a) => reveal(&mut ctx, a),
        Command::Status => status(&mut ctx),
        Command::Watch(a) => watch(&mut ctx, a),
        Command::Verify(a) => verify(&mut ctx, a),
        Command::Audit(a) => audit(&mut ctx, a),
        Command::Abort(a) => abort(&mut ctx, a),
        Command::Transcript(a) => transcript(&mut ctx, a),
    }
}

fn create(ctx: &mut Ctx, a: &CreateArgs) -> Result<(), CliError> {
    let candidates = match &a.candidates_file {
        None => None,
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(CliError::io(format!("reading {}", p.display())))?;
            Some(text.lines().map(str::to_string).collect::<Vec<_>>())
        }
    };
    let now = Timestamp::now();
    let commit_deadline = a
        .commit_window_secs
        .map(|s| now.plus_millis(secs_to_ms(s)));
    let reveal_deadline = a.reveal_window_secs.map(|s| {
        commit_deadline
            .unwrap_or_else(|| now.plus_millis(24 * 3600 * 1000))
            .plus_millis(secs_to_ms(s))
    });
    let req = CreateRequest {
        session_id: ctx.cli.session.clone(),
        modulus: a.modulus,
        roster: (!a.roster.is_empty()).then(|| a.roster.clone()),
        stakeholders: a.stakeholders,
        candidates,
        metadata: a.metadata.clone(),
        commit_deadline: commit_deadline.map(Timestamp::millis),
        reveal_deadline: reveal_deadline.map(Timestamp::millis),
        predecessor: a.predecessor.clone(),
    };
    let created = ctx.client()?.create(&req)?;
    if ctx.json() {
        return ctx.print_json(&created);
    }
    let mut s = format!(
        "session: {}\nmodulus: {}\norganizer token: {}\n",
        created.session_id, created.state.modulus, created.organizer_token
    );
    for t in &created.tokens {
        s.push_str(&format!("token {}: {}\n", t.stakeholder_id, t.token));
    }
    ctx.print(&s)
}

fn secs_to_ms(s: u64) -> i64 {
    i64::try_from(s).unwrap_or(i64::MAX / 1000).saturating_mul(1000)
}

#[derive(Serialize)]
struct CommitReceipt<'a> {
    session_id: &'a str,
    stakeholder_id: &'a str,
    digest: String,
    secret_file: String,
}

fn commit(ctx: &mut Ctx, a: &CommitArgs) -> Result<(), CliError> {
    let session = ctx.session()?.to_string();
    if ctx.cli.token.is_none() {
        return Err(CliError::Usage("commit needs --token".into()));
    }
    let client = ctx.client()?;
    let m = match a.modulus {
        Some(m) => Modulus::new(m).map_err(|e| CliError::Usage(e.to_string()))?,
        None => Modulus::new(client.state(&session)?.modulus).map_err(|e| CliError::Protocol(e.to_string()))?,
    };
    // A typed value is range-checked before anything is sent.
    if let Some(v) = a.source.value {
        ContributionValue::new(v, m).map_err(|e| CliError::Usage(format!("--value {v} refused: {e}")))?;
    }
    if let Some(given) = a.modulus {
        let actual = client.state(&session)?.modulus;
        if actual != given {
            return Err(CliError::Usage(format!("--modulus {given} does not match the session modulus {actual}")));
        }
    }
    let me = client
        .whoami(&session)?
        .stakeholder_id
        .ok_or_else(|| CliError::Usage("the organizer token cannot commit; use a stakeholder token".into()))?;
    let store = ctx.secrets();
    if store.exists(&session, &me) {
        return Err(CliError::Protocol(format!(
            "a secret for {me:?} in session {session:?} already exists at {}; refusing to commit twice",
            store.path(&session, &me).display()
        )));
    }

    let value = if let Some(v) = a.source.value {
        v
    } else if a.source.random {
        random_value(m)
    } else {
        let Io { stdin, err, .. } = &mut *ctx.io;
        dice::read_value(stdin, err, m)?
    };
    let value = ContributionValue::new(value, m).map_err(|e| CliError::Usage(e.to_string()))?;
    let mask = Mask::random().map_err(|e| CliError::Protocol(e.to_string()))?;
    let digest = commit_digest(&session, &me, value, &mask).map_err(|e| CliError::Usage(e.to_string()))?;
    let secret = LocalSecret {
        session_id: session.clone(),
        stakeholder_id: me.clone(),
        modulus: m.get(),
        value: value.get(),
        mask,
        digest,
    };
    // Persist before sending: an acknowledged commitment without its
    // opening could never be revealed.
    let path = store.save(&secret)?;
    match client.commit(&session, digest.to_hex()) {
        Ok(_) => {}
        Err(e @ CliError::Rejected { .. }) => {
            store.remove(&session, &me)?;
            return Err(e);
        }
        Err(e) => {
            ctx.note(&format!(
                "commitment may or may not have been recorded; the secret is kept at {}",
                path.display()
            ));
            return Err(e);
        }
    }
    let receipt = CommitReceipt {
        session_id: &session,
        stakeholder_id: &me,
        digest: digest.to_hex(),
        secret_file: path.display().to_string(),
    };
    if ctx.json() {
        return ctx.print_json(&receipt);
    }
    let text = format!(
        "committed {me} to session {session}\ndigest: {}\nsecret: {}\n",
        receipt.digest, receipt.secret_file
    );
    ctx.print(&text)
}

/// Uniform value in `[0, m)` from the operating system's CSPRNG.
pub fn random_value(m: Modulus) -> u64 {
    uniform_value(&mut OsRng.unwrap_err(), m).get()
}

#[derive(Serialize)]
struct RevealReceipt<'a> {
    session_id: &'a str,
    stakeholder_id: &'a str,
    already_revealed: bool,
    phase: Phase,
    outcome: Option<u64>,
    selected_candidate: Option<String>,
}

fn reveal(ctx: &mut Ctx, a: &RevealArgs) -> Result<(), CliError> {
    let session = ctx.session()?.to_string();
    let client = ctx.client()?;
    let me = client
        .whoami(&session)?
        .stakeholder_id
        .ok_or_else(|| CliError::Usage("the organizer token cannot reveal; use a stakeholder token".into()))?;
    let store = ctx.secrets();
    let snap = client.state(&session)?;
    let mine = snap.stakeholders.iter().find(|s| s.stakeholder_id == me);
    if mine.is_some_and(|s| s.revealed) {
        return reveal_done(ctx, &session, &me, &snap, true);
    }
    let secret = store.load(&session, &me)?;
    match snap.phase {
        Phase::Reveal => {}
        Phase::Commit | Phase::Setup => {
            return Err(CliError::Protocol(format!(
                "PhaseViolation: session {session:?} is in the {} phase ({}/{} committed); nothing was sent",
                snap.phase,
                snap.committed,
                snap.stakeholders.len()
            )))
        }
        Phase::Aborted => {
            return Err(CliError::Protocol(format!(
                "session {session:?} was aborted: {}",
                snap.abort_reason.as_deref().unwrap_or("no reason given")
            )))
        }
        Phase::Complete => {
            return Err(CliError::Protocol(format!(
                "session {session:?} completed without a reveal from {me:?}"
            )))
        }
    }
    let snap = match client.reveal(&session, secret.value, secret.mask.to_hex()) {
        Ok(s) => s,
        Err(e) => return Err(e),
    };
    if !a.keep_secret {
        store.remove(&session, &me)?;
    }
    reveal_done(ctx, &session, &me, &snap, false)
}

fn reveal_done(ctx: &mut Ctx, session: &str, me: &str, snap: &Snapshot, already: bool) -> Result<(), CliError> {
    if ctx.json() {
        return ctx.print_json(&RevealReceipt {
            session_id: session,
            stakeholder_id: me,
            already_revealed: already,
            phase: snap.phase,
            outcome: snap.outcome,
            selected_candidate: snap.selected_candidate.clone(),
        });
    }
    let mut s = if already {
        format!("{me} has already revealed in session {session}; nothing to do\n")
    } else {
        format!("revealed {me} in session {session}\n")
    };
    match snap.outcome {
        Some(o) => {
            s.push_str(&format!("outcome: {o}\n"));
            if let Some(c) = &snap.selected_candidate {
                s.push_str(&format!("selected: {c}\n"));
            }
        }
        None => s.push_str(&format!(
            "waiting for {} more reveal(s)\n",
            snap.stakeholders.len() - snap.revealed
        )),
    }
    ctx.print(&s)
}

fn status(ctx: &mut Ctx) -> Result<(), CliError> {
    let session = ctx.session()?.to_string();
    let snap = ctx.client()?.state(&session)?;
    if ctx.json() {
        return ctx.print_json(&snap);
    }
    ctx.print(&render::snapshot_text(&snap))
}

enum Feed {
    Record(Box<TranscriptRecord>, String),
    Notice(String),
    Fatal(CliError),
}

fn watch(ctx: &mut Ctx, a: &WatchArgs) -> Result<(), CliError> {
    let session = ctx.session()?.to_string();
    let client = ctx.client()?;
    let (tx, rx) = mpsc::channel();
    let max_retries = a.max_retries;
    let from = a.from_seq;
    thread::spawn(move || read_feed(client, session, from, max_retries, tx));

    for item in rx {
        match item {
            Feed::Notice(n) => ctx.note(&n),
            Feed::Fatal(e) => return Err(e),
            Feed::Record(rec, raw) => {
                let line = if ctx.json() { raw } else { render::record_line(&rec) };
                ctx.print(&format!("{line}\n"))?;
                match rec.event {
                    fairdraw_core::Event::Completed { outcome } => {
                        if !ctx.json() {
                            ctx.print(&format!("outcome: {outcome}\n"))?;
                        }
                        return Ok(());
                    }
                    fairdraw_core::Event::Aborted { reason, .. } => {
                        return Err(CliError::Protocol(format!("ceremony aborted: {reason}")));
                    }
                    _ => {}
                }
            }
        }
    }
    Err(CliError::Protocol("event feed ended unexpectedly".into()))
}

/// Network side of `watch`: reconnects from the next expected seq so the
/// renderer sees each record exactly once, in order.
fn read_feed(client: Client, session: String, mut next: u64, max_retries: u32, tx: mpsc::Sender<Feed>) {
    let mut failures = 0u32;
    loop {
        match client.events(&session, next) {
            Ok(mut sse) => loop {
                match sse.next_message() {
                    Ok(Some(msg)) => {
                        let rec: TranscriptRecord = match serde_json::from_str(&msg.data) {
                            Ok(r) => r,
                            Err(e) => {
                                let _ = tx.send(Feed::Fatal(CliError::Protocol(format!("malformed event: {e}"))));
                                return;
                            }
                        };
                        if rec.seq < next {
                            continue;
                        }
                        if rec.seq > next {
                            let _ = tx.send(Feed::Fatal(CliError::Protocol(format!(
                                "event feed skipped from seq {next} to {}",
                                rec.seq
                            ))));
                            return;
                        }
                        next += 1;
                        failures = 0;
                        let terminal = rec.event.is_terminal();
                        if tx.send(Feed::Record(Box::new(rec), msg.data)).is_err() || terminal {
                            return;
                        }
                    }
                    Ok(None) | Err(_) => break,
                }
            },
            Err(e @ CliError::Rejected { .. }) => {
                let _ = tx.send(Feed::Fatal(e));
                return;
            }
            Err(_) => {}
        }
        failures += 1;
        if failures > max_retries {
            let _ = tx.send(Feed::Fatal(CliError::Transport(format!(
                "connection lost {failures} times; last seq received {}",
                next.wrapping_sub(1)
            ))));
            return;
        }
        let _ = tx.send(Feed::Notice(format!("connection lost; resuming from seq {next}")));
        thread::sleep(Duration::from_millis((100u64 << failures.min(5)).min(3000)));
    }
}

fn verify(ctx: &mut Ctx, a: &VerifyArgs) -> Result<(), CliError> {
    let bytes = std::fs::read(&a.file).map_err(CliError::io(format!("reading {}", a.file.display())))?;
    let report = verify_transcript(&bytes);
    if ctx.json() {
        ctx.print_json(&report)?;
    } else {
        ctx.print(&render::report_text(&report))?;
    }
    if !report.is_ok() {
        let at = report.first_failure().map(|s| format!(" at seq {s}")).unwrap_or_default();
        return Err(CliError::Verification(format!("transcript failed verification{at}")));
    }
    if a.require_complete && report.final_phase != Some(Phase::Complete) {
        return Err(CliError::Verification("transcript is valid but the ceremony did not complete".into()));
    }
    Ok(())
}

fn audit(ctx: &mut Ctx, a: &AuditArgs) -> Result<(), CliError> {
    let (transcripts, invalid, skipped) = load_transcripts(&a.dir)?;
    for (name, why) in &invalid {
        ctx.note(&format!("{name}: {why}"));
    }
    let summary = audit_outcomes(&transcripts, a.bins).map_err(|e| CliError::Usage(e.to_string()))?;
    if ctx.json() {
        ctx.print_json(&summary)?;
    } else {
        ctx.print(&render::audit_text(&summary, skipped))?;
    }
    if !invalid.is_empty() {
        return Err(CliError::Verification(format!("{} transcript(s) failed verification", invalid.len())));
    }
    if let Some(alpha) = a.alpha {
        if summary.p_value < alpha {
            return Err(CliError::Verification(format!(
                "p-value {:.6} is below {alpha}",
                summary.p_value
            )));
        }
    }
    Ok(())
}

type Loaded = (Vec<Transcript>, Vec<(String, String)>, usize);

/// Completed transcripts, the files that failed verification, and how many
/// valid transcripts had no outcome.
fn load_transcripts(dir: &Path) -> Result<Loaded, CliError> {
    let entries = std::fs::read_dir(dir).map_err(CliError::io(format!("reading {}", dir.display())))?;
    let mut paths = Vec::new();
    for e in entries {
        let p = e.map_err(CliError::io(format!("reading {}", dir.display())))?.path();
        if p.extension().is_some_and(|x| x == "jsonl") {
            paths.push(p);
        }
    }
    paths.sort();
    let (mut ok, mut invalid, mut skipped) = (Vec::new(), Vec::new(), 0);
    for p in paths {
        let name = p.display().to_string();
        let bytes = std::fs::read(&p).map_err(CliError::io(format!("reading {name}")))?;
        match Transcript::from_jsonl(&bytes) {
            Ok(t) if t.state().is_some_and(|s| s.outcome_of().is_some()) => ok.push(t),
            Ok(_) => skipped += 1,
            Err(report) => {
                let why = report
                    .findings
                    .first()
                    .map(|f| format!("seq {}: {}", f.seq, f.description))
                    .unwrap_or_else(|| "verification failed".into());
                invalid.push((name, why));
            }
        }
    }
    Ok((ok, invalid, skipped))
}

fn abort(ctx: &mut Ctx, a: &AbortArgs) -> Result<(), CliError> {
    let session = ctx.session()?.to_string();
    let req = AbortRequest {
        reason: a.reason.clone(),
        successor_hint: a.successor_hint.clone(),
    };
    let snap = ctx.client()?.abort(&session, &req)?;
    if ctx.json() {
        return ctx.print_json(&snap);
    }
    ctx.print(&format!("aborted session {session}: {}\nhead: {}\n", a.reason, snap.head))
}

fn transcript(ctx: &mut Ctx, a: &TranscriptArgs) -> Result<(), CliError> {
    let session = ctx.session()?.to_string();
    let (bytes, warning) = ctx.client()?.transcript(&session)?;
    if let Some(w) = warning {
        ctx.note(&format!("warning: {w}"));
    }
    match &a.out {
        Some(p) => std::fs::write(p, &bytes).map_err(CliError::io(format!("writing {}", p.display()))),
        None => ctx
            .io
            .out
            .write_all(&bytes)
            .map_err(CliError::io("writing output")),
    }
}
