use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "fairdraw", version, about = "Run, join and audit commit-reveal draw ceremonies")]
pub struct Cli {
    /// Coordinator base URL.
    #[arg(long, global = true, env = "FAIRDRAW_SERVER", default_value = "http://127.0.0.1:8080")]
    pub server: String,
    #[arg(long, global = true, env = "FAIRDRAW_SESSION")]
    pub session: Option<String>,
    /// Stakeholder or organizer token issued at creation.
    #[arg(long, global = true, env = "FAIRDRAW_TOKEN", hide_env_values = true)]
    pub token: Option<String>,
    #[arg(long, global = true, value_enum, default_value_t = Output::Text)]
    pub output: Output,
    /// Where commit stores the value and mask until reveal.
    #[arg(long, global = true, env = "FAIRDRAW_SECRETS_DIR")]
    pub secrets_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Output {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a ceremony and print its tokens.
    Create(CreateArgs),
    /// Commit to a value; the value and mask stay local until reveal.
    Commit(CommitArgs),
    /// Reveal the locally stored opening.
    Reveal(RevealArgs),
    /// Show the ceremony state.
    Status,
    /// Follow the ceremony's events until it completes or aborts.
    Watch(WatchArgs),
    /// Verify a transcript file offline.
    Verify(VerifyArgs),
    /// Chi-square uniformity test over a directory of transcripts.
    Audit(AuditArgs),
    /// Abort the ceremony (organizer token).
    Abort(AbortArgs),
    /// Download the ceremony transcript.
    Transcript(TranscriptArgs),
}

#[derive(Debug, Args)]
pub struct CreateArgs {
    #[arg(long)]
    pub modulus: u64,
    /// Number of stakeholders, named S0, S1, ...
    #[arg(long, conflicts_with = "roster", required_unless_present = "roster")]
    pub stakeholders: Option<usize>,
    /// Comma-separated stakeholder ids.
    #[arg(long, value_delimiter = ',')]
    pub roster: Vec<String>,
    /// File with one candidate label per line; the count must equal the modulus.
    #[arg(long)]
    pub candidates_file: Option<PathBuf>,
    #[arg(long)]
    pub metadata: Option<String>,
    /// Commit phase length from now.
    #[arg(long)]
    pub commit_window_secs: Option<u64>,
    /// Reveal phase length after the commit deadline.
    #[arg(long)]
    pub reveal_window_secs: Option<u64>,
    /// Aborted session this one replaces.
    #[arg(long)]
    pub predecessor: Option<String>,
}

#[derive(Debug, Args)]
pub struct CommitArgs {
    #[command(flatten)]
    pub source: ValueSource,
    /// Session modulus; when given, range checks need no network access.
    #[arg(long)]
    pub modulus: Option<u64>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ValueSource {
    #[arg(long)]
    pub value: Option<u64>,
    /// Draw uniformly from local secure entropy.
    #[arg(long)]
    pub random: bool,
    /// Enter one ten-sided die roll per digit.
    #[arg(long)]
    pub dice: bool,
}

#[derive(Debug, Args)]
pub struct RevealArgs {
    /// Keep the local secret after a successful reveal.
    #[arg(long)]
    pub keep_secret: bool,
}

#[derive(Debug, Args)]
pub struct WatchArgs {
    #[arg(long, default_value_t = 0)]
    pub from_seq: u64,
    /// Reconnection attempts before giving up.
    #[arg(long, default_value_t = 10)]
    pub max_retries: u32,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub file: PathBuf,
    /// Also fail unless the ceremony completed.
    #[arg(long)]
    pub require_complete: bool,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Directory of `*.jsonl` transcripts.
    pub dir: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub bins: u64,
    /// Exit 1 when the p-value falls below this level.
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AbortArgs {
    #[arg(long)]
    pub reason: String,
    #[arg(long)]
    pub successor_hint: Option<String>,
}

#[derive(Debug, Args)]
pub struct TranscriptArgs {
    /// Write to this file instead of stdout.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}
