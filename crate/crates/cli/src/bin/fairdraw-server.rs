use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;
use fairdraw_service::{serve, ServiceConfig, Windows};

/// Coordinator for fair-draw ceremonies.
#[derive(Debug, Parser)]
#[command(name = "fairdraw-server", version)]
struct Args {
    #[arg(long, env = "FAIRDRAW_LISTEN", default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    /// Directory holding session transcripts and token hashes.
    #[arg(long, env = "FAIRDRAW_DATA_DIR", default_value = "fairdraw-data")]
    data_dir: PathBuf,
    /// Default commit phase length when a create request sets no deadline.
    #[arg(long, env = "FAIRDRAW_COMMIT_WINDOW_SECS", default_value_t = 86_400)]
    commit_window_secs: i64,
    /// Default reveal phase length when a create request sets no deadline.
    #[arg(long, env = "FAIRDRAW_REVEAL_WINDOW_SECS", default_value_t = 86_400)]
    reveal_window_secs: i64,
    /// How often expired ceremonies are swept.
    #[arg(long, env = "FAIRDRAW_SWEEP_INTERVAL_MS", default_value_t = 1000)]
    sweep_interval_ms: u64,
}

#[tokio::main]
async fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let config = ServiceConfig {
        listen: args.listen,
        data_dir: args.data_dir,
        windows: Windows {
            commit_ms: args.commit_window_secs.saturating_mul(1000),
            reveal_ms: args.reveal_window_secs.saturating_mul(1000),
        },
        sweep_interval: Duration::from_millis(args.sweep_interval_ms),
    };
    let result = serve(config, |addr| {
        let mut out = std::io::stdout();
        let _ = writeln!(out, "listening on http://{addr}");
        let _ = out.flush();
    })
    .await;
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
