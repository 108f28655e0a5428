use std::io::{self, Write};
use std::process::ExitCode;

use clap::Parser;
use fairdraw_cli::{run, Cli, Io};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let stdin = io::stdin();
    let mut stdin = stdin.lock();
    let mut out = io::stdout();
    let mut err = io::stderr();
    let mut io = Io {
        stdin: &mut stdin,
        out: &mut out,
        err: &mut err,
    };
    match run(&cli, &mut io) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(io::stderr(), "error: {e}");
            e.into()
        }
    }
}
