#![allow(dead_code)]

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

pub const SERVER_BIN: &str = env!("CARGO_BIN_EXE_fairdraw-server");
pub const CLI_BIN: &str = env!("CARGO_BIN_EXE_fairdraw");

/// A coordinator process on an ephemeral port. Killed on drop.
pub struct Server {
    child: Child,
    pub url: String,
    pub addr: String,
    pub data_dir: PathBuf,
}

impl Server {
    pub fn start(data_dir: &Path) -> Server {
        Self::start_on(data_dir, "127.0.0.1:0")
    }

    pub fn start_on(data_dir: &Path, listen: &str) -> Server {
        let mut child = Command::new(SERVER_BIN)
            .args(["--listen", listen, "--data-dir"])
            .arg(data_dir)
            .env("RUST_LOG", "warn")
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .expect("spawn server");
        let stdout = child.stdout.take().unwrap();
        let mut line = String::new();
        BufReader::new(stdout).read_line(&mut line).expect("server banner");
        let url = line
            .trim()
            .strip_prefix("listening on ")
            .unwrap_or_else(|| panic!("unexpected banner {line:?}"))
            .to_string();
        let addr = url.trim_start_matches("http://").to_string();
        Server {
            child,
            url,
            addr,
            data_dir: data_dir.to_path_buf(),
        }
    }

    /// SIGKILL: no shutdown hooks, no flushing beyond what was already synced.
    pub fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    /// Restarts on the same address with the same data directory.
    pub fn restart(self) -> Server {
        let (dir, addr) = (self.data_dir.clone(), self.addr.clone());
        self.kill();
        let deadline = Instant::now() + Duration::from_secs(5);
        loop {
            let mut probe = Command::new(SERVER_BIN)
                .args(["--listen", &addr, "--data-dir"])
                .arg(&dir)
                .env("RUST_LOG", "warn")
                .stdout(Stdio::piped())
                .stderr(Stdio::null())
                .spawn()
                .expect("spawn server");
            let mut line = String::new();
            BufReader::new(probe.stdout.take().unwrap()).read_line(&mut line).unwrap();
            if line.starts_with("listening on ") {
                return Server {
                    child: probe,
                    url: line.trim().trim_start_matches("listening on ").to_string(),
                    addr,
                    data_dir: dir,
                };
            }
            let _ = probe.wait();
            assert!(Instant::now() < deadline, "could not rebind {addr}");
            std::thread::sleep(Duration::from_millis(50));
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Runs the CLI against `server` with an isolated secrets directory.
pub struct Cli<'a> {
    pub server: &'a str,
    pub secrets: &'a Path,
}

impl Cli<'_> {
    pub fn cmd(&self, args: &[&str]) -> Command {
        let mut c = Command::new(CLI_BIN);
        c.arg("--server")
            .arg(self.server)
            .arg("--secrets-dir")
            .arg(self.secrets)
            .args(args)
            .env_remove("FAIRDRAW_SESSION")
            .env_remove("FAIRDRAW_TOKEN");
        c
    }

    pub fn run(&self, args: &[&str]) -> Output {
        self.cmd(args).output().expect("run cli")
    }

    pub fn run_with_stdin(&self, args: &[&str], stdin: &str) -> Output {
        let mut child = self
            .cmd(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .expect("spawn cli");
        child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
        child.wait_with_output().unwrap()
    }
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

pub struct Created {
    pub session: String,
    pub organizer: String,
    pub tokens: Vec<(String, String)>,
}

/// `fairdraw create --output json` with the given extra arguments.
pub fn create(cli: &Cli, session: &str, extra: &[&str]) -> Created {
    let mut args = vec!["--session", session, "--output", "json", "create"];
    args.extend_from_slice(extra);
    let out = cli.run(&args);
    assert_eq!(code(&out), 0, "create failed: {}", stderr(&out));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    Created {
        session: v["session_id"].as_str().unwrap().to_string(),
        organizer: v["organizer_token"].as_str().unwrap().to_string(),
        tokens: v["tokens"]
            .as_array()
            .unwrap()
            .iter()
            .map(|t| {
                (
                    t["stakeholder_id"].as_str().unwrap().to_string(),
                    t["token"].as_str().unwrap().to_string(),
                )
            })
            .collect(),
    }
}

pub const REFERENCE_VALUES: [u64; 5] = [1_610_027, 5_871_032, 6_029_108, 7_664_824, 5_757_989];
pub const REFERENCE_OUTCOME: u64 = 6_932_980;
pub const REFERENCE_MODULUS: u64 = 10_000_000;
