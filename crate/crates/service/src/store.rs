//! On-disk session layout.
//!
//! ```text
//! <data_dir>/sessions/<hex(session_id)>/tokens.json
//! <data_dir>/sessions/<hex(session_id)>/transcript.jsonl
//! ```
//!
//! Tokens are stored only as SHA-256 hashes. The transcript is the source of
//! truth; every append is flushed to stable storage before the caller
//! acknowledges the mutation.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

const TRANSCRIPT_FILE: &str = "transcript.jsonl";
const TOKENS_FILE: &str = "tokens.json";

pub fn hash_token(token: &str) -> String {
    hex::encode(Sha256::digest(token.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenTable {
    pub organizer: String,
    /// stakeholder id -> token hash
    pub stakeholders: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Role {
    Organizer,
    Stakeholder(String),
}

impl TokenTable {
    pub fn role_of(&self, token: &str) -> Option<Role> {
        let h = hash_token(token);
        if h == self.organizer {
            return Some(Role::Organizer);
        }
        self.stakeholders
            .iter()
            .find(|(_, v)| **v == h)
            .map(|(id, _)| Role::Stakeholder(id.clone()))
    }
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(data_dir: &Path) -> io::Result<Store> {
        let root = data_dir.join("sessions");
        fs::create_dir_all(&root)?;
        Ok(Store { root })
    }

    fn dir(&self, session_id: &str) -> PathBuf {
        self.root.join(hex::encode(session_id.as_bytes()))
    }

    pub fn exists(&self, session_id: &str) -> bool {
        self.dir(session_id).exists()
    }

    /// Creates the session directory and writes its token table. Fails if the
    /// session already exists on disk.
    pub fn create(&self, session_id: &str, tokens: &TokenTable) -> io::Result<TranscriptFile> {
        let dir = self.dir(session_id);
        fs::create_dir(&dir)?;
        write_synced(&dir.join(TOKENS_FILE), &serde_json::to_vec_pretty(tokens)?)?;
        let file = OpenOptions::new()
            .create_new(true)
            .append(true)
            .open(dir.join(TRANSCRIPT_FILE))?;
        sync_dir(&dir)?;
        Ok(TranscriptFile { file })
    }

    pub fn read_transcript(&self, session_id: &str) -> io::Result<Vec<u8>> {
        fs::read(self.dir(session_id).join(TRANSCRIPT_FILE))
    }

    /// Every session directory with its raw contents.
    pub fn scan(&self) -> io::Result<Vec<StoredSession>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let entry = entry?;
            if !entry.file_type()?.is_dir() {
                continue;
            }
            let name = entry.file_name().to_string_lossy().into_owned();
            let Some(session_id) = hex::decode(&name).ok().and_then(|b| String::from_utf8(b).ok()) else {
                log::warn!("ignoring unrecognized directory {name:?}");
                continue;
            };
            let dir = entry.path();
            let tokens = match fs::read(dir.join(TOKENS_FILE)) {
                Ok(bytes) => serde_json::from_slice(&bytes).ok(),
                Err(e) if e.kind() == io::ErrorKind::NotFound => None,
                Err(e) => return Err(e),
            };
            let transcript = match fs::read(dir.join(TRANSCRIPT_FILE)) {
                Ok(bytes) => Some(bytes),
                Err(e) if e.kind() == io::ErrorKind::NotFound => None,
                Err(e) => return Err(e),
            };
            out.push(StoredSession {
                session_id,
                tokens,
                transcript,
            });
        }
        out.sort_by(|a, b| a.session_id.cmp(&b.session_id));
        Ok(out)
    }

    /// Cuts an unterminated final line, which can only be a write that was
    /// never acknowledged. Returns the number of bytes removed.
    pub fn drop_torn_tail(&self, session_id: &str, bytes: &mut Vec<u8>) -> io::Result<usize> {
        if bytes.is_empty() || bytes.ends_with(b"\n") {
            return Ok(0);
        }
        let keep = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
        let removed = bytes.len() - keep;
        let file = OpenOptions::new()
            .write(true)
            .open(self.dir(session_id).join(TRANSCRIPT_FILE))?;
        file.set_len(keep as u64)?;
        file.sync_all()?;
        bytes.truncate(keep);
        Ok(removed)
    }

    pub fn open_transcript(&self, session_id: &str) -> io::Result<TranscriptFile> {
        let file = OpenOptions::new()
            .append(true)
            .open(self.dir(session_id).join(TRANSCRIPT_FILE))?;
        Ok(TranscriptFile { file })
    }
}

pub struct StoredSession {
    pub session_id: String,
    pub tokens: Option<TokenTable>,
    pub transcript: Option<Vec<u8>>,
}

#[derive(Debug)]
pub struct TranscriptFile {
    file: File,
}

impl TranscriptFile {
    /// Appends newline-terminated lines and syncs them to disk.
    pub fn append(&mut self, lines: &[String]) -> io::Result<()> {
        let mut buf = String::new();
        for l in lines {
            buf.push_str(l);
            buf.push('\n');
        }
        self.file.write_all(buf.as_bytes())?;
        self.file.sync_data()
    }
}

fn write_synced(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut f = OpenOptions::new().create_new(true).write(true).open(path)?;
    f.write_all(bytes)?;
    f.sync_all()
}

fn sync_dir(dir: &Path) -> io::Result<()> {
    #[cfg(unix)]
    {
        File::open(dir)?.sync_all()?;
        if let Some(parent) = dir.parent() {
            File::open(parent)?.sync_all()?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> TokenTable {
        TokenTable {
            organizer: hash_token("org"),
            stakeholders: [("S0".to_string(), hash_token("t0"))].into_iter().collect(),
        }
    }

    #[test]
    fn roles_by_token() {
        let t = table();
        assert_eq!(t.role_of("org"), Some(Role::Organizer));
        assert_eq!(t.role_of("t0"), Some(Role::Stakeholder("S0".into())));
        assert_eq!(t.role_of("nope"), None);
    }

    #[test]
    fn create_scan_and_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let mut f = store.create("a/b ✓", &table()).unwrap();
        assert!(store.create("a/b ✓", &table()).is_err());
        f.append(&["one".into(), "two".into()]).unwrap();
        drop(f);
        let mut bytes = store.read_transcript("a/b ✓").unwrap();
        assert_eq!(bytes, b"one\ntwo\n");
        let mut f = store.open_transcript("a/b ✓").unwrap();
        f.file.write_all(b"thr").unwrap();
        bytes = store.read_transcript("a/b ✓").unwrap();
        assert_eq!(store.drop_torn_tail("a/b ✓", &mut bytes).unwrap(), 3);
        assert_eq!(store.read_transcript("a/b ✓").unwrap(), b"one\ntwo\n");

        let scanned = store.scan().unwrap();
        assert_eq!(scanned.len(), 1);
        assert_eq!(scanned[0].session_id, "a/b ✓");
        assert_eq!(scanned[0].tokens, Some(table()));
    }
}
