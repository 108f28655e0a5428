//! Values and masks held locally between commit and reveal.

use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use fairdraw_core::{CommitmentDigest, Mask};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalSecret {
    pub session_id: String,
    pub stakeholder_id: String,
    pub modulus: u64,
    pub value: u64,
    pub mask: Mask,
    pub digest: CommitmentDigest,
}

impl std::fmt::Debug for LocalSecret {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LocalSecret")
            .field("session_id", &self.session_id)
            .field("stakeholder_id", &self.stakeholder_id)
            .field("digest", &self.digest)
            .finish_non_exhaustive()
    }
}

/// `$FAIRDRAW_SECRETS_DIR`, else `$XDG_DATA_HOME/fairdraw/secrets`, else
/// `$HOME/.local/share/fairdraw/secrets`.
pub fn default_dir() -> PathBuf {
    if let Some(d) = std::env::var_os("XDG_DATA_HOME").filter(|d| !d.is_empty()) {
        return PathBuf::from(d).join("fairdraw").join("secrets");
    }
    let home = std::env::var_os("HOME").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."));
    home.join(".local").join("share").join("fairdraw").join("secrets")
}

pub struct SecretStore {
    dir: PathBuf,
}

impl SecretStore {
    pub fn new(dir: impl Into<PathBuf>) -> SecretStore {
        SecretStore { dir: dir.into() }
    }

    pub fn path(&self, session_id: &str, stakeholder_id: &str) -> PathBuf {
        self.dir.join(format!(
            "{}.{}.json",
            hex::encode(session_id.as_bytes()),
            hex::encode(stakeholder_id.as_bytes())
        ))
    }

    pub fn exists(&self, session_id: &str, stakeholder_id: &str) -> bool {
        self.path(session_id, stakeholder_id).exists()
    }

    /// Writes a new secret readable only by the owner. Never overwrites.
    pub fn save(&self, secret: &LocalSecret) -> Result<PathBuf, CliError> {
        create_private_dir(&self.dir).map_err(CliError::io(format!("creating {}", self.dir.display())))?;
        let path = self.path(&secret.session_id, &secret.stakeholder_id);
        let mut opts = OpenOptions::new();
        opts.write(true).create_new(true);
        #[cfg(unix)]
        {
            use std::os::unix::fs::OpenOptionsExt;
            opts.mode(0o600);
        }
        let mut f = opts.open(&path).map_err(|e| {
            if e.kind() == io::ErrorKind::AlreadyExists {
                CliError::Protocol(format!(
                    "a secret for {:?} in session {:?} already exists at {}; refusing to commit twice",
                    secret.stakeholder_id,
                    secret.session_id,
                    path.display()
                ))
            } else {
                CliError::io(format!("writing {}", path.display()))(e)
            }
        })?;
        let bytes = serde_json::to_vec_pretty(secret).expect("secrets serialize");
        f.write_all(&bytes)
            .and_then(|_| f.sync_all())
            .map_err(CliError::io(format!("writing {}", path.display())))?;
        Ok(path)
    }

    pub fn load(&self, session_id: &str, stakeholder_id: &str) -> Result<LocalSecret, CliError> {
        let path = self.path(session_id, stakeholder_id);
        let bytes = fs::read(&path).map_err(|e| {
            if e.kind() == io::ErrorKind::NotFound {
                CliError::Usage(format!(
                    "no local secret for {stakeholder_id:?} in session {session_id:?} (looked in {}); \
                     reveal must run with the same --secrets-dir used for commit",
                    path.display()
                ))
            } else {
                CliError::io(format!("reading {}", path.display()))(e)
            }
        })?;
        serde_json::from_slice(&bytes)
            .map_err(|e| CliError::Usage(format!("{} is not a valid secret file: {e}", path.display())))
    }

    pub fn remove(&self, session_id: &str, stakeholder_id: &str) -> Result<(), CliError> {
        let path = self.path(session_id, stakeholder_id);
        match fs::remove_file(&path) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(()),
            Err(e) => Err(CliError::io(format!("removing {}", path.display()))(e)),
        }
    }
}

fn create_private_dir(dir: &Path) -> io::Result<()> {
    let mut b = fs::DirBuilder::new();
    b.recursive(true);
    #[cfg(unix)]
    {
        use std::os::unix::fs::DirBuilderExt;
        b.mode(0o700);
    }
    b.create(dir)
}
