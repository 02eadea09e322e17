use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use stratapc_core::io::RunConfig;

/// Why a command failed, and so which exit status it maps to.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numerical(String),
    Core(stratapc_core::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Numerical(_) => 2,
            Failure::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Numerical(m) => f.write_str(m),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<stratapc_core::Error> for Failure {
    fn from(e: stratapc_core::Error) -> Self {
        Failure::Core(e)
    }
}

pub type Outcome<T> = std::result::Result<T, Failure>;

pub fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn read_file(path: &Path) -> Outcome<Vec<u8>> {
    fs::read(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Recorded next to every artifact so a run can be traced to its inputs.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub command: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_sha256: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph_sha256: Option<String>,
}

impl Provenance {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: sha256_hex(config.to_json().as_bytes()),
            seed: config.seed,
            data_sha256: None,
            graph_sha256: None,
        }
    }
}

pub struct OutDir {
    path: PathBuf,
}

impl OutDir {
    pub fn create(path: PathBuf) -> Outcome<Self> {
        fs::create_dir_all(&path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        Ok(Self { path })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn write(&self, name: &str, contents: &[u8]) -> Outcome<()> {
        let p = self.path.join(name);
        fs::write(&p, contents).map_err(|e| usage(format!("{}: {e}", p.display())))
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Outcome<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| usage(format!("{name}: {e}")))?;
        self.write(name, text.as_bytes())
    }

    pub fn csv<T: Serialize>(&self, name: &str, rows: &[T]) -> Outcome<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).map_err(|e| usage(format!("{name}: {e}")))?;
        }
        let bytes = w.into_inner().map_err(|e| usage(format!("{name}: {e}")))?;
        self.write(name, &bytes)
    }
}
