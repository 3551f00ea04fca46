use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use crate::args::Command;

pub const FORMAT: &str = "vews-manifest/1";

/// Record of one run: enough to repeat it and nothing else.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: String,
    /// Seconds since the Unix epoch; ignored when comparing runs.
    pub created_unix: u64,
    pub out: PathBuf,
    pub command: Command,
    /// Configuration as the core library saw it after all defaults.
    pub resolved: serde_json::Value,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(out: &Path, command: Command, resolved: serde_json::Value, outputs: Vec<String>) -> Self {
        Manifest {
            format: FORMAT.to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            out: out.to_path_buf(),
            command,
            resolved,
            outputs,
        }
    }

    pub fn file_name(command: &Command) -> String {
        format!("manifest-{}.json", command.name())
    }

    pub fn write(&self) -> anyhow::Result<PathBuf> {
        let path = self.out.join(Self::file_name(&self.command));
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let m: Manifest =
            serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))?;
        anyhow::ensure!(m.format == FORMAT, "unsupported manifest format {:?}", m.format);
        Ok(m)
    }
}
