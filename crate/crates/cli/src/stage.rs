//! Atomic output staging: every file is written into a temporary directory
//! next to the destination and renamed into place only when the whole
//! command has succeeded, so a failed run leaves no partial outputs.

use std::path::{Path, PathBuf};
use tempfile::TempDir;

use crate::error::{CliError, CliResult};

pub struct OutputStage {
    tmp: TempDir,
    destination: PathBuf,
    files: Vec<String>,
}

impl OutputStage {
    pub fn new(destination: &Path) -> CliResult<Self> {
        let parent = destination.parent().unwrap_or_else(|| Path::new("."));
        std::fs::create_dir_all(parent)?;
        let tmp = TempDir::with_prefix_in(".fluxdpd-stage-", parent)
            .map_err(|e| CliError::Other(format!("cannot create staging directory: {e}")))?;
        Ok(Self {
            tmp,
            destination: destination.to_path_buf(),
            files: Vec::new(),
        })
    }

    /// Temporary path for `name`; the file appears under the destination
    /// directory only after [`commit`](Self::commit).
    pub fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.tmp.path().join(name)
    }

    /// Move every staged file into the destination directory.
    pub fn commit(self) -> CliResult<()> {
        std::fs::create_dir_all(&self.destination)?;
        for name in &self.files {
            let from = self.tmp.path().join(name);
            let to = self.destination.join(name);
            std::fs::rename(&from, &to).map_err(|e| {
                CliError::Other(format!("cannot finalize {}: {e}", to.display()))
            })?;
        }
        Ok(())
    }
}
