//! Run directories: one per invocation, holding the effective config
//! snapshot, a log, and the command outputs.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::errors::{CliError, Result};

pub struct RunDir {
    root: PathBuf,
    log: File,
}

impl RunDir {
    /// Creates the directory; refuses to reuse an existing one unless
    /// `force` is set.
    pub fn create(root: &Path, force: bool) -> Result<RunDir> {
        if root.exists() {
            if !force {
                return Err(CliError::BadConfig(format!(
                    "run directory {} already exists (use --force to overwrite)",
                    root.display()
                )));
            }
        } else {
            std::fs::create_dir_all(root)
                .map_err(|e| CliError::Internal(format!("create {}: {e}", root.display())))?;
        }
        let log = File::create(root.join("log.txt"))
            .map_err(|e| CliError::Internal(format!("create log: {e}")))?;
        Ok(RunDir {
            root: root.to_path_buf(),
            log,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Creates a subdirectory and returns its path.
    pub fn subdir(&self, name: &str) -> Result<PathBuf> {
        let p = self.root.join(name);
        std::fs::create_dir_all(&p)
            .map_err(|e| CliError::Internal(format!("create {}: {e}", p.display())))?;
        Ok(p)
    }

    /// Writes the effective config snapshot used by this run.
    pub fn snapshot_config<T: Serialize>(&self, config: &T) -> Result<()> {
        let body = serde_json::to_string_pretty(config)
            .map_err(|e| CliError::Internal(format!("encode config: {e}")))?;
        std::fs::write(self.path("config.json"), body + "\n")
            .map_err(|e| CliError::Internal(format!("write config snapshot: {e}")))?;
        Ok(())
    }

    /// Appends a log line (also echoed to stdout).
    pub fn log(&mut self, line: &str) {
        println!("{line}");
        let _ = writeln!(self.log, "{line}");
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let body = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Internal(format!("encode {name}: {e}")))?;
        std::fs::write(self.path(name), body + "\n")
            .map_err(|e| CliError::Internal(format!("write {name}: {e}")))?;
        Ok(())
    }
}

/// Loads a JSON config file, replacing the flag-provided parameters.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = crate::errors::open_input(path)?;
    serde_json::from_reader(file)
        .map_err(|e| CliError::BadConfig(format!("{}: {e}", path.display())))
}

/// Resolves the data directory: the flag when given, else $L0WARD_DATA_DIR.
pub fn resolve_data_dir(flag: &Option<PathBuf>) -> Result<PathBuf> {
    if let Some(p) = flag {
        return Ok(p.clone());
    }
    match std::env::var_os("L0WARD_DATA_DIR") {
        Some(v) => Ok(PathBuf::from(v)),
        None => Err(CliError::BadConfig(
            "no --data-dir given and L0WARD_DATA_DIR is not set".into(),
        )),
    }
}
