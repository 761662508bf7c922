//! Output files are collected in memory and written only once a run has
//! succeeded, so a failing run leaves nothing behind but its replay file.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::CliError;

#[derive(Debug)]
pub struct Artifacts {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf(), files: Vec::new() }
    }

    pub fn text(&mut self, name: &str, content: String) {
        self.files.push((name.to_string(), content));
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Usage(e.to_string()))?;
        text.push('\n');
        self.text(name, text);
        Ok(())
    }

    /// Writes every file through a temporary name and renames them into
    /// place, followed by `manifest.json` holding the timestamp.
    pub fn commit(mut self, command: &str, args: &[String]) -> Result<Vec<PathBuf>, CliError> {
        let manifest = Manifest {
            command,
            args,
            version: env!("CARGO_PKG_VERSION"),
            unix_time: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            files: self.files.iter().map(|(n, _)| n.as_str()).collect(),
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Usage(e.to_string()))?;
        text.push('\n');
        self.files.push(("manifest.json".into(), text));

        fs::create_dir_all(&self.dir)?;
        let staged: Vec<(PathBuf, PathBuf)> = self
            .files
            .iter()
            .map(|(name, content)| {
                let tmp = self.dir.join(format!(".{name}.tmp"));
                fs::write(&tmp, content).map(|_| (tmp, self.dir.join(name)))
            })
            .collect::<Result<_, _>>()?;
        for (tmp, dest) in &staged {
            fs::rename(tmp, dest)?;
        }
        Ok(staged.into_iter().map(|(_, d)| d).collect())
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    args: &'a [String],
    version: &'a str,
    unix_time: u64,
    files: Vec<&'a str>,
}

/// Writes a failing instance for replay; the only artifact of a failed run.
pub fn write_replay(dir: &Path, content: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join("replay.txt");
    fs::write(&path, content)?;
    Ok(path)
}
