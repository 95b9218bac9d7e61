//! Output staging. Files are collected in memory and only written once a
//! command has finished: each goes to a temporary sibling first, and the
//! renames happen after every temporary file is on disk.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;

const TEMP_SUFFIX: &str = ".acsf-tmp";

#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(PathBuf, Vec<u8>)>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl Artifacts {
    pub fn new() -> Self {
        Artifacts::default()
    }

    /// Adds a file at `name`, relative to the output directory.
    pub fn add(&mut self, name: impl Into<PathBuf>, content: impl Into<Vec<u8>>) {
        self.files.push((name.into(), content.into()));
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    #[cfg(test)]
    pub fn names(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    /// Writes everything under `out`; on failure no target file is touched
    /// and the temporaries are removed.
    pub fn commit(self, out: &Path) -> Result<Vec<PathBuf>, CliError> {
        let mut staged: Vec<(PathBuf, PathBuf)> = Vec::with_capacity(self.files.len());
        let result = (|| {
            for (name, content) in &self.files {
                let target = out.join(name);
                if let Some(dir) = target.parent() {
                    fs::create_dir_all(dir).map_err(io_err(dir))?;
                }
                let mut temp = target.clone().into_os_string();
                temp.push(TEMP_SUFFIX);
                let temp = PathBuf::from(temp);
                fs::write(&temp, content).map_err(io_err(&temp))?;
                staged.push((temp, target));
            }
            Ok(())
        })();
        if let Err(e) = result {
            for (temp, _) in &staged {
                let _ = fs::remove_file(temp);
            }
            return Err(e);
        }
        let mut written = Vec::with_capacity(staged.len());
        for (temp, target) in staged {
            fs::rename(&temp, &target).map_err(io_err(&target))?;
            written.push(target);
        }
        Ok(written)
    }
}
