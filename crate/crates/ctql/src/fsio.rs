//! All-or-nothing output: files are staged in the destination directory and
//! only renamed into place once every one of them has been written.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::error::{CliError, Result};

#[derive(Default)]
pub struct Staged {
    files: Vec<(NamedTempFile, PathBuf)>,
}

impl Staged {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, path: impl Into<PathBuf>, bytes: &[u8]) -> Result<()> {
        let path = path.into();
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
            _ => PathBuf::from("."),
        };
        let wrap = |source| CliError::Write {
            path: path.clone(),
            source,
        };
        fs::create_dir_all(&dir).map_err(wrap)?;
        let mut tmp = NamedTempFile::new_in(&dir).map_err(wrap)?;
        tmp.write_all(bytes).map_err(wrap)?;
        tmp.as_file().sync_all().map_err(wrap)?;
        self.files.push((tmp, path));
        Ok(())
    }

    /// Renames every staged file into place and returns the final paths.
    pub fn commit(self) -> Result<Vec<PathBuf>> {
        let mut done = Vec::with_capacity(self.files.len());
        for (tmp, path) in self.files {
            tmp.persist(&path).map_err(|e| CliError::Write {
                path: path.clone(),
                source: e.error,
            })?;
            done.push(path);
        }
        Ok(done)
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut s = Staged::new();
    s.add(path, bytes)?;
    s.commit().map(|_| ())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dropped_stage_leaves_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = Staged::new();
        s.add(dir.path().join("a.txt"), b"a").unwrap();
        drop(s);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);

        write_atomic(&dir.path().join("sub/b.txt"), b"bee").unwrap();
        assert_eq!(fs::read(dir.path().join("sub/b.txt")).unwrap(), b"bee");
    }
}
