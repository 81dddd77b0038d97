//! Buffered artifact writing.
//!
//! Commands assemble every output in memory first and persist at the very
//! end, so a failing run leaves no partial files behind. If persisting
//! itself fails halfway, the files already written are removed.

use std::path::{Path, PathBuf};

use rollsim_core::error::Result;

#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(PathBuf, String)>,
}

impl Artifacts {
    pub fn add(&mut self, name: impl Into<PathBuf>, content: String) {
        self.files.push((name.into(), content));
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    /// Write everything under `out_dir`, returning the paths written.
    pub fn persist(self, out_dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(out_dir)?;
        let mut written = Vec::new();
        for (name, content) in &self.files {
            let path = out_dir.join(name);
            if let Err(e) = std::fs::write(&path, content) {
                for done in &written {
                    let _ = std::fs::remove_file(done);
                }
                return Err(e.into());
            }
            written.push(path);
        }
        Ok(written)
    }
}
