//! Output directory handling and the content-hash manifest.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST: &str = "manifest.txt";

pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&root).map_err(|e| CliError::io(&root, e))?;
        Ok(OutputDir { root, files: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    /// Creates `name` and passes a buffered writer to `f`.
    pub fn write(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut dyn Write) -> spdectl::Result<()>,
    ) -> Result<(), CliError> {
        let path = self.root.join(name);
        let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        w.flush().map_err(|e| CliError::io(&path, e))?;
        if !self.files.iter().any(|n| n == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    /// Adds a file written by other means to the manifest.
    pub fn register(&mut self, name: &str) -> Result<(), CliError> {
        let path = self.root.join(name);
        if !path.is_file() {
            return Err(CliError::Io(format!("{}: expected output file is missing", path.display())));
        }
        if !self.files.iter().any(|n| n == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        self.write(name, |w| Ok(w.write_all(text.as_bytes())?))
    }

    /// Writes `manifest.txt`: one `sha256  name` line per file, sorted by name.
    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        self.files.sort();
        let mut text = String::new();
        for name in &self.files {
            let path = self.root.join(name);
            let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
            text.push_str(&format!("{}  {name}\n", hex::encode(Sha256::digest(&bytes))));
        }
        let path = self.root.join(MANIFEST);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(self.root)
    }
}
