use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::args::Format;
use crate::error::{CliError, Result};

/// Output directory plus the requested formats.
pub struct Output {
    dir: PathBuf,
    formats: Vec<Format>,
    written: Vec<PathBuf>,
}

impl Output {
    pub fn new(dir: &Path, formats: &[Format]) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            formats: formats.to_vec(),
            written: Vec::new(),
        })
    }

    pub fn wants(&self, format: Format) -> bool {
        self.formats.contains(&format)
    }

    fn create(&mut self, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        self.written.push(path.clone());
        Ok((path, BufWriter::new(file)))
    }

    pub fn text(&mut self, name: &str, content: &str) -> Result<()> {
        let (path, mut w) = self.create(name)?;
        w.write_all(content.as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| CliError::io(path, e))
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(noisespec::Error::from)?;
        self.text(name, &(text + "\n"))
    }

    /// CSV file with a header row followed by `rows`.
    pub fn csv<R, I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        R: IntoIterator,
        R::Item: AsRef<[u8]>,
        I: IntoIterator<Item = R>,
    {
        let (_, w) = self.create(name)?;
        let mut w = csv::Writer::from_writer(w);
        w.write_record(header).map_err(noisespec::Error::from)?;
        for row in rows {
            w.write_record(row).map_err(noisespec::Error::from)?;
        }
        w.flush().map_err(noisespec::Error::from)?;
        Ok(())
    }

    /// Hands a buffered file to a writer function from the core crate.
    pub fn with_file(
        &mut self,
        name: &str,
        write: impl FnOnce(&mut BufWriter<File>) -> noisespec::Result<()>,
    ) -> Result<()> {
        let (path, mut w) = self.create(name)?;
        write(&mut w)?;
        w.flush().map_err(|e| CliError::io(path, e))
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}
