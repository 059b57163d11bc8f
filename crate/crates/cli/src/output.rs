//! CSV formatting and atomic file output.

use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::error::CliError;

/// Shortest decimal that round-trips the value rounded to 12 significant digits.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{x:.11e}")
        .parse()
        .expect("scientific notation parses");
    format!("{rounded}")
}

/// Builds a CSV document in memory.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(header).expect("writing to memory");
        Self { writer }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("writing to memory");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.writer.into_inner().expect("flushing to memory")
    }
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `bytes` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let target = dir.join(name);
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| io_error(dir, e))?;
    tmp.write_all(bytes).map_err(|e| io_error(&target, e))?;
    tmp.flush().map_err(|e| io_error(&target, e))?;
    tmp.persist(&target)
        .map_err(|e| io_error(&target, e.error))?;
    Ok(target)
}
