use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

/// Reads a numeric matrix, one row per record. Blank lines and lines
/// starting with `#` are skipped, and a first record with no numeric
/// fields is treated as a header. Rows must all have the same width.
pub fn read_matrix(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let file = File::open(path).map_err(|e| CliError::in_file(path, e))?;
    parse_matrix(file).map_err(|e| match e {
        CliError::Data(m) => CliError::in_file(path, m),
        other => other,
    })
}

pub fn parse_matrix<R: std::io::Read>(input: R) -> CliResult<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut first = true;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if first && record.iter().all(|f| f.parse::<f64>().is_err()) {
            first = false;
            continue;
        }
        first = false;
        let row = record
            .iter()
            .enumerate()
            .map(|(col, field)| match field.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(CliError::Data(format!(
                    "line {line}, column {}: expected a finite number, got {field:?}",
                    col + 1
                ))),
            })
            .collect::<CliResult<Vec<f64>>>()?;
        if let Some(prev) = rows.first() {
            if prev.len() != row.len() {
                return Err(CliError::Data(format!(
                    "line {line}: expected {} values, found {}",
                    prev.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Output directory plus the list of files written so far, echoed into
/// the run manifest.
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::in_file(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    /// Opens `name` for writing and records it.
    pub fn file(&mut self, name: &str) -> CliResult<BufWriter<File>> {
        let path = self.root.join(name);
        let f = File::create(&path).map_err(|e| CliError::in_file(&path, e))?;
        self.written.push(name.to_string());
        Ok(BufWriter::new(f))
    }

    pub fn write_string(&mut self, name: &str, text: &str) -> CliResult<()> {
        let path = self.root.join(name);
        fs::write(&path, text).map_err(|e| CliError::in_file(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }
}
