//! Minimal CSV output: `.` decimals, `\n` line endings, 17 significant digits.

use std::fs;
use std::path::Path;

use crate::error::Result;

/// Round-trip exact formatting of a double.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct CsvWriter {
    text: String,
}

impl CsvWriter {
    pub fn new(header: &[&str]) -> Self {
        CsvWriter::from_owned(header.iter().map(|h| h.to_string()).collect())
    }

    pub fn from_owned(header: Vec<String>) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        CsvWriter { text }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, &self.text)?;
        Ok(())
    }
}
