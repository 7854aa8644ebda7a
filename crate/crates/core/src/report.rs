//! CSV/JSON result writers: 12 significant digits, '.' decimal, metadata
//! echoed as comment lines, atomic write-then-rename.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// Format a float with 12 significant digits. Integers print without an
/// exponent; everything else uses scientific notation, which re-parses
/// bit-stably at this precision.
pub fn fmt_g(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e12 {
        format!("{x}")
    } else {
        format!("{x:.11e}")
    }
}

/// A CSV document with `# key = value` metadata lines above the header.
pub struct CsvReport {
    metadata: Vec<(String, String)>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvReport {
    pub fn new(header: &[&str]) -> Self {
        Self {
            metadata: Vec::new(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl Into<String>) -> &mut Self {
        self.metadata.push((key.to_string(), value.into()));
        self
    }

    pub fn meta_f(&mut self, key: &str, value: f64) -> &mut Self {
        self.meta(key, fmt_g(value))
    }

    pub fn row(&mut self, cells: Vec<String>) -> &mut Self {
        assert_eq!(cells.len(), self.header.len(), "row width mismatch");
        self.rows.push(cells);
        self
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            out.push_str(&format!("# {k} = {v}\n"));
        }
        out.push_str(&self.header.join(","));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.render().as_bytes())
    }
}

/// Write a file atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Parse a rendered CSV report back into (metadata, header, rows of f64-able
/// strings). Used by round-trip checks and downstream tooling.
pub fn parse_csv(text: &str) -> Result<(Vec<(String, String)>, Vec<String>, Vec<Vec<String>>)> {
    let mut metadata = Vec::new();
    let mut header = Vec::new();
    let mut rows = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# ") {
            if let Some((k, v)) = rest.split_once(" = ") {
                metadata.push((k.to_string(), v.to_string()));
            }
            continue;
        }
        let cells: Vec<String> = line.split(',').map(|s| s.to_string()).collect();
        if header.is_empty() {
            header = cells;
        } else {
            rows.push(cells);
        }
    }
    Ok((metadata, header, rows))
}
