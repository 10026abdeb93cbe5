//! Versioned CSV: two comment lines (`#schema=1`, `#kind=...`), a header, rows.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};

use crate::config::Kind;
use crate::run::Table;

pub const SCHEMA_VERSION: u32 = 1;

pub fn to_bytes(table: &Table) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    writeln!(buf, "#schema={SCHEMA_VERSION}")?;
    writeln!(buf, "#kind={}", table.kind)?;
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let mut header: Vec<&str> = table.columns.clone();
        header.push("status");
        w.write_record(&header)?;
        for r in &table.records {
            w.write_record(r.cells.iter().map(String::as_str).chain([r.status.as_str()]))?;
        }
        w.flush()?;
    }
    Ok(buf)
}

/// Write through a temporary file in the target directory, then rename.
pub fn write_atomic(table: &Table, path: &Path) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(&to_bytes(table)?)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Rows keyed by column name, as read back from disk.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub kind: Kind,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("column `{name}` missing"))
    }

    /// Parsed numeric cell; `None` when blank.
    pub fn num(&self, row: &[String], col: usize) -> Option<f64> {
        let s = row[col].trim();
        if s.is_empty() {
            None
        } else {
            s.parse().ok()
        }
    }
}

pub fn read(path: &Path) -> Result<CsvTable> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut reader = BufReader::new(file);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    if line.trim_end() != format!("#schema={SCHEMA_VERSION}") {
        bail!("{}: expected `#schema={SCHEMA_VERSION}`, found `{}`", path.display(), line.trim_end());
    }
    line.clear();
    reader.read_line(&mut line)?;
    let kind = line
        .trim_end()
        .strip_prefix("#kind=")
        .and_then(Kind::parse)
        .with_context(|| format!("{}: missing or unknown `#kind=` line", path.display()))?;
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(str::to_owned).collect());
    }
    Ok(CsvTable { kind, header, rows })
}
