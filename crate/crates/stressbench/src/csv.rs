//! Minimal CSV emission: one header, one line per row, deterministic float
//! formatting via the shortest round-trip representation.

use anyhow::{Context, Result};
use std::io::Write;
use std::path::Path;

/// A row type that knows its header and its comma-separated rendering.
pub trait CsvRow {
    const HEADER: &'static str;
    fn render(&self) -> String;
}

pub fn render<R: CsvRow>(rows: Vec<R>) -> (&'static str, Vec<String>) {
    (R::HEADER, rows.iter().map(CsvRow::render).collect())
}

pub fn write_file(path: &Path, header: &str, lines: &[String]) -> Result<()> {
    let mut file = std::fs::File::create(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    writeln!(file, "{header}").context("write header")?;
    for line in lines {
        writeln!(file, "{line}").context("write row")?;
    }
    Ok(())
}
