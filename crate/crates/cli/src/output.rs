use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Six significant digits, never in exponent form.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).clamp(0, 17) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn join(values: &[f64], sep: &str) -> String {
    values.iter().map(|&v| sig6(v)).collect::<Vec<_>>().join(sep)
}

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

/// Writes to `path`, or stdout when absent.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

/// CSV with a commented echo of the command and its resolved configuration.
pub fn write_csv<C: Serialize>(command: &str, config: &C, table: &Table, path: Option<&Path>) -> Result<()> {
    let mut out = sink(path)?;
    writeln!(out, "# irsa {command}")?;
    writeln!(out, "# config {}", serde_json::to_string(config)?)?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Envelope<'a, C, R> {
    command: &'a str,
    config: &'a C,
    result: &'a R,
}

pub fn write_json<C: Serialize, R: Serialize>(command: &str, config: &C, result: &R, path: Option<&Path>) -> Result<()> {
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, &Envelope { command, config, result })?;
    writeln!(out)?;
    Ok(())
}

/// Emits a result in the requested format; `table` builds the CSV form.
pub fn emit<C: Serialize, R: Serialize>(
    command: &str,
    config: &C,
    format: Format,
    path: Option<&Path>,
    result: &R,
    table: impl FnOnce() -> Table,
) -> Result<()> {
    match format {
        Format::Json => write_json(command, config, result, path),
        Format::Csv => write_csv(command, config, &table(), path),
    }
}

#[cfg(test)]
mod tests {
    use super::sig6;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.4051234567), "0.405123");
        assert_eq!(sig6(1.0 / 3.0), "0.333333");
        assert_eq!(sig6(17.256789), "17.2568");
        assert_eq!(sig6(0.5), "0.5");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(-0.00012345678), "-0.000123457");
    }
}
