//! Human-readable tables on stdout, JSON lines to a file (or stdout).

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde_json::Value;

use crate::error::{runtime, CliError};

/// Collects JSON report lines and writes them in insertion order.
#[derive(Debug, Default)]
pub struct JsonLines {
    lines: Vec<Value>,
}

impl JsonLines {
    pub fn push(&mut self, line: Value) {
        self.lines.push(line);
    }

    /// Writes to `path`, or to stdout after a blank line when `path` is `None`.
    pub fn write(&self, path: Option<&Path>) -> Result<(), CliError> {
        let io_err = |e: io::Error| runtime(format!("writing report: {e}"));
        match path {
            Some(path) => {
                let file = File::create(path)
                    .map_err(|e| runtime(format!("cannot create {}: {e}", path.display())))?;
                let mut out = BufWriter::new(file);
                self.write_to(&mut out).map_err(io_err)?;
                out.flush().map_err(io_err)
            }
            None => {
                let mut out = io::stdout().lock();
                writeln!(out).map_err(io_err)?;
                self.write_to(&mut out).map_err(io_err)
            }
        }
    }

    fn write_to(&self, out: &mut impl Write) -> io::Result<()> {
        for line in &self.lines {
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// Left-aligned first column, right-aligned rest, widths fitted to content.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let fmt_row = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, &w))| {
                if i == 0 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = fmt_row(header.to_vec());
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    for row in rows {
        out.push('\n');
        out.push_str(&fmt_row(row.iter().map(String::as_str).collect()));
    }
    out
}
