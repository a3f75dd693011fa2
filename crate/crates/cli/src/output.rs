use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::Format;

/// CSV or JSON writer over stdout or a file.
pub struct Sink {
    out: Box<dyn Write>,
    format: Format,
}

impl Sink {
    pub fn open(path: Option<&Path>, format: Format) -> Result<Self> {
        let out: Box<dyn Write> = match path {
            Some(p) => {
                Box::new(BufWriter::new(File::create(p).with_context(|| {
                    format!("cannot create output file {}", p.display())
                })?))
            }
            None => Box::new(BufWriter::new(io::stdout().lock())),
        };
        Ok(Sink { out, format })
    }

    /// Header plus one line per row (CSV) or a JSON array.
    pub fn rows<T: Serialize>(mut self, rows: &[T]) -> Result<()> {
        match self.format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(&mut self.out);
                for r in rows {
                    w.serialize(r)?;
                }
                w.flush()?;
            }
            Format::Json => {
                serde_json::to_writer_pretty(&mut self.out, rows)?;
                writeln!(self.out)?;
            }
        }
        self.out.flush()?;
        Ok(())
    }

    /// A single record: a JSON object, or a one-row CSV table.
    pub fn one<T: Serialize>(mut self, row: &T) -> Result<()> {
        match self.format {
            Format::Csv => self.rows(std::slice::from_ref(row)),
            Format::Json => {
                serde_json::to_writer_pretty(&mut self.out, row)?;
                writeln!(self.out)?;
                self.out.flush()?;
                Ok(())
            }
        }
    }
}
