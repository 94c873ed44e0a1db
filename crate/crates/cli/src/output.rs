//! CSV tables with `#` provenance lines ahead of the header.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::error::CliResult;

/// Single writer for one command: `--out` file or stdout.
pub struct Sink {
    inner: Box<dyn Write>,
}

impl Sink {
    pub fn open(out: Option<&Path>) -> CliResult<Self> {
        let inner: Box<dyn Write> = match out {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        };
        Ok(Sink { inner })
    }

    pub fn comment(&mut self, line: &str) -> CliResult<()> {
        writeln!(self.inner, "# {line}")?;
        Ok(())
    }

    pub fn line(&mut self, line: &str) -> CliResult<()> {
        writeln!(self.inner, "{line}")?;
        Ok(())
    }

    /// Writes `header` and `rows`; every row must match the header width.
    pub fn table<I, R>(&mut self, header: &[&str], rows: I) -> CliResult<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let mut w = csv::Writer::from_writer(&mut self.inner);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.inner.flush()?;
        Ok(())
    }
}

/// 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}
