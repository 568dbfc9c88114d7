//! Output plumbing: stdout-or-file sinks and locale-independent number
//! formatting.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::CliResult;

/// Where the primary output artifact goes.
pub enum Sink {
    Stdout(io::Stdout),
    File(BufWriter<File>),
}

impl Sink {
    pub fn new(out: Option<&Path>) -> CliResult<Self> {
        Ok(match out {
            None => Sink::Stdout(io::stdout()),
            Some(path) => Sink::File(BufWriter::new(File::create(path)?)),
        })
    }

    pub fn writer(&mut self) -> &mut dyn Write {
        match self {
            Sink::Stdout(s) => s,
            Sink::File(f) => f,
        }
    }

    pub fn finish(self) -> CliResult<()> {
        if let Sink::File(mut f) = self {
            f.flush()?;
        }
        Ok(())
    }
}

/// `value` in scientific notation with the given count of significant
/// digits; always uses `.` as the decimal separator.
pub fn fmt_sig(value: f64, sig_digits: usize) -> String {
    format!("{:.*e}", sig_digits.saturating_sub(1), value)
}

/// Optional value for CSV cells: empty when absent.
pub fn fmt_opt_sig(value: Option<f64>, sig_digits: usize) -> String {
    value.map_or_else(String::new, |v| fmt_sig(v, sig_digits))
}

/// Pretty JSON plus a trailing newline.
pub fn write_json<T: serde::Serialize>(sink: &mut Sink, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)?;
    writeln!(sink.writer(), "{text}").map_err(Into::into)
}
