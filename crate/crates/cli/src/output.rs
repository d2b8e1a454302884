//! CSV and JSON emission. Floats are written with 17 significant digits so
//! that every value parses back to the same `f64`.

use std::io::Write;

use crate::CliError;

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct Csv {
    writer: csv::Writer<Vec<u8>>,
}

impl Csv {
    pub fn new(header: &[String]) -> Result<Self, CliError> {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        writer.write_record(header).map_err(|e| CliError::Io(e.to_string()))?;
        Ok(Csv { writer })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<(), CliError> {
        self.writer.write_record(fields).map_err(|e| CliError::Io(e.to_string()))
    }

    pub fn finish(self) -> Result<String, CliError> {
        let bytes = self.writer.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
    }
}

pub fn json<T: serde::Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Writes to `path`, or stdout when it is empty.
pub fn emit(path: &str, content: &str) -> Result<(), CliError> {
    if path.is_empty() {
        let mut out = std::io::stdout().lock();
        out.write_all(content.as_bytes()).and_then(|_| out.flush()).map_err(|e| CliError::Io(e.to_string()))
    } else {
        std::fs::write(path, content).map_err(|e| CliError::Io(format!("{path}: {e}")))
    }
}
