use std::io::Write;

use serde_json::Value;

use crate::config::Format;

pub const SCHEMA_VERSION: u32 = 1;

/// Why a run ended unsuccessfully; maps onto the process exit code.
#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Violation(String),
    Insufficient(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Violation(_) => 2,
            Failure::Insufficient(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Violation(m) | Failure::Insufficient(m) => m,
        }
    }
}

impl From<erw_core::Error> for Failure {
    fn from(e: erw_core::Error) -> Self {
        use erw_core::Error;
        match e {
            Error::InsufficientRegenerations { .. } => Failure::Insufficient(e.to_string()),
            Error::CouplingViolation { .. } => Failure::Violation(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<crate::config::ConfigError> for Failure {
    fn from(e: crate::config::ConfigError) -> Self {
        Failure::Validation(e.0)
    }
}

/// A command's result in both output formats.
pub struct Report {
    pub json: Value,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    /// Set when the report is complete but the run must still exit nonzero.
    pub failure: Option<Failure>,
}

impl Report {
    pub fn write(&self, format: Format, out: &mut dyn Write) -> std::io::Result<()> {
        match format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut *out, &self.json)?;
                writeln!(out)
            }
            Format::Csv => {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(&self.header)?;
                for row in &self.rows {
                    w.write_record(row)?;
                }
                w.flush()
            }
        }
    }
}

pub fn num(x: f64) -> String {
    x.to_string()
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn joined(xs: impl IntoIterator<Item = impl ToString>) -> String {
    xs.into_iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}
