//! Plain-text output helpers shared by the scan modules and the CLI.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

/// A float with 17 significant digits ('.' decimal separator).
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    format!("{v:.16e}")
}

/// As [`fmt_f64`]; `None` and non-finite values become an empty field.
pub fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(v) if v.is_finite() => fmt_f64(v),
        _ => String::new(),
    }
}

/// Ordered `key = value` metadata, written next to a CSV file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata {
    entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(self.render().as_bytes())
    }

    /// Writes `<csv path>.meta`.
    pub fn write_sidecar(&self, csv_path: &Path) -> io::Result<()> {
        std::fs::write(sidecar_path(csv_path), self.render())
    }
}

pub fn sidecar_path(csv_path: &Path) -> std::path::PathBuf {
    let mut name = csv_path.as_os_str().to_owned();
    name.push(".meta");
    name.into()
}
