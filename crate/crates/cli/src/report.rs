//! CSV reports and the run manifest.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

use crate::config::RunConfig;
use crate::error::CliError;

/// An in-memory CSV table written in one go.
pub struct Csv {
    pub name: String,
    text: String,
}

impl Csv {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.to_string(), text: format!("{}\n", header.join(",")) }
    }

    pub fn row(&mut self, fields: &[String]) {
        let _ = writeln!(self.text, "{}", fields.iter().map(|f| quote(f)).collect::<Vec<_>>().join(","));
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        write_file(dir, &self.name, &self.text)
    }
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

pub fn write_file(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

/// Contents of `run_manifest.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub subcommand: String,
    pub version: String,
    pub seed: u64,
    pub workers: usize,
    /// The effective configuration after command-line overrides.
    pub config: RunConfig,
    pub wall_time_seconds: f64,
    pub outputs: Vec<String>,
    pub exit_code: i32,
}

impl Manifest {
    pub const FILE: &'static str = "run_manifest.json";

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_file(dir, Self::FILE, &(text + "\n"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fields_with_commas_are_quoted() {
        let mut c = Csv::new("x.csv", &["a", "b"]);
        c.row(&["1".into(), "u = 0.5, ok".into()]);
        c.row(&["say \"hi\"".into(), "2".into()]);
        assert_eq!(c.text, "a,b\n1,\"u = 0.5, ok\"\n\"say \"\"hi\"\"\",2\n");
    }
}
