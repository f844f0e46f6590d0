//! CSV text and run manifests.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::FileConfig;
use crate::CliError;

/// Full-precision scientific notation (17 significant digits).
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV document with a one-line header; cells are written as given.
#[derive(Debug, Clone, PartialEq)]
pub struct Csv {
    pub name: String,
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            text: header.join(",") + "\n",
            columns: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        debug_assert_eq!(cells.len(), self.columns);
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

/// Result of one subcommand: files to write and a report for stdout.
#[derive(Debug, Default)]
pub struct Outputs {
    pub files: Vec<Csv>,
    pub report: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    master_seed: u64,
    workers: usize,
    files: Vec<&'a str>,
    config: &'a FileConfig,
    timestamp_unix: u64,
}

/// Writes every file into `dir`, then `<command>.manifest.json`.
pub fn write_all(
    dir: &Path,
    command: &str,
    cfg: &FileConfig,
    workers: usize,
    out: &Outputs,
) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for f in &out.files {
        let p = dir.join(&f.name);
        std::fs::write(&p, f.text())?;
        written.push(p);
    }
    let manifest = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        master_seed: cfg.experiment.master_seed,
        workers,
        files: out.files.iter().map(|f| f.name.as_str()).collect(),
        config: cfg,
        timestamp_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let p = dir.join(format!("{command}.manifest.json"));
    std::fs::write(&p, serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n")?;
    written.push(p);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_keep_seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        let v = std::f64::consts::LN_2 / 0.1;
        assert_eq!(num(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn csv_layout() {
        let mut c = Csv::new("x.csv", &["a", "b"]);
        c.row(&["1".into(), num(2.0)]);
        assert_eq!(c.text(), "a,b\n1,2.0000000000000000e0\n");
    }
}
