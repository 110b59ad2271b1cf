//! CSV files and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::error::CliError;

/// Seventeen significant digits, enough to round-trip an `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Output directory plus the list of files written so far.
pub struct Sink {
    dir: PathBuf,
    pub files: Vec<String>,
}

impl Sink {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(self.dir.join(name))?;
        w.write_record(&table.header)?;
        for r in &table.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        log::info!("wrote {} ({} rows)", name, table.len());
        Ok(())
    }
}

#[derive(Serialize, Debug, Clone)]
pub struct Phase {
    pub name: String,
    pub seconds: f64,
}

#[derive(Serialize, Debug, Clone)]
pub struct Residual {
    pub name: String,
    pub max: f64,
}

#[derive(Serialize, Debug, Clone)]
pub struct Drift {
    pub quantity: String,
    pub max_drift: f64,
}

#[derive(Serialize, Debug, Clone)]
pub struct Manifest {
    pub artifact: &'static str,
    pub version: &'static str,
    pub command: String,
    pub status: String,
    pub exit_code: u8,
    pub error: Option<String>,
    pub seed: u64,
    pub config: serde_json::Value,
    pub phases: Vec<Phase>,
    /// Largest value of each residual diagnostic over the run.
    pub residuals: Vec<Residual>,
    pub drift: Vec<Drift>,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Self {
            artifact: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            status: "ok".into(),
            exit_code: 0,
            error: None,
            seed: 0,
            config: serde_json::Value::Null,
            phases: Vec::new(),
            residuals: Vec::new(),
            drift: Vec::new(),
            files: Vec::new(),
        }
    }

    /// Runs `f` and records its wall time under `name`.
    pub fn phase<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> T) -> T {
        let start = Instant::now();
        let out = f(self);
        self.phases.push(Phase {
            name: name.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }

    pub fn residual(&mut self, name: &str, value: f64) {
        match self.residuals.iter_mut().find(|r| r.name == name) {
            Some(r) => r.max = r.max.max(value),
            None => self.residuals.push(Residual {
                name: name.to_string(),
                max: value,
            }),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(self)?;
        fs::write(dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}
