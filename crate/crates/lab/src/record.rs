//! Result records: one JSON object per line in `records.jsonl`, grids as CSV
//! sidecars next to it.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

pub const RECORDS_FILE: &str = "records.jsonl";

/// A table of numbers. Non-finite entries are stored as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Grid {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Grid {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row.iter().map(|v| v.is_finite().then_some(*v)).collect());
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn write_csv(&self, path: &Path) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.map(|x| format!("{x:e}")).unwrap_or_default()))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub name: String,
    pub kind: String,
    pub check: Option<String>,
    pub config_hash: String,
    pub code_version: String,
    pub started: String,
    pub finished: String,
    pub runtime_ms: f64,
    pub workers: usize,
    /// The fully resolved config, defaults included.
    pub config: BTreeMap<String, String>,
    pub defaults_version: u32,
    pub scalars: BTreeMap<String, f64>,
    pub grids: BTreeMap<String, Grid>,
    pub certificates: BTreeMap<String, bool>,
    pub diagnostics: Vec<String>,
    pub pass: bool,
}

impl ResultRecord {
    pub fn hash12(&self) -> &str {
        &self.config_hash[..12.min(self.config_hash.len())]
    }

    pub fn failed(&self) -> Vec<&str> {
        self.certificates.iter().filter(|(_, ok)| !**ok).map(|(k, _)| k.as_str()).collect()
    }

    pub fn sidecar_path(&self, dir: &Path, grid: &str) -> PathBuf {
        dir.join(format!("{}-{}-{grid}.csv", self.name, self.hash12()))
    }
}

/// Appends `rec` to `<dir>/records.jsonl` and writes its grids. Returns the
/// sidecar paths.
pub fn append(dir: &Path, rec: &ResultRecord) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let line = serde_json::to_string(rec)?;
    let path = dir.join(RECORDS_FILE);
    let mut f = OpenOptions::new().create(true).append(true).open(&path).with_context(|| format!("opening {}", path.display()))?;
    writeln!(f, "{line}")?;
    let mut out = Vec::new();
    for (name, grid) in &rec.grids {
        let p = rec.sidecar_path(dir, name);
        grid.write_csv(&p)?;
        out.push(p);
    }
    Ok(out)
}

pub fn read(path: &Path) -> anyhow::Result<Vec<ResultRecord>> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).with_context(|| format!("{}:{}: bad record", path.display(), i + 1))?;
        out.push(rec);
    }
    Ok(out)
}
