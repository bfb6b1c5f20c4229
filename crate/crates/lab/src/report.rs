//! Summaries over stored records: a markdown table plus log-log series.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use mpcorr_core::stats::{loglog_fit, Fit};

use crate::record::{Grid, ResultRecord};

/// Columns that are plotted against `n` when a grid has them.
const Y_COLUMNS: &[&str] = &["abs_deviation", "total", "sup_e_minus_eb", "sup_eb_minus_ebb"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub fit: Fit,
}

/// A log-log series with its least-squares line. Empty, ragged or
/// non-positive data is rejected.
pub fn series(name: &str, x: &[f64], y: &[f64]) -> anyhow::Result<Series> {
    if x.is_empty() || y.is_empty() {
        bail!("series `{name}` is empty");
    }
    if x.len() != y.len() {
        bail!("series `{name}` has {} x values but {} y values", x.len(), y.len());
    }
    if let Some(v) = x.iter().chain(y).find(|v| !(v.is_finite() && **v > 0.0)) {
        bail!("series `{name}` has a non-positive or non-finite value {v}");
    }
    let fit = loglog_fit(x, y).with_context(|| format!("series `{name}` needs two distinct x values"))?;
    Ok(Series { name: name.into(), x: x.to_vec(), y: y.to_vec(), fit })
}

/// Keeps the latest record for each config hash, in first-seen order.
pub fn dedupe(records: &[ResultRecord]) -> Vec<ResultRecord> {
    let mut order: Vec<&str> = Vec::new();
    let mut latest: BTreeMap<&str, &ResultRecord> = BTreeMap::new();
    for r in records {
        if latest.insert(&r.config_hash, r).is_none() {
            order.push(&r.config_hash);
        }
    }
    order.into_iter().map(|h| latest[h].clone()).collect()
}

#[derive(Debug, Clone)]
pub struct Report {
    pub records: Vec<ResultRecord>,
    pub series: Vec<Series>,
    pub notes: Vec<String>,
    pub markdown: String,
}

/// Splits a grid into `n`-series, one per y column and per value of any
/// `theta`/`m` column.
fn grid_series(prefix: &str, grid: &Grid, out: &mut Vec<Series>, notes: &mut Vec<String>) {
    let Some(n) = grid.column("n") else { return };
    let group_cols: Vec<&str> = ["theta", "m"].into_iter().filter(|c| grid.columns.iter().any(|x| x == c)).collect();
    let groups: Vec<Vec<Option<f64>>> = group_cols.iter().map(|c| grid.column(c).unwrap()).collect();
    for ycol in Y_COLUMNS {
        let Some(y) = grid.column(ycol) else { continue };
        let mut keyed: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        let mut bad = false;
        for i in 0..n.len() {
            let key: String = group_cols.iter().zip(&groups).map(|(c, g)| format!(".{c}{}", g[i].map(|v| v.to_string()).unwrap_or_default())).collect();
            let e = keyed.entry(key).or_default();
            match (n[i], y[i]) {
                (Some(a), Some(b)) => {
                    e.0.push(a);
                    e.1.push(b);
                }
                _ => bad = true,
            }
        }
        if bad {
            notes.push(format!("{prefix}.{ycol}: rows with missing values dropped"));
        }
        if keyed.is_empty() {
            keyed.insert(String::new(), (Vec::new(), Vec::new()));
        }
        for (key, (x, y)) in keyed {
            let name = format!("{prefix}{key}.{ycol}");
            match series(&name, &x, &y) {
                Ok(s) => out.push(s),
                Err(e) => notes.push(format!("{e:#}")),
            }
        }
    }
}

pub fn report(records: &[ResultRecord]) -> anyhow::Result<Report> {
    if records.is_empty() {
        bail!("no records to report on");
    }
    let records = dedupe(records);
    let mut series_out = Vec::new();
    let mut notes = Vec::new();
    for r in &records {
        for (gname, grid) in &r.grids {
            grid_series(&format!("{}.{gname}", r.name), grid, &mut series_out, &mut notes);
        }
    }

    let mut md = String::new();
    writeln!(md, "# Experiment summary\n").unwrap();
    writeln!(md, "| name | kind | check | config | runtime (s) | result | failed certificates |").unwrap();
    writeln!(md, "|---|---|---|---|---:|---|---|").unwrap();
    for r in &records {
        let failed = r.failed().join(", ");
        writeln!(
            md,
            "| {} | {} | {} | `{}` | {:.2} | {} | {} |",
            r.name,
            r.kind,
            r.check.as_deref().unwrap_or("-"),
            r.hash12(),
            r.runtime_ms / 1e3,
            if r.pass { "PASS" } else { "FAIL" },
            if failed.is_empty() { "-" } else { &failed }
        )
        .unwrap();
    }
    if !series_out.is_empty() {
        writeln!(md, "\n## Log-log fits\n").unwrap();
        writeln!(md, "| series | points | slope | R² |").unwrap();
        writeln!(md, "|---|---:|---:|---:|").unwrap();
        for s in &series_out {
            writeln!(md, "| {} | {} | {:.4} | {:.4} |", s.name, s.x.len(), s.fit.slope, s.fit.r2).unwrap();
        }
    }
    for r in &records {
        if !r.diagnostics.is_empty() {
            writeln!(md, "\n### {} diagnostics\n", r.name).unwrap();
            for d in &r.diagnostics {
                writeln!(md, "- {d}").unwrap();
            }
        }
    }
    if !notes.is_empty() {
        writeln!(md, "\n## Notes\n").unwrap();
        for n in &notes {
            writeln!(md, "- {n}").unwrap();
        }
    }
    Ok(Report { records, series: series_out, notes, markdown: md })
}

/// Writes `report.md` and one `series-<name>.csv` per series.
pub fn write(dir: &Path, rep: &Report) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let md = dir.join("report.md");
    fs::write(&md, &rep.markdown)?;
    let mut out = vec![md];
    for s in &rep.series {
        let p = dir.join(format!("series-{}.csv", s.name));
        let mut w = csv::Writer::from_path(&p)?;
        w.write_record(["n", "value", "fit"])?;
        for (x, y) in s.x.iter().zip(&s.y) {
            let f = (s.fit.intercept + s.fit.slope * x.ln()).exp();
            w.write_record([format!("{x:e}"), format!("{y:e}"), format!("{f:e}")])?;
        }
        w.flush()?;
        out.push(p);
    }
    Ok(out)
}
