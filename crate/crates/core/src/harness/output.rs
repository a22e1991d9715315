//! CSV and JSON persistence of result tables.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentSpec;
use super::experiment::{ResultTable, SeriesColumn};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Twelve significant digits.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.11e}")
    } else {
        v.to_string()
    }
}

fn round12(v: f64) -> f64 {
    if v.is_finite() {
        format_float(v).parse().unwrap_or(v)
    } else {
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub code_version: String,
    pub spec: ExperimentSpec,
    pub sweep_parameter: String,
    pub sweep: Vec<f64>,
    pub metric: String,
    pub series: Vec<SeriesColumn>,
}

impl Summary {
    pub fn from_table(table: &ResultTable) -> Self {
        let round = |v: &[f64]| v.iter().map(|&x| round12(x)).collect::<Vec<_>>();
        Self {
            schema_version: SCHEMA_VERSION,
            code_version: table.code_version.clone(),
            spec: table.spec.clone(),
            sweep_parameter: table.spec.sweep.parameter.column().to_string(),
            sweep: round(&table.sweep),
            metric: table.metric().column_prefix().to_string(),
            series: table
                .series
                .iter()
                .map(|c| SeriesColumn {
                    key: c.key.clone(),
                    label: c.label.clone(),
                    mean: round(&c.mean),
                    stderr: round(&c.stderr),
                    approx: c.approx.as_deref().map(round),
                })
                .collect(),
        }
    }
}

pub fn csv_header(table: &ResultTable) -> Vec<String> {
    let prefix = table.metric().column_prefix();
    let mut header = vec![table.spec.sweep.parameter.column().to_string()];
    for c in &table.series {
        header.push(format!("{prefix}_{}", c.key));
        header.push(format!("stderr_{}", c.key));
        if c.approx.is_some() {
            header.push(format!("approx_{}", c.key));
        }
    }
    header
}

pub fn write_csv<W: std::io::Write>(table: &ResultTable, out: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(table))?;
    for (p, &x) in table.sweep.iter().enumerate() {
        let mut record = vec![format_float(x)];
        for c in &table.series {
            record.push(format_float(c.mean[p]));
            record.push(format_float(c.stderr[p]));
            if let Some(a) = &c.approx {
                record.push(format_float(a[p]));
            }
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `<name>.csv` and `<name>.json` into `out_dir`, returning both paths.
pub fn write_outputs(table: &ResultTable, out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| Error::Io { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let name = table.spec.name.name();
    let csv_path = out_dir.join(format!("{name}.csv"));
    let json_path = out_dir.join(format!("{name}.json"));

    let mut buf = Vec::new();
    write_csv(table, &mut buf).map_err(|e| Error::Io {
        path: csv_path.clone(),
        source: std::io::Error::other(e),
    })?;
    fs::write(&csv_path, buf).map_err(io_err(&csv_path))?;

    let mut json = serde_json::to_string_pretty(&Summary::from_table(table)).map_err(|e| Error::Io {
        path: json_path.clone(),
        source: std::io::Error::other(e),
    })?;
    json.push('\n');
    fs::write(&json_path, json).map_err(io_err(&json_path))?;
    Ok((csv_path, json_path))
}

/// Reads the spec back from a JSON summary.
pub fn read_summary(path: &Path) -> Result<Summary> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
    })
}
