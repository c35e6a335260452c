//! Result tables, CSV emission and the `.meta.json` sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

pub const TOOL: &str = "slowfast-vr";

/// Everything needed to re-run an experiment and interpret its table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub config: ExperimentConfig,
    /// Micro step actually used once `"nobias"` is resolved.
    pub micro_delta_t: f64,
    pub columns: Vec<String>,
    pub rows: usize,
    pub cost: Cost,
    #[serde(default)]
    pub summary: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cost {
    pub total_micro_steps: u64,
    pub realizations: usize,
}

/// Rectangular table of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Main table plus its companions, e.g. the density grid of a single-step run.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub table: Table,
    pub density: Option<Table>,
    pub metadata: Metadata,
}

impl ResultTable {
    /// Writes `<path>`, `<path>.meta.json` (extension replaced) and, if present, `<base>.kde.csv`.
    pub fn write(&self, path: &Path) -> Result<Vec<PathBuf>> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        let mut written = vec![path.to_path_buf()];
        emit_csv(&self.table, path)?;
        let meta = sidecar_path(path, "meta.json");
        let text = serde_json::to_string_pretty(&self.metadata).expect("metadata serializes");
        fs::write(&meta, text + "\n").map_err(|e| CliError::io(&meta, e))?;
        written.push(meta);
        if let Some(density) = &self.density {
            let kde = sidecar_path(path, "kde.csv");
            emit_csv(density, &kde)?;
            written.push(kde);
        }
        Ok(written)
    }
}

/// `results/fig2.csv` → `results/fig2.<suffix>`.
pub fn sidecar_path(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

/// Round-trip exact: 17 significant digits.
fn format_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

pub fn emit_csv(table: &Table, path: &Path) -> Result<()> {
    let csv_err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    writer.write_record(&table.columns).map_err(csv_err)?;
    for row in &table.rows {
        writer.write_record(row.iter().map(|&v| format_real(v))).map_err(csv_err)?;
    }
    writer.flush().map_err(|e| CliError::io(path, e))
}

pub fn parse_csv(path: &Path) -> Result<Table> {
    let csv_err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let columns: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let mut table = Table::new(columns);
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let row = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .map_err(|e| CliError::io(path, std::io::Error::new(std::io::ErrorKind::InvalidData, format!("'{field}': {e}"))))
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != table.columns.len() {
            return Err(CliError::io(
                path,
                std::io::Error::new(std::io::ErrorKind::InvalidData, "ragged row"),
            ));
        }
        table.rows.push(row);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_names() {
        assert_eq!(sidecar_path(Path::new("out/fig5.csv"), "meta.json"), PathBuf::from("out/fig5.meta.json"));
        assert_eq!(sidecar_path(Path::new("run"), "kde.csv"), PathBuf::from("run.kde.csv"));
    }

    #[test]
    fn reals_keep_seventeen_digits() {
        assert_eq!(format_real(0.1), "1.0000000000000001e-1");
        for v in [0.1, -6.944_444_444_444_445, 1e-300, 3.0, f64::MIN_POSITIVE] {
            assert_eq!(format_real(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_real(f64::NAN), "NaN");
        assert_eq!(format_real(f64::INFINITY), "inf");
    }
}
