//! Result files: `results.csv`, `records.json` and `resolved_config.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::spec::ExperimentSpec;
use crate::sweep::{aggregate, SummaryRow, TrialRecord};
use crate::HarnessError;

pub const CSV_FILE: &str = "results.csv";
pub const RECORDS_FILE: &str = "records.json";
pub const CONFIG_FILE: &str = "resolved_config.json";

/// Column order of `results.csv`.
pub const CSV_HEADER: [&str; 11] = [
    "sweep_value",
    "scheme",
    "avg_power_dbm",
    "feasibility_pct",
    "n_common_feasible",
    "avg_power_w",
    "std_error_w",
    "n_feasible",
    "n_realizations",
    "feasible_avg_power_dbm",
    "feasible_std_error_w",
];

/// Contents of `records.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordsFile {
    pub config: ExperimentSpec,
    pub summary: Vec<SummaryRow>,
    pub records: Vec<TrialRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportPaths {
    pub csv: PathBuf,
    pub records: PathBuf,
    pub config: PathBuf,
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::Config(e.to_string()))?;
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

/// Writes the three result files into `dir`, creating it if needed.
pub fn emit_report(records: &[TrialRecord], spec: &ExperimentSpec, dir: &Path) -> Result<ReportPaths, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::Config("no records to report".into()));
    }
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let paths = ReportPaths {
        csv: dir.join(CSV_FILE),
        records: dir.join(RECORDS_FILE),
        config: dir.join(CONFIG_FILE),
    };
    let summary = aggregate(records, spec);

    let csv_err = |e: csv::Error| HarnessError::Config(format!("{}: {e}", paths.csv.display()));
    let mut w = csv::Writer::from_path(&paths.csv).map_err(csv_err)?;
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in &summary {
        w.write_record([
            r.sweep_value.to_string(),
            r.scheme.clone(),
            opt(r.avg_power_dbm),
            r.feasibility_pct.to_string(),
            r.n_common_feasible.to_string(),
            opt(r.avg_power_w),
            opt(r.std_error_w),
            r.n_feasible.to_string(),
            r.n_realizations.to_string(),
            opt(r.feasible_avg_power_dbm),
            opt(r.feasible_std_error_w),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| HarnessError::io(&paths.csv, e))?;

    write_json(
        &paths.records,
        &RecordsFile {
            config: spec.clone(),
            summary,
            records: records.to_vec(),
        },
    )?;
    write_json(&paths.config, spec)?;
    Ok(paths)
}

pub fn load_records(path: &Path) -> Result<RecordsFile, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
}
