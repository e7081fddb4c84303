//! Files written by a benchmark run.

use std::fs;
use std::path::Path;

use super::bench::{BenchmarkRun, CellErrors, RunRecord};
use crate::error::Result;
use crate::metrics::{deterministic_table, probabilistic_table};

pub const REPORT_FILE: &str = "report.json";
pub const ERRORS_FILE: &str = "errors.json";
pub const TIMINGS_FILE: &str = "timings.json";
pub const TABLES_FILE: &str = "tables.txt";
pub const PLOTS_DIR: &str = "plots";

pub fn tables_text(record: &RunRecord) -> String {
    let mut out = String::from("Deterministic metrics\n");
    out.push_str(&deterministic_table(&record.reports));
    out.push_str("\nProbabilistic metrics\n");
    out.push_str(&probabilistic_table(&record.reports));
    if !record.failed.is_empty() {
        out.push_str("\nFailed cells\n");
        for f in &record.failed {
            out.push_str(&format!("{} {} h={}: {}\n", f.dataset, f.model, f.horizon, f.error));
        }
    }
    out
}

/// Write `report.json`, `errors.json`, `timings.json`, `tables.txt` and one plot CSV per cell.
pub fn write_run(dir: &Path, run: &BenchmarkRun, quantiles: &[f64]) -> Result<()> {
    fs::create_dir_all(dir.join(PLOTS_DIR))?;
    fs::write(dir.join(REPORT_FILE), serde_json::to_string_pretty(&run.record)?)?;
    fs::write(dir.join(ERRORS_FILE), serde_json::to_string_pretty(&run.errors)?)?;
    fs::write(dir.join(TIMINGS_FILE), serde_json::to_string_pretty(&run.timings)?)?;
    fs::write(dir.join(TABLES_FILE), tables_text(&run.record))?;
    for ((model, dataset, h), rows) in &run.plots {
        let path = dir.join(PLOTS_DIR).join(format!("{model}__{dataset}__h{h}.csv"));
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["series_id".to_string(), "timestamp".into(), "actual".into(), "point".into()];
        header.extend(quantiles.iter().map(|a| format!("q{a}")));
        w.write_record(&header)?;
        for r in rows {
            let mut rec = vec![r.series_id.clone(), r.timestamp.clone(), r.actual.to_string(), r.point.to_string()];
            rec.extend(r.quantiles.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    Ok(())
}

pub fn read_record(dir: &Path) -> Result<RunRecord> {
    let path = dir.join(REPORT_FILE);
    if !path.is_file() {
        return Err(crate::Error::MissingFile(path));
    }
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn read_errors(dir: &Path) -> Result<Vec<CellErrors>> {
    let path = dir.join(ERRORS_FILE);
    if !path.is_file() {
        return Err(crate::Error::MissingFile(path));
    }
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}
