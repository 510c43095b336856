use std::fs;
use std::path::{Path, PathBuf};

use crate::{SimCellResult, SimResult};

const HEADER: [&str; 20] = [
    "cell_id",
    "method",
    "se_kind",
    "true_se",
    "median_pct_err",
    "mean_pct_err",
    "rmse",
    "mean_se",
    "mu_bias",
    "mu_variance",
    "mu_coverage",
    "tau2_bias",
    "tau2_variance",
    "tau2_coverage",
    "mean_i2",
    "true_i2",
    "i2_bias",
    "i2_median_bias",
    "used",
    "flagged",
];

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn rows(cell: &SimCellResult) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    for m in &cell.study {
        let mut row = vec![cell.cell_id.clone(), m.method.to_string(), m.se_kind.to_string()];
        row.extend([m.true_se, m.median_pct_err, m.mean_pct_err, m.rmse, m.mean_se].map(num));
        row.extend(std::iter::repeat_n(String::new(), 10));
        row.extend([m.used.to_string(), String::new()]);
        out.push(row);
    }
    for m in &cell.meta {
        let mut row = vec![cell.cell_id.clone(), m.method.to_string(), m.se_kind.to_string()];
        row.extend(std::iter::repeat_n(String::new(), 5));
        row.extend(
            [m.mu_bias, m.mu_variance, m.mu_coverage, m.tau2_bias, m.tau2_variance, m.tau2_coverage, m.mean_i2]
                .map(num),
        );
        row.extend([opt(m.true_i2), opt(m.i2_bias), opt(m.i2_median_bias)]);
        row.extend([m.used.to_string(), m.flagged.to_string()]);
        out.push(row);
    }
    out
}

/// Write `<dir>/<cell_id>.csv` and `<dir>/<cell_id>.json`; returns both paths.
pub fn write_cell(cell: &SimCellResult, dir: &Path) -> SimResult<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{}.csv", cell.cell_id));
    let json_path = dir.join(format!("{}.json", cell.cell_id));
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(HEADER)?;
    for row in rows(cell) {
        w.write_record(row)?;
    }
    w.flush()?;
    fs::write(&json_path, serde_json::to_string_pretty(cell)?)?;
    Ok((csv_path, json_path))
}

/// One CSV with the metric rows of every cell.
pub fn write_combined_csv(cells: &[SimCellResult], path: &Path) -> SimResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(HEADER)?;
    for cell in cells {
        for row in rows(cell) {
            w.write_record(row)?;
        }
    }
    w.flush()?;
    Ok(())
}
