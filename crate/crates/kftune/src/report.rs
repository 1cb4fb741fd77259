//! Metric tables as CSV or JSON with a fixed column order.

use std::path::Path;

use serde_json::{json, Value};

use crate::error::{HarnessError, Result};
use crate::metrics::MetricsTable;
use crate::study::Archive;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// From a file extension; CSV unless it ends in `.json`.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

/// Column layout shared by every table in a report.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub parameter_names: Vec<String>,
    pub n: usize,
    pub m: usize,
    pub tables: Vec<MetricsTable>,
}

const PARAM_METRICS: [&str; 6] = [
    "theta_ratio",
    "crb_ratio",
    "consistency_ekf",
    "consistency_nr",
    "spread_ekf",
    "spread_nr",
];

impl Report {
    pub fn from_archive(archive: &Archive, tables: Vec<MetricsTable>) -> Self {
        Self {
            parameter_names: archive.parameter_names.clone(),
            n: archive.n(),
            m: archive.m(),
            tables,
        }
    }

    pub fn columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = ["method", "runs", "diverged", "unsettled", "clamp_events"]
            .map(String::from)
            .to_vec();
        for metric in PARAM_METRICS {
            cols.extend(self.parameter_names.iter().map(|p| format!("{metric}_{p}")));
        }
        cols.extend((1..=self.n).map(|j| format!("pcrb_ratio_x{j}")));
        cols.extend((1..=self.m).map(|c| format!("r_ratio_true_z{c}")));
        cols.extend((1..=self.m).map(|c| format!("r_ratio_nr_z{c}")));
        cols.extend((1..=self.n).map(|j| format!("q_ratio_x{j}")));
        cols.extend((1..=8).map(|i| format!("J{i}_mean")));
        cols.extend((1..=8).map(|i| format!("J{i}_std")));
        cols.push("whiteness".into());
        cols
    }

    fn row(&self, t: &MetricsTable) -> Vec<Cell> {
        let mut row = vec![
            Cell::Text(t.method.clone()),
            Cell::Count(t.runs),
            Cell::Count(t.diverged),
            Cell::Count(t.unsettled),
            Cell::Count(t.clamp_events),
        ];
        let numbers = |v: &[Option<f64>]| v.iter().map(|x| Cell::Number(*x)).collect::<Vec<_>>();
        for metric in [
            &t.theta_ratio,
            &t.crb_ratio,
            &t.consistency_ekf,
            &t.consistency_nr,
            &t.spread_ekf,
            &t.spread_nr,
        ] {
            row.extend(numbers(metric));
        }
        for metric in [
            &t.pcrb_ratio,
            &t.r_ratio_true,
            &t.r_ratio_nr,
            &t.q_ratio,
            &t.cost_mean,
            &t.cost_std,
        ] {
            row.extend(numbers(metric));
        }
        row.push(Cell::Number(t.whiteness));
        row
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns().join(",");
        out.push('\n');
        for t in &self.tables {
            let cells: Vec<String> = self.row(t).iter().map(Cell::csv).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .tables
            .iter()
            .map(|t| Value::Array(self.row(t).iter().map(Cell::json).collect()))
            .collect();
        let doc = json!({ "columns": self.columns(), "rows": rows });
        let mut text = serde_json::to_string_pretty(&doc).expect("report values serialise");
        text.push('\n');
        text
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Cell {
    Text(String),
    Count(usize),
    Number(Option<f64>),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Count(c) => c.to_string(),
            Cell::Number(Some(v)) => format_sig6(*v),
            Cell::Number(None) => "NA".into(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Count(c) => json!(c),
            Cell::Number(Some(v)) => json!(round_sig6(*v)),
            Cell::Number(None) => Value::Null,
        }
    }
}

/// `v` rounded to six significant digits.
pub fn round_sig6(v: f64) -> f64 {
    format!("{v:.5e}").parse().expect("formatted float parses")
}

/// Six significant digits; plain notation for moderate magnitudes.
pub fn format_sig6(v: f64) -> String {
    let r = round_sig6(v);
    if r == 0.0 || (1e-4..1e6).contains(&r.abs()) {
        format!("{r}")
    } else {
        format!("{r:.5e}")
    }
}

/// Writes the report; the format follows the extension unless given.
pub fn emit_report(report: &Report, path: &Path, format: Format) -> Result<()> {
    let text = match format {
        Format::Csv => report.to_csv(),
        Format::Json => report.to_json(),
    };
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(format_sig6(1.00423456), "1.00423");
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(-2.5e-7), "-2.50000e-7");
        assert_eq!(format_sig6(123456789.0), "1.23457e8");
        assert_eq!(format_sig6(0.000123456789), "0.000123457");
    }
}
