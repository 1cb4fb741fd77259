//! Dataset CSV files: `t,z1..zm[,u1..uq]` plus an optional truth sidecar
//! `<name>.truth.csv` with `t,x1..xn,w1..wn,v1..vm`.

use std::path::{Path, PathBuf};

use kftune_core::models::{Dataset, SystemModel, Truth};
use kftune_core::Mat;

use crate::error::{HarnessError, Result};

/// Column counts expected in a dataset file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CsvSchema {
    pub m: usize,
    pub q: usize,
}

impl CsvSchema {
    pub fn for_model(model: &SystemModel) -> Self {
        let dims = model.dims();
        Self {
            m: dims.m,
            q: dims.q,
        }
    }

    pub fn header(&self) -> Vec<String> {
        let mut cols = vec!["t".to_string()];
        cols.extend((1..=self.m).map(|i| format!("z{i}")));
        cols.extend((1..=self.q).map(|i| format!("u{i}")));
        cols
    }
}

fn truth_header(n: usize, m: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    for prefix in ["x", "w"] {
        cols.extend((1..=n).map(|i| format!("{prefix}{i}")));
    }
    cols.extend((1..=m).map(|i| format!("v{i}")));
    cols
}

/// `data.csv` → `data.truth.csv`.
pub fn truth_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("data");
    path.with_file_name(format!("{stem}.truth.csv"))
}

/// Rows of numbers under an exact header. Rows and columns in errors are
/// 1-based, counting data rows only.
fn read_table(path: &Path, expected: &[String]) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| HarnessError::io(path, e))?;
    let found: Vec<String> = reader
        .headers()
        .map_err(|e| HarnessError::io(path, e))?
        .iter()
        .map(String::from)
        .collect();
    if found != expected {
        return Err(HarnessError::BadHeader {
            path: path.into(),
            expected: expected.join(","),
            found: found.join(","),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| HarnessError::io(path, e))?;
        if rec.len() != expected.len() {
            return Err(HarnessError::NonFiniteCell {
                row,
                column: rec.len().min(expected.len()) + 1,
            });
        }
        let values = rec
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or(HarnessError::NonFiniteCell { row, column: c + 1 })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(values);
    }
    Ok(rows)
}

fn check_uniform(times: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return Ok(());
    }
    let dt = times[1] - times[0];
    if dt <= 0.0 {
        return Err(HarnessError::NonUniformTime { row: 2 });
    }
    for (i, pair) in times.windows(2).enumerate() {
        if ((pair[1] - pair[0]) - dt).abs() > 1e-9 {
            return Err(HarnessError::NonUniformTime { row: i + 2 });
        }
    }
    Ok(())
}

/// Reads a dataset without truth.
pub fn ingest_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let rows = read_table(path, &schema.header())?;
    let times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    check_uniform(&times)?;
    let n = rows.len();
    let z = Mat::from_fn(n, schema.m, |k, c| rows[k][1 + c]);
    let u = Mat::from_fn(n, schema.q, |k, c| rows[k][1 + schema.m + c]);
    Ok(Dataset::new(times, z, u)?)
}

/// Reads a dataset and its truth sidecar. The sidecar carries the injected
/// sequences; parameters, noise levels and the initial state come from
/// `model`.
pub fn ingest_with_truth(path: &Path, model: &SystemModel) -> Result<Dataset> {
    let mut data = ingest_csv(path, &CsvSchema::for_model(model))?;
    let (n, m) = (model.n(), model.m());
    let side = truth_path(path);
    let rows = read_table(&side, &truth_header(n, m))?;
    if rows.len() != data.len() {
        return Err(HarnessError::InvalidConfig(format!(
            "{} has {} rows, the dataset has {}",
            side.display(),
            rows.len(),
            data.len()
        )));
    }
    if let Some(row) = rows
        .iter()
        .zip(&data.times)
        .position(|(r, t)| (r[0] - t).abs() > 1e-9)
    {
        return Err(HarnessError::NonUniformTime { row: row + 1 });
    }
    let len = rows.len();
    data.truth = Some(Truth {
        x: Mat::from_fn(len, n, |k, j| rows[k][1 + j]),
        w: Mat::from_fn(len, n, |k, j| rows[k][1 + n + j]),
        v: Mat::from_fn(len, m, |k, c| rows[k][1 + 2 * n + c]),
        theta: model.theta_true.clone(),
        q: model.q_true.clone(),
        r: model.r_true.clone(),
        x0: model.x0_true.clone(),
    });
    Ok(data)
}

/// Writes the dataset, and its truth sidecar when present. Values are
/// written in shortest round-trip form.
pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let schema = CsvSchema {
        m: data.z.ncols(),
        q: data.u.ncols(),
    };
    let mut out = schema.header().join(",");
    out.push('\n');
    for (k, t) in data.times.iter().enumerate() {
        let mut cells = vec![t.to_string()];
        cells.extend(data.z.row(k).iter().map(f64::to_string));
        cells.extend(data.u.row(k).iter().map(f64::to_string));
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| HarnessError::io(path, e))?;

    if let Some(truth) = &data.truth {
        let side = truth_path(path);
        let mut out = truth_header(truth.x.ncols(), truth.v.ncols()).join(",");
        out.push('\n');
        for (k, t) in data.times.iter().enumerate() {
            let mut cells = vec![t.to_string()];
            for block in [&truth.x, &truth.w, &truth.v] {
                cells.extend(block.row(k).iter().map(f64::to_string));
            }
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        std::fs::write(&side, out).map_err(|e| HarnessError::io(&side, e))?;
    }
    Ok(())
}
