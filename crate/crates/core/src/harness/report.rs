use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::pipeline::RunRecord;
use crate::error::{Error, Result};

/// Mean and sample standard deviation of one metric over the seeds of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub axis: String,
    pub cell: String,
    pub seed_count: usize,
    pub mean: f64,
    pub std: f64,
    pub metric: String,
}

/// Sample mean and standard deviation (`n - 1` denominator; 0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn axis_and_cell(r: &RunRecord) -> (String, String) {
    if r.cell.is_empty() {
        return ("run".into(), "base".into());
    }
    let axis: Vec<&str> = r.cell.keys().map(String::as_str).collect();
    let cell: Vec<&str> = r.cell.values().map(String::as_str).collect();
    (axis.join("+"), cell.join("/"))
}

/// Groups successful runs by sweep cell, in order of first appearance.
pub fn aggregate(records: &[RunRecord]) -> Vec<AggregateRow> {
    let mut groups: Vec<((String, String), Vec<&RunRecord>)> = Vec::new();
    for r in records.iter().filter(|r| r.final_metrics.is_some()) {
        let key = axis_and_cell(r);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    let mut rows = Vec::new();
    for ((axis, cell), runs) in groups {
        let metrics = runs.iter().filter_map(|r| r.final_metrics.as_ref());
        let columns: [(&str, Vec<f64>); 3] = [
            ("target_acc", metrics.clone().map(|m| m.target_acc).collect()),
            ("source_target_acc", metrics.clone().map(|m| m.source_target_acc).collect()),
            ("target_auroc", metrics.filter_map(|m| m.target_auroc).collect()),
        ];
        for (metric, values) in columns {
            if values.is_empty() {
                continue;
            }
            let (mean, std) = mean_std(&values);
            rows.push(AggregateRow {
                axis: axis.clone(),
                cell: cell.clone(),
                seed_count: values.len(),
                mean,
                std,
                metric: metric.into(),
            });
        }
    }
    rows
}

pub fn write_aggregate_csv<W: Write>(rows: &[AggregateRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row).map_err(|e| Error::Parse(format!("aggregate csv: {e}")))?;
    }
    out.flush().map_err(|e| Error::Parse(format!("aggregate csv: {e}")))?;
    Ok(())
}

pub fn read_aggregate_csv<R: Read>(r: R) -> Result<Vec<AggregateRow>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| row.map_err(|e| Error::Parse(format!("aggregate csv: {e}"))))
        .collect()
}

/// Aligned plain-text table, values shown as percentages.
pub fn format_table(rows: &[AggregateRow]) -> String {
    let header = ["axis", "cell", "metric", "n", "mean ± std (%)"];
    let body: Vec<[String; 5]> = rows
        .iter()
        .map(|r| {
            [
                r.axis.clone(),
                r.cell.clone(),
                r.metric.clone(),
                r.seed_count.to_string(),
                format!("{:.2} ± {:.2}", 100.0 * r.mean, 100.0 * r.std),
            ]
        })
        .collect();
    let mut widths = header.map(|h| h.chars().count());
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut s = line(header.to_vec());
    s += &line(widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().iter().map(String::as_str).collect());
    for row in &body {
        s += &line(row.iter().map(String::as_str).collect());
    }
    s
}

/// Reads RunRecords from JSON lines, skipping blank lines.
pub fn read_records<R: Read>(mut r: R) -> Result<Vec<RunRecord>> {
    let mut text = String::new();
    r.read_to_string(&mut text)
        .map_err(|e| Error::Parse(format!("run records: {e}")))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse(format!("run record line {}: {e}", i + 1)))
        })
        .collect()
}
