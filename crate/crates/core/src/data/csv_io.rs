//! CSV layout: `x1,x2,label[,finding_0..finding_{F-1}],domain,split`.

use std::io::{Read, Write};

use super::{Domain, LabeledSet};
use crate::error::{Error, Result};

/// Rows sharing one `(domain, split)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvPartition {
    pub split: String,
    pub set: LabeledSet,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(format!("csv: {e}"))
}

pub fn write_csv<W: Write>(writer: W, parts: &[(&LabeledSet, &str)]) -> Result<()> {
    let findings = parts.first().map_or(0, |(s, _)| s.num_findings());
    if parts.iter().any(|(s, _)| s.num_findings() != findings) {
        return Err(Error::Validation(
            "all partitions must have the same number of findings".into(),
        ));
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["x1".to_string(), "x2".into(), "label".into()];
    header.extend((0..findings).map(|f| format!("finding_{f}")));
    header.extend(["domain".into(), "split".into()]);
    w.write_record(&header).map_err(csv_err)?;
    for (set, split) in parts {
        for i in 0..set.len() {
            let mut row = vec![
                format!("{:?}", set.points[i][0]),
                format!("{:?}", set.points[i][1]),
                set.labels[i].to_string(),
            ];
            if let Some(f) = &set.findings {
                row.extend(f[i].iter().map(u8::to_string));
            }
            row.push(set.domain.as_str().into());
            row.push(split.to_string());
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::Parse(format!("csv flush: {e}")))?;
    Ok(())
}

/// Reads a dataset CSV, grouping rows by `(domain, split)` in first-seen order.
///
/// `num_classes` is taken as one more than the largest label present unless given.
pub fn read_csv<R: Read>(reader: R, num_classes: Option<usize>) -> Result<Vec<CsvPartition>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers().map_err(csv_err)?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let n = cols.len();
    if n < 5 || cols[..3] != ["x1", "x2", "label"] || cols[n - 2..] != ["domain", "split"] {
        return Err(Error::Parse(format!(
            "unexpected csv header {cols:?}; want x1,x2,label[,finding_*],domain,split"
        )));
    }
    let n_findings = n - 5;
    struct Acc {
        domain: Domain,
        split: String,
        points: Vec<crate::Point>,
        labels: Vec<usize>,
        findings: Vec<Vec<u8>>,
    }
    let mut groups: Vec<Acc> = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            field(i)
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad number {:?}", line + 2, field(i))))
        };
        let p = [num(0)?, num(1)?];
        let label: usize = field(2)
            .parse()
            .map_err(|_| Error::Parse(format!("row {}: bad label {:?}", line + 2, field(2))))?;
        let findings = (0..n_findings)
            .map(|f| match field(3 + f) {
                "0" => Ok(0u8),
                "1" => Ok(1u8),
                other => Err(Error::Parse(format!("row {}: bad finding {other:?}", line + 2))),
            })
            .collect::<Result<Vec<_>>>()?;
        let domain = match field(n - 2) {
            "source" => Domain::Source,
            "target" => Domain::Target,
            other => return Err(Error::Parse(format!("row {}: bad domain {other:?}", line + 2))),
        };
        let split = field(n - 1).to_string();
        let pos = match groups.iter().position(|g| g.domain == domain && g.split == split) {
            Some(pos) => pos,
            None => {
                groups.push(Acc {
                    domain,
                    split,
                    points: Vec::new(),
                    labels: Vec::new(),
                    findings: Vec::new(),
                });
                groups.len() - 1
            }
        };
        let g = &mut groups[pos];
        g.points.push(p);
        g.labels.push(label);
        g.findings.push(findings);
    }
    let classes = num_classes.unwrap_or_else(|| {
        groups
            .iter()
            .flat_map(|g| g.labels.iter().copied())
            .max()
            .map_or(0, |m| m + 1)
    });
    groups
        .into_iter()
        .map(|g| {
            let set = LabeledSet::new(g.points, g.labels, classes, g.domain)?;
            let set = if n_findings > 0 { set.with_findings(g.findings)? } else { set };
            Ok(CsvPartition { split: g.split, set })
        })
        .collect()
}
