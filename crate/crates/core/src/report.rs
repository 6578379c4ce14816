//! CSV tables and the JSON run summary.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::bounds::BoundReport;
use crate::error::{Error, Result};

/// Version of the JSON summary layout.
pub const SCHEMA_VERSION: u32 = 1;
/// Failures listed individually in a summary; the rest are only counted.
pub const MAX_LISTED_FAILURES: usize = 100;

/// Scientific notation with 16 fractional digits, the only float format in
/// emitted CSV.
pub fn fmt_sci(v: f64) -> String {
    format!("{v:.16e}")
}

/// A table with a fixed header, written as CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| Error::Malformed(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Malformed(e.to_string()))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        Ok(buf)
    }
}

/// One row per report: name, indices joined by `;`, both sides, margin and
/// status.
pub fn reports_table(reports: &[BoundReport]) -> CsvTable {
    let mut t = CsvTable::new(["check", "indices", "computed", "error", "majorant", "margin", "satisfied", "flagged"]);
    for r in reports {
        t.push(vec![
            r.name.clone(),
            r.indices.iter().map(i64::to_string).collect::<Vec<_>>().join(";"),
            fmt_sci(r.computed),
            fmt_sci(r.error),
            fmt_sci(r.majorant),
            fmt_sci(r.margin),
            r.satisfied.to_string(),
            r.flagged.to_string(),
        ]);
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Counts {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub flagged: usize,
}

/// Per-check aggregate; `worst_margin` ignores flagged reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckGroup {
    pub counts: Counts,
    pub worst_margin: Option<f64>,
    pub worst_indices: Option<Vec<i64>>,
}

/// Flagged reports of one check, kept apart from the pass/fail tally.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlaggedGroup {
    pub count: usize,
    pub violated: usize,
    pub note: Option<String>,
    pub first_violation: Option<Vec<i64>>,
}

/// The JSON summary written next to every CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub schema: u32,
    pub command: String,
    pub seed: Option<u64>,
    pub parameters: serde_json::Value,
    pub counts: Counts,
    pub checks: BTreeMap<String, CheckGroup>,
    pub failures: Vec<BoundReport>,
    pub flagged: BTreeMap<String, FlaggedGroup>,
    pub results: serde_json::Value,
}

impl Summary {
    pub fn new(command: &str, seed: Option<u64>, parameters: serde_json::Value) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            command: command.to_string(),
            seed,
            parameters,
            counts: Counts::default(),
            checks: BTreeMap::new(),
            failures: Vec::new(),
            flagged: BTreeMap::new(),
            results: serde_json::Value::Null,
        }
    }

    pub fn record(&mut self, r: &BoundReport) {
        self.counts.total += 1;
        let group = self.checks.entry(r.name.clone()).or_insert(CheckGroup {
            counts: Counts::default(),
            worst_margin: None,
            worst_indices: None,
        });
        group.counts.total += 1;
        if r.flagged {
            self.counts.flagged += 1;
            group.counts.flagged += 1;
            let f = self.flagged.entry(r.name.clone()).or_insert(FlaggedGroup {
                count: 0,
                violated: 0,
                note: r.note.clone(),
                first_violation: None,
            });
            f.count += 1;
            if !r.satisfied {
                f.violated += 1;
                f.first_violation.get_or_insert_with(|| r.indices.clone());
            }
            return;
        }
        if r.satisfied {
            self.counts.passed += 1;
            group.counts.passed += 1;
        } else {
            self.counts.failed += 1;
            group.counts.failed += 1;
            if self.failures.len() < MAX_LISTED_FAILURES {
                self.failures.push(r.clone());
            }
        }
        if group.worst_margin.is_none_or(|w| r.margin < w) {
            group.worst_margin = Some(r.margin);
            group.worst_indices = Some(r.indices.clone());
        }
    }

    pub fn record_all<'a>(&mut self, reports: impl IntoIterator<Item = &'a BoundReport>) {
        for r in reports {
            self.record(r);
        }
    }

    /// No failed check outside the flagged section.
    pub fn success(&self) -> bool {
        self.counts.failed == 0
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Malformed(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_fixed_format() {
        let mut t = CsvTable::new(["n", "value"]);
        t.push(vec!["1".into(), fmt_sci(0.5)]);
        let s = String::from_utf8(t.to_bytes().unwrap()).unwrap();
        assert_eq!(s, "n,value\n1,5.0000000000000000e-1\n");
    }

    #[test]
    fn summary_counts_flagged_separately() {
        let mut s = Summary::new("verify", Some(1), serde_json::json!({}));
        s.record(&BoundReport::numeric("x", vec![0], 1.0, 0.0, 2.0));
        s.record(&BoundReport::numeric("x", vec![1], 3.0, 0.0, 2.0).flag("boundary"));
        assert!(s.success());
        assert_eq!(s.counts.flagged, 1);
        assert_eq!(s.flagged["x"].violated, 1);
        s.record(&BoundReport::numeric("y", vec![2], 3.0, 0.0, 2.0));
        assert!(!s.success());
        let json: serde_json::Value = serde_json::from_str(&s.to_json().unwrap()).unwrap();
        assert_eq!(json["schema"], 1);
        assert_eq!(json["counts"]["failed"], 1);
    }
}
