//! Output sinks (JSON lines or CSV) and the `report` reader.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use favedge::stats::EstimateRow;

use crate::Format;

/// A CSV-shaped view of some records.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    /// Columns from the fields of flat serializable records.
    pub fn from_records<T: Serialize>(records: &[T]) -> io::Result<Self> {
        let mut t = Table::new(&[]);
        for r in records {
            let v = serde_json::to_value(r).map_err(io::Error::other)?;
            let obj = v
                .as_object()
                .ok_or_else(|| io::Error::other("record is not an object"))?;
            if t.header.is_empty() {
                t.header = obj.keys().cloned().collect();
            }
            t.rows.push(
                t.header
                    .iter()
                    .map(|k| obj.get(k).map_or(String::new(), cell))
                    .collect(),
            );
        }
        Ok(t)
    }

    pub fn from_record<T: Serialize>(record: &T) -> io::Result<Self> {
        Self::from_records(std::slice::from_ref(record))
    }

    pub fn estimate_rows(rows: &[EstimateRow]) -> Self {
        let mut t = Table::new(&[
            "statistic",
            "parameters",
            "estimate",
            "se",
            "replicas",
            "seed",
        ]);
        for r in rows {
            t.push(vec![
                r.statistic.clone(),
                serde_json::to_string(&r.parameters).unwrap_or_default(),
                r.estimate.to_string(),
                r.se.to_string(),
                r.replicas.to_string(),
                r.seed.to_string(),
            ]);
        }
        t
    }
}

pub struct Sink {
    format: Format,
    out: Box<dyn Write>,
}

impl Sink {
    pub fn open(path: Option<&Path>, format: Format) -> io::Result<Self> {
        let out: Box<dyn Write> = match path {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        };
        Ok(Self { format, out })
    }

    pub fn format(&self) -> Format {
        self.format
    }

    pub fn raw_line(&mut self, line: &str) -> io::Result<()> {
        writeln!(self.out, "{line}")
    }

    /// One JSON object per line, or the table as CSV.
    pub fn lines<T: Serialize>(&mut self, records: &[T], table: &Table) -> io::Result<()> {
        match self.format {
            Format::Json => {
                for r in records {
                    let s = serde_json::to_string(r).map_err(io::Error::other)?;
                    writeln!(self.out, "{s}")?;
                }
                Ok(())
            }
            Format::Csv => self.csv(table),
        }
    }

    pub fn one<T: Serialize>(&mut self, record: &T, table: &Table) -> io::Result<()> {
        self.lines(std::slice::from_ref(record), table)
    }

    fn csv(&mut self, table: &Table) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(&mut self.out);
        w.write_record(&table.header)?;
        for r in &table.rows {
            w.write_record(r)?;
        }
        w.flush()
    }

    pub fn finish(&mut self) -> io::Result<()> {
        self.out.flush()
    }
}

#[derive(Debug, Serialize)]
pub struct FileSummary {
    pub format: String,
    pub records: usize,
    pub columns: Vec<String>,
    pub statistics: Vec<String>,
}

/// Parse a file written by any subcommand: CSV by extension, else a single
/// JSON document or JSON lines.
pub fn summarize_file(path: &Path) -> io::Result<FileSummary> {
    let text = std::fs::read_to_string(path)?;
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let columns: Vec<String> = r.headers()?.iter().map(String::from).collect();
        let idx = columns.iter().position(|c| c == "statistic");
        let mut stats = BTreeSet::new();
        let mut records = 0;
        for rec in r.records() {
            let rec = rec?;
            if let Some(v) = idx.and_then(|i| rec.get(i)) {
                stats.insert(v.to_string());
            }
            records += 1;
        }
        return Ok(FileSummary {
            format: "csv".into(),
            records,
            columns,
            statistics: stats.into_iter().collect(),
        });
    }
    let values: Vec<Value> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect::<Result<_, _>>()
        .map_err(|e| {
            io::Error::new(
                io::ErrorKind::InvalidData,
                format!("{}: {e}", path.display()),
            )
        })?;
    let mut columns = BTreeSet::new();
    let mut stats = BTreeSet::new();
    for v in &values {
        if let Some(o) = v.as_object() {
            columns.extend(o.keys().cloned());
            if let Some(s) = o.get("statistic").and_then(Value::as_str) {
                stats.insert(s.to_string());
            }
        }
    }
    Ok(FileSummary {
        format: "json".into(),
        records: values.len(),
        columns: columns.into_iter().collect(),
        statistics: stats.into_iter().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Rec {
        a: u64,
        b: Option<String>,
    }

    fn write(path: &Path, format: Format) {
        let recs = [
            Rec { a: 1, b: None },
            Rec {
                a: 2,
                b: Some("x,y".into()),
            },
        ];
        let mut s = Sink::open(Some(path), format).unwrap();
        s.lines(&recs, &Table::from_records(&recs).unwrap())
            .unwrap();
        s.finish().unwrap();
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write(&p, Format::Csv);
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "a,b\n1,\n2,\"x,y\"\n");
        let s = summarize_file(&p).unwrap();
        assert_eq!(
            (s.records, s.columns),
            (2, vec!["a".to_string(), "b".to_string()])
        );
    }

    #[test]
    fn json_lines_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.jsonl");
        write(&p, Format::Json);
        let s = summarize_file(&p).unwrap();
        assert_eq!(s.format, "json");
        assert_eq!(s.records, 2);
        assert!(s.statistics.is_empty());
    }

    #[test]
    fn estimate_rows_keep_statistic_names() {
        let rows = [EstimateRow::from_values("m", 3, &[1.0, 2.0, 3.0]).param("h", 4)];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let mut s = Sink::open(Some(&p), Format::Csv).unwrap();
        s.lines(&rows, &Table::estimate_rows(&rows)).unwrap();
        s.finish().unwrap();
        assert_eq!(
            summarize_file(&p).unwrap().statistics,
            vec!["m".to_string()]
        );
    }

    #[test]
    fn garbage_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.json");
        std::fs::write(&p, "{not json").unwrap();
        assert!(summarize_file(&p).is_err());
    }
}
