//! Numeric tables with a header row, written as plain CSV.

use std::io;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: column `{column}` is not a number")]
    NotANumber { row: usize, column: String },
    #[error("row {row} has {got} fields, header has {want}")]
    Width { row: usize, got: usize, want: usize },
}

impl CsvTable {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Self { headers: headers.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    /// CSV text; numbers use the shortest round-trip representation.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string())).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    pub fn parse(text: &str) -> Result<Self, TableError> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != headers.len() {
                return Err(TableError::Width { row: i + 1, got: rec.len(), want: headers.len() });
            }
            let mut row = Vec::with_capacity(rec.len());
            for (j, field) in rec.iter().enumerate() {
                row.push(field.trim().parse().map_err(|_| TableError::NotANumber { row: i + 1, column: headers[j].clone() })?);
            }
            rows.push(row);
        }
        Ok(Self { headers, rows })
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.to_csv())
    }
}
