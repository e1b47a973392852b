use std::fmt::Write as _;

/// A small CSV document: `#`-prefixed `key=value` metadata lines, a header
/// row, then data rows. Floats are written with their shortest round-trip
/// representation so output is byte-stable.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CsvTable {
    metadata: Vec<(String, String)>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        CsvTable {
            metadata: Vec::new(),
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.metadata.push((key.to_string(), value.to_string()));
        self
    }

    /// Appends a row.
    ///
    /// # Panics
    ///
    /// If the row length differs from the header length.
    pub fn push_row(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "CSV row width does not match header");
        self.rows.push(row);
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn metadata(&self) -> &[(String, String)] {
        &self.metadata
    }

    /// Index of the column named `name`.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Parses the column `name` as floats, one per row.
    pub fn column_f64(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column(name)?;
        self.rows.iter().map(|r| r[i].parse().ok()).collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}={v}");
        }
        let _ = writeln!(out, "{}", self.header.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}
