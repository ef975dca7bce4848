//! `# key=value ...` first lines and numeric CSV bodies shared by the text
//! formats.

use std::collections::BTreeMap;

use crate::FileError;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HeaderFields(BTreeMap<String, String>);

impl HeaderFields {
    pub fn str(&self, key: &str) -> Result<&str, FileError> {
        self.0
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| FileError::Format(format!("header is missing `{key}`")))
    }

    pub fn usize(&self, key: &str) -> Result<usize, FileError> {
        let v = self.str(key)?;
        v.parse().map_err(|_| FileError::Format(format!("header `{key}={v}` is not a count")))
    }
}

/// Parses the first line of `text`, which must start with `#`.
pub fn parse_header(text: &str, required: &[&str]) -> Result<HeaderFields, FileError> {
    let first = text.lines().next().unwrap_or("");
    let body = first
        .strip_prefix('#')
        .ok_or_else(|| FileError::Format("first line must be a `# key=value` header".into()))?;
    let mut fields = BTreeMap::new();
    for item in body.split_whitespace() {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| FileError::Format(format!("header item `{item}` is not key=value")))?;
        fields.insert(k.to_string(), v.to_string());
    }
    let fields = HeaderFields(fields);
    for key in required {
        fields.str(key)?;
    }
    Ok(fields)
}

/// Column names and numeric rows after the header line. With `expected`, the
/// column names must match exactly; every row must have as many fields as
/// there are columns.
pub fn read_rows(text: &str, expected: Option<&[&str]>) -> Result<(Vec<String>, Vec<Vec<f64>>), FileError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let columns: Vec<String> = reader
        .headers()
        .map_err(|e| FileError::Format(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if let Some(expected) = expected {
        if columns.iter().map(String::as_str).ne(expected.iter().copied()) {
            return Err(FileError::Format(format!("expected columns {}, got {}", expected.join(","), columns.join(","))));
        }
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| FileError::Format(format!("row {i}: {e}")))?;
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| FileError::Format(format!("row {i}: `{f}` is not a finite number")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok((columns, rows))
}
