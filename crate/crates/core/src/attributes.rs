//! Per-node attribute columns and their CSV form.

use std::io::{Read, Write};

use indexmap::IndexMap;

use crate::error::{NirdError, Result};

/// Named real-valued columns, one entry per node in node-id order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttributeTable {
    n: usize,
    columns: IndexMap<String, Vec<f64>>,
}

impl AttributeTable {
    pub fn new(n: usize) -> Self {
        AttributeTable {
            n,
            columns: IndexMap::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Adds or replaces a column.
    pub fn insert(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if values.len() != self.n {
            return Err(NirdError::mismatch(format!(
                "column `{name}` has {} entries, table has {} rows",
                values.len(),
                self.n
            )));
        }
        self.columns.insert(name, values);
        Ok(())
    }

    pub fn with(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        self.insert(name, values)?;
        Ok(self)
    }

    pub fn get(&self, name: &str) -> Result<&[f64]> {
        self.columns
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| NirdError::UnknownColumn(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn is_binary(&self, name: &str) -> Result<bool> {
        Ok(self.get(name)?.iter().all(|&v| v == 0.0 || v == 1.0))
    }

    /// Moves the row of node `i` to position `perm[i]` in every column.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(NirdError::mismatch("permutation length differs from row count"));
        }
        let mut out = AttributeTable::new(self.n);
        for (name, values) in &self.columns {
            let mut moved = vec![0.0; self.n];
            for (i, &v) in values.iter().enumerate() {
                moved[perm[i]] = v;
            }
            out.columns.insert(name.clone(), moved);
        }
        Ok(out)
    }

    /// Parses a CSV with a header row of column names and one row per node.
    /// Lines starting with `#` are skipped.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(csv_error)?
            .iter()
            .map(str::to_string)
            .collect();
        if headers.is_empty() || headers.iter().any(String::is_empty) {
            return Err(NirdError::parse(1, 1, "missing or empty column name in header"));
        }
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
        for record in rdr.records() {
            let record = record.map_err(csv_error)?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            for (c, field) in record.iter().enumerate() {
                let value: f64 = field.parse().map_err(|_| {
                    NirdError::parse(line, c + 1, format!("`{field}` is not a number"))
                })?;
                columns[c].push(value);
            }
        }
        let n = columns[0].len();
        let mut table = AttributeTable::new(n);
        for (name, values) in headers.into_iter().zip(columns) {
            if table.columns.contains_key(&name) {
                return Err(NirdError::parse(1, 1, format!("duplicate column `{name}`")));
            }
            table.insert(name, values)?;
        }
        Ok(table)
    }

    /// Writes the table as CSV, preceded by `#` comment lines. Values use the
    /// shortest representation that parses back to the same `f64`.
    pub fn write_csv<W: Write>(&self, mut out: W, comments: &[String]) -> Result<()> {
        for c in comments {
            writeln!(out, "# {c}")?;
        }
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(self.columns.keys()).map_err(csv_error)?;
        for i in 0..self.n {
            wtr.write_record(self.columns.values().map(|col| format!("{}", col[i])))
                .map_err(csv_error)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> NirdError {
    let (line, column) = match e.position() {
        Some(p) => (p.line() as usize, 1),
        None => (0, 0),
    };
    match e.into_kind() {
        csv::ErrorKind::Io(io) => NirdError::Io(io),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => NirdError::parse(
            line,
            column,
            format!("expected {expected_len} fields, found {len}"),
        ),
        other => NirdError::parse(line, column, format!("{other:?}")),
    }
}
