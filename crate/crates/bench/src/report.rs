//! Per-cell error rates and their CSV form.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::BenchError;

/// One experiment cell. Rates are `count / trials`; `type1` and `type2` are
/// empty when the cell ran no Null or no Alternate trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub experiment_id: String,
    pub case: u8,
    pub model: String,
    pub model_param: f64,
    pub beta_d: Option<f64>,
    pub n: usize,
    pub steps: Option<usize>,
    pub trials: usize,
    pub type1: Option<f64>,
    pub type2: Option<f64>,
    pub mean_stat: f64,
    pub mean_runtime_ms: Option<f64>,
    pub seed: u64,
}

/// Rows in cell-key order plus free-form comment lines (configuration and
/// seed) written before the header.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorReport {
    pub comments: Vec<String>,
    pub rows: Vec<ReportRow>,
}

impl ErrorReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), BenchError> {
        for c in &self.comments {
            for line in c.lines() {
                writeln!(out, "# {line}")?;
            }
        }
        let mut wtr = csv::Writer::from_writer(out);
        if self.rows.is_empty() {
            wtr.write_record(HEADER)?;
        }
        for row in &self.rows {
            wtr.serialize(row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, BenchError> {
        let mut comments = Vec::new();
        let mut body = String::new();
        for line in BufReader::new(reader).lines() {
            let line = line?;
            match line.strip_prefix('#') {
                Some(c) if body.is_empty() => comments.push(c.strip_prefix(' ').unwrap_or(c).to_string()),
                Some(_) => {}
                None => {
                    body.push_str(&line);
                    body.push('\n');
                }
            }
        }
        let mut rdr = csv::Reader::from_reader(body.as_bytes());
        let rows = rdr.deserialize().collect::<Result<Vec<ReportRow>, _>>()?;
        Ok(ErrorReport { comments, rows })
    }
}

/// Column names, in order.
pub const HEADER: [&str; 13] = [
    "experiment_id",
    "case",
    "model",
    "model_param",
    "beta_d",
    "n",
    "steps",
    "trials",
    "type1",
    "type2",
    "mean_stat",
    "mean_runtime_ms",
    "seed",
];

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str) -> ReportRow {
        ReportRow {
            experiment_id: id.into(),
            case: 2,
            model: "er".into(),
            model_param: 0.02,
            beta_d: Some(0.1 + 0.2),
            n: 100,
            steps: None,
            trials: 3,
            type1: Some(1.0 / 3.0),
            type2: None,
            mean_stat: 1.234_567_890_123e-5,
            mean_runtime_ms: None,
            seed: u64::MAX,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let report = ErrorReport {
            comments: vec!["study = \"dependence\"".into(), "master_seed = 4".into()],
            rows: vec![row("a"), row("b,with comma")],
        };
        let text = report.to_csv_string();
        assert!(text.starts_with("# study = \"dependence\"\n# master_seed = 4\nexperiment_id,case,"));
        assert_eq!(ErrorReport::read_csv(text.as_bytes()).unwrap(), report);
    }

    #[test]
    fn header_matches_fields() {
        let text = ErrorReport {
            comments: vec![],
            rows: vec![row("x")],
        }
        .to_csv_string();
        assert_eq!(text.lines().next().unwrap(), HEADER.join(","));
        let empty = ErrorReport::default().to_csv_string();
        assert_eq!(empty.trim_end(), HEADER.join(","));
        assert!(ErrorReport::read_csv(empty.as_bytes()).unwrap().rows.is_empty());
    }
}
