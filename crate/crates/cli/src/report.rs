//! CSV tables and JSON summaries.

use std::fmt::Display;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::config::Format;
use crate::{files, CliError};

/// Line-oriented CSV: a header and one row per record.
#[derive(Clone, Debug, Default)]
pub struct Csv {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(header: &[&'static str]) -> Self {
        Csv {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, fields: &[&dyn Display]) {
        debug_assert_eq!(fields.len(), self.header.len());
        self.rows
            .push(fields.iter().map(|f| f.to_string()).collect());
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn render(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        // Writing into memory cannot fail.
        w.write_record(&self.header).expect("in-memory csv");
        for r in &self.rows {
            w.write_record(r).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 fields")
    }
}

/// What a command produced: a summary document, an optional table and a
/// verdict when the command declares an expectation.
pub struct Report {
    pub name: String,
    pub summary: Value,
    pub csv: Option<Csv>,
    pub pass: Option<bool>,
}

impl Report {
    pub fn new(name: impl Into<String>, seed: u64, body: impl Serialize) -> Result<Self, CliError> {
        let mut summary =
            serde_json::to_value(body).map_err(|e| CliError::Failed(e.to_string()))?;
        if let Value::Object(m) = &mut summary {
            m.insert("seed".into(), seed.into());
        }
        Ok(Report {
            name: name.into(),
            summary,
            csv: None,
            pass: None,
        })
    }

    pub fn with_csv(mut self, csv: Csv) -> Self {
        self.csv = Some(csv);
        self
    }

    pub fn with_pass(mut self, pass: bool) -> Self {
        self.pass = Some(pass);
        if let Value::Object(m) = &mut self.summary {
            m.insert("pass".into(), pass.into());
        }
        self
    }

    /// Writes `<name>.json` and `<name>.csv` under `out` when given and
    /// prints the selected format to stdout.
    pub fn emit(&self, out: Option<&Path>, format: Format) -> Result<(), CliError> {
        let json = serde_json::to_string_pretty(&self.summary)
            .map_err(|e| CliError::Failed(e.to_string()))?;
        if let Some(dir) = out {
            files::write(&dir.join(format!("{}.json", self.name)), json.as_bytes())?;
            if let Some(csv) = &self.csv {
                files::write(
                    &dir.join(format!("{}.csv", self.name)),
                    csv.render().as_bytes(),
                )?;
            }
        }
        let text = match (format, &self.csv) {
            (Format::Csv, Some(csv)) => csv.render(),
            _ => json + "\n",
        };
        std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io(Path::new("<stdout>"), e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_rendering() {
        let mut c = Csv::new(&["guess", "score"]);
        c.row(&[&1, &0.5]);
        c.row(&[&2, &"x, y"]);
        assert_eq!(c.render(), "guess,score\n1,0.5\n2,\"x, y\"\n");
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn pass_lands_in_summary() {
        let r = Report::new("t", 7, serde_json::json!({"a": 1}))
            .unwrap()
            .with_pass(false);
        assert_eq!(r.summary["pass"], false);
        assert_eq!(r.summary["seed"], 7);
    }
}
