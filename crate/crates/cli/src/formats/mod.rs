//! File formats. Every file starts with a `# dropf-<kind> v1` line.
//! Tabular files follow it with `# key=value` metadata lines and a CSV body
//! with a header row; structured documents are TOML (feeders) or JSON
//! (reports and metrics).

mod feeder;
mod forecast;
mod history;
mod report;
mod trace;

pub use feeder::{read_feeder, write_feeder, FEEDER_HEADER};
pub use forecast::{check_power_base, forecasts_from_table, forecasts_to_table, read_forecasts, write_forecasts, SINGLE_DAY_NOTE};
pub use history::{history_from_table, history_to_table, read_history, write_history};
pub use report::{read_metrics, to_json, MetricsDoc, OpfReport, ReportDer, ReportLimit, METRICS_FORMAT, REPORT_FORMAT};
pub use trace::{
    batch_from_table, batch_table, der_table, dispatch_table, envelope_from_table, envelope_table, kind_label, sensitivity_table,
    system_table, trace_table, BATCH_KIND, DER_KIND, DISPATCH_KIND, ENVELOPE_KIND, SENSITIVITY_KIND, SYSTEM_KIND, TRACE_KIND,
};

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{CliError, CliResult};

pub const VERSION: &str = "v1";

pub fn header_line(kind: &str) -> String {
    format!("# dropf-{kind} {VERSION}")
}

/// Shortest text that parses back to the same `f64`, in exponent form for
/// very small and very large magnitudes.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

/// A metadata block followed by a CSV table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Table {
        Table { meta: vec![], columns: columns.iter().map(|c| c.to_string()).collect(), rows: vec![] }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Table {
        self.meta.push((key.into(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require_meta<T: std::str::FromStr>(&self, key: &str) -> CliResult<T> {
        let raw = self.meta(key).ok_or_else(|| CliError::input(format!("missing metadata '{key}'")))?;
        raw.parse().map_err(|_| CliError::input(format!("metadata '{key}' has invalid value '{raw}'")))
    }

    pub fn column(&self, name: &str) -> CliResult<usize> {
        self.columns.iter().position(|c| c == name).ok_or_else(|| CliError::input(format!("missing column '{name}'")))
    }

    pub fn to_text(&self, kind: &str) -> String {
        let mut out = header_line(kind);
        out.push('\n');
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k}={v}");
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.columns).expect("write to memory");
        for r in &self.rows {
            w.write_record(r).expect("write to memory");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 fields"));
        out
    }

    pub fn from_text(kind: &str, text: &str) -> CliResult<Table> {
        let expected = header_line(kind);
        let mut meta = Vec::new();
        // byte offset and count of the leading comment lines
        let (mut offset, mut skipped) = (0, 0);
        for line in text.split_inclusive('\n') {
            let l = line.trim_end_matches(['\n', '\r']);
            if skipped == 0 {
                if l.trim() != expected {
                    return Err(CliError::input(format!("line 1: expected header '{expected}', found '{}'", l.trim())));
                }
            } else if let Some(rest) = l.strip_prefix('#') {
                let (k, v) = rest
                    .trim()
                    .split_once('=')
                    .ok_or_else(|| CliError::input(format!("line {}: metadata must be 'key=value'", skipped + 1)))?;
                meta.push((k.trim().to_string(), v.trim().to_string()));
            } else {
                break;
            }
            offset += line.len();
            skipped += 1;
        }
        if skipped == 0 {
            return Err(CliError::input("file is empty"));
        }
        let body = &text[offset..];
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
        let columns: Vec<String> = r
            .headers()
            .map_err(|e| CliError::input(format!("line {}: {e}", skipped + 1)))?
            .iter()
            .map(|s| s.to_string())
            .collect();
        if columns.is_empty() || columns.iter().all(|c| c.is_empty()) {
            return Err(CliError::input(format!("line {}: missing column header", skipped + 1)));
        }
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map(|p| p.line() as usize + skipped).unwrap_or(0);
                CliError::input(format!("line {line}: {e}"))
            })?;
            rows.push(rec.iter().map(|s| s.to_string()).collect());
        }
        Ok(Table { meta, columns, rows })
    }

    pub fn read(kind: &str, path: &Path) -> CliResult<Table> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        Table::from_text(kind, &text).map_err(|e| e.context(path.display()))
    }

    pub fn write(&self, kind: &str, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.to_text(kind)).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }
}

/// Typed access to the cells of a parsed table row, with line numbers in errors.
pub struct Cells<'a> {
    table: &'a Table,
    row: usize,
}

impl<'a> Cells<'a> {
    pub fn new(table: &'a Table, row: usize) -> Cells<'a> {
        Cells { table, row }
    }

    /// Line of this row in the file (header, metadata and column lines come first).
    pub fn line(&self) -> usize {
        self.row + self.table.meta.len() + 3
    }

    pub fn str(&self, col: usize) -> &'a str {
        &self.table.rows[self.row][col]
    }

    pub fn parse<T: std::str::FromStr>(&self, col: usize) -> CliResult<T> {
        let raw = self.str(col);
        raw.parse().map_err(|_| {
            CliError::input(format!("line {}: column '{}' has invalid value '{raw}'", self.line(), self.table.columns[col]))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trips() {
        let mut t = Table::new(&["a", "b"]).with_meta("power_base_va", num(1e6 / 3.0));
        t.push(vec!["x,y".into(), num(0.1 + 0.2)]);
        t.push(vec!["z".into(), num(-1e-300)]);
        let text = t.to_text("test");
        assert!(text.starts_with("# dropf-test v1\n# power_base_va=333333.3333333333\na,b\n"));
        let back = Table::from_text("test", &text).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_text("test"), text);
        assert_eq!(back.rows[0][1].parse::<f64>().unwrap(), 0.1 + 0.2);
    }

    #[test]
    fn wrong_header_is_rejected() {
        let e = Table::from_text("forecast", "# dropf-trace v1\na\n1\n").unwrap_err();
        assert!(e.message.contains("line 1"));
        assert!(Table::from_text("forecast", "").is_err());
    }

    #[test]
    fn bad_cell_reports_line() {
        let t = Table::from_text("test", "# dropf-test v1\n# k=1\nx\n1\nabc\n").unwrap();
        let e = Cells::new(&t, 1).parse::<f64>(0).unwrap_err();
        assert!(e.message.starts_with("line 5:"), "{}", e.message);
    }
}
