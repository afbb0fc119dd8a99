use std::str::FromStr;

use super::RunReport;
use crate::data::Kind;
use crate::error::{Error, Result};

pub const TABLE_COLUMNS: [&str; 7] = [
    "Model/Plan",
    "F1 (Hyper-Specific)",
    "MAE (Hyper-Specific)",
    "F1 (General)",
    "MAE (General)",
    "Entropy (Hyper-Specific)",
    "Entropy (General)",
];

/// Printed for a split the run did not evaluate.
const MISSING: &str = "n/a";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableFormat {
    Markdown,
    Csv,
}

impl FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "markdown" => Ok(TableFormat::Markdown),
            "csv" => Ok(TableFormat::Csv),
            _ => Err(Error::Usage(format!(
                "unknown format {s:?} (expected markdown or csv)"
            ))),
        }
    }
}

/// Four decimals. `{:.4}` rounds exact binary ties to even.
fn num(v: Option<f64>) -> String {
    v.map_or_else(|| MISSING.to_string(), |v| format!("{v:.4}"))
}

fn row(r: &RunReport) -> [String; 7] {
    let (s, g) = (r.eval.get(Kind::HyperSpecific), r.eval.get(Kind::General));
    [
        r.label(),
        num(s.map(|m| m.f1)),
        num(s.map(|m| m.mae)),
        num(g.map(|m| m.f1)),
        num(g.map(|m| m.mae)),
        num(s.map(|m| m.attention_entropy)),
        num(g.map(|m| m.attention_entropy)),
    ]
}

/// One header row plus one row per report. Markdown pipes in labels are
/// escaped; CSV follows RFC 4180 (CRLF line ends, quoting as needed).
pub fn emit_tables(reports: &[RunReport], format: TableFormat) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::Usage("no reports to tabulate".into()));
    }
    match format {
        TableFormat::Markdown => {
            let line = |cells: &[String]| format!("| {} |\n", cells.join(" | "));
            let mut out = line(&TABLE_COLUMNS.map(String::from));
            out.push_str("|---|---:|---:|---:|---:|---:|---:|\n");
            for r in reports {
                let mut cells = row(r);
                cells[0] = cells[0].replace('|', "\\|");
                out.push_str(&line(&cells));
            }
            Ok(out)
        }
        TableFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::CRLF)
                .from_writer(Vec::new());
            w.write_record(TABLE_COLUMNS)?;
            for r in reports {
                w.write_record(row(r))?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Usage(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| Error::Usage(e.to_string()))
        }
    }
}
