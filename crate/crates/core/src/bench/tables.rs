use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::BenchReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl TableFormat {
    fn extension(&self) -> &'static str {
        match self {
            TableFormat::Csv => "csv",
            TableFormat::Markdown => "md",
        }
    }
}

impl FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            _ => Err(Error::Parse(format!("unknown table format `{s}`"))),
        }
    }
}

fn columns(report: &BenchReport) -> Vec<(usize, usize)> {
    report
        .scenarios
        .iter()
        .flat_map(|&lags| report.t_values.iter().map(move |&t| (lags, t)))
        .collect()
}

/// One row per method, one column per (lag scenario, T). Markdown cells show
/// `mean (sd)`; CSV cells hold the mean and a separate `sd` column each.
pub fn render_table(report: &BenchReport, format: TableFormat) -> String {
    let cols = columns(report);
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            out.push_str("method");
            for (lags, t) in &cols {
                let _ = write!(out, ",lags{lags}_T{t}_mean,lags{lags}_T{t}_sd");
            }
            out.push('\n');
            for method in &report.methods {
                out.push_str(&method.name);
                for &(lags, t) in &cols {
                    match report.cell(&method.name, t, lags) {
                        Some(c) => {
                            let _ = write!(out, ",{:.4},{:.4}", c.mean, c.sd);
                        }
                        None => out.push_str(",,"),
                    }
                }
                out.push('\n');
            }
        }
        TableFormat::Markdown => {
            let _ = writeln!(
                out,
                "Mean RMSTE (sd), {} replicates, {} test points, DGP {}",
                report.replications, report.test_size, report.dgp
            );
            out.push('\n');
            out.push_str("| method |");
            for (lags, t) in &cols {
                let _ = write!(out, " {lags} lags, T={t} |");
            }
            out.push_str("\n|---|");
            for _ in &cols {
                out.push_str("---:|");
            }
            out.push('\n');
            for method in &report.methods {
                let _ = write!(out, "| {} |", method.name);
                for &(lags, t) in &cols {
                    match report.cell(&method.name, t, lags) {
                        Some(c) => {
                            let _ = write!(out, " {:.2} ({:.2}) |", c.mean, c.sd);
                        }
                        None => out.push_str(" |"),
                    }
                }
                out.push('\n');
            }
        }
    }
    out
}

/// Writes the report's table into `dir` as `<dgp>.<csv|md>` and returns the path.
pub fn emit_tables(report: &BenchReport, format: TableFormat, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{}.{}", report.dgp, format.extension()));
    fs::write(&path, render_table(report, format))?;
    Ok(path)
}
