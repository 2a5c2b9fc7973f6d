//! Plot data from a report: one two-column (ℏ, value) file per series and a
//! summary table.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::report::{evaluate, write_atomic, Row, SweepReport};
use crate::CliError;

pub const NO_ROWS: &str = "no rows";

fn series_order(rows: &[Row]) -> Vec<&str> {
    let mut out: Vec<&str> = Vec::new();
    for r in rows {
        if !out.contains(&r.series.as_str()) {
            out.push(&r.series);
        }
    }
    out
}

/// Data file for one series. Labels form blocks separated by two blank lines;
/// a reference shared by every row is written as a `# reference` header.
pub fn series_data(report: &SweepReport, series: &str) -> String {
    let rows: Vec<&Row> = report.rows.iter().filter(|r| r.series == series).collect();
    let mut s = String::new();
    let _ = writeln!(s, "# experiment: {}", report.experiment);
    let _ = writeln!(s, "# series: {series}");
    let _ = writeln!(s, "# columns: hbar value");
    if let Some(first) = rows.first() {
        if rows.iter().all(|r| r.reference == first.reference) {
            let _ = writeln!(s, "# reference: {}", first.reference);
        }
    }
    let mut labels: Vec<&str> = Vec::new();
    for r in &rows {
        if !labels.contains(&r.label.as_str()) {
            labels.push(&r.label);
        }
    }
    for (i, label) in labels.iter().enumerate() {
        if i > 0 {
            s.push_str("\n\n");
        }
        let _ = writeln!(s, "# label: {label}");
        for r in rows.iter().filter(|r| r.label == *label) {
            let _ = writeln!(s, "{} {}", r.hbar, r.measured);
        }
    }
    s
}

pub fn summary(report: &SweepReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "experiment: {} ({}), seed {}", report.experiment, report.command, report.seed);
    if report.rows.is_empty() {
        let _ = writeln!(s, "{NO_ROWS}");
        return s;
    }
    let _ = writeln!(s, "\n{:<14} {:<16} {:>12} {:>22} {:>22} {:>12}", "series", "label", "hbar", "measured", "reference", "abs_error");
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{:<14} {:<16} {:>12.6} {:>22.14e} {:>22.14e} {:>12.3e}",
            r.series, r.label, r.hbar, r.measured, r.reference, r.abs_error
        );
    }
    let _ = writeln!(s, "\nchecks:");
    for c in &report.checks {
        let now = evaluate(c, &report.rows);
        let flag = if now { "PASS" } else { "FAIL" };
        let note = if now != c.passed { " (differs from the stored result)" } else { "" };
        let _ = writeln!(s, "  {flag} {} [{}] tolerance {:e}{note}", c.name, c.series.join(", "), c.tolerance);
    }
    s
}

/// Writes `<stem>_<series>.dat` per series and `<stem>_summary.txt` into `out_dir`.
pub fn render(report: &SweepReport, out_dir: &Path, stem: &str) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    for series in series_order(&report.rows) {
        let path = out_dir.join(format!("{stem}_{series}.dat"));
        write_atomic(&path, series_data(report, series).as_bytes())?;
        written.push(path);
    }
    let path = out_dir.join(format!("{stem}_summary.txt"));
    write_atomic(&path, summary(report).as_bytes())?;
    written.push(path);
    Ok(written)
}
