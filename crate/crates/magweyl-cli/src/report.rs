//! Sweep reports: rows, declarative checks and atomic CSV/JSON output.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::CliError;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub series: String,
    pub label: String,
    pub hbar: f64,
    pub measured: f64,
    pub reference: f64,
    pub abs_error: f64,
    pub runtime_ms: f64,
}

impl Row {
    pub fn new(series: &str, label: &str, hbar: f64, measured: f64, reference: f64) -> Self {
        Self {
            series: series.into(),
            label: label.into(),
            hbar,
            measured,
            reference,
            abs_error: (measured - reference).abs(),
            runtime_ms: 0.0,
        }
    }

    /// Rows at ℏ = 0 hold extrapolated limits.
    pub fn is_limit(&self) -> bool {
        self.hbar == 0.0
    }
}

/// The CSV image of a row. Runtimes vary between runs and stay in the JSON only.
#[derive(Serialize)]
struct CsvRow<'a> {
    series: &'a str,
    label: &'a str,
    hbar: f64,
    measured: f64,
    reference: f64,
    abs_error: f64,
}

/// How a check reads the rows of its series. Rung rules ignore limit rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum Rule {
    /// Every rung: abs_error ≤ tol.
    AbsError,
    /// Every rung: abs_error ≤ tol·|reference|.
    Relative,
    /// Last rung of each label: abs_error ≤ tol.
    FinalAbsError,
    /// Last rung of each label: abs_error ≤ tol·max(1, |reference|).
    FinalScaled,
    /// Consecutive rungs: abs_error ratio ≤ tol.
    ErrorRatio,
    /// abs_error strictly decreasing along the rungs.
    ErrorDecreasing,
    /// measured strictly decreasing along the rungs.
    MeasuredDecreasing,
    /// Last measured ≤ tol · first measured.
    FinalFraction,
    /// Every rung: measured ≥ tol.
    MinMeasured,
    /// Consecutive rungs: |Δmeasured| ≤ tol·|measured|.
    AdjacentVariation,
    /// Consecutive rungs: |Δmeasured| ≤ tol · C |Δℏ|^α.
    JumpBudget { constant: f64, exponent: f64 },
    /// Limit rows: abs_error ≤ tol.
    Limit,
    /// Rungs of a (re, im) series pair: √(e_re² + e_im²) ≤ tol.
    ComplexModulus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// One series, or the (re, im) pair for complex checks.
    pub series: Vec<String>,
    #[serde(flatten)]
    pub rule: Rule,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: &str, series: &[&str], rule: Rule, tolerance: f64) -> Self {
        Self { name: name.into(), series: series.iter().map(|s| s.to_string()).collect(), rule, tolerance, passed: false }
    }
}

/// Rung rows of one series grouped by label, in row order.
fn by_label<'a>(rows: &'a [Row], series: &str) -> BTreeMap<&'a str, Vec<&'a Row>> {
    let mut out: BTreeMap<&str, Vec<&Row>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.series == series && !r.is_limit()) {
        out.entry(&r.label).or_default().push(r);
    }
    out
}

/// Whether a check holds on the given rows. A check with no rows to read fails.
pub fn evaluate(check: &Check, rows: &[Row]) -> bool {
    let tol = check.tolerance;
    let series = check.series[0].as_str();
    let groups = by_label(rows, series);
    let all_rungs = || groups.values().flatten().copied();
    let pairs = |f: &dyn Fn(&Row, &Row) -> bool| groups.values().all(|g| g.windows(2).all(|w| f(w[0], w[1])));
    if groups.is_empty() && !matches!(check.rule, Rule::Limit) {
        return false;
    }
    match check.rule {
        Rule::AbsError => all_rungs().all(|r| r.abs_error <= tol),
        Rule::Relative => all_rungs().all(|r| r.abs_error <= tol * r.reference.abs()),
        Rule::FinalAbsError => groups.values().all(|g| g.last().is_some_and(|r| r.abs_error <= tol)),
        Rule::FinalScaled => groups.values().all(|g| g.last().is_some_and(|r| r.abs_error <= tol * r.reference.abs().max(1.0))),
        Rule::ErrorRatio => pairs(&|a, b| b.abs_error <= tol * a.abs_error),
        Rule::ErrorDecreasing => pairs(&|a, b| b.abs_error < a.abs_error),
        Rule::MeasuredDecreasing => pairs(&|a, b| b.measured < a.measured),
        Rule::FinalFraction => groups.values().all(|g| g.last().unwrap().measured <= tol * g[0].measured),
        Rule::MinMeasured => all_rungs().all(|r| r.measured >= tol),
        Rule::AdjacentVariation => pairs(&|a, b| (b.measured - a.measured).abs() <= tol * a.measured.abs()),
        Rule::JumpBudget { constant, exponent } => {
            pairs(&|a, b| (b.measured - a.measured).abs() <= tol * constant * (a.hbar - b.hbar).abs().powf(exponent))
        }
        Rule::Limit => {
            let lim: Vec<&Row> = rows.iter().filter(|r| r.series == series && r.is_limit()).collect();
            !lim.is_empty() && lim.iter().all(|r| r.abs_error <= tol)
        }
        Rule::ComplexModulus => {
            let Some(other) = check.series.get(1) else { return false };
            let im = by_label(rows, other);
            groups.iter().all(|(label, re)| {
                im.get(label).is_some_and(|im| {
                    re.len() == im.len()
                        && re.iter().zip(im).all(|(a, b)| a.hbar == b.hbar && a.abs_error.hypot(b.abs_error) <= tol)
                })
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub package: String,
    pub version: String,
    pub os: String,
    pub arch: String,
    pub threads: usize,
    pub debug_build: bool,
}

impl Environment {
    pub fn current(threads: usize) -> Self {
        Self {
            package: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            threads,
            debug_build: cfg!(debug_assertions),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema: u32,
    /// `run` or `sweep`.
    pub command: String,
    pub experiment: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub environment: Environment,
    pub rows: Vec<Row>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl SweepReport {
    /// Re-evaluates every check from the rows.
    pub fn recompute(&mut self) {
        for c in &mut self.checks {
            c.passed = evaluate(c, &self.rows);
        }
        self.passed = self.checks.iter().all(|c| c.passed);
    }

    pub fn csv_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(CsvRow {
                series: &r.series,
                label: &r.label,
                hbar: r.hbar,
                measured: r.measured,
                reference: r.reference,
                abs_error: r.abs_error,
            })
            .map_err(|e| CliError::Io(format!("csv: {e}")))?;
        }
        if self.rows.is_empty() {
            w.write_record(["series", "label", "hbar", "measured", "reference", "abs_error"])
                .map_err(|e| CliError::Io(format!("csv: {e}")))?;
        }
        w.into_inner().map_err(|e| CliError::Io(format!("csv: {e}")))
    }

    /// Writes `<stem>.csv` and `<stem>.json`; returns both paths.
    pub fn write(&self, stem: &Path) -> Result<(PathBuf, PathBuf), CliError> {
        let csv_path = stem.with_extension("csv");
        let json_path = stem.with_extension("json");
        let json = serde_json::to_vec_pretty(self).map_err(|e| CliError::Io(format!("json: {e}")))?;
        write_atomic(&csv_path, &self.csv_bytes()?)?;
        write_atomic(&json_path, &json)?;
        Ok((csv_path, json_path))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let r: SweepReport = serde_json::from_str(&text).map_err(|e| CliError::Validation {
            field: "report".into(),
            line: Some(e.line()),
            msg: format!("{}: {e}", path.display()),
        })?;
        if r.schema != SCHEMA {
            return Err(CliError::Validation {
                field: "schema".into(),
                line: None,
                msg: format!("{}: schema {} is not {SCHEMA}", path.display(), r.schema),
            });
        }
        Ok(r)
    }
}

/// Temp file in the target directory, then rename over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    tmp.write_all(bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    tmp.persist(path).map_err(|e| CliError::Io(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}
