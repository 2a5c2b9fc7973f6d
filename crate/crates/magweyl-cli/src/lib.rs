//! Experiment runner for `magweyl`: JSON configs in, CSV/JSON reports and
//! plot data out.

pub mod config;
pub mod experiments;
pub mod render;
pub mod report;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use magweyl::coherent::richardson;
use rayon::prelude::*;

use crate::config::{Experiment, ExperimentConfig, Setup};
use crate::report::{Environment, Row, SweepReport, SCHEMA};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("validation error in `{field}`{}: {msg}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Validation { field: String, line: Option<usize>, msg: String },
    #[error("{experiment}: {source}")]
    Module { experiment: String, source: magweyl::Error },
    #[error("io error: {0}")]
    Io(String),
}

impl CliError {
    /// 2 for anything the config can fix, 3 for numerical and I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation { .. } => 2,
            Self::Module { source, .. } => match source {
                magweyl::Error::Numerical { .. } | magweyl::Error::Consistency(_) | magweyl::Error::Io(_) => 3,
                _ => 2,
            },
            Self::Io(_) => 3,
        }
    }
}

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Run,
    Sweep,
}

impl Mode {
    fn tag(self) -> &'static str {
        match self {
            Self::Run => "run",
            Self::Sweep => "sweep",
        }
    }
}

/// Worker count from the flag or `MAGWEYL_THREADS`, else the machine's parallelism.
pub fn thread_count(flag: Option<usize>) -> usize {
    flag.filter(|t| *t > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Parses, validates and runs a config document without touching the file system.
pub fn execute_text(text: &str, mode: Mode, threads: usize) -> Result<SweepReport, CliError> {
    let (cfg, setup) = config::load(text, mode == Mode::Sweep)?;
    execute(cfg, &setup, mode, threads)
}

pub fn execute(cfg: ExperimentConfig, setup: &Setup, mode: Mode, threads: usize) -> Result<SweepReport, CliError> {
    let module = |e: magweyl::Error| CliError::Module { experiment: setup.experiment.tag().into(), source: e };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
    // The flux check does not depend on ℏ; it runs once.
    let ladder: &[f64] = if setup.experiment == Experiment::FluxCheck { &setup.ladder[..1] } else { &setup.ladder };
    let per_rung: Vec<Vec<Row>> = pool.install(|| {
        ladder
            .par_iter()
            .map(|&h| {
                let t0 = Instant::now();
                let mut rows = experiments::rung(setup, h)?;
                let ms = t0.elapsed().as_secs_f64() * 1e3;
                for r in &mut rows {
                    r.runtime_ms = ms;
                }
                Ok(rows)
            })
            .collect::<magweyl::Result<Vec<_>>>()
    })
    .map_err(module)?;
    let mut rows: Vec<Row> = per_rung.into_iter().flatten().collect();
    if mode == Mode::Sweep {
        let limits = limit_rows(&rows).map_err(module)?;
        rows.extend(limits);
    }
    let mut report = SweepReport {
        schema: SCHEMA,
        command: mode.tag().into(),
        experiment: setup.experiment.tag().into(),
        seed: setup.seed,
        config: cfg,
        environment: Environment::current(threads),
        rows,
        checks: experiments::checks(setup, mode == Mode::Sweep),
        passed: false,
    };
    report.recompute();
    Ok(report)
}

/// One ℏ = 0 row per (series, label) whose rungs share a reference: the
/// Richardson limit of the measured column.
fn limit_rows(rows: &[Row]) -> magweyl::Result<Vec<Row>> {
    let mut groups: BTreeMap<(&str, &str), Vec<&Row>> = BTreeMap::new();
    let mut order = Vec::new();
    for r in rows {
        let key = (r.series.as_str(), r.label.as_str());
        if !groups.contains_key(&key) {
            order.push(key);
        }
        groups.entry(key).or_default().push(r);
    }
    let mut out = Vec::new();
    for key in order {
        let g = &groups[&key];
        if g.len() < 2 || g.iter().any(|r| r.reference != g[0].reference) {
            continue;
        }
        let h: Vec<f64> = g.iter().map(|r| r.hbar).collect();
        let v: Vec<f64> = g.iter().map(|r| r.measured).collect();
        let (limit, _) = richardson(&h, &v)?;
        out.push(Row::new(key.0, key.1, 0.0, limit, g[0].reference));
    }
    Ok(out)
}

/// Where `output` lands: under `out_dir` when given, with any extension dropped.
pub fn output_stem(output: &str, out_dir: Option<&Path>) -> PathBuf {
    let p = Path::new(output);
    let p = match out_dir {
        Some(d) => d.join(p),
        None => p.to_path_buf(),
    };
    p.with_extension("")
}

/// Reads a config file, runs it and writes `<stem>.csv` and `<stem>.json`.
/// Nothing is written when validation or the computation fails.
pub fn run_file(path: &Path, mode: Mode, out_dir: Option<&Path>, threads: usize) -> Result<(SweepReport, PathBuf, PathBuf), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let (cfg, setup) = config::load(&text, mode == Mode::Sweep)?;
    let stem = output_stem(&cfg.output, out_dir);
    let config = path.canonicalize().ok();
    for ext in ["csv", "json"] {
        let target = stem.with_extension(ext);
        if config.is_some() && target.canonicalize().ok() == config {
            return Err(CliError::Validation {
                field: "output".into(),
                line: config::line_of(&text, "output"),
                msg: format!("{} would overwrite the config file", target.display()),
            });
        }
    }
    let report = execute(cfg, &setup, mode, threads)?;
    let (csv, json) = report.write(&stem)?;
    Ok((report, csv, json))
}
