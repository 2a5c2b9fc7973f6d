use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use magweyl_cli::report::SweepReport;
use magweyl_cli::{render, run_file, thread_count, CliError, Mode, EXIT_FAIL, EXIT_PASS};

#[derive(Parser)]
#[command(name = "magweyl", version, about = "Magnetic Weyl quantization experiments")]
struct Cli {
    /// Directory for reports and plot data.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for the ℏ ladder.
    #[arg(long, global = true, env = "MAGWEYL_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment at every ℏ of its config.
    Run { config: PathBuf },
    /// Run along a strictly decreasing ℏ ladder and extrapolate to ℏ = 0.
    Sweep { config: PathBuf },
    /// Write plot data and a summary table for a report.
    Render { report: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    let threads = thread_count(cli.threads);
    let out_dir = cli.out_dir.as_deref();
    match &cli.command {
        Command::Run { config } => experiment(config, Mode::Run, out_dir, threads),
        Command::Sweep { config } => experiment(config, Mode::Sweep, out_dir, threads),
        Command::Render { report } => {
            let r = SweepReport::read(report)?;
            let dir = match out_dir {
                Some(d) => d.to_path_buf(),
                None => report.parent().map(Path::to_path_buf).unwrap_or_default(),
            };
            let stem = report.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
            for p in render::render(&r, &dir, stem)? {
                println!("wrote {}", p.display());
            }
            Ok(EXIT_PASS)
        }
    }
}

fn experiment(config: &Path, mode: Mode, out_dir: Option<&Path>, threads: usize) -> Result<i32, CliError> {
    let (report, csv, json) = run_file(config, mode, out_dir, threads)?;
    for c in &report.checks {
        println!("{} {} (tolerance {:e})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.tolerance);
    }
    println!("wrote {}", csv.display());
    println!("wrote {}", json.display());
    Ok(if report.passed { EXIT_PASS } else { EXIT_FAIL })
}
