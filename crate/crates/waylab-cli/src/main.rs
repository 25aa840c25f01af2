use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use waylab_cli::builtin::{builtin, parse_params};
use waylab_cli::output::{bounds_csv, to_json};
use waylab_cli::scenario::{resolve_tolerance, run_scenario};
use waylab_cli::suite::{run_suite, summary_lines};
use waylab_cli::{CliError, CliResult, ScenarioReport, TOL_ENV};

#[derive(Parser)]
#[command(name = "waylab", version, about = "Conservation-law limits on quantum measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate scenario files and write their reports.
    Run {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        /// Equality tolerance, overriding the scenario and the environment.
        #[arg(long)]
        tol: Option<f64>,
        /// Directory for report files; reports go to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// `csv` also writes one CSV row per bound report.
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Number of scenario files evaluated concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Emit a built-in scenario.
    Builtin {
        name: String,
        /// Parameters as key=value.
        #[arg(long = "param")]
        params: Vec<String>,
        /// Write the scenario here instead of stdout.
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Run the acceptance battery.
    Suite {
        #[arg(long)]
        tol: Option<f64>,
        /// Directory for `suite.json`; the report goes to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn env_tol() -> Option<String> {
    std::env::var(TOL_ENV).ok()
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path.display().to_string(), e))
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned())
}

fn emit_report(path: &Path, report: &ScenarioReport, out: Option<&Path>, format: Format) -> CliResult<()> {
    let json = to_json(report);
    match out {
        None => {
            print!("{json}");
            if format == Format::Csv {
                print!("{}", csv_of(report));
            }
        }
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display().to_string(), e))?;
            let base = stem(path);
            write_file(&dir.join(format!("{base}.report.json")), &json)?;
            if format == Format::Csv {
                write_file(&dir.join(format!("{base}.bounds.csv")), &csv_of(report))?;
            }
            eprintln!(
                "{}: {:?} ({} bounds, {} violated, {} certifications failed)",
                path.display(),
                report.status,
                report.summary.total,
                report.summary.violated,
                report.certifications.failed.len()
            );
        }
    }
    Ok(())
}

fn csv_of(report: &ScenarioReport) -> String {
    let rows: Vec<_> = report.bound_tasks.iter().copied().zip(report.bounds.iter()).collect();
    bounds_csv(&rows)
}

fn run(scenarios: &[PathBuf], tol: Option<f64>, out: Option<&Path>, format: Format, jobs: usize) -> i32 {
    let env = env_tol();
    let evaluate = |p: &PathBuf| run_scenario(p, tol, env.as_deref());
    let results: Vec<CliResult<ScenarioReport>> = match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(pool) => pool.install(|| scenarios.par_iter().map(evaluate).collect()),
        Err(_) => scenarios.iter().map(evaluate).collect(),
    };
    let mut code = 0;
    for (path, result) in scenarios.iter().zip(results) {
        let outcome = result.and_then(|r| emit_report(path, &r, out, format).map(|_| r.exit_code()));
        match outcome {
            Ok(c) => code = code.max(c),
            Err(e) => {
                eprintln!("error: {e}");
                code = code.max(e.exit_code());
            }
        }
    }
    code
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            scenarios,
            tol,
            out,
            format,
            jobs,
        } => run(&scenarios, tol, out.as_deref(), format, jobs),
        Command::Builtin { name, params, emit } => {
            let result = parse_params(&params).and_then(|p| builtin(&name, &p)).and_then(|s| {
                let text = to_json(&s);
                match emit {
                    Some(path) => write_file(&path, &text),
                    None => {
                        print!("{text}");
                        Ok(())
                    }
                }
            });
            match result {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            }
        }
        Command::Suite { tol, out } => match resolve_tolerance(tol, None, env_tol().as_deref()) {
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
            Ok(t) => {
                let report = run_suite(&t);
                for line in summary_lines(&report) {
                    eprintln!("{line}");
                }
                let text = to_json(&report);
                let written = match out {
                    None => {
                        print!("{text}");
                        Ok(())
                    }
                    Some(dir) => std::fs::create_dir_all(&dir)
                        .map_err(|e| CliError::io(dir.display().to_string(), e))
                        .and_then(|_| write_file(&dir.join("suite.json"), &text)),
                };
                match written {
                    Ok(()) => report.exit_code(),
                    Err(e) => {
                        eprintln!("error: {e}");
                        e.exit_code()
                    }
                }
            }
        },
    };
    ExitCode::from(code as u8)
}
