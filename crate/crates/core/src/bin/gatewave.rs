use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gatewave::harness::config::ConfigDoc;
use gatewave::harness::experiment::{default_workers, parse_values, sweep};
use gatewave::harness::output::{
    file_stem, run_file, run_preset, write_sweep, EXIT_PASS, EXIT_SOLVER_FAILURE, EXIT_USAGE,
};
use gatewave::harness::presets;
use gatewave::Error;

/// Behavioral transient simulator for a GaN push-pull gate-drive chain.
#[derive(Parser, Debug)]
#[command(name = "gatewave", version)]
struct Cli {
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Accepted for reproducibility scripts; the simulator uses no randomness.
    #[arg(long, global = true)]
    seedless: bool,
    /// Sweep worker threads (overrides GATEWAVE_WORKERS).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a preset by name or a scenario file and check its bounds.
    Run { target: String },
    /// Sweep one numeric parameter of a scenario.
    Sweep {
        scenario: String,
        #[arg(long)]
        param: String,
        /// Comma-separated list or `start:stop:count`.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
    /// Parse and validate a scenario file.
    Validate { scenario: String },
    /// List the shipped presets.
    ListPresets,
}

fn load_doc(target: &str) -> Result<(String, ConfigDoc), Error> {
    if let Some(name) = presets::canonical(target) {
        if !Path::new(target).is_file() {
            let file = presets::PRESETS.iter().find(|(n, _)| *n == name).map(|(_, f)| *f).unwrap_or_default();
            let text = presets::catalog_file(file).unwrap_or_default();
            return Ok((name.to_string(), ConfigDoc::from_catalog(file, text)?));
        }
    }
    let path = Path::new(target);
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok((file_stem(&stem), ConfigDoc::from_file(path)?))
}

fn exit_for(err: &Error) -> i32 {
    match err.root() {
        Error::Parse { .. }
        | Error::Validation { .. }
        | Error::UnknownPreset(_)
        | Error::BadParamPath(_)
        | Error::Overlap { .. }
        | Error::InvalidModel { .. }
        | Error::Io { .. } => EXIT_USAGE,
        _ => EXIT_SOLVER_FAILURE,
    }
}

fn run(cli: Cli) -> Result<i32, Error> {
    let workers = cli.workers.filter(|n| *n > 0).unwrap_or_else(default_workers);
    match cli.command {
        Command::Run { target } => {
            let report = if Path::new(&target).is_file() {
                run_file(Path::new(&target), &cli.out, workers)?
            } else if presets::canonical(&target).is_some() {
                run_preset(&target, &cli.out, workers)?
            } else {
                return Err(Error::UnknownPreset(target));
            };
            print!("{}", report.summary);
            println!("artifacts: {}", report.dir.display());
            Ok(report.exit_code())
        }
        Command::Sweep {
            scenario,
            param,
            values,
        } => {
            let values = parse_values(&values).map_err(|reason| Error::Validation {
                key: "--values".into(),
                reason,
            })?;
            let (name, doc) = load_doc(&scenario)?;
            let result = sweep(&doc, &param, &values, workers)?;
            let dir = write_sweep(&format!("{name}_sweep"), &doc, &result, &cli.out)?;
            let failed = result.rows.iter().filter(|r| r.outcome.is_err()).count();
            for r in &result.rows {
                match &r.outcome {
                    Ok(d) => println!("{} = {}: ok ({} periods)", param, r.point.value.unwrap_or(f64::NAN), d.periods),
                    Err(e) => println!("{} = {}: {e}", param, r.point.value.unwrap_or(f64::NAN)),
                }
            }
            println!("artifacts: {}", dir.display());
            Ok(if failed > 0 { EXIT_SOLVER_FAILURE } else { EXIT_PASS })
        }
        Command::Validate { scenario } => {
            let (_, doc) = load_doc(&scenario)?;
            let sc = doc.scenario()?;
            gatewave::harness::Experiment::from_doc(&doc)?;
            println!(
                "ok: {} ({} Hz, duty {}/{}, topology {})",
                sc.label,
                sc.pwm.frequency_hz,
                sc.pwm.duty_high,
                sc.pwm.duty_low,
                sc.topology.name()
            );
            Ok(EXIT_PASS)
        }
        Command::ListPresets => {
            for (name, description) in presets::list() {
                println!("{name:<24} {description}");
            }
            Ok(EXIT_PASS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_for(&e)
        }
    };
    ExitCode::from(code as u8)
}
