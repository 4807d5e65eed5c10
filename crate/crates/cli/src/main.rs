//! `irs-sim`: run, validate and sweep IRS wideband scenarios.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use irs_core::harness::{load_scenario, run_scenario, validate_scenario, RunOptions};
use irs_core::{Error, Precision};

const EXIT_SCHEMA: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "irs-sim",
    version,
    about = "IRS-assisted wideband downlink simulator"
)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PrecisionArg {
    F32,
    F64,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::F32 => Precision::F32,
            PrecisionArg::F64 => Precision::F64,
        }
    }
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    scenario: PathBuf,
    /// Keep every N-th IRS element per axis.
    #[arg(long)]
    decimation: Option<usize>,
    /// Storage precision of the incident field.
    #[arg(long, value_enum)]
    precision: Option<PrecisionArg>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for cached incident fields.
    #[arg(long, env = "IRS_FIELD_CACHE")]
    cache: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario and write its artifacts.
    Run(RunArgs),
    /// Check a scenario file without running it.
    Validate { scenario: PathBuf },
    /// Run a scenario over a bandwidth range, writing metrics against B.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// `start:stop:step` in multiples of f0, inclusive.
        #[arg(long, value_parser = parse_bands)]
        bands: Option<Bands>,
    },
}

#[derive(Clone, Debug)]
struct Bands(Vec<f64>);

fn parse_bands(s: &str) -> Result<Bands, String> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let [start, stop, step] = parts[..] else {
        return Err("expected start:stop:step".into());
    };
    if !(step > 0.0 && stop >= start) {
        return Err("need step > 0 and stop >= start".into());
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok(Bands((0..=n).map(|k| start + k as f64 * step).collect()))
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) | Error::Cache(_) => EXIT_IO,
        Error::NotConverged { .. } => EXIT_NOT_CONVERGED,
        _ => EXIT_SCHEMA,
    }
}

fn run(args: RunArgs, bands: Option<Vec<f64>>, sweep: bool) -> ExitCode {
    let scenario = match load_scenario(&args.scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}: {e}", args.scenario.display());
            return ExitCode::from(exit_code(&e));
        }
    };
    let opts = RunOptions {
        out_dir: args.out,
        decimation: args.decimation,
        precision: args.precision.map(Into::into),
        bandwidths: bands,
        sweep,
        cache: args.cache.map(irs_core::harness::FieldCache::new),
    };
    match run_scenario(&scenario, &opts) {
        Ok(summary) => {
            println!(
                "wrote {} artifacts to {} in {:.1} s",
                summary.manifest.artifacts.len() + 1,
                summary.out_dir.display(),
                summary.manifest.total_seconds
            );
            if summary.converged() {
                ExitCode::SUCCESS
            } else {
                for f in &summary.manifest.failures {
                    eprintln!(
                        "error: {} at B = {} f0: {}",
                        f.technique, f.bandwidth, f.message
                    );
                }
                ExitCode::from(EXIT_NOT_CONVERGED)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(EXIT_SCHEMA);
        }
    }
    match cli.command {
        Command::Run(args) => run(args, None, false),
        Command::Sweep { run: args, bands } => run(args, bands.map(|b| b.0), true),
        Command::Validate { scenario } => match validate_scenario(&scenario) {
            Ok(diagnostics) if diagnostics.is_empty() => {
                println!("{}: ok", scenario.display());
                ExitCode::SUCCESS
            }
            Ok(diagnostics) => {
                for d in &diagnostics {
                    println!("{}: {d}", scenario.display());
                }
                ExitCode::from(EXIT_SCHEMA)
            }
            Err(e) => {
                eprintln!("error: {}: {e}", scenario.display());
                ExitCode::from(EXIT_IO)
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_ranges_are_inclusive() {
        let b = parse_bands("0.1:0.4:0.05").unwrap().0;
        assert_eq!(b.len(), 7);
        assert!((b[6] - 0.4).abs() < 1e-12);
        assert!(parse_bands("0.1:0.4").is_err());
        assert!(parse_bands("0.4:0.1:0.05").is_err());
    }
}
