//! `lcris`: design, trace, sweep and validate from a scenario file.
//!
//! Exit codes: 0 ok, 1 infeasible seed(s), 2 configuration or I/O error,
//! 3 validation failure.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lcris::config::{load_config, parse_config, parse_ts_grid, ScenarioConfig};
use lcris::experiment::{
    design_all, design_summary, output_header, sweep, sweep_summary, trace_instance, trace_summary,
    write_plans, write_traces, SeedOutcome,
};
use lcris::validation::run_all;
use lcris::Error;

#[derive(Parser)]
#[command(
    name = "lcris",
    version,
    about = "Transition-aware LC-RIS phase design"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file (TOML); defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Comma-separated seed list overriding the config.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
}

#[derive(Subcommand)]
enum Command {
    /// Design both plans for every seed.
    Design(Common),
    /// SNR traces while serving the users in turn.
    Trace(Common),
    /// Effective rate against slot length.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `start:stop:step` in ms.
        #[arg(long)]
        ts_grid: Option<String>,
    },
    /// Run the built-in oracle suites.
    Validate {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

enum Failure {
    Infeasible(String),
    Config(Error),
    Validation,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Config(e)
    }
}

fn setup(common: &Common) -> Result<ScenarioConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => load_config(p)?,
        None => parse_config("")?,
    };
    if let Some(seeds) = &common.seeds {
        cfg.seeds = seeds.clone();
        cfg.validate()?;
    }
    std::fs::create_dir_all(&common.out).map_err(|e| Error::Io {
        path: common.out.clone(),
        source: e,
    })?;
    Ok(cfg)
}

fn write_file(
    dir: &Path,
    name: &str,
    header: &str,
    body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<(), Failure> {
    let path = dir.join(name);
    let io = |e| Error::Io {
        path: path.clone(),
        source: e,
    };
    let mut w = BufWriter::new(File::create(&path).map_err(io)?);
    w.write_all(header.as_bytes()).map_err(io)?;
    body(&mut w).map_err(io)?;
    w.flush().map_err(io)?;
    Ok(())
}

fn infeasible(outcomes: &[SeedOutcome]) -> Result<(), Failure> {
    let bad: Vec<String> = outcomes
        .iter()
        .filter(|o| o.instance().is_none())
        .map(|o| o.seed().to_string())
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Failure::Infeasible(format!(
            "SNR target infeasible for seed(s) {}",
            bad.join(",")
        )))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Design(common) => {
            let cfg = setup(&common)?;
            let header = output_header(&cfg, &cfg.seeds);
            let outcomes = design_all(&cfg, &cfg.seeds)?;
            write_file(&common.out, "plan_proposed.csv", &header, |w| {
                write_plans(w, &outcomes, |i| &i.proposed)
            })?;
            write_file(&common.out, "plan_benchmark.csv", &header, |w| {
                write_plans(w, &outcomes, |i| &i.benchmark)
            })?;
            let summary = design_summary(&cfg, &outcomes);
            write_file(&common.out, "design_summary.txt", &header, |w| {
                w.write_all(summary.as_bytes())
            })?;
            print!("{summary}");
            infeasible(&outcomes)
        }
        Command::Trace(common) => {
            let cfg = setup(&common)?;
            let header = output_header(&cfg, &cfg.seeds);
            let outcomes = design_all(&cfg, &cfg.seeds)?;
            let mut traces = Vec::new();
            for inst in outcomes.iter().filter_map(SeedOutcome::instance) {
                traces.extend(trace_instance(&cfg, inst)?);
            }
            write_file(&common.out, "snr_trace.csv", &header, |w| {
                write_traces(w, &traces)
            })?;
            let summary = trace_summary(&traces);
            write_file(&common.out, "trace_summary.txt", &header, |w| {
                w.write_all(summary.as_bytes())
            })?;
            println!("wrote {} switch traces", traces.len());
            infeasible(&outcomes)
        }
        Command::Sweep { common, ts_grid } => {
            let mut cfg = setup(&common)?;
            if let Some(spec) = ts_grid {
                parse_ts_grid(&spec).map_err(|m| Error::Config {
                    path: "--ts-grid".into(),
                    message: m,
                })?;
                cfg.sim.ts_grid_ms = spec;
            }
            let grid = cfg.ts_grid()?;
            let header = output_header(&cfg, &cfg.seeds);
            let outcomes = design_all(&cfg, &cfg.seeds)?;
            let (result, times) = sweep(&cfg, &outcomes, &grid)?;
            write_file(&common.out, "rate_sweep.csv", &header, |w| {
                result.write_csv(w)
            })?;
            let summary = sweep_summary(&cfg, &result, &times);
            write_file(&common.out, "sweep_summary.txt", &header, |w| {
                w.write_all(summary.as_bytes())
            })?;
            print!("{summary}");
            infeasible(&outcomes)
        }
        Command::Validate { seed } => {
            let reports = run_all(seed)?;
            for r in &reports {
                println!("{r}");
            }
            if reports.iter().all(|r| r.passed) {
                Ok(())
            } else {
                Err(Failure::Validation)
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Infeasible(msg)) => {
            eprintln!("lcris: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("lcris: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Validation) => {
            eprintln!("lcris: validation failed");
            ExitCode::from(3)
        }
    }
}
