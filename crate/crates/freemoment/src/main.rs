//! Command-line front end. Four subcommands: `check` runs the certification
//! pipeline, `norms` tabulates truncated Fock norms, `calculus` runs radial
//! diagnostics, `generate` writes seeded scenario files.
//!
//! Exit codes: 0 all checks pass, 2 a mathematical check failed, 3 bad
//! input, 4 a capacity guard tripped. Report bodies go to stdout and are
//! byte-identical for identical configuration and seed; timing only ever
//! goes to stderr.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use freemoment::pipeline::{
    render_json, norms_csv, radial_csv, run_calculus, run_check, run_generate, run_norms,
    vn_csv, EnsembleSource, GeneratorKind, GeneratorSpec, RunConfig, DEFAULT_M_FOCK,
};
use freemoment::{Error, Result};

#[derive(Parser)]
#[command(
    name = "freemoment",
    version,
    about = "Certification pipeline and functional-calculus diagnostics for finitely supported random operator families"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the end-to-end certification pipeline on an ensemble
    Check(CheckArgs),
    /// Tabulate truncated Fock norms of a polynomial
    Norms(NormsArgs),
    /// Radial diagnostics of a polynomial against an ensemble and its dilation
    Calculus(CalculusArgs),
    /// Write a seeded scenario file
    Generate(GenerateArgs),
}

#[derive(Args)]
struct SourceArgs {
    /// Scenario file (JSON)
    #[arg(long, value_name = "PATH")]
    scenario: Option<PathBuf>,
    /// Seeded generator instead of a file: row_contraction | coisometry
    #[arg(long, value_name = "KIND", conflicts_with = "scenario")]
    kind: Option<String>,
    /// Generator: operators per tuple
    #[arg(long, value_name = "D", default_value_t = 2)]
    d: usize,
    /// Generator: matrix dimension
    #[arg(long, value_name = "N", default_value_t = 2)]
    n: usize,
    /// Generator: number of scenarios
    #[arg(long, value_name = "K", default_value_t = 2)]
    k: usize,
    /// Generator: row-norm headroom (row_contraction only)
    #[arg(long, value_name = "X", default_value_t = 0.2)]
    slack: f64,
}

impl SourceArgs {
    fn resolve(&self, seed: u64) -> Result<EnsembleSource> {
        if let Some(path) = &self.scenario {
            return Ok(EnsembleSource::File(path.clone()));
        }
        if let Some(kind) = &self.kind {
            let kind = kind.parse::<GeneratorKind>()?;
            return Ok(EnsembleSource::Generator(GeneratorSpec {
                kind,
                d: self.d,
                n: self.n,
                k: self.k,
                seed,
                slack: self.slack,
            }));
        }
        Err(Error::Config(
            "no ensemble source: pass --scenario PATH or --kind KIND".into(),
        ))
    }
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Word depth of the moment kernel
    #[arg(long, value_name = "N", default_value_t = 3)]
    depth: usize,
    /// Fock truncation level (default: max(depth, 3))
    #[arg(long, value_name = "M")]
    fock: Option<usize>,
    /// Tolerance for residual assertions
    #[arg(long, value_name = "X", default_value_t = 1e-8)]
    tol: f64,
    /// Seed for generator draws and the polynomial suite
    #[arg(long, value_name = "S", default_value_t = 0)]
    seed: u64,
    /// Also write the JSON report to this file
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Write the polynomial-suite table as CSV
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct NormsArgs {
    /// Polynomial in the generators, e.g. "Z1*Z2 - 0.5*Z1^2"
    #[arg(long, value_name = "TEXT")]
    poly: String,
    /// Extra truncation levels past the polynomial degree
    #[arg(long, value_name = "L", default_value_t = 6)]
    levels: usize,
    /// Also write the JSON report to this file
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Write the table as CSV
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct CalculusArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Polynomial in the generators of the ensemble
    #[arg(long, value_name = "TEXT")]
    poly: String,
    /// Radii in (0,1), strictly increasing (default 1 - 2^-j, j = 1..6)
    #[arg(long, value_name = "R1,R2,...", value_delimiter = ',')]
    r_grid: Option<Vec<f64>>,
    /// Word depth of the moment kernel
    #[arg(long, value_name = "N", default_value_t = 3)]
    depth: usize,
    /// Fock truncation level (default: max(depth, 3))
    #[arg(long, value_name = "M")]
    fock: Option<usize>,
    /// Tolerance for the cross-identity
    #[arg(long, value_name = "X", default_value_t = 1e-8)]
    tol: f64,
    /// Seed for generator draws and probe vectors
    #[arg(long, value_name = "S", default_value_t = 0)]
    seed: u64,
    /// Also write the JSON report to this file
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Write the radial table as CSV
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    /// row_contraction | coisometry
    #[arg(long, value_name = "KIND")]
    kind: String,
    /// Operators per tuple
    #[arg(long, value_name = "D", default_value_t = 2)]
    d: usize,
    /// Matrix dimension
    #[arg(long, value_name = "N", default_value_t = 2)]
    n: usize,
    /// Number of scenarios
    #[arg(long, value_name = "K", default_value_t = 2)]
    k: usize,
    /// Row-norm headroom (row_contraction only)
    #[arg(long, value_name = "X", default_value_t = 0.2)]
    slack: f64,
    /// Seed for the draws
    #[arg(long, value_name = "S", default_value_t = 0)]
    seed: u64,
    /// Scenario file to write
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

fn emit<T: Serialize>(report: &T, out: &Option<PathBuf>) -> Result<()> {
    let body = render_json(report)?;
    print!("{body}");
    if let Some(path) = out {
        std::fs::write(path, &body)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Check(args) => {
            let config = RunConfig {
                source: Some(args.source.resolve(args.seed)?),
                depth: args.depth,
                m_fock: args.fock.unwrap_or(args.depth.max(DEFAULT_M_FOCK)),
                check_tol: args.tol,
                seed: args.seed,
                ..RunConfig::default()
            };
            let report = run_check(&config)?;
            emit(&report, &args.out)?;
            if let Some(path) = &args.csv {
                std::fs::write(path, vn_csv(&report))?;
            }
            Ok(report.overall_pass)
        }
        Command::Norms(args) => {
            let config = RunConfig {
                poly: Some(args.poly),
                levels: args.levels,
                ..RunConfig::default()
            };
            let report = run_norms(&config)?;
            emit(&report, &args.out)?;
            if let Some(path) = &args.csv {
                std::fs::write(path, norms_csv(&report))?;
            }
            // Truncated norms can only grow with the level; a decrease is a
            // genuine numerical failure, not bad input.
            Ok(report.monotone)
        }
        Command::Calculus(args) => {
            let config = RunConfig {
                source: Some(args.source.resolve(args.seed)?),
                depth: args.depth,
                m_fock: args.fock.unwrap_or(args.depth.max(DEFAULT_M_FOCK)),
                check_tol: args.tol,
                poly: Some(args.poly),
                r_grid: args.r_grid,
                seed: args.seed,
                ..RunConfig::default()
            };
            let report = run_calculus(&config)?;
            emit(&report, &args.out)?;
            if let Some(path) = &args.csv {
                std::fs::write(path, radial_csv(&report))?;
            }
            Ok(report.overall_pass)
        }
        Command::Generate(args) => {
            let spec = GeneratorSpec {
                kind: args.kind.parse()?,
                d: args.d,
                n: args.n,
                k: args.k,
                seed: args.seed,
                slack: args.slack,
            };
            let report = run_generate(&spec, &args.out)?;
            emit(&report, &None)?;
            Ok(true)
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    let started = std::time::Instant::now();
    let code: u8 = match run(cli) {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    };
    eprintln!("elapsed: {:.3}s", started.elapsed().as_secs_f64());
    std::process::exit(code.into());
}
