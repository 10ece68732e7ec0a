//! Command-line front end: two-sample tests and model diagnosis on CSV
//! files, and the Monte Carlo harness on experiment configs. All heavy
//! lifting lives in the library; this binary only parses arguments and
//! moves bytes.

use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use hdtest::matcore::Sample;
use hdtest::modelcheck::{diagnose, select_k, KappaFn};
use hdtest::procedures::{
    test_adaptive, test_chi2, test_naive, test_normal, test_sse, MatrixChoice, TestOutcome,
};
use hdtest::sim::{named_scenario, run_grid_with, write_csv, write_json, ExperimentGrid, RunOptions};

#[derive(Parser)]
#[command(
    name = "hdtest",
    version,
    about = "Two-sample mean tests for high-dimensional data"
)]
struct Cli {
    /// Worker threads for simulation (env HDTEST_THREADS as fallback).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Base seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Test level in (0, 0.5). Defaults to 0.05 for data commands and to
    /// the config's value for simulations.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProcArg {
    /// Model-check the data, then route to the appropriate test.
    Auto,
    /// Normal-calibrated test with a weighting matrix (see --matrix).
    Normal,
    /// Chi-square test for strongly spiked data.
    Chi2,
    /// Eigenstructure-adjusted test (spike directions projected out).
    Sse,
    /// Naive plug-in projection test (known to inflate size).
    Naive,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
enum MatrixArg {
    #[default]
    Identity,
    /// Estimated diagonal weighting from pooled sample variances.
    DiagEst,
}

#[derive(Subcommand)]
enum Command {
    /// Test H0: mu1 = mu2 on two CSV files (rows = observations).
    Run {
        #[arg(long)]
        group1: PathBuf,
        #[arg(long)]
        group2: PathBuf,
        #[arg(long, value_enum, default_value_t = ProcArg::Auto)]
        procedure: ProcArg,
        #[arg(long, value_enum, default_value_t)]
        matrix: MatrixArg,
        /// Spike count for group 1 (sse/naive); estimated when omitted.
        #[arg(long)]
        k1: Option<usize>,
        /// Spike count for group 2 (sse/naive); estimated when omitted.
        #[arg(long)]
        k2: Option<usize>,
        /// Output JSON path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report the spiked-model diagnosis and selected spike counts.
    Diagnose {
        #[arg(long)]
        group1: PathBuf,
        #[arg(long)]
        group2: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte Carlo experiment from a named scenario or a JSON config.
    Simulate {
        /// Scenario name (fig1, fig2a, fig2b, fig2c, s4_1, s4_2) or a path
        /// to an experiment JSON file.
        #[arg(long)]
        config: String,
        /// CSV output path; a JSON mirror is written next to it.
        #[arg(long)]
        out: PathBuf,
        /// Replication override.
        #[arg(long)]
        reps: Option<usize>,
        /// Record wall-clock per replication (makes outputs nondeterministic).
        #[arg(long)]
        timings: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
        Err(e) => {
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };

    let threads = cli.threads.or_else(|| {
        std::env::var("HDTEST_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(t) = threads {
        // a later failure here only means a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }

    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> hdtest::Result<()> {
    match cli.command {
        Command::Run {
            group1,
            group2,
            procedure,
            matrix,
            k1,
            k2,
            out,
        } => {
            let alpha = cli.alpha.unwrap_or(0.05);
            let s1 = Sample::from_csv_path(&group1)?;
            let s2 = Sample::from_csv_path(&group2)?;
            let outcome = run_test(&s1, &s2, procedure, matrix, k1, k2, alpha)?;
            write_pretty_json(&outcome, out.as_deref())
        }
        Command::Diagnose { group1, group2, out } => {
            let s1 = Sample::from_csv_path(&group1)?;
            let s2 = Sample::from_csv_path(&group2)?;
            let report = diagnose(&s1, &s2, &KappaFn::default())?;
            write_pretty_json(&report, out.as_deref())
        }
        Command::Simulate {
            config,
            out,
            reps,
            timings,
        } => {
            let mut grid = load_config(&config)?;
            if let Some(r) = reps {
                grid.replications = r;
            }
            if let Some(s) = cli.seed {
                grid.seed = s;
            }
            if let Some(a) = cli.alpha {
                grid.alpha = a;
            }
            let result = run_grid_with(&grid, &RunOptions { timings })?;
            let mut csv = std::fs::File::create(&out)?;
            write_csv(&result, &mut csv)?;
            let mut json = std::fs::File::create(out.with_extension("json"))?;
            write_json(&result, &mut json)?;
            Ok(())
        }
    }
}

fn run_test(
    s1: &Sample,
    s2: &Sample,
    procedure: ProcArg,
    matrix: MatrixArg,
    k1: Option<usize>,
    k2: Option<usize>,
    alpha: f64,
) -> hdtest::Result<TestOutcome> {
    let kf = KappaFn::default();
    let spikes = |s1: &Sample, s2: &Sample| -> hdtest::Result<(usize, usize)> {
        Ok(match (k1, k2) {
            (Some(a), Some(b)) => (a, b),
            (Some(a), None) => (a, select_k(s2, &kf)?),
            (None, Some(b)) => (select_k(s1, &kf)?, b),
            (None, None) => (select_k(s1, &kf)?, select_k(s2, &kf)?),
        })
    };
    match procedure {
        ProcArg::Auto => test_adaptive(s1, s2, alpha),
        ProcArg::Normal => {
            let choice = match matrix {
                MatrixArg::Identity => MatrixChoice::Identity,
                MatrixArg::DiagEst => MatrixChoice::AStarDiagEstimated,
            };
            test_normal(s1, s2, &choice, alpha)
        }
        ProcArg::Chi2 => test_chi2(s1, s2, alpha),
        ProcArg::Sse => {
            let (a, b) = spikes(s1, s2)?;
            test_sse(s1, s2, a, b, alpha)
        }
        ProcArg::Naive => {
            let (a, b) = spikes(s1, s2)?;
            test_naive(s1, s2, a, b, alpha)
        }
    }
}

fn load_config(config: &str) -> hdtest::Result<ExperimentGrid> {
    if let Ok(grid) = named_scenario(config) {
        return Ok(grid);
    }
    let path = Path::new(config);
    if !path.exists() {
        return Err(hdtest::Error::UnknownScenario(config.into()));
    }
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn write_pretty_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> hdtest::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}
