use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lancbio::config::{load_experiment, ConfigError};
use lancbio::experiment::{run_experiment, RunError};
use lancbio::summary::{summarize, to_csv, to_text, SummaryError};
use lancbio_core::check::{check_oracles, random_points};
use lancbio_core::problems::{oracle_instance, ProblemId};
use lancbio_core::BilevelOracles;

/// Bilevel hyper-gradient solver benchmarks.
#[derive(Parser)]
#[command(name = "lancbio", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Seed(s). Overrides the `seeds` list of a config.
    #[arg(long, global = true)]
    seed: Vec<u64>,
    /// Output directory for `run`, output CSV file for `summarize`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// IDX image file for hyper-cleaning on real data.
    #[arg(long, global = true, requires = "mnist_labels")]
    mnist_images: Option<PathBuf>,
    /// IDX label file matching `--mnist-images`.
    #[arg(long, global = true, requires = "mnist_images")]
    mnist_labels: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of an experiment config, one CSV trace per (cell, seed).
    Run { config: PathBuf },
    /// Aggregate final-row metrics over trace files (paths or glob patterns).
    Summarize {
        #[arg(required = true)]
        patterns: Vec<String>,
    },
    /// Finite-difference checks of a problem's oracles (`all` for every problem).
    CheckOracles {
        problem: String,
        /// Number of random points.
        #[arg(long, default_value_t = 100)]
        points: usize,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<SummaryError> for Failure {
    fn from(e: SummaryError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn run(cli: &Cli, config: &Path) -> Result<(), Failure> {
    let mut cells = load_experiment(config)?;
    for cell in &mut cells {
        if !cli.seed.is_empty() {
            cell.seeds = cli.seed.clone();
        }
        if let (Some(img), Some(lab)) = (&cli.mnist_images, &cli.mnist_labels) {
            cell.problem.mnist_images = Some(img.clone());
            cell.problem.mnist_labels = Some(lab.clone());
        }
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cells.first().and_then(|c| c.out.clone()))
        .unwrap_or_else(|| {
            PathBuf::from("runs").join(cells.first().map_or("experiment", |c| c.name.as_str()))
        });
    let paths = run_experiment(&cells, &out)?;
    for p in &paths {
        println!("{}", p.display());
    }
    print!("{}", to_text(&summarize(&paths)?));
    Ok(())
}

fn expand(patterns: &[String]) -> Result<Vec<PathBuf>, Failure> {
    let mut paths = Vec::new();
    for pat in patterns {
        let matches =
            glob::glob(pat).map_err(|e| Failure::Config(format!("bad pattern `{pat}`: {e}")))?;
        for entry in matches {
            paths.push(entry.map_err(|e| Failure::Runtime(e.to_string()))?);
        }
    }
    paths.sort();
    paths.dedup();
    Ok(paths)
}

fn summarize_cmd(cli: &Cli, patterns: &[String]) -> Result<(), Failure> {
    let summary = summarize(&expand(patterns)?)?;
    print!("{}", to_text(&summary));
    if let Some(out) = &cli.out {
        std::fs::write(out, to_csv(&summary))
            .map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
    }
    Ok(())
}

fn check_cmd(cli: &Cli, problem: &str, points: usize) -> Result<(), Failure> {
    let ids: Vec<ProblemId> = if problem == "all" {
        ProblemId::ALL.to_vec()
    } else {
        vec![problem
            .parse()
            .map_err(|e| Failure::Config(format!("{e}")))?]
    };
    let seed = cli.seed.first().copied().unwrap_or(0);
    let mut ok = true;
    for id in ids {
        let p = oracle_instance(id, seed).map_err(|e| Failure::Runtime(e.to_string()))?;
        let (x0, y0) = p.initial_point(seed);
        let pts = random_points(&x0, &y0, points, p.check_scale(), seed.wrapping_add(1));
        let report = check_oracles(&p, &pts, seed.wrapping_add(2));
        println!(
            "{id} (d_x = {}, d_y = {}, {points} points)",
            p.dim_x(),
            p.dim_y()
        );
        for c in &report.checks {
            let verdict = if c.passed() { "ok" } else { "FAIL" };
            println!(
                "  {:<9} worst rel err {:.3e} (tol {:.0e})  {verdict}",
                c.kind.name(),
                c.worst_rel_err,
                c.kind.tolerance()
            );
        }
        ok &= report.passed();
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::Runtime("finite-difference check failed".into()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Run { config } => run(&cli, config),
        Command::Summarize { patterns } => summarize_cmd(&cli, patterns),
        Command::CheckOracles { problem, points } => check_cmd(&cli, problem, *points),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
