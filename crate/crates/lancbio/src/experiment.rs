//! Building problem instances from configs and running grid cells.

use std::fs;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::time::Instant;

use lancbio_core::problems::{
    corrupt_labels, generated_splits, make_hyperclean, make_logreg, make_nonconvex_sin,
    make_synthetic, AnyProblem, Dataset, HyperCleanSpec, LogRegSpec, NonconvexSinSpec,
    ProblemError, ProblemId, QuadraticBilevel, QuadraticSpec, SplitSpec, SyntheticSpec,
};
use lancbio_core::solvers::{self, IterView, RunResult, TraceRecord};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ProblemConfig, RunConfig};
use crate::data::{load_csv_dataset, load_idx_dataset, DataError};
use crate::trace::TraceWriter;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Solver(#[from] solvers::ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("dataset has {available} rows, the split needs {needed}")]
    NotEnoughRows { available: usize, needed: usize },
}

/// A built problem with its starting point and optional held-out rows.
#[derive(Debug, Clone)]
pub struct Instance {
    pub problem: AnyProblem,
    pub test: Option<Dataset>,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
}

fn split_table(all: &Dataset, p: &ProblemConfig) -> Result<(Dataset, Dataset, Dataset), RunError> {
    let needed = p.n_train + p.n_val + p.n_test;
    if all.len() < needed {
        return Err(RunError::NotEnoughRows {
            available: all.len(),
            needed,
        });
    }
    Ok((
        all.slice(0, p.n_train),
        all.slice(p.n_train, p.n_val),
        all.slice(p.n_train + p.n_val, p.n_test),
    ))
}

fn class_count(sets: &[&Dataset]) -> usize {
    sets.iter()
        .flat_map(|d| d.labels())
        .max()
        .map_or(1, |m| m + 1)
}

/// Classification splits: from IDX or CSV files when configured, generated
/// otherwise. Training labels are corrupted with probability `corruption`.
fn classification_splits(
    p: &ProblemConfig,
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset, usize), RunError> {
    let file = match (&p.mnist_images, &p.mnist_labels, &p.data_csv) {
        (Some(img), Some(lab), _) => Some(load_idx_dataset(img, lab)?),
        (_, _, Some(csv)) => Some(load_csv_dataset(csv)?),
        _ => None,
    };
    match file {
        Some(all) => {
            let (train, val, test) = split_table(&all, p)?;
            let classes = class_count(&[&train, &val, &test]);
            let labels = corrupt_labels(train.labels(), classes, p.corruption, seed);
            Ok((train.with_labels(labels)?, val, test, classes))
        }
        None => {
            let s = generated_splits(
                &SplitSpec {
                    train: p.n_train,
                    val: p.n_val,
                    test: p.n_test,
                    dim: p.features,
                    classes: p.classes,
                    separation: p.separation,
                    corruption: p.corruption,
                },
                seed,
            );
            Ok((s.train, s.val, s.test, p.classes))
        }
    }
}

pub fn build_instance(p: &ProblemConfig, run_seed: u64) -> Result<Instance, RunError> {
    let seed = p.seed.unwrap_or(run_seed);
    let mut test = None;
    let problem = match p.id {
        ProblemId::Quadratic => AnyProblem::Quadratic(QuadraticBilevel::random(&QuadraticSpec {
            dim_x: p.dim_x,
            dim_y: p.dim_y,
            cond: p.cond,
            rho: p.rho,
            seed,
        })?),
        ProblemId::Synthetic => {
            let mut spec = SyntheticSpec::random(p.d, seed);
            spec.c1 = p.c1;
            spec.c2 = p.c2;
            AnyProblem::Synthetic(make_synthetic(spec)?)
        }
        ProblemId::NonconvexSin => {
            AnyProblem::NonconvexSin(make_nonconvex_sin(NonconvexSinSpec::random(p.d, seed))?)
        }
        ProblemId::HyperClean => {
            let (train, val, t, classes) = classification_splits(p, seed)?;
            test = Some(t).filter(|t| !t.is_empty());
            AnyProblem::HyperClean(make_hyperclean(HyperCleanSpec {
                train,
                val,
                classes,
                c_r: p.c_r,
            })?)
        }
        ProblemId::LogReg => {
            let (train, val, t, classes) = classification_splits(p, seed)?;
            test = Some(t).filter(|t| !t.is_empty());
            AnyProblem::LogReg(make_logreg(LogRegSpec {
                train,
                val,
                classes,
            })?)
        }
    };
    let (x0, y0) = problem.initial_point(seed);
    Ok(Instance {
        problem,
        test,
        x0,
        y0,
    })
}

pub fn trace_file_name(cell: &str, seed: u64) -> String {
    format!("{cell}__seed{seed}.csv")
}

#[derive(Debug)]
pub struct CellOutcome {
    pub path: PathBuf,
    pub result: RunResult,
}

/// Runs one (cell, seed) pair and streams its trace to `out_dir`.
pub fn run_cell(cfg: &RunConfig, seed: u64, out_dir: &Path) -> Result<CellOutcome, RunError> {
    let inst = build_instance(&cfg.problem, seed)?;
    let mut scfg = cfg.solver_cfg.clone();
    scfg.seed = seed;
    let path = out_dir.join(trace_file_name(&cfg.cell, seed));
    let name = path.display().to_string();
    let mut writer = TraceWriter::create(&path).map_err(|source| RunError::Csv {
        path: name.clone(),
        source,
    })?;

    let every = cfg.problem.metric_every;
    let last = scfg.iters;
    let mut write_err = None;
    let start = Instant::now();
    let mut observer = |view: &IterView<'_>, rec: &mut TraceRecord| {
        if let Some(test) = &inst.test {
            if view.k.is_multiple_of(every) || view.k == last {
                rec.test_metric = inst.problem.accuracy(view.y, test);
            }
        }
        let elapsed = start.elapsed().as_secs_f64();
        rec.wall_time_s = elapsed;
        if let Err(e) = writer.write(rec) {
            write_err = Some(e);
            return ControlFlow::Break(());
        }
        match cfg.time_budget_s {
            Some(budget) if elapsed >= budget => ControlFlow::Break(()),
            _ => ControlFlow::Continue(()),
        }
    };
    let v0 = vec![0.0; inst.y0.len()];
    let result = solvers::run(
        cfg.solver,
        &inst.problem,
        &scfg,
        &inst.x0,
        &inst.y0,
        &v0,
        &mut observer,
    )?;
    if let Some(source) = write_err {
        return Err(RunError::Csv { path: name, source });
    }
    Ok(CellOutcome { path, result })
}

/// Runs every (cell, seed) pair in parallel. Output paths follow the
/// order of `cells` and their seeds.
pub fn run_experiment(cells: &[RunConfig], out_dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    fs::create_dir_all(out_dir).map_err(|source| RunError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let jobs: Vec<(&RunConfig, u64)> = cells
        .iter()
        .flat_map(|c| c.seeds.iter().map(move |&s| (c, s)))
        .collect();
    jobs.par_iter()
        .map(|&(cfg, seed)| run_cell(cfg, seed, out_dir).map(|o| o.path))
        .collect()
}
