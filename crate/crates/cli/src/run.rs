//! `cilfair run`: every (method, seed) pair through the incremental schedule.

use std::path::{Path, PathBuf};

use cilfair_core::metrics::{write_step_csv, StepReport};
use cilfair_core::train::run_incremental;
use cilfair_core::Method;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{prepare_file, Command, Prepared, SCHEMA_VERSION};
use crate::error::{HarnessError, Result};
use crate::output::{create_dir, resolve_out_dir, with_jobs, write_json, write_with};
use crate::stats::{mean, Stat};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub force: bool,
    pub jobs: Option<usize>,
}

/// Metric columns of the per-seed CSV, in order, after `step`.
pub const METRICS: [&str; 6] = ["acc", "precision", "recall", "cwv", "mcd", "coverage"];

fn metric_values(r: &StepReport) -> [f64; 6] {
    [
        r.acc,
        r.precision,
        r.recall,
        r.cwv,
        r.mcd,
        r.coverage.coverage,
    ]
}

/// Per-step statistic of each metric across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub step: usize,
    pub acc: Stat,
    pub precision: Stat,
    pub recall: Stat,
    pub cwv: Stat,
    pub mcd: Stat,
    pub coverage: Stat,
}

/// Step-averaged seed means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub acc: f64,
    pub precision: f64,
    pub recall: f64,
    pub cwv: f64,
    pub mcd: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub steps: Vec<StepSummary>,
    pub average_all_steps: Averages,
    /// Absent for single-step schedules.
    pub average_except_first: Option<Averages>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub seeds: Vec<u64>,
    pub methods: Vec<MethodSummary>,
}

fn averages(steps: &[StepSummary]) -> Averages {
    let avg = |f: fn(&StepSummary) -> f64| mean(&steps.iter().map(f).collect::<Vec<_>>());
    Averages {
        acc: avg(|s| s.acc.mean),
        precision: avg(|s| s.precision.mean),
        recall: avg(|s| s.recall.mean),
        cwv: avg(|s| s.cwv.mean),
        mcd: avg(|s| s.mcd.mean),
        coverage: avg(|s| s.coverage.mean),
    }
}

/// Aggregate one method's per-seed reports. Every seed must cover the same steps.
pub fn summarize_method(method: Method, per_seed: &[Vec<StepReport>]) -> MethodSummary {
    let n_steps = per_seed.iter().map(Vec::len).min().unwrap_or(0);
    let steps: Vec<StepSummary> = (0..n_steps)
        .map(|k| {
            let col = |m: usize| {
                Stat::of(
                    &per_seed
                        .iter()
                        .map(|reports| metric_values(&reports[k])[m])
                        .collect::<Vec<_>>(),
                )
            };
            StepSummary {
                step: per_seed[0][k].step,
                acc: col(0),
                precision: col(1),
                recall: col(2),
                cwv: col(3),
                mcd: col(4),
                coverage: col(5),
            }
        })
        .collect();
    MethodSummary {
        method,
        average_all_steps: averages(&steps),
        average_except_first: (steps.len() > 1).then(|| averages(&steps[1..])),
        steps,
    }
}

pub fn csv_name(method: Method, seed: u64) -> String {
    format!("{}_seed{seed}.csv", method.name())
}

/// Run the config at `path`. Returns the output directory.
pub fn run_file(path: &Path, opts: &RunOptions) -> Result<PathBuf> {
    let prepared = prepare_file(path, Command::Run)?;
    run_prepared(&prepared, opts)
}

pub fn run_prepared(p: &Prepared, opts: &RunOptions) -> Result<PathBuf> {
    if opts.jobs == Some(0) {
        return Err(HarnessError::config("--jobs", "must be at least 1"));
    }
    let cfg = &p.config;
    let dir = resolve_out_dir(opts.out.as_deref(), cfg.output_dir.as_deref(), opts.force)?;
    let traces = dir.join("traces");
    create_dir(&traces)?;
    write_json(&traces.join("config.json"), cfg)?;

    let jobs: Vec<(usize, Method, u64)> = cfg
        .methods
        .iter()
        .enumerate()
        .flat_map(|(i, &m)| cfg.seeds.iter().map(move |&s| (i, m, s)))
        .collect();
    let results: Vec<Result<(usize, u64, Vec<StepReport>)>> = with_jobs(opts.jobs, || {
        jobs.par_iter()
            .map(|&(i, method, seed)| {
                let trace = run_incremental(
                    &p.train,
                    &p.test,
                    &cfg.schedule,
                    method,
                    &cfg.train.with_seed(seed),
                )?;
                write_with(&dir.join(csv_name(method, seed)), |w| {
                    write_step_csv(&trace.reports, w)
                })?;
                write_json(
                    &traces.join(format!("{}_seed{seed}.json", method.name())),
                    &trace,
                )?;
                Ok((i, seed, trace.reports))
            })
            .collect()
    })?;
    let mut done = results.into_iter().collect::<Result<Vec<_>>>()?;
    done.sort_by_key(|&(i, seed, _)| (i, seed));

    let methods = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let per_seed: Vec<Vec<StepReport>> = done
                .iter()
                .filter(|(j, _, _)| *j == i)
                .map(|(_, _, r)| r.clone())
                .collect();
            summarize_method(m, &per_seed)
        })
        .collect();
    let mut seeds = cfg.seeds.clone();
    seeds.sort_unstable();
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        seeds,
        methods,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(dir)
}
