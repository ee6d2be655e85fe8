//! `cilfair sweep`: one hyperparameter varied over a grid, full schedule per point.

use std::path::{Path, PathBuf};

use cilfair_core::train::run_incremental;
use cilfair_core::{IncrementalSchedule, Method, TrainConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{prepare_file, Command, Prepared};
use crate::error::{HarnessError, Result};
use crate::output::{create_dir, resolve_out_dir, with_jobs, write_json, write_rows};
use crate::run::RunOptions;
use crate::stats::Stat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    /// Fraction of samples routed to the dropout phase.
    Eta,
    /// Activation threshold t crossed with coverage threshold beta.
    CoverageThresholds,
    /// Divergence used by the differential analysis.
    DivergenceMetric,
    /// Number of classes introduced per step.
    ClassSplit,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Eta => "eta",
            SweepParam::CoverageThresholds => "coverage-thresholds",
            SweepParam::DivergenceMetric => "divergence-metric",
            SweepParam::ClassSplit => "class-split",
        }
    }
}

pub const SWEEP_HEADER: [&str; 5] = ["point", "seed", "acc", "cwv", "mcd"];

/// One grid point: a label plus the schedule and config it runs with.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub label: String,
    pub schedule: IncrementalSchedule,
    pub train: TrainConfig,
}

/// Final-step metrics of one grid point under one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub point: String,
    pub seed: u64,
    pub acc: f64,
    pub cwv: f64,
    pub mcd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub point: String,
    pub acc: Stat,
    pub cwv: Stat,
    pub mcd: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub param: SweepParam,
    pub method: Method,
    pub seeds: Vec<u64>,
    pub points: Vec<PointSummary>,
    /// Lowest mean final-step CWV; the earliest point wins ties.
    pub best_point: String,
    pub best_mean_cwv: f64,
}

pub fn grid(param: SweepParam, p: &Prepared) -> Vec<GridPoint> {
    let s = &p.config.sweep;
    let base = &p.config.train;
    let sched = p.config.schedule;
    let point = |label: String, train: TrainConfig| GridPoint {
        label,
        schedule: sched,
        train,
    };
    match param {
        SweepParam::Eta => s
            .eta
            .iter()
            .map(|&eta| {
                point(
                    format!("eta={eta}"),
                    TrainConfig {
                        eta,
                        ..base.clone()
                    },
                )
            })
            .collect(),
        SweepParam::CoverageThresholds => s
            .activation_thresholds
            .iter()
            .flat_map(|&t| s.coverage_thresholds.iter().map(move |&b| (t, b)))
            .map(|(t, b)| {
                let mut train = base.clone();
                train.coverage.activation_threshold = t;
                train.coverage.coverage_threshold = b;
                point(format!("t={t}/beta={b}"), train)
            })
            .collect(),
        SweepParam::DivergenceMetric => s
            .divergence_metrics
            .iter()
            .map(|&m| {
                point(
                    format!("metric={}", m.name()),
                    TrainConfig {
                        divergence: m,
                        ..base.clone()
                    },
                )
            })
            .collect(),
        SweepParam::ClassSplit => {
            let classes = p.train.class_set().len();
            s.classes_per_step
                .iter()
                .map(|&c| GridPoint {
                    label: format!("classes_per_step={c}"),
                    schedule: IncrementalSchedule {
                        steps: classes / c,
                        classes_per_step: c,
                        order_seed: sched.order_seed,
                    },
                    train: base.clone(),
                })
                .collect()
        }
    }
}

/// Run the sweep in memory. Rows come back ordered by grid point, then seed.
pub fn run_sweep(param: SweepParam, p: &Prepared) -> Result<(Vec<SweepRow>, SweepSummary)> {
    let method = p.config.sweep.method;
    let points = grid(param, p);
    let seeds = &p.config.seeds;
    let jobs: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|i| seeds.iter().map(move |&s| (i, s)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(i, seed)| {
            let gp = &points[i];
            let trace = run_incremental(
                &p.train,
                &p.test,
                &gp.schedule,
                method,
                &gp.train.with_seed(seed),
            )?;
            let last = trace
                .reports
                .last()
                .expect("schedules have at least one step");
            Ok(SweepRow {
                point: gp.label.clone(),
                seed,
                acc: last.acc,
                cwv: last.cwv,
                mcd: last.mcd,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let summaries: Vec<PointSummary> = points
        .iter()
        .map(|gp| {
            let sel: Vec<&SweepRow> = rows.iter().filter(|r| r.point == gp.label).collect();
            let col =
                |f: fn(&SweepRow) -> f64| Stat::of(&sel.iter().map(|r| f(r)).collect::<Vec<_>>());
            PointSummary {
                point: gp.label.clone(),
                acc: col(|r| r.acc),
                cwv: col(|r| r.cwv),
                mcd: col(|r| r.mcd),
            }
        })
        .collect();
    let best = summaries
        .iter()
        .reduce(|best, s| if s.cwv.mean < best.cwv.mean { s } else { best })
        .expect("validated grids are non-empty");
    let mut sorted_seeds = seeds.clone();
    sorted_seeds.sort_unstable();
    let summary = SweepSummary {
        param,
        method,
        seeds: sorted_seeds,
        best_point: best.point.clone(),
        best_mean_cwv: best.cwv.mean,
        points: summaries,
    };
    Ok((rows, summary))
}

pub fn sweep_file(param: SweepParam, path: &Path, opts: &RunOptions) -> Result<PathBuf> {
    let prepared = prepare_file(path, Command::Sweep(param))?;
    sweep_prepared(param, &prepared, opts)
}

pub fn sweep_prepared(param: SweepParam, p: &Prepared, opts: &RunOptions) -> Result<PathBuf> {
    if opts.jobs == Some(0) {
        return Err(HarnessError::config("--jobs", "must be at least 1"));
    }
    let dir = resolve_out_dir(
        opts.out.as_deref(),
        p.config.output_dir.as_deref(),
        opts.force,
    )?;
    let (rows, summary) = with_jobs(opts.jobs, || run_sweep(param, p))??;
    create_dir(&dir)?;
    let name = param.name();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.point.clone(),
                r.seed.to_string(),
                r.acc.to_string(),
                r.cwv.to_string(),
                r.mcd.to_string(),
            ]
        })
        .collect();
    write_rows(
        &dir.join(format!("sweep_{name}.csv")),
        &SWEEP_HEADER,
        &table,
    )?;
    write_json(&dir.join(format!("sweep_{name}.json")), &summary)?;
    Ok(dir)
}
