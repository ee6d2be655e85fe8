//! `cilfair probe`: single-step experiments isolating sources of unfairness.
//!
//! Each probe trains a base model on a group of base classes and runs one
//! incremental step with a group of new classes, then evaluates on
//! the test samples of both groups. Only the probed factor changes between
//! conditions.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cilfair_core::coverage::neuron_coverage;
use cilfair_core::data::{imbalance_subsample, mask_features, random_exemplar_sample};
use cilfair_core::metrics::pearson_correlation;
use cilfair_core::seed::{self, tag};
use cilfair_core::train::{draw_memory, hard_sample_step, traditional_cil_step, train_base};
use cilfair_core::{
    ClassId, ExemplarMemory, IncrementalSchedule, LabeledDataset, Mlp, StepReport, TrainConfig,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{prepare_file, Command, Prepared};
use crate::error::{HarnessError, Result};
use crate::output::{create_dir, resolve_out_dir, with_jobs, write_json, write_rows};
use crate::run::RunOptions;
use crate::stats::{mean, Stat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeKind {
    /// Full versus subsampled new-class data.
    Imbalance,
    /// Exemplar memory capacity.
    Memory,
    /// Fraction of zeroed input features in all training data.
    Mask,
    /// Coverage of redrawn exemplar sets against the resulting bias.
    CoverageBias,
    /// Traditional step with and without distillation towards the base model.
    Distill,
    /// Traditional step with and without dropout training on the hardest samples.
    HardSample,
}

impl ProbeKind {
    pub fn name(self) -> &'static str {
        match self {
            ProbeKind::Imbalance => "imbalance",
            ProbeKind::Memory => "memory",
            ProbeKind::Mask => "mask",
            ProbeKind::CoverageBias => "coverage-bias",
            ProbeKind::Distill => "distill",
            ProbeKind::HardSample => "hard-sample",
        }
    }
}

pub const PROBE_HEADER: [&str; 5] = ["condition", "acc", "cwv", "mcd", "coverage"];
pub const RUNS_HEADER: [&str; 6] = ["condition", "seed", "acc", "cwv", "mcd", "coverage"];

/// One trained-and-evaluated condition for one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRun {
    pub condition: String,
    pub seed: u64,
    pub acc: f64,
    pub cwv: f64,
    pub mcd: f64,
    /// Neuron coverage of the base model on the exemplar memory.
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: String,
    pub acc: Stat,
    pub cwv: Stat,
    pub mcd: Stat,
    pub coverage: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub kind: ProbeKind,
    pub seeds: Vec<u64>,
    pub conditions: Vec<ConditionSummary>,
    /// Coverage-bias probe: correlation of coverage with CWV over all
    /// redraws, after subtracting each seed's mean from both series so that
    /// differences between base models do not enter. `None` when either
    /// series is constant.
    pub pearson_r: Option<f64>,
    /// Same correlation on the raw values.
    pub pooled_pearson_r: Option<f64>,
    pub pearson_r_per_seed: Vec<Option<f64>>,
}

/// Base-class and new-class training data plus the test set of both, with
/// labels mapped to output columns.
struct StepData {
    old: LabeledDataset,
    new: LabeledDataset,
    test: LabeledDataset,
    new_classes: Vec<ClassId>,
}

fn step_data(p: &Prepared) -> Result<StepData> {
    let all = p.train.class_set();
    let permuted = IncrementalSchedule {
        steps: 1,
        classes_per_step: all.len(),
        order_seed: p.config.schedule.order_seed,
    }
    .step_classes(all)?
    .concat();
    let (nb, nn) = (p.config.probe.base_classes, p.config.probe.new_classes);
    let groups = [&permuted[..nb], &permuted[nb..nb + nn]];
    let order: Vec<ClassId> = permuted[..nb + nn].to_vec();
    let columns: BTreeMap<ClassId, usize> =
        order.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    Ok(StepData {
        old: p.train.filter_classes(groups[0])?.relabel(&columns)?,
        new: p.train.filter_classes(groups[1])?.relabel(&columns)?,
        test: p.test.filter_classes(&order)?.relabel(&columns)?,
        new_classes: groups[1].iter().map(|c| columns[c]).collect(),
    })
}

fn evaluate(
    condition: String,
    seed: u64,
    net: &Mlp,
    base: &Mlp,
    memory: &ExemplarMemory,
    test: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<ProbeRun> {
    let coverage = neuron_coverage(base, memory.data(), &cfg.coverage)?;
    let report = StepReport::evaluate(2, net, test, coverage)?;
    Ok(ProbeRun {
        condition,
        seed,
        acc: report.acc,
        cwv: report.cwv,
        mcd: report.mcd,
        coverage: report.coverage.coverage,
    })
}

/// Random memory of `cfg.memory_capacity` from the base-class data, then a
/// traditional step.
fn traditional(
    condition: String,
    seed: u64,
    base: &Mlp,
    old: &LabeledDataset,
    new: &LabeledDataset,
    test: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<ProbeRun> {
    let (memory, _) = draw_memory(base, old, false, cfg)?;
    let net = traditional_cil_step(base, new, &memory, cfg)?;
    evaluate(condition, seed, &net, base, &memory, test, cfg)
}

fn fmt_ratio(v: f64) -> String {
    format!("{v}")
}

/// Conditions of the probe, in output order.
fn conditions(kind: ProbeKind, p: &Prepared) -> Vec<String> {
    let probe = &p.config.probe;
    match kind {
        ProbeKind::Mask => probe
            .mask_ratios
            .iter()
            .map(|&a| format!("alpha={}", fmt_ratio(a)))
            .collect(),
        ProbeKind::Memory => probe
            .memory_sizes
            .iter()
            .map(|m| format!("memory={m}"))
            .collect(),
        ProbeKind::Imbalance => vec![
            "new_data=full".into(),
            format!("new_data={}_per_class", probe.imbalance_per_class),
        ],
        ProbeKind::Distill => vec!["cross_entropy".into(), "distillation".into()],
        ProbeKind::HardSample => vec!["traditional".into(), "hard_sample".into()],
        ProbeKind::CoverageBias => (0..probe.repetitions)
            .map(|r| format!("draw={r}"))
            .collect(),
    }
}

fn run_condition(
    kind: ProbeKind,
    index: usize,
    condition: String,
    seed: u64,
    p: &Prepared,
    data: &StepData,
    base: &Mlp,
) -> Result<ProbeRun> {
    let cfg = p.config.train.with_seed(seed);
    let probe = &p.config.probe;
    match kind {
        ProbeKind::Mask => {
            let alpha = probe.mask_ratios[index];
            let old = mask_features(&data.old, alpha, seed::derive(seed, &[tag::MASK, 0]))?;
            let new = mask_features(&data.new, alpha, seed::derive(seed, &[tag::MASK, 1]))?;
            let base = train_base(&old, &cfg)?;
            traditional(condition, seed, &base, &old, &new, &data.test, &cfg)
        }
        ProbeKind::Memory => {
            let cfg = TrainConfig {
                memory_capacity: probe.memory_sizes[index],
                ..cfg
            };
            traditional(
                condition, seed, base, &data.old, &data.new, &data.test, &cfg,
            )
        }
        ProbeKind::Imbalance => {
            let new = if index == 0 {
                data.new.clone()
            } else {
                let counts = data
                    .new_classes
                    .iter()
                    .map(|&c| (c, probe.imbalance_per_class))
                    .collect();
                imbalance_subsample(&data.new, &counts, seed)?
            };
            traditional(condition, seed, base, &data.old, &new, &data.test, &cfg)
        }
        ProbeKind::Distill => {
            let cfg = TrainConfig {
                cil_distillation: index == 1,
                ..cfg
            };
            traditional(
                condition, seed, base, &data.old, &data.new, &data.test, &cfg,
            )
        }
        ProbeKind::HardSample => {
            if index == 0 {
                traditional(
                    condition, seed, base, &data.old, &data.new, &data.test, &cfg,
                )
            } else {
                let out = hard_sample_step(base, &data.new, &data.old, &cfg)?;
                evaluate(
                    condition,
                    seed,
                    &out.model,
                    base,
                    &out.memory,
                    &data.test,
                    &cfg,
                )
            }
        }
        ProbeKind::CoverageBias => {
            // Only the exemplar draw changes between repetitions.
            let memory = random_exemplar_sample(
                &data.old,
                cfg.memory_capacity,
                seed::derive(seed, &[tag::EXEMPLAR, index as u64]),
            )?;
            let net = traditional_cil_step(base, &data.new, &memory, &cfg)?;
            evaluate(condition, seed, &net, base, &memory, &data.test, &cfg)
        }
    }
}

/// Run a probe in memory. Runs come back ordered by condition, then seed.
pub fn run_probe(kind: ProbeKind, p: &Prepared) -> Result<(Vec<ProbeRun>, ProbeSummary)> {
    let data = step_data(p)?;
    let seeds = &p.config.seeds;
    let bases: Vec<Mlp> = seeds
        .par_iter()
        .map(|&s| train_base(&data.old, &p.config.train.with_seed(s)).map_err(HarnessError::from))
        .collect::<Result<_>>()?;
    let names = conditions(kind, p);
    let jobs: Vec<(usize, usize)> = (0..names.len())
        .flat_map(|c| (0..seeds.len()).map(move |s| (c, s)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(c, s)| run_condition(kind, c, names[c].clone(), seeds[s], p, &data, &bases[s]))
        .collect::<Result<Vec<_>>>()?;

    let summarize = |name: &str| {
        let sel: Vec<&ProbeRun> = runs.iter().filter(|r| r.condition == name).collect();
        let col = |f: fn(&ProbeRun) -> f64| Stat::of(&sel.iter().map(|r| f(r)).collect::<Vec<_>>());
        ConditionSummary {
            condition: name.to_string(),
            acc: col(|r| r.acc),
            cwv: col(|r| r.cwv),
            mcd: col(|r| r.mcd),
            coverage: col(|r| r.coverage),
        }
    };
    let correlation = (kind == ProbeKind::CoverageBias).then(|| coverage_correlation(&runs, seeds));
    let (pearson_r, pooled_pearson_r, pearson_r_per_seed) = correlation.unwrap_or_default();
    let mut sorted_seeds = seeds.clone();
    sorted_seeds.sort_unstable();
    let summary = ProbeSummary {
        kind,
        seeds: sorted_seeds,
        conditions: names.iter().map(|n| summarize(n)).collect(),
        pearson_r,
        pooled_pearson_r,
        pearson_r_per_seed,
    };
    Ok((runs, summary))
}

/// Within-seed, pooled and per-seed correlation of coverage with CWV.
pub fn coverage_correlation(
    runs: &[ProbeRun],
    seeds: &[u64],
) -> (Option<f64>, Option<f64>, Vec<Option<f64>>) {
    let r = |xs: &[f64], ys: &[f64]| pearson_correlation(xs, ys).ok();
    let (mut cx, mut cy) = (Vec::new(), Vec::new());
    let mut per_seed = Vec::new();
    for &s in seeds {
        let sel: Vec<&ProbeRun> = runs.iter().filter(|x| x.seed == s).collect();
        let xs: Vec<f64> = sel.iter().map(|x| x.coverage).collect();
        let ys: Vec<f64> = sel.iter().map(|x| x.cwv).collect();
        per_seed.push(r(&xs, &ys));
        let (mx, my) = (mean(&xs), mean(&ys));
        cx.extend(xs.iter().map(|x| x - mx));
        cy.extend(ys.iter().map(|y| y - my));
    }
    let xs: Vec<f64> = runs.iter().map(|x| x.coverage).collect();
    let ys: Vec<f64> = runs.iter().map(|x| x.cwv).collect();
    (r(&cx, &cy), r(&xs, &ys), per_seed)
}

fn num(v: f64) -> String {
    v.to_string()
}

/// Rows of `probe_<kind>.csv`: per-run rows for the coverage-bias probe,
/// seed medians per condition otherwise.
pub fn probe_rows(kind: ProbeKind, runs: &[ProbeRun], summary: &ProbeSummary) -> Vec<Vec<String>> {
    if kind == ProbeKind::CoverageBias {
        runs.iter()
            .map(|r| {
                vec![
                    format!("seed={}/{}", r.seed, r.condition),
                    num(r.acc),
                    num(r.cwv),
                    num(r.mcd),
                    num(r.coverage),
                ]
            })
            .collect()
    } else {
        summary
            .conditions
            .iter()
            .map(|c| {
                vec![
                    c.condition.clone(),
                    num(c.acc.median),
                    num(c.cwv.median),
                    num(c.mcd.median),
                    num(c.coverage.median),
                ]
            })
            .collect()
    }
}

pub fn probe_file(kind: ProbeKind, path: &Path, opts: &RunOptions) -> Result<PathBuf> {
    let prepared = prepare_file(path, Command::Probe(kind))?;
    probe_prepared(kind, &prepared, opts)
}

pub fn probe_prepared(kind: ProbeKind, p: &Prepared, opts: &RunOptions) -> Result<PathBuf> {
    if opts.jobs == Some(0) {
        return Err(HarnessError::config("--jobs", "must be at least 1"));
    }
    let dir = resolve_out_dir(
        opts.out.as_deref(),
        p.config.output_dir.as_deref(),
        opts.force,
    )?;
    let (runs, summary) = with_jobs(opts.jobs, || run_probe(kind, p))??;
    create_dir(&dir)?;
    let name = kind.name();
    let run_rows: Vec<Vec<String>> = runs
        .iter()
        .map(|r| {
            vec![
                r.condition.clone(),
                r.seed.to_string(),
                num(r.acc),
                num(r.cwv),
                num(r.mcd),
                num(r.coverage),
            ]
        })
        .collect();
    write_rows(
        &dir.join(format!("probe_{name}_runs.csv")),
        &RUNS_HEADER,
        &run_rows,
    )?;
    write_rows(
        &dir.join(format!("probe_{name}.csv")),
        &PROBE_HEADER,
        &probe_rows(kind, &runs, &summary),
    )?;
    write_json(&dir.join(format!("probe_{name}.json")), &summary)?;
    Ok(dir)
}
