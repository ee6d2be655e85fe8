use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::base::train_base;
use super::refined::{ciliate_step, draw_memory, hard_sample_step, StepDiagnostics};
use super::{traditional_cil_step, TrainConfig};
use crate::coverage::neuron_coverage;
use crate::data::{ClassId, IncrementalSchedule, LabeledDataset};
use crate::error::{ensure, Result};
use crate::metrics::{fairness_bug, ClassAccuracies, StepReport};
use crate::nn::Mlp;
use crate::seed;

/// Incremental-step procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Fine-tuning on new data plus a random exemplar memory.
    Traditional,
    /// Full refined pipeline.
    Ciliate,
    /// Refined pipeline with a single random exemplar draw.
    NoVerify,
    /// Refined pipeline with cross-entropy instead of balanced distillation.
    NoBalanced,
    /// Refined pipeline with every sample in the dropout phase.
    PureDropout,
    /// Refined pipeline with every sample in the ordinary phase.
    PureOrdinary,
    /// Traditional fine-tuning plus dropout epochs on the hardest samples.
    HardSample,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Traditional,
        Method::Ciliate,
        Method::NoVerify,
        Method::NoBalanced,
        Method::PureDropout,
        Method::PureOrdinary,
        Method::HardSample,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Traditional => "traditional",
            Method::Ciliate => "ciliate",
            Method::NoVerify => "no_verify",
            Method::NoBalanced => "no_balanced",
            Method::PureDropout => "pure_dropout",
            Method::PureOrdinary => "pure_ordinary",
            Method::HardSample => "hard_sample",
        }
    }

    /// Config actually used by the refined pipeline for this method.
    pub fn adjust(self, cfg: &TrainConfig) -> TrainConfig {
        let mut c = cfg.clone();
        match self {
            Method::NoVerify => c.verify_coverage = false,
            Method::NoBalanced => c.balanced_distillation = false,
            Method::PureDropout => c.eta = 1.0,
            Method::PureOrdinary => c.eta = 0.0,
            _ => {}
        }
        c
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| crate::Error::Parameter(format!("unknown method `{s}`")))
    }
}

/// Per-step record beyond the evaluation metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step: usize,
    /// Classes introduced at this step (dataset ids).
    pub new_classes: Vec<ClassId>,
    /// CWV increase over the previous step beyond gamma.
    pub fairness_bug: Option<bool>,
    /// Refined-pipeline bookkeeping (absent for the base step and traditional runs).
    pub refined: Option<StepDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub method: Method,
    /// Dataset class id of each output column.
    pub class_order: Vec<ClassId>,
    pub reports: Vec<StepReport>,
    pub steps: Vec<StepTrace>,
    pub final_model: Mlp,
}

fn remap_report(mut report: StepReport, class_order: &[ClassId]) -> StepReport {
    fn back<V: Copy>(m: &BTreeMap<usize, V>, order: &[ClassId]) -> BTreeMap<ClassId, V> {
        m.iter().map(|(&k, v)| (order[k], *v)).collect()
    }
    report.per_class = ClassAccuracies {
        accuracy: back(&report.per_class.accuracy, class_order),
        test_counts: back(&report.per_class.test_counts, class_order),
        excluded: report
            .per_class
            .excluded
            .iter()
            .map(|&k| class_order[k])
            .collect(),
    };
    report
}

/// Train a base model on the first step's classes, then apply `method` for
/// every later step. After each step the model is evaluated on the test
/// samples of all seen classes and the exemplar memory is redrawn from the
/// previous memory plus the step's training data.
pub fn run_incremental(
    train: &LabeledDataset,
    test: &LabeledDataset,
    sched: &IncrementalSchedule,
    method: Method,
    cfg: &TrainConfig,
) -> Result<RunTrace> {
    cfg.validate()?;
    ensure!(
        train.feature_dim() == test.feature_dim(),
        RejectedInput,
        "train and test feature dims differ"
    );
    let step_classes = sched.step_classes(train.class_set())?;
    let class_order: Vec<ClassId> = step_classes.iter().flatten().copied().collect();
    let columns: BTreeMap<ClassId, usize> = class_order
        .iter()
        .enumerate()
        .map(|(i, &c)| (c, i))
        .collect();
    let step_cfg = |k: usize| cfg.with_seed(seed::derive(cfg.seed, &[k as u64]));

    let mut reports = Vec::new();
    let mut steps = Vec::new();
    let mut model: Option<Mlp> = None;
    let mut memory_pool = LabeledDataset::empty(train.feature_dim());
    let mut seen = 0;

    for (k, classes) in step_classes.iter().enumerate() {
        let step = k + 1;
        let cfg_k = method.adjust(&step_cfg(step));
        let x_k = train.filter_classes(classes)?.relabel(&columns)?;
        seen += classes.len();
        let seen_classes = &class_order[..seen];
        let test_k = test.filter_classes(seen_classes)?.relabel(&columns)?;

        let (net, coverage, refined, memory) = match &model {
            None => {
                let net = train_base(&x_k, &cfg_k)?;
                let cov = neuron_coverage(&net, &x_k, &cfg_k.coverage)?;
                (net, cov, None, None)
            }
            Some(m_base) => match method {
                Method::Traditional => {
                    let (memory, cov) = draw_memory(m_base, &memory_pool, false, &cfg_k)?;
                    let net = traditional_cil_step(m_base, &x_k, &memory, &cfg_k)?;
                    let cov = match cov {
                        Some(c) => c,
                        None => neuron_coverage(m_base, &x_k, &cfg_k.coverage)?,
                    };
                    (net, cov, None, Some(memory))
                }
                Method::HardSample => {
                    let out = hard_sample_step(m_base, &x_k, &memory_pool, &cfg_k)?;
                    let cov = match out.diagnostics.coverage {
                        Some(c) => c,
                        None => neuron_coverage(m_base, &x_k, &cfg_k.coverage)?,
                    };
                    (out.model, cov, Some(out.diagnostics), Some(out.memory))
                }
                _ => {
                    let out = ciliate_step(m_base, &x_k, &memory_pool, &cfg_k)?;
                    let cov = match out.diagnostics.coverage {
                        Some(c) => c,
                        None => neuron_coverage(m_base, &x_k, &cfg_k.coverage)?,
                    };
                    (out.model, cov, Some(out.diagnostics), Some(out.memory))
                }
            },
        };

        let report = remap_report(
            StepReport::evaluate(step, &net, &test_k, coverage)?,
            &class_order,
        );
        let bug = reports
            .last()
            .map(|prev: &StepReport| fairness_bug(report.cwv, prev.cwv, cfg.gamma));
        reports.push(report);
        steps.push(StepTrace {
            step,
            new_classes: classes.clone(),
            fairness_bug: bug,
            refined,
        });

        // The step's memory was drawn from the pool of older data; the next
        // pool adds this step's data.
        let previous = match memory {
            Some(m) => m.into_data(),
            None => LabeledDataset::empty(train.feature_dim()),
        };
        memory_pool = previous.union(&x_k)?;
        model = Some(net);
    }

    Ok(RunTrace {
        method,
        class_order,
        reports,
        steps,
        final_model: model.expect("schedule has at least one step"),
    })
}
