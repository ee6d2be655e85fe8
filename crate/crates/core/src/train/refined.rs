use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::base::{cil_train, expand_for_step, gather, softmax_rows, traditional_cil_step};
use super::objective::{balanced_objective, cross_entropy_objective};
use super::sgd::{run_sgd, Phase};
use super::{Teacher, TrainConfig};
use crate::coverage::{neuron_coverage, verified_sample, CoverageReport};
use crate::data::{random_exemplar_sample, ExemplarMemory, LabeledDataset};
use crate::error::{ensure, Result};
use crate::nn::{DropoutSpec, Mlp};
use crate::refine::{differential_analysis, select_samples, RefinedSplit};
use crate::seed::{self, tag};

/// Ids of samples the incremental model misclassifies.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorSet {
    ids: BTreeSet<u64>,
}

impl ErrorSet {
    pub fn from_ids(ids: impl IntoIterator<Item = u64>) -> Self {
        Self {
            ids: ids.into_iter().collect(),
        }
    }

    pub fn contains(&self, id: u64) -> bool {
        self.ids.contains(&id)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.ids.iter().copied()
    }

    /// Membership flag for every sample of `ds`, in order.
    pub fn flags(&self, ds: &LabeledDataset) -> Vec<bool> {
        ds.samples().iter().map(|s| self.contains(s.id)).collect()
    }
}

pub fn compute_error_set(m_new: &Mlp, x_t: &LabeledDataset) -> Result<ErrorSet> {
    if x_t.is_empty() {
        return Ok(ErrorSet::default());
    }
    ensure!(
        x_t.samples().iter().all(|s| s.label < m_new.classes()),
        RejectedInput,
        "labels exceed the model's {} classes",
        m_new.classes()
    );
    let predictions = m_new.predict(&x_t.features())?;
    Ok(ErrorSet::from_ids(
        x_t.samples()
            .iter()
            .zip(predictions)
            .filter(|(s, p)| s.label != *p)
            .map(|(s, _)| s.id),
    ))
}

/// Loss used by refined training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RefinedLoss {
    /// Balanced distillation with the given old-class weight.
    Balanced {
        lambda: f64,
    },
    CrossEntropy,
}

/// Epochs of SGD over `data`, optionally with dropout, keyed to `phase`.
#[allow(clippy::too_many_arguments)]
pub fn balanced_train_phase(
    net: &mut Mlp,
    data: &LabeledDataset,
    teacher: &Mlp,
    errors: &ErrorSet,
    loss: RefinedLoss,
    dropout_rate: Option<f64>,
    epochs: usize,
    phase: Phase,
    cfg: &TrainConfig,
) -> Result<()> {
    if data.is_empty() || epochs == 0 {
        return Ok(());
    }
    let x = data.features();
    let labels = data.labels();
    let flags = errors.flags(data);
    let teacher_probs = softmax_rows(&teacher.logits(&x)?, cfg.temperature);
    run_sgd(
        net,
        data.len(),
        epochs,
        cfg.batch_size,
        &cfg.lr,
        cfg.grad_clip,
        cfg.seed,
        phase,
        |net, _, idx, batch_seed| {
            let dropout = dropout_rate
                .map(|rate| DropoutSpec::new(rate, batch_seed))
                .transpose()?;
            let xb = gather(&x, idx);
            let yb: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
            match loss {
                RefinedLoss::Balanced { lambda } => {
                    let fb: Vec<bool> = idx.iter().map(|&i| flags[i]).collect();
                    let (_, g) = balanced_objective(
                        net,
                        &xb,
                        &yb,
                        &fb,
                        &gather(&teacher_probs, idx),
                        lambda,
                        cfg.temperature,
                        cfg.term_assignment,
                        dropout.as_ref(),
                    )?;
                    Ok(g)
                }
                RefinedLoss::CrossEntropy => {
                    Ok(cross_entropy_objective(net, &xb, &yb, dropout.as_ref())?.1)
                }
            }
        },
    )
}

/// Dropout-phase epochs over `x_h`, then ordinary epochs over `x_l`, starting
/// from `m_start`.
pub fn selective_train(
    m_start: &Mlp,
    x_h: &LabeledDataset,
    x_l: &LabeledDataset,
    teacher: &Mlp,
    errors: &ErrorSet,
    loss: RefinedLoss,
    cfg: &TrainConfig,
) -> Result<Mlp> {
    cfg.validate()?;
    let high: BTreeSet<u64> = x_h.ids().into_iter().collect();
    if let Some(id) = x_l.ids().into_iter().find(|id| high.contains(id)) {
        return Err(crate::Error::RejectedInput(format!(
            "sample {id} is in both the high- and low-importance sets"
        )));
    }
    let mut net = m_start.clone();
    balanced_train_phase(
        &mut net,
        x_h,
        teacher,
        errors,
        loss,
        Some(cfg.dropout_rate),
        cfg.epochs_dropout_phase,
        Phase::Dropout,
        cfg,
    )?;
    balanced_train_phase(
        &mut net,
        x_l,
        teacher,
        errors,
        loss,
        None,
        cfg.epochs_ordinary_phase,
        Phase::Ordinary,
        cfg,
    )?;
    Ok(net)
}

/// Exemplar draw for one step: coverage-verified or a single random draw.
/// Both start from the same seed, so a first-attempt pass gives the same memory.
pub fn draw_memory(
    m_base: &Mlp,
    pool: &LabeledDataset,
    verify: bool,
    cfg: &TrainConfig,
) -> Result<(ExemplarMemory, Option<CoverageReport>)> {
    if pool.is_empty() {
        return Ok((random_exemplar_sample(pool, cfg.memory_capacity, 0)?, None));
    }
    let memory_seed = seed::derive(cfg.seed, &[tag::EXEMPLAR]);
    if verify {
        let (memory, report) = verified_sample(
            m_base,
            pool,
            cfg.memory_capacity,
            &cfg.coverage,
            memory_seed,
        )?;
        Ok((memory, Some(report)))
    } else {
        let memory = random_exemplar_sample(pool, cfg.memory_capacity, memory_seed)?;
        let report = neuron_coverage(m_base, memory.data(), &cfg.coverage)?;
        Ok((memory, Some(report)))
    }
}

/// Bookkeeping of one refined incremental step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    /// Coverage of the exemplar memory under the base model.
    pub coverage: Option<CoverageReport>,
    pub memory_size: usize,
    pub refined_size: usize,
    pub high_count: usize,
    pub low_count: usize,
    pub cutoff_index: usize,
    pub error_count: usize,
    pub lambda: f64,
}

/// Result of a refined incremental step.
#[derive(Debug, Clone)]
pub struct CiliateOutcome {
    /// Refined model.
    pub model: Mlp,
    /// Traditionally fine-tuned model.
    pub incremental: Mlp,
    pub memory: ExemplarMemory,
    pub split: RefinedSplit,
    pub errors: ErrorSet,
    pub diagnostics: StepDiagnostics,
}

/// Coverage-verified sampling, traditional fine-tuning, differential analysis,
/// importance split, error set and selective training from the expanded base.
pub fn ciliate_step(
    m_base: &Mlp,
    x_new: &LabeledDataset,
    pool: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<CiliateOutcome> {
    cfg.validate()?;
    let (memory, coverage) = draw_memory(m_base, pool, cfg.verify_coverage, cfg)?;
    let m_n = traditional_cil_step(m_base, x_new, &memory, cfg)?;
    let x_t = x_new.union(memory.data())?;
    let records = differential_analysis(m_base, &m_n, &x_t, cfg.divergence, cfg.temperature)?;
    let split = select_samples(&records, &x_t, cfg.eta)?;
    let errors = compute_error_set(&m_n, &x_t)?;
    let lambda = if memory.is_empty() {
        0.0
    } else {
        cfg.lambda.resolve(m_base.classes(), m_n.classes())
    };
    let loss = if cfg.balanced_distillation {
        RefinedLoss::Balanced { lambda }
    } else {
        RefinedLoss::CrossEntropy
    };
    let teacher = match cfg.teacher {
        Teacher::Incremental => &m_n,
        Teacher::Base => m_base,
    };
    let start = expand_for_step(m_base, m_n.classes(), cfg)?;
    let model = selective_train(&start, &split.high, &split.low, teacher, &errors, loss, cfg)?;
    let diagnostics = StepDiagnostics {
        coverage,
        memory_size: memory.len(),
        refined_size: x_t.len(),
        high_count: split.high.len(),
        low_count: split.low.len(),
        cutoff_index: split.cutoff_index,
        error_count: errors.len(),
        lambda,
    };
    Ok(CiliateOutcome {
        model,
        incremental: m_n,
        memory,
        split,
        errors,
        diagnostics,
    })
}

/// Plain class-incremental training with the hardest samples enforced: the
/// high-divergence partition (ranked with a traditionally fine-tuned model)
/// gets dropout epochs with cross-entropy on the expanded base, after which
/// the usual fine-tuning on new data plus memory runs as in the traditional step.
pub fn hard_sample_step(
    m_base: &Mlp,
    x_new: &LabeledDataset,
    pool: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<CiliateOutcome> {
    cfg.validate()?;
    let (memory, coverage) = draw_memory(m_base, pool, false, cfg)?;
    let m_n = traditional_cil_step(m_base, x_new, &memory, cfg)?;
    let x_t = x_new.union(memory.data())?;
    let records = differential_analysis(m_base, &m_n, &x_t, cfg.divergence, cfg.temperature)?;
    let split = select_samples(&records, &x_t, cfg.eta)?;
    let errors = compute_error_set(&m_n, &x_t)?;
    let mut start = expand_for_step(m_base, m_n.classes(), cfg)?;
    balanced_train_phase(
        &mut start,
        &split.high,
        &m_n,
        &errors,
        RefinedLoss::CrossEntropy,
        Some(cfg.dropout_rate),
        cfg.epochs_dropout_phase,
        Phase::HardSample,
        cfg,
    )?;
    let model = cil_train(start, m_base, x_new, &memory, cfg)?;
    let diagnostics = StepDiagnostics {
        coverage,
        memory_size: memory.len(),
        refined_size: x_t.len(),
        high_count: split.high.len(),
        low_count: split.low.len(),
        cutoff_index: split.cutoff_index,
        error_count: errors.len(),
        lambda: 0.0,
    };
    Ok(CiliateOutcome {
        model,
        incremental: m_n,
        memory,
        split,
        errors,
        diagnostics,
    })
}
