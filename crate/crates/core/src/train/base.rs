use std::collections::HashSet;

use super::objective::{cil_objective, cross_entropy_objective, CilDistill};
use super::sgd::{epoch_order, run_sgd, Phase};
use super::TrainConfig;
use crate::data::{ExemplarMemory, LabeledDataset};
use crate::error::{ensure, Result};
use crate::nn::{softmax_unchecked, Mlp, Tensor2};
use crate::seed::{self, tag};

/// Output width needed for a dataset whose labels are output columns.
pub(crate) fn output_width(ds: &LabeledDataset) -> usize {
    let declared = ds.class_set().iter().max().map_or(0, |&c| c + 1);
    let present = ds.samples().iter().map(|s| s.label + 1).max().unwrap_or(0);
    declared.max(present)
}

/// Fresh network sized for `ds` under the config's hidden layers.
pub fn init_base(ds: &LabeledDataset, cfg: &TrainConfig) -> Result<Mlp> {
    let mut sizes = vec![ds.feature_dim()];
    sizes.extend(&cfg.hidden_sizes);
    sizes.push(output_width(ds));
    Mlp::new(&sizes, seed::derive(cfg.seed, &[tag::INIT]))
}

/// Train a base model with cross-entropy. Labels are output columns.
pub fn train_base(ds: &LabeledDataset, cfg: &TrainConfig) -> Result<Mlp> {
    cfg.validate()?;
    ensure!(
        !ds.is_empty(),
        RejectedInput,
        "cannot train on an empty dataset"
    );
    let mut net = init_base(ds, cfg)?;
    let x = ds.features();
    let labels = ds.labels();
    run_sgd(
        &mut net,
        ds.len(),
        cfg.epochs_base,
        cfg.batch_size,
        &cfg.lr,
        cfg.grad_clip,
        cfg.seed,
        Phase::Base,
        |net, _, idx, _| {
            let batch_labels: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
            Ok(cross_entropy_objective(net, &gather(&x, idx), &batch_labels, None)?.1)
        },
    )?;
    Ok(net)
}

pub(crate) fn gather(x: &Tensor2, idx: &[usize]) -> Tensor2 {
    let mut data = Vec::with_capacity(idx.len() * x.cols());
    for &i in idx {
        data.extend_from_slice(x.row(i));
    }
    Tensor2::from_vec(idx.len(), x.cols(), data).expect("rows of a finite tensor")
}

pub(crate) fn softmax_rows(logits: &Tensor2, temperature: f64) -> Tensor2 {
    let mut out = Tensor2::zeros(logits.rows(), logits.cols());
    for r in 0..logits.rows() {
        out.row_mut(r)
            .copy_from_slice(&softmax_unchecked(logits.row(r), temperature));
    }
    out
}

/// Expanded copy of `m_base` used as the start of every incremental step.
pub fn expand_for_step(m_base: &Mlp, total_classes: usize, cfg: &TrainConfig) -> Result<Mlp> {
    m_base.expand_output_layer(total_classes, seed::derive(cfg.seed, &[tag::EXPAND]))
}

/// Output width after adding `x_new`'s classes to `m_base`.
pub(crate) fn step_width(m_base: &Mlp, x_new: &LabeledDataset) -> usize {
    m_base.classes().max(output_width(x_new))
}

/// Fine-tune an expanded copy of `m_base` on the new data plus the exemplar
/// memory with `(1 - lambda) * CE(new) + lambda * CE(memory)`.
///
/// Each new-data batch is paired with an equally sized slice of an epoch-wise
/// shuffled, cycled memory stream. With an empty memory the loss is plain
/// cross-entropy on the new data.
pub fn traditional_cil_step(
    m_base: &Mlp,
    x_new: &LabeledDataset,
    x_s: &ExemplarMemory,
    cfg: &TrainConfig,
) -> Result<Mlp> {
    cfg.validate()?;
    ensure!(!x_new.is_empty(), RejectedInput, "no new-class data");
    let memory = x_s.data();
    let old: HashSet<usize> = memory
        .class_set()
        .iter()
        .chain(memory.samples().iter().map(|s| &s.label))
        .copied()
        .collect();
    if let Some(c) = x_new
        .class_set()
        .iter()
        .chain(x_new.samples().iter().map(|s| &s.label))
        .find(|c| old.contains(c))
    {
        return Err(crate::Error::Parameter(format!(
            "class {c} is in both the new data and the exemplar memory"
        )));
    }
    let total = cil_width(m_base, x_new, x_s);
    let start = expand_for_step(m_base, total, cfg)?;
    cil_train(start, m_base, x_new, x_s, cfg)
}

/// Total output width of a traditional step.
pub(crate) fn cil_width(m_base: &Mlp, x_new: &LabeledDataset, x_s: &ExemplarMemory) -> usize {
    step_width(m_base, x_new).max(output_width(x_s.data()))
}

/// The fine-tuning loop of [`traditional_cil_step`] from an arbitrary start.
pub(crate) fn cil_train(
    mut net: Mlp,
    m_base: &Mlp,
    x_new: &LabeledDataset,
    x_s: &ExemplarMemory,
    cfg: &TrainConfig,
) -> Result<Mlp> {
    let memory = x_s.data();
    let total = net.classes();
    let lambda = if memory.is_empty() {
        0.0
    } else {
        cfg.lambda.resolve(m_base.classes(), total)
    };

    let xn = x_new.features();
    let yn = x_new.labels();
    let xs = memory.features();
    let ys = memory.labels();
    let teacher = if cfg.cil_distillation {
        Some((
            softmax_rows(&m_base.logits(&xn)?, cfg.temperature),
            softmax_rows(&m_base.logits(&xs)?, cfg.temperature),
        ))
    } else {
        None
    };

    let mut mem_epoch = usize::MAX;
    let mut mem_order = Vec::new();
    let mut cursor = 0;
    run_sgd(
        &mut net,
        x_new.len(),
        cfg.epochs_cil,
        cfg.batch_size,
        &cfg.lr,
        cfg.grad_clip,
        cfg.seed,
        Phase::Incremental,
        |net, epoch, idx, _| {
            if epoch != mem_epoch {
                mem_epoch = epoch;
                mem_order = epoch_order(memory.len(), cfg.seed, Phase::IncrementalMemory, epoch);
                cursor = 0;
            }
            let take = idx.len().min(mem_order.len());
            let mem_idx: Vec<usize> = (0..take)
                .map(|j| mem_order[(cursor + j) % mem_order.len()])
                .collect();
            if !mem_order.is_empty() {
                cursor = (cursor + take) % mem_order.len();
            }
            let new_labels: Vec<usize> = idx.iter().map(|&i| yn[i]).collect();
            let mem_labels: Vec<usize> = mem_idx.iter().map(|&i| ys[i]).collect();
            let probs;
            let distill = match &teacher {
                Some((pn, ps)) => {
                    let mut rows = gather(pn, idx).into_vec();
                    rows.extend(gather(ps, &mem_idx).into_vec());
                    probs = Tensor2::from_vec(idx.len() + mem_idx.len(), pn.cols(), rows)?;
                    Some(CilDistill {
                        teacher_probs: &probs,
                        temperature: cfg.temperature,
                    })
                }
                None => None,
            };
            let (_, grads) = cil_objective(
                net,
                &gather(&xn, idx),
                &new_labels,
                &gather(&xs, &mem_idx),
                &mem_labels,
                lambda,
                distill,
            )?;
            Ok(grads)
        },
    )?;
    Ok(net)
}
