//! Loss compositions and their parameter gradients.
//!
//! Every objective runs a single forward pass over the stacked batch and a
//! single backward pass with a per-row weighted logit gradient, so the
//! composite gradient is exact.

use serde::{Deserialize, Serialize};

use super::TermAssignment;
use crate::error::{ensure, Error, Result};
use crate::nn::{cross_entropy_row, distillation_row, DropoutSpec, Gradients, Mlp, Tensor2};

fn check_labels(labels: &[usize], classes: usize) -> Result<()> {
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::RejectedInput(format!(
            "label {bad} outside class range 0..{classes}"
        )));
    }
    Ok(())
}

fn stack(a: &Tensor2, b: &Tensor2) -> Result<Tensor2> {
    ensure!(
        a.cols() == b.cols() || a.rows() == 0 || b.rows() == 0,
        RejectedInput,
        "cannot stack {} and {} columns",
        a.cols(),
        b.cols()
    );
    let cols = if a.rows() > 0 { a.cols() } else { b.cols() };
    let mut data = a.as_slice().to_vec();
    data.extend_from_slice(b.as_slice());
    Tensor2::from_vec(a.rows() + b.rows(), cols, data)
}

/// Mean cross-entropy with optional dropout.
pub fn cross_entropy_objective(
    net: &Mlp,
    x: &Tensor2,
    labels: &[usize],
    dropout: Option<&DropoutSpec>,
) -> Result<(f64, Gradients)> {
    let (logits, cache) = net.forward(x, dropout)?;
    let (loss, grad) = crate::nn::cross_entropy(&logits, labels)?;
    Ok((loss, net.backward(&cache, &grad)?))
}

/// Value of the two-term class-incremental loss and its parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CilLoss {
    pub total: f64,
    /// Mean cross-entropy over the new-class batch.
    pub new_term: f64,
    /// Mean cross-entropy over the exemplar batch.
    pub exemplar_term: f64,
    /// Mean distillation towards the base model (0 when disabled).
    pub distill_term: f64,
}

/// Soft targets for the optional distillation term of the traditional step.
pub struct CilDistill<'a> {
    /// Base-model probabilities for the stacked (new, exemplar) rows.
    pub teacher_probs: &'a Tensor2,
    pub temperature: f64,
}

/// `(1 - lambda) * CE(new) + lambda * (CE(exemplar) [+ KD(all)])`.
///
/// Either batch may be empty; an empty group contributes 0.
pub fn cil_objective(
    net: &Mlp,
    new_x: &Tensor2,
    new_labels: &[usize],
    exemplar_x: &Tensor2,
    exemplar_labels: &[usize],
    lambda: f64,
    distill: Option<CilDistill<'_>>,
) -> Result<(CilLoss, Gradients)> {
    ensure!(
        new_x.rows() == new_labels.len() && exemplar_x.rows() == exemplar_labels.len(),
        RejectedInput,
        "labels do not match batch rows"
    );
    ensure!(
        new_x.rows() + exemplar_x.rows() > 0,
        RejectedInput,
        "empty class-incremental batch"
    );
    check_labels(new_labels, net.classes())?;
    check_labels(exemplar_labels, net.classes())?;
    let x = stack(new_x, exemplar_x)?;
    let (logits, cache) = net.forward(&x, None)?;
    let n_new = new_x.rows();
    let n_ex = exemplar_x.rows();
    let mut grad = Tensor2::zeros(logits.rows(), logits.cols());
    let mut row_grad = vec![0.0; logits.cols()];

    let mut new_term = 0.0;
    for (r, &label) in new_labels.iter().enumerate() {
        new_term += cross_entropy_row(logits.row(r), label, &mut row_grad);
        let w = (1.0 - lambda) / n_new as f64;
        grad.row_mut(r)
            .iter_mut()
            .zip(&row_grad)
            .for_each(|(g, v)| *g += w * v);
    }
    let mut exemplar_term = 0.0;
    for (r, &label) in exemplar_labels.iter().enumerate() {
        exemplar_term += cross_entropy_row(logits.row(n_new + r), label, &mut row_grad);
        let w = lambda / n_ex as f64;
        grad.row_mut(n_new + r)
            .iter_mut()
            .zip(&row_grad)
            .for_each(|(g, v)| *g += w * v);
    }
    let mut distill_term = 0.0;
    if let Some(kd) = &distill {
        ensure!(
            kd.teacher_probs.rows() == logits.rows() && kd.teacher_probs.cols() <= logits.cols(),
            Contract,
            "teacher probabilities do not cover the stacked batch"
        );
        let n = logits.rows() as f64;
        for r in 0..logits.rows() {
            distill_term += distillation_row(
                logits.row(r),
                kd.teacher_probs.row(r),
                kd.temperature,
                &mut row_grad,
            );
            let w = lambda / n;
            grad.row_mut(r)
                .iter_mut()
                .zip(&row_grad)
                .for_each(|(g, v)| *g += w * v);
        }
        distill_term /= n;
    }
    new_term = if n_new > 0 {
        new_term / n_new as f64
    } else {
        0.0
    };
    exemplar_term = if n_ex > 0 {
        exemplar_term / n_ex as f64
    } else {
        0.0
    };
    let loss = CilLoss {
        total: (1.0 - lambda) * new_term + lambda * (exemplar_term + distill_term),
        new_term,
        exemplar_term,
        distill_term,
    };
    Ok((loss, net.backward(&cache, &grad)?))
}

/// Value of the balanced distillation loss and its parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalancedLoss {
    pub total: f64,
    /// Mean cross-entropy over the cross-entropy group (0 if empty).
    pub cross_entropy_term: f64,
    /// Mean distillation over the distillation group (0 if empty).
    pub distill_term: f64,
}

/// Balanced distillation on logits.
///
/// With the default assignment, rows flagged `in_error` get cross-entropy and
/// the others get temperature-scaled distillation towards `teacher_probs`:
/// `L = lambda * mean_{not E} L_r + mean_{E} L_CE`. Teacher rows of samples in
/// the cross-entropy group are ignored.
pub fn balanced_distillation_loss(
    logits: &Tensor2,
    labels: &[usize],
    in_error: &[bool],
    teacher_probs: &Tensor2,
    lambda: f64,
    temperature: f64,
    assignment: TermAssignment,
) -> Result<(BalancedLoss, Tensor2)> {
    ensure!(
        labels.len() == logits.rows() && in_error.len() == logits.rows(),
        RejectedInput,
        "labels/error flags do not match {} logit rows",
        logits.rows()
    );
    if teacher_probs.rows() != logits.rows() {
        return Err(Error::Contract(format!(
            "teacher probabilities for {} rows, batch has {}",
            teacher_probs.rows(),
            logits.rows()
        )));
    }
    ensure!(
        teacher_probs.cols() <= logits.cols(),
        Contract,
        "teacher has more classes ({}) than the student ({})",
        teacher_probs.cols(),
        logits.cols()
    );
    ensure!(
        temperature.is_finite() && temperature > 0.0,
        Parameter,
        "temperature must be positive"
    );
    check_labels(labels, logits.cols())?;

    let uses_ce = |r: usize| match assignment {
        TermAssignment::ErrorsCrossEntropy => in_error[r],
        TermAssignment::ErrorsDistillation => !in_error[r],
    };
    let n_ce = (0..logits.rows()).filter(|&r| uses_ce(r)).count();
    let n_kd = logits.rows() - n_ce;
    let mut grad = Tensor2::zeros(logits.rows(), logits.cols());
    let (mut ce_sum, mut kd_sum) = (0.0, 0.0);
    for (r, &label) in labels.iter().enumerate() {
        let (w, row) = if uses_ce(r) {
            let mut g = vec![0.0; logits.cols()];
            ce_sum += cross_entropy_row(logits.row(r), label, &mut g);
            (1.0 / n_ce as f64, g)
        } else {
            let mut g = vec![0.0; logits.cols()];
            kd_sum += distillation_row(logits.row(r), teacher_probs.row(r), temperature, &mut g);
            (lambda / n_kd as f64, g)
        };
        grad.row_mut(r)
            .iter_mut()
            .zip(&row)
            .for_each(|(g, v)| *g = w * v);
    }
    let cross_entropy_term = if n_ce > 0 { ce_sum / n_ce as f64 } else { 0.0 };
    let distill_term = if n_kd > 0 { kd_sum / n_kd as f64 } else { 0.0 };
    Ok((
        BalancedLoss {
            total: lambda * distill_term + cross_entropy_term,
            cross_entropy_term,
            distill_term,
        },
        grad,
    ))
}

/// Balanced distillation loss and parameter gradients for one batch.
#[allow(clippy::too_many_arguments)]
pub fn balanced_objective(
    net: &Mlp,
    x: &Tensor2,
    labels: &[usize],
    in_error: &[bool],
    teacher_probs: &Tensor2,
    lambda: f64,
    temperature: f64,
    assignment: TermAssignment,
    dropout: Option<&DropoutSpec>,
) -> Result<(BalancedLoss, Gradients)> {
    let (logits, cache) = net.forward(x, dropout)?;
    let (loss, grad) = balanced_distillation_loss(
        &logits,
        labels,
        in_error,
        teacher_probs,
        lambda,
        temperature,
        assignment,
    )?;
    Ok((loss, net.backward(&cache, &grad)?))
}
