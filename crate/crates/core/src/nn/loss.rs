//! Softmax, cross-entropy and temperature-scaled distillation.

use super::Tensor2;
use crate::error::{ensure, Error, Result};

fn check_temperature(temperature: f64) -> Result<()> {
    ensure!(
        temperature.is_finite() && temperature > 0.0,
        Parameter,
        "temperature must be positive, got {temperature}"
    );
    Ok(())
}

/// Softmax of `logits / temperature`, computed with max subtraction.
pub fn softmax(logits: &[f64], temperature: f64) -> Result<Vec<f64>> {
    check_temperature(temperature)?;
    ensure!(
        !logits.is_empty(),
        RejectedInput,
        "softmax of an empty vector"
    );
    Ok(softmax_unchecked(logits, temperature))
}

pub(crate) fn softmax_unchecked(logits: &[f64], temperature: f64) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits
        .iter()
        .map(|&z| ((z - max) / temperature).exp())
        .collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= sum);
    out
}

/// `log softmax(logits / T)`.
fn log_softmax(logits: &[f64], temperature: f64) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = logits.iter().map(|&z| (z - max) / temperature).collect();
    let lse = scaled.iter().map(|s| s.exp()).sum::<f64>().ln();
    scaled.into_iter().map(|s| s - lse).collect()
}

/// Per-row cross-entropy. Writes `softmax - onehot` (unscaled) into `grad`.
pub(crate) fn cross_entropy_row(logits: &[f64], label: usize, grad: &mut [f64]) -> f64 {
    let logp = log_softmax(logits, 1.0);
    for (g, lp) in grad.iter_mut().zip(&logp) {
        *g = lp.exp();
    }
    grad[label] -= 1.0;
    -logp[label]
}

/// Per-row `T^2 * KL(teacher || softmax(student[..k] / T))` where `k` is the
/// teacher width. Writes the unscaled gradient into `grad[..k]` and zeros the rest.
pub(crate) fn distillation_row(
    student: &[f64],
    teacher: &[f64],
    temperature: f64,
    grad: &mut [f64],
) -> f64 {
    let k = teacher.len();
    let logq = log_softmax(&student[..k], temperature);
    let mut kl = 0.0;
    let mut mass = 0.0;
    for (&p, &lq) in teacher.iter().zip(&logq) {
        if p > 0.0 {
            kl += p * (p.ln() - lq);
        }
        mass += p;
    }
    // d/ds_j [-T^2 sum_i p_i log q_i] = T (q_j * sum(p) - p_j)
    for j in 0..k {
        grad[j] = temperature * (logq[j].exp() * mass - teacher[j]);
    }
    grad[k..].iter_mut().for_each(|g| *g = 0.0);
    temperature * temperature * kl
}

/// Mean cross-entropy and its gradient with respect to the logits.
pub fn cross_entropy(logits: &Tensor2, labels: &[usize]) -> Result<(f64, Tensor2)> {
    ensure!(
        labels.len() == logits.rows(),
        RejectedInput,
        "{} labels for {} logit rows",
        labels.len(),
        logits.rows()
    );
    ensure!(
        logits.rows() > 0,
        RejectedInput,
        "cross-entropy of an empty batch"
    );
    if let Some(&bad) = labels.iter().find(|&&y| y >= logits.cols()) {
        return Err(Error::RejectedInput(format!(
            "label {bad} outside class range 0..{}",
            logits.cols()
        )));
    }
    let n = logits.rows() as f64;
    let mut grad = Tensor2::zeros(logits.rows(), logits.cols());
    let mut loss = 0.0;
    for (r, &y) in labels.iter().enumerate() {
        loss += cross_entropy_row(logits.row(r), y, grad.row_mut(r));
    }
    grad.scale(1.0 / n);
    Ok((loss / n, grad))
}

/// Distillation loss over the teacher's leading class columns.
///
/// The student's softened distribution is renormalized over the shared range;
/// columns beyond it receive zero gradient.
pub fn distillation_loss(
    student_logits: &Tensor2,
    teacher_probs: &Tensor2,
    temperature: f64,
) -> Result<(f64, Tensor2)> {
    check_temperature(temperature)?;
    ensure!(
        student_logits.rows() == teacher_probs.rows(),
        RejectedInput,
        "student batch {} vs teacher batch {}",
        student_logits.rows(),
        teacher_probs.rows()
    );
    ensure!(
        teacher_probs.cols() >= 1 && teacher_probs.cols() <= student_logits.cols(),
        RejectedInput,
        "teacher has {} classes, student only {}",
        teacher_probs.cols(),
        student_logits.cols()
    );
    ensure!(
        student_logits.rows() > 0,
        RejectedInput,
        "distillation of an empty batch"
    );
    ensure!(
        teacher_probs.as_slice().iter().all(|&p| p >= 0.0),
        RejectedInput,
        "teacher probabilities must be non-negative"
    );
    let n = student_logits.rows() as f64;
    let mut grad = Tensor2::zeros(student_logits.rows(), student_logits.cols());
    let mut loss = 0.0;
    for r in 0..student_logits.rows() {
        loss += distillation_row(
            student_logits.row(r),
            teacher_probs.row(r),
            temperature,
            grad.row_mut(r),
        );
    }
    grad.scale(1.0 / n);
    Ok((loss / n, grad))
}
