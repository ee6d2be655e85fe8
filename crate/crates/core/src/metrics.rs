//! Utility and class-wise fairness metrics.
//!
//! CWV is the population variance of per-class accuracies and MCD the spread
//! between the best and worst class. Both are computed over the classes that
//! have test samples; classes the model knows but the test set lacks are
//! listed in [`ClassAccuracies::excluded`] rather than counted as zero.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::coverage::CoverageReport;
use crate::data::{ClassId, LabeledDataset};
use crate::error::{ensure, Error, Result};
use crate::nn::Mlp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracies {
    pub accuracy: BTreeMap<ClassId, f64>,
    pub test_counts: BTreeMap<ClassId, usize>,
    /// Known classes without test samples.
    pub excluded: Vec<ClassId>,
}

impl ClassAccuracies {
    /// Wrap bare accuracy values (class ids 0..n, unknown counts).
    pub fn from_values(values: &[f64]) -> Self {
        Self {
            accuracy: values.iter().copied().enumerate().collect(),
            test_counts: BTreeMap::new(),
            excluded: Vec::new(),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.accuracy.values().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.accuracy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accuracy.is_empty()
    }
}

/// Per-class tallies from predicted and true labels over `n_classes` columns.
pub fn class_accuracies_from_predictions(
    predictions: &[ClassId],
    labels: &[ClassId],
    n_classes: usize,
) -> Result<ClassAccuracies> {
    ensure!(
        predictions.len() == labels.len(),
        RejectedInput,
        "{} predictions for {} labels",
        predictions.len(),
        labels.len()
    );
    let mut correct = vec![0usize; n_classes];
    let mut total = vec![0usize; n_classes];
    for (&p, &y) in predictions.iter().zip(labels) {
        ensure!(
            y < n_classes,
            RejectedInput,
            "test label {y} unknown to a {n_classes}-class model"
        );
        total[y] += 1;
        if p == y {
            correct[y] += 1;
        }
    }
    let mut out = ClassAccuracies {
        accuracy: BTreeMap::new(),
        test_counts: BTreeMap::new(),
        excluded: Vec::new(),
    };
    for c in 0..n_classes {
        if total[c] == 0 {
            out.excluded.push(c);
        } else {
            out.accuracy.insert(c, correct[c] as f64 / total[c] as f64);
            out.test_counts.insert(c, total[c]);
        }
    }
    Ok(out)
}

/// Accuracy of each class. Model output column `c` is class id `c`.
pub fn per_class_accuracy(net: &Mlp, test: &LabeledDataset) -> Result<ClassAccuracies> {
    let predictions = net.predict(&test.features())?;
    class_accuracies_from_predictions(&predictions, &test.labels(), net.classes())
}

fn nonempty(acc: &ClassAccuracies) -> Result<()> {
    ensure!(
        !acc.is_empty(),
        Parameter,
        "no class accuracies to summarize"
    );
    Ok(())
}

/// Class-wise variance, divided by the number of classes.
pub fn cwv(acc: &ClassAccuracies) -> Result<f64> {
    nonempty(acc)?;
    let n = acc.len() as f64;
    let mut mean = acc.accuracy.values().sum::<f64>() / n;
    mean += acc.accuracy.values().map(|a| a - mean).sum::<f64>() / n;
    Ok(acc
        .accuracy
        .values()
        .map(|a| (a - mean).powi(2))
        .sum::<f64>()
        / n)
}

/// Maximum class-wise discrepancy.
pub fn mcd(acc: &ClassAccuracies) -> Result<f64> {
    nonempty(acc)?;
    let (lo, hi) = acc
        .accuracy
        .values()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &a| {
            (lo.min(a), hi.max(a))
        });
    Ok(hi - lo)
}

/// Unweighted mean precision and recall over the classes present in `labels`.
/// A class never predicted contributes precision 0.
pub fn macro_precision_recall_from_predictions(
    predictions: &[ClassId],
    labels: &[ClassId],
    n_classes: usize,
) -> Result<(f64, f64)> {
    let acc = class_accuracies_from_predictions(predictions, labels, n_classes)?;
    nonempty(&acc)?;
    let mut predicted = vec![0usize; n_classes];
    let mut true_pos = vec![0usize; n_classes];
    for (&p, &y) in predictions.iter().zip(labels) {
        if p < n_classes {
            predicted[p] += 1;
        }
        if p == y {
            true_pos[y] += 1;
        }
    }
    let classes: Vec<ClassId> = acc.accuracy.keys().copied().collect();
    let k = classes.len() as f64;
    let precision = classes
        .iter()
        .map(|&c| match predicted[c] {
            0 => 0.0,
            n => true_pos[c] as f64 / n as f64,
        })
        .sum::<f64>()
        / k;
    let recall = acc.accuracy.values().sum::<f64>() / k;
    Ok((precision, recall))
}

pub fn macro_precision_recall(net: &Mlp, test: &LabeledDataset) -> Result<(f64, f64)> {
    let predictions = net.predict(&test.features())?;
    macro_precision_recall_from_predictions(&predictions, &test.labels(), net.classes())
}

/// Fairness bug: the metric rose by strictly more than `gamma`.
pub fn fairness_bug(f_new: f64, f_base: f64, gamma: f64) -> bool {
    f_new - f_base > gamma
}

pub fn pearson_correlation(xs: &[f64], ys: &[f64]) -> Result<f64> {
    ensure!(
        xs.len() == ys.len(),
        RejectedInput,
        "series lengths differ: {} vs {}",
        xs.len(),
        ys.len()
    );
    ensure!(xs.len() >= 2, RejectedInput, "need at least two points");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "one of the series is constant".into(),
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Metrics for one incremental step, evaluated on the seen-class test subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: usize,
    pub acc: f64,
    pub precision: f64,
    pub recall: f64,
    pub cwv: f64,
    pub mcd: f64,
    pub coverage: CoverageReport,
    pub per_class: ClassAccuracies,
}

pub const STEP_CSV_HEADER: [&str; 7] = [
    "step",
    "acc",
    "precision",
    "recall",
    "cwv",
    "mcd",
    "coverage",
];

impl StepReport {
    pub fn evaluate(
        step: usize,
        net: &Mlp,
        test: &LabeledDataset,
        coverage: CoverageReport,
    ) -> Result<Self> {
        ensure!(!test.is_empty(), Parameter, "empty test set at step {step}");
        let predictions = net.predict(&test.features())?;
        let labels = test.labels();
        let per_class = class_accuracies_from_predictions(&predictions, &labels, net.classes())?;
        let (precision, recall) =
            macro_precision_recall_from_predictions(&predictions, &labels, net.classes())?;
        let correct = predictions
            .iter()
            .zip(&labels)
            .filter(|(p, y)| p == y)
            .count();
        Ok(Self {
            step,
            acc: correct as f64 / labels.len() as f64,
            precision,
            recall,
            cwv: cwv(&per_class)?,
            mcd: mcd(&per_class)?,
            coverage,
            per_class,
        })
    }

    pub fn csv_row(&self) -> [String; 7] {
        [
            self.step.to_string(),
            self.acc.to_string(),
            self.precision.to_string(),
            self.recall.to_string(),
            self.cwv.to_string(),
            self.mcd.to_string(),
            self.coverage.coverage.to_string(),
        ]
    }
}

/// One header line plus one row per report.
pub fn write_step_csv<W: Write>(reports: &[StepReport], out: W) -> std::io::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(STEP_CSV_HEADER)?;
    for r in reports {
        writer.write_record(r.csv_row())?;
    }
    writer.flush()
}
