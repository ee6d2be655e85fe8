//! Dataset refinement: per-sample output divergence between the base and the
//! incremental model, and the cutoff split into high- and low-importance sets.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{ensure, Error, Result};
use crate::nn::{softmax_unchecked, Mlp};

const SUM_TOLERANCE: f64 = 1e-6;
const KL_SMOOTHING: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceMetric {
    #[default]
    JensenShannon,
    KullbackLeibler,
    Hellinger,
}

impl DivergenceMetric {
    pub const ALL: [DivergenceMetric; 3] = [
        DivergenceMetric::JensenShannon,
        DivergenceMetric::KullbackLeibler,
        DivergenceMetric::Hellinger,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DivergenceMetric::JensenShannon => "jensen_shannon",
            DivergenceMetric::KullbackLeibler => "kullback_leibler",
            DivergenceMetric::Hellinger => "hellinger",
        }
    }

    /// KL is smoothed here so a zero in `q` never aborts a scoring pass.
    pub fn compute(self, p: &[f64], q: &[f64]) -> Result<f64> {
        match self {
            DivergenceMetric::JensenShannon => js_divergence(p, q),
            DivergenceMetric::KullbackLeibler => kl_divergence_smoothed(p, q),
            DivergenceMetric::Hellinger => hellinger_distance(p, q),
        }
    }
}

fn check_distribution(p: &[f64], name: &str) -> Result<()> {
    ensure!(!p.is_empty(), Parameter, "{name} is empty");
    ensure!(
        p.iter().all(|&v| v.is_finite() && v >= 0.0),
        Parameter,
        "{name} has negative or non-finite entries"
    );
    let sum: f64 = p.iter().sum();
    ensure!(
        (sum - 1.0).abs() <= SUM_TOLERANCE,
        Parameter,
        "{name} sums to {sum}, not 1"
    );
    Ok(())
}

fn check_pair(p: &[f64], q: &[f64]) -> Result<()> {
    ensure!(
        p.len() == q.len(),
        Parameter,
        "distribution lengths differ: {} vs {}",
        p.len(),
        q.len()
    );
    check_distribution(p, "P")?;
    check_distribution(q, "Q")
}

/// `sum p log(p / q)` with `0 log 0 = 0`; caller guarantees `q > 0` where `p > 0`.
fn kl_terms(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum()
}

/// Jensen-Shannon divergence in nats; bounded by `ln 2`.
pub fn js_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    let js = 0.5 * kl_terms(p, &m) + 0.5 * kl_terms(q, &m);
    Ok(js.clamp(0.0, std::f64::consts::LN_2))
}

/// `KL(P || Q)`. Fails when `Q` is zero somewhere `P` is not.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    if let Some(i) = p.iter().zip(q).position(|(&pi, &qi)| pi > 0.0 && qi == 0.0) {
        return Err(Error::Parameter(format!(
            "Q[{i}] = 0 where P[{i}] > 0; KL is infinite"
        )));
    }
    Ok(kl_terms(p, q).max(0.0))
}

/// `KL(P || Q)` after adding 1e-12 to both distributions and renormalizing,
/// applied only when a support violation exists.
pub fn kl_divergence_smoothed(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    let violates = p.iter().zip(q).any(|(&pi, &qi)| pi > 0.0 && qi == 0.0);
    if !violates {
        return Ok(kl_terms(p, q).max(0.0));
    }
    let smooth = |d: &[f64]| {
        let z: f64 = d.iter().map(|v| v + KL_SMOOTHING).sum();
        d.iter().map(|v| (v + KL_SMOOTHING) / z).collect::<Vec<_>>()
    };
    Ok(kl_terms(&smooth(p), &smooth(q)).max(0.0))
}

/// Hellinger distance `sqrt(1/2 * sum (sqrt p - sqrt q)^2)`, in `[0, 1]`.
pub fn hellinger_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    let s: f64 = p
        .iter()
        .zip(q)
        .map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2))
        .sum();
    Ok((0.5 * s).sqrt().clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceRecord {
    pub sample_id: u64,
    pub divergence: f64,
}

/// Score every sample by the divergence between the base model's softened
/// prediction and the new model's prediction restricted to the base classes.
pub fn differential_analysis(
    m_base: &Mlp,
    m_new: &Mlp,
    ds: &LabeledDataset,
    metric: DivergenceMetric,
    temperature: f64,
) -> Result<Vec<DivergenceRecord>> {
    ensure!(
        !ds.is_empty(),
        Parameter,
        "differential analysis of an empty dataset"
    );
    ensure!(
        temperature.is_finite() && temperature > 0.0,
        Parameter,
        "temperature must be positive, got {temperature}"
    );
    ensure!(
        m_base.classes() <= m_new.classes(),
        RejectedInput,
        "base model has {} classes, new model only {}",
        m_base.classes(),
        m_new.classes()
    );
    let x = ds.features();
    let base_logits = m_base.logits(&x)?;
    let new_logits = m_new.logits(&x)?;
    let k = m_base.classes();
    ds.samples()
        .iter()
        .enumerate()
        .map(|(r, s)| {
            let p = softmax_unchecked(base_logits.row(r), temperature);
            let q = softmax_unchecked(&new_logits.row(r)[..k], temperature);
            Ok(DivergenceRecord {
                sample_id: s.id,
                divergence: metric.compute(&p, &q)?,
            })
        })
        .collect()
}

/// High/low importance partition. Both halves keep the scored dataset's order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedSplit {
    pub high: LabeledDataset,
    pub low: LabeledDataset,
    pub cutoff_index: usize,
    pub eta: f64,
}

/// `floor(eta * n)`, tolerant to binary representation error in `eta`.
pub fn cutoff_index(eta: f64, n: usize) -> usize {
    ((eta * n as f64) + 1e-9).floor() as usize
}

/// Descending by divergence, ties by ascending sample id.
pub fn rank_records(records: &[DivergenceRecord]) -> Vec<DivergenceRecord> {
    let mut sorted = records.to_vec();
    sorted.sort_by(|a, b| {
        b.divergence
            .partial_cmp(&a.divergence)
            .unwrap_or(Ordering::Equal)
            .then(a.sample_id.cmp(&b.sample_id))
    });
    sorted
}

pub fn select_samples(
    records: &[DivergenceRecord],
    ds: &LabeledDataset,
    eta: f64,
) -> Result<RefinedSplit> {
    ensure!(
        (0.0..=1.0).contains(&eta),
        Parameter,
        "eta must be in [0, 1], got {eta}"
    );
    let ids: HashSet<u64> = ds.ids().into_iter().collect();
    let scored: HashSet<u64> = records.iter().map(|r| r.sample_id).collect();
    if records.len() != ds.len() || scored != ids {
        return Err(Error::Contract(format!(
            "{} divergence records do not cover the {} samples one-to-one",
            records.len(),
            ds.len()
        )));
    }
    ensure!(
        records
            .iter()
            .all(|r| r.divergence.is_finite() && r.divergence >= 0.0),
        Contract,
        "divergence records must be finite and non-negative"
    );
    let cut = cutoff_index(eta, records.len());
    let high_ids: HashSet<u64> = rank_records(records)[..cut]
        .iter()
        .map(|r| r.sample_id)
        .collect();
    Ok(RefinedSplit {
        high: ds.filter_ids(|id| high_ids.contains(&id)),
        low: ds.filter_ids(|id| !high_ids.contains(&id)),
        cutoff_index: cut,
        eta,
    })
}

/// Export scores as `sample_id,divergence`.
pub fn write_divergence_csv<W: Write>(records: &[DivergenceRecord], out: W) -> std::io::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["sample_id", "divergence"])?;
    for r in records {
        writer.write_record([r.sample_id.to_string(), r.divergence.to_string()])?;
    }
    writer.flush()
}
