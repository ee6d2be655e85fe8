//! Neuron coverage and coverage-verified exemplar sampling.
//!
//! Only hidden units count as neurons. For every input, each hidden layer's
//! activations are min-max scaled to `[0, 1]` (a layer with constant output
//! scales to all zeros). A neuron is covered when its scaled activation is
//! strictly above the threshold for some input (existential) or for every
//! input (universal).

use serde::{Deserialize, Serialize};

use crate::data::{random_exemplar_sample, ExemplarMemory, LabeledDataset};
use crate::error::{ensure, Result};
use crate::nn::Mlp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantifier {
    Existential,
    Universal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoverageConfig {
    pub activation_threshold: f64,
    pub coverage_threshold: f64,
    pub quantifier: Quantifier,
    pub max_resample_attempts: usize,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self {
            activation_threshold: 0.99,
            coverage_threshold: 0.95,
            quantifier: Quantifier::Existential,
            max_resample_attempts: 20,
        }
    }
}

impl CoverageConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            (0.0..=1.0).contains(&self.activation_threshold),
            Parameter,
            "activation threshold must be in [0, 1], got {}",
            self.activation_threshold
        );
        ensure!(
            (0.0..=1.0).contains(&self.coverage_threshold),
            Parameter,
            "coverage threshold must be in [0, 1], got {}",
            self.coverage_threshold
        );
        ensure!(
            self.max_resample_attempts >= 1,
            Parameter,
            "max_resample_attempts must be at least 1"
        );
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub coverage: f64,
    pub covered_neuron_count: usize,
    pub total_neuron_count: usize,
    pub attempts_used: usize,
    pub passed: bool,
}

/// Per-input, per-layer min-max scaled hidden activations, flattened per input
/// in layer order.
fn scaled_activations(net: &Mlp, ds: &LabeledDataset) -> Result<Vec<Vec<f64>>> {
    let (_, cache) = net.forward(&ds.features(), None)?;
    let mut per_input = vec![Vec::new(); ds.len()];
    for layer in cache.hidden_activations() {
        for (r, out) in per_input.iter_mut().enumerate() {
            let row = layer.row(r);
            let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let span = hi - lo;
            out.extend(
                row.iter()
                    .map(|&a| if span > 0.0 { (a - lo) / span } else { 0.0 }),
            );
        }
    }
    Ok(per_input)
}

pub fn neuron_coverage(
    net: &Mlp,
    ds: &LabeledDataset,
    cfg: &CoverageConfig,
) -> Result<CoverageReport> {
    cfg.validate()?;
    ensure!(!ds.is_empty(), Parameter, "coverage of an empty dataset");
    let total: usize = net.hidden_sizes().iter().sum();
    ensure!(total > 0, Parameter, "network has no hidden neurons");
    let scaled = scaled_activations(net, ds)?;
    let t = cfg.activation_threshold;
    let covered = (0..total)
        .filter(|&n| match cfg.quantifier {
            Quantifier::Existential => scaled.iter().any(|a| a[n] > t),
            Quantifier::Universal => scaled.iter().all(|a| a[n] > t),
        })
        .count();
    let coverage = covered as f64 / total as f64;
    Ok(CoverageReport {
        coverage,
        covered_neuron_count: covered,
        total_neuron_count: total,
        attempts_used: 1,
        passed: coverage > cfg.coverage_threshold,
    })
}

/// Draw exemplars with `seed, seed + 1, ...` until coverage under `net_base`
/// exceeds the coverage threshold. When every attempt fails, the draw with
/// the highest coverage (earliest on ties) is returned with `passed = false`.
pub fn verified_sample(
    net_base: &Mlp,
    old_pool: &LabeledDataset,
    capacity: usize,
    cfg: &CoverageConfig,
    seed: u64,
) -> Result<(ExemplarMemory, CoverageReport)> {
    cfg.validate()?;
    let mut best: Option<(ExemplarMemory, CoverageReport)> = None;
    for attempt in 0..cfg.max_resample_attempts {
        let memory = random_exemplar_sample(old_pool, capacity, seed.wrapping_add(attempt as u64))?;
        let mut report = neuron_coverage(net_base, memory.data(), cfg)?;
        report.attempts_used = attempt + 1;
        if report.passed {
            return Ok((memory, report));
        }
        if best
            .as_ref()
            .is_none_or(|(_, b)| report.coverage > b.coverage)
        {
            best = Some((memory, report));
        }
    }
    let (memory, mut report) = best.expect("at least one attempt");
    report.attempts_used = cfg.max_resample_attempts;
    Ok((memory, report))
}
